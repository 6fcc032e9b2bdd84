#include "chaoskit/io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace chaoskit::io {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    return out;
}

}  // namespace

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    auto out = open_out(path);
    out << "t,x,y,z\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const Vec3& s = traj.states[i];
        out << fmt(traj.times[i]) << ',' << fmt(s.x) << ',' << fmt(s.y) << ',' << fmt(s.z) << '\n';
    }
}

void write_diagram_csv(const std::string& path, const BifurcationDiagram& diagram) {
    auto out = open_out(path);
    out << "alpha,x\n";
    for (const AlphaSlice& s : diagram.slices)
        for (double x : s.xs) out << fmt(s.alpha) << ',' << fmt(x) << '\n';
}

void write_diagram_flags_json(const std::string& path, const BifurcationDiagram& diagram) {
    json j;
    j["crisis_alphas"] = diagram.crisis_alphas;
    json slices = json::array();
    for (const AlphaSlice& s : diagram.slices) {
        json e;
        e["alpha"] = s.alpha;
        e["period"] = s.period;
        e["extent"] = s.extent;
        e["diverged"] = s.diverged;
        e["insufficient"] = s.insufficient;
        slices.push_back(e);
    }
    j["slices"] = slices;
    open_out(path) << j.dump(2) << '\n';
}

void write_return_map_csv(const std::string& path, const ReturnMap& rm) {
    auto out = open_out(path);
    out << "x_n,x_next,branch_id\n";
    for (std::size_t b = 0; b < rm.branches.size(); ++b) {
        const Branch& br = rm.branches[b];
        for (std::size_t i = br.first; i < br.first + br.count; ++i)
            out << fmt(rm.points[i].x) << ',' << fmt(rm.points[i].x_next) << ',' << b << '\n';
    }
}

void write_return_map_summary_json(const std::string& path, const ReturnMap& rm,
                                   const Alphabet* alphabet) {
    json j;
    j["alpha"] = rm.alpha;
    j["variant"] = to_string(rm.variant);
    j["n_branches"] = rm.branches.size();
    j["critical_points"] = rm.critical_points;
    json branches = json::array();
    for (std::size_t b = 0; b < rm.branches.size(); ++b) {
        const Branch& br = rm.branches[b];
        json e;
        e["x_lo"] = br.x_lo;
        e["x_hi"] = br.x_hi;
        e["points"] = br.count;
        e["slope"] = br.slope_sign;
        if (alphabet && b < alphabet->symbols.size()) {
            e["symbol"] = alphabet->symbols[b].symbol;
            e["torsion_measured"] = alphabet->symbols[b].measured;
        }
        branches.push_back(e);
    }
    j["branches"] = branches;
    open_out(path) << j.dump(2) << '\n';
}

void write_orbit_json(const std::string& path, const PeriodicOrbit& orbit) {
    json j;
    j["alpha"] = orbit.alpha;
    j["variant"] = to_string(orbit.variant);
    j["period"] = orbit.period;
    j["period_time"] = orbit.period_time;
    j["itinerary"] = orbit.name();
    j["closure_residual"] = orbit.residual;
    json pts = json::array();
    for (const Crossing& c : orbit.section_points) pts.push_back({c.t, c.x, c.z});
    j["section_points"] = pts;
    open_out(path) << j.dump(2) << '\n';
}

void write_orbit_curve_csv(const std::string& path, const PeriodicOrbit& orbit) {
    auto out = open_out(path);
    out << "t,x,y,z\n";
    for (std::size_t i = 0; i < orbit.curve.size(); ++i) {
        const Vec3& s = orbit.curve[i];
        out << fmt(orbit.curve_times[i]) << ',' << fmt(s.x) << ',' << fmt(s.y) << ',' << fmt(s.z)
            << '\n';
    }
}

void write_link_report_json(const std::string& path, double alpha, const Template& tmpl,
                            const TemplateReport& report) {
    json j;
    j["alpha"] = alpha;
    json t;
    t["symbols"] = tmpl.symbols;
    t["matrix"] = tmpl.matrix;
    t["global_torsion"] = tmpl.global_torsion;
    j["template"] = t;
    json pairs = json::array();
    for (const PairCheck& p : report.pairs) {
        json e;
        e["a"] = p.a;
        e["b"] = p.b;
        e["counted"] = p.counted;
        e["predicted"] = p.predicted;
        e["agree"] = p.agree;
        pairs.push_back(e);
    }
    j["pairs"] = pairs;
    j["pass"] = report.pass;
    j["notes"] = report.notes;
    open_out(path) << j.dump(2) << '\n';
}

void write_crossing_records_csv(const std::string& path, const LinkCount& count) {
    auto out = open_out(path);
    out << "u,v,sign,over_orbit,over_segment,under_segment\n";
    for (const CrossingRecord& r : count.records)
        out << fmt(r.u) << ',' << fmt(r.v) << ',' << r.sign << ',' << r.over_orbit << ','
            << r.over_segment << ',' << r.under_segment << '\n';
}

void write_grid(const std::string& path, const ScalarGrid& grid, double alpha,
                Nonlinearity variant) {
    json h;
    h["box"] = {{"lo", {grid.spec.lo.x, grid.spec.lo.y, grid.spec.lo.z}},
                {"hi", {grid.spec.hi.x, grid.spec.hi.y, grid.spec.hi.z}}};
    h["resolution"] = grid.spec.resolution;
    h["field"] = to_string(grid.field);
    h["alpha"] = alpha;
    h["variant"] = to_string(variant);
    h["ordering"] = "x-fastest";
    auto out = open_out(path);
    out << h.dump() << '\n';
    for (double v : grid.values) out << fmt(v) << '\n';
}

void write_bistability_json(const std::string& path, const BistabilityReport& report) {
    json j;
    json classes = json::array();
    for (const AttractorClass& c : report.classes) {
        json e;
        e["chaotic"] = c.chaotic;
        e["period"] = c.period;
        e["x_lo"] = c.x_lo;
        e["x_hi"] = c.x_hi;
        e["n_seeds"] = c.n_seeds;
        classes.push_back(e);
    }
    j["classes"] = classes;
    json seeds = json::array();
    for (const SeedOutcome& s : report.seeds) {
        json e;
        e["seed"] = {s.seed.x, s.seed.y, s.seed.z};
        e["class"] = s.class_id;
        e["ambiguous"] = s.ambiguous;
        e["diverged"] = s.diverged;
        seeds.push_back(e);
    }
    j["seeds"] = seeds;
    open_out(path) << j.dump(2) << '\n';
}

void write_config(const std::string& path,
                  const std::vector<std::pair<std::string, std::string>>& entries) {
    auto out = open_out(path);
    for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
}

}  // namespace chaoskit::io
