#pragma once

#include <string>
#include <utility>
#include <vector>

#include "chaoskit/curvature.hpp"
#include "chaoskit/integrate.hpp"
#include "chaoskit/linkage.hpp"
#include "chaoskit/orbits.hpp"
#include "chaoskit/section.hpp"

namespace chaoskit::io {

/// Full-precision (17 significant digits) decimal form of a double.
std::string fmt(double v);

void write_trajectory_csv(const std::string& path, const Trajectory& traj);

void write_diagram_csv(const std::string& path, const BifurcationDiagram& diagram);
void write_diagram_flags_json(const std::string& path, const BifurcationDiagram& diagram);

void write_return_map_csv(const std::string& path, const ReturnMap& rm);
void write_return_map_summary_json(const std::string& path, const ReturnMap& rm,
                                   const Alphabet* alphabet = nullptr);

void write_orbit_json(const std::string& path, const PeriodicOrbit& orbit);
void write_orbit_curve_csv(const std::string& path, const PeriodicOrbit& orbit);

void write_link_report_json(const std::string& path, double alpha, const Template& tmpl,
                            const TemplateReport& report);
void write_crossing_records_csv(const std::string& path, const LinkCount& count);

/// Grid file: one JSON header line (box, resolution, field, alpha, variant,
/// ordering note), then one sample per line, x-fastest.
void write_grid(const std::string& path, const ScalarGrid& grid, double alpha,
                Nonlinearity variant);

void write_bistability_json(const std::string& path, const BistabilityReport& report);

/// Resolved run configuration echoed next to every CLI output.
void write_config(const std::string& path,
                  const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace chaoskit::io
