#pragma once

#include <string>
#include <vector>

#include "chaoskit/knots.hpp"
#include "chaoskit/orbits.hpp"

namespace chaoskit {

/// Branched-manifold summary: ordered symbols (branch-line order), the
/// symmetric linking matrix indexed the same way, and an optional global
/// half-twist kept outside the matrix (standard forms use 0).
struct Template {
    std::vector<int> symbols;
    std::vector<std::vector<int>> matrix;
    int global_torsion = 0;

    void validate() const;
    std::size_t position(int symbol) const;  // throws UnknownSymbol
    int orientation(std::size_t pos) const;  // +1 even diagonal, -1 odd
};

/// Two-branch template of the alpha = 0.98 attractor in standard form,
/// symbols {2, 1} in branch-line order.
Template template_alpha_098();

/// Same template in direct form: global negative half-twist plus the twist-
/// removed matrix.
Template template_alpha_098_direct();

/// Two-branch template of the alpha = 0.25507 attractor, symbols {0, 1}.
Template template_alpha_025507();

/// Four-branch funnel template used at alpha = 0.533, symbols {0, 1, 2, 3}.
Template template_funnel_0533();

/// One recorded inter-orbit crossing of a projected orbit pair.
struct CrossingRecord {
    double u = 0.0;
    double v = 0.0;
    int sign = 0;
    int over_orbit = 0;   // 0 = first orbit of the pair, 1 = second
    std::size_t over_segment = 0;
    std::size_t under_segment = 0;
};

struct LinkCount {
    int lk = 0;
    int sign_sum = 0;
    std::vector<CrossingRecord> records;
    knots::Plane plane = knots::Plane::XY;
    double perturbation = 0.0;  // rotation angle applied to reach genericity
};

/// Linking number by signed inter-orbit crossings in a plane projection.
/// Non-generic projections are perturbed internally by small rotations.
LinkCount count_linking(const PeriodicOrbit& a, const PeriodicOrbit& b,
                        knots::Plane plane = knots::Plane::XY);

/// Linking number predicted from the template matrix and the two itineraries
/// by the standard insertion construction. The orbits must be distinct.
int predict_linking(const Template& tmpl, const std::string& word_a, const std::string& word_b);

struct PairCheck {
    std::string a;
    std::string b;
    int counted = 0;
    int predicted = 0;
    bool agree = false;
};

struct TemplateReport {
    std::vector<PairCheck> pairs;
    bool pass = false;  // 100% agreement over compared pairs
    std::vector<std::string> notes;
};

/// All-pairs comparison of counted versus predicted linking numbers.
/// Disagreement is reported, never thrown.
TemplateReport validate_template(const Template& tmpl, const std::vector<PeriodicOrbit>& orbits,
                                 knots::Plane plane = knots::Plane::XY);

/// Validation of the four-branch funnel matrix against orbits extracted at
/// alpha = 0.533, with notes on stripe population.
TemplateReport funnel_check(const std::vector<PeriodicOrbit>& orbits,
                            knots::Plane plane = knots::Plane::XY);

}  // namespace chaoskit
