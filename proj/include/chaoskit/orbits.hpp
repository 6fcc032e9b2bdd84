#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chaoskit/section.hpp"
#include "chaoskit/system.hpp"

namespace chaoskit {

/// One symbol of the section partition: a return-map branch named by the
/// magnitude of its local torsion, with parity metadata.
struct SymbolInfo {
    int symbol = 0;        // |local torsion| of the branch
    bool odd = false;      // orientation-reversing (decreasing) branch
    double x_lo = 0.0;
    double x_hi = 0.0;
    bool measured = false; // true when the torsion came from a refined orbit
};

/// Ordered partition alphabet, branch-line (increasing x) order.
struct Alphabet {
    std::vector<SymbolInfo> symbols;
    std::vector<double> critical_points;

    std::size_t size() const { return symbols.size(); }
    int branch_of_symbol(int symbol) const;
    int orientation(int branch) const { return symbols[static_cast<std::size_t>(branch)].odd ? -1 : 1; }
};

/// Symbol sequence of a crossing stream or a periodic orbit. Crossings that
/// fall within 1e-6 of a critical point are flagged ambiguous, not guessed.
struct Itinerary {
    std::vector<int> symbols;
    std::vector<bool> ambiguous;
    Alphabet alphabet;

    std::string word() const;
    bool has_ambiguity() const;
};

inline constexpr double kSymbolAmbiguityTol = 1e-6;

/// Measured (or family-filled) branch torsions turned into the symbol set.
/// Branches with a refinable in-branch period-1 orbit are measured by
/// counting the half-twists of the unstable direction transported around the
/// orbit; the rest inherit unit increments from the nearest measured branch.
Alphabet derive_alphabet(const SystemDef& sys, const ReturnMap& rm, const IntegratorConfig& cfg,
                         std::vector<std::string>* log = nullptr);

/// Encode crossings against the partition defined by critical points.
Itinerary encode(const CrossingSeries& cs, const Alphabet& alphabet);
Itinerary encode(const std::vector<double>& xs, const Alphabet& alphabet);

struct WordStatus {
    std::string word;       // canonical rotation, primitive
    bool realized = false;  // admissible under the kneading order
};

struct CompletenessReport {
    std::vector<WordStatus> words;
    bool complete = false;   // a branch end touches the bisecting line
    double bisect_gap = 0.0; // smallest |f(x) - x| over branch endpoints
    std::vector<std::string> kneading_low;   // per-branch image-interval itineraries
    std::vector<std::string> kneading_high;

    std::size_t realized_count(std::size_t len) const;
    std::size_t word_count(std::size_t len) const;
    bool is_realized(const std::string& word) const;
};

/// Kneading-order admissibility of every primitive cyclic word up to
/// max_len, against the branch-image itineraries of the map. With a system
/// attached the itineraries are generated by integration from the section
/// states that realize the image extremes; otherwise (synthetic maps) by
/// iterating the interpolated map.
CompletenessReport symbolic_completeness(const ReturnMap& rm, const Alphabet& alphabet,
                                         int max_len, const SystemDef* sys = nullptr,
                                         const IntegratorConfig* cfg = nullptr);

/// A refined unstable periodic orbit.
struct PeriodicOrbit {
    double alpha = 0.0;
    Nonlinearity variant = Nonlinearity::Plus;
    int period = 1;                        // section crossings per closure
    double period_time = 0.0;
    std::vector<Crossing> section_points;  // aligned with the itinerary
    Itinerary itinerary;
    std::vector<Vec3> curve;               // dense closed loop (endpoint not repeated)
    std::vector<double> curve_times;
    double residual = 0.0;

    std::string name() const { return itinerary.word(); }
};

struct UpoOptions {
    int max_period = 4;
    std::size_t scan_crossings = 3000;
    Vec3 seed{0.1, 0.0, 0.0};
    double close_return_eps = 1e-2;
    int newton_max_iter = 50;
    double residual_tol = 1e-8;
    double state_dedup_tol = 1e-4;
    std::size_t candidates_per_word = 3;
    std::size_t samples_per_return = 1500;
    std::size_t min_samples = 2500;
    int threads = 1;
};

struct UpoResult {
    std::vector<PeriodicOrbit> orbits;
    std::vector<std::string> missing_words;  // admissible words with no orbit found
    std::vector<std::string> log;
    ReturnMap map;
    Alphabet alphabet;
};

/// Close-return candidates refined by Newton iteration on the section map,
/// deduplicated by itinerary and state, sorted by (period, word).
UpoResult find_upos(const SystemDef& sys, const IntegratorConfig& cfg, const UpoOptions& opts);

/// Newton refinement of one periodic point of the p-th return map. Returns
/// nullopt when the iteration fails to converge.
std::optional<PeriodicOrbit> refine_periodic_point(const SectionMap& smap, double x, double z,
                                                   int period, const UpoOptions& opts,
                                                   std::vector<std::string>* log = nullptr);

/// Signed half-twist count of the unstable direction around a closed orbit:
/// directional writhe of the x-y projection plus the transported rotation of
/// the direction field. raw (when given) receives the unrounded value.
int measure_local_torsion(const SystemDef& sys, const std::vector<Vec3>& curve,
                          const std::vector<double>& times, double* raw = nullptr);

/// Canonical (lexicographically minimal) rotation index of a word.
std::size_t canonical_rotation(const std::vector<int>& word);

}  // namespace chaoskit
