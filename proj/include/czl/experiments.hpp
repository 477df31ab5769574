#pragma once

#include "czl/bmo.hpp"
#include "czl/commutator.hpp"
#include "czl/lattice.hpp"
#include "czl/symbol_family.hpp"
#include "czl/wavelet.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace czl {

/// Every experiment input. All randomness derives from `seed`.
struct ExperimentConfig {
    std::vector<int> dims{2, 2};
    /// Points per axis of the main resolution.
    std::size_t n = 16;
    /// Further resolutions for the stability comparison.
    std::vector<std::size_t> compare_n{8};

    /// "riesz" (R_1..R_d per parameter) or "closed_riesz" (with 1 and conjugates).
    std::string family = "riesz";
    std::size_t family_samples = 64;
    /// Also sweep smoothed cone operators of fixed aperture along e_1..e_d.
    bool cone_family = true;
    double cone_aperture = 2.0;

    std::size_t corpus_count = 30;
    /// Coefficients live on cubes of scale <= corpus_max_scale in every parameter.
    int corpus_max_scale = 2;
    /// "gaussian" or "uniform".
    std::string coefficient_law = "gaussian";
    std::size_t bmo_budget = 4;

    double kappa = 0.5;
    double epsilon = 0.05;
    double tau = 0.5;
    int smoothing_order = 2;
    /// Aperture side of D per parameter (one value is repeated).
    std::vector<double> apertures{8.0};
    std::size_t max_tries = 20;
    /// Operator in the test-function split: "cone" (smoothed T_C) or "approx" (polynomial
    /// in the closed Riesz family approximating h_CD).
    std::string test_operator = "cone";

    /// Cone pair of the approximation experiment (axis e_1).
    double outer_side = 2.0;
    double inner_side = 1.0;
    int degree_cap = 24;
    int approx_order = 1;

    double journe_a = 1.0;
    std::vector<double> cexp{1.0, 2.0, 4.0};

    double tol = 1e-6;
    std::size_t max_iter = 2000;
    /// "power" or "lanczos".
    std::string norm_method = "lanczos";

    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out;
    /// "json" or "csv".
    std::string format = "json";

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] ProductLattice lattice(std::size_t points) const;
    [[nodiscard]] NormOptions norm_options() const;
    [[nodiscard]] std::vector<double> aperture_list() const;
};

/// key = value lines, '#' comments, lists comma separated. Unknown keys and malformed
/// values raise StructuralError.
[[nodiscard]] ExperimentConfig parse_config(std::istream& in);
[[nodiscard]] ExperimentConfig parse_config_file(const std::string& path);
/// Applies one key = value setting.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Independent 64-bit stream seed from the master seed, a stream tag and an index.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index);

/// Wavelet term on a resolution-independent rectangle description.
struct CorpusTerm {
    std::vector<int> scales;
    std::vector<std::vector<int>> positions;
    std::vector<std::vector<int>> signature;
    double value = 0.0;
};

struct CorpusSymbol {
    std::size_t id = 0;
    /// "single", "cluster", "minus_one_small" or "random".
    std::string kind;
    std::vector<CorpusTerm> terms;
    GridFunction b;
    /// Factor applied to the raw draw.
    double scale = 1.0;
    double product_lower = 0.0;
    double rectangular = 0.0;
    /// bmo_minus_one after normalization; empty with one parameter.
    std::optional<double> minus_one;
    std::vector<std::size_t> collection;
};

struct Corpus {
    std::vector<CorpusSymbol> symbols;
    /// Draws discarded as zero symbols.
    std::size_t skipped = 0;
};

/// Raw terms of the corpus, identical for every resolution fine enough to hold them.
[[nodiscard]] std::vector<std::pair<std::string, std::vector<CorpusTerm>>> draw_corpus_terms(const ExperimentConfig& config);
/// Synthesizes the terms on a lattice.
[[nodiscard]] GridFunction synthesize_terms(const ProductLattice& lattice, const std::vector<CorpusTerm>& terms);
/// Rescales b so that product_bmo_lower = 1; empty for a zero symbol.
[[nodiscard]] std::optional<CorpusSymbol> normalize_symbol(GridFunction b, const ExperimentConfig& config);
/// Corpus at `points` per axis, normalized so that product_bmo_lower = 1.
[[nodiscard]] Corpus generate_corpus(const ExperimentConfig& config, std::size_t points);

/// Families used by the sweep on a lattice.
[[nodiscard]] std::vector<SymbolFamily> configured_families(const ExperimentConfig& config);
[[nodiscard]] std::vector<SymbolFamily> cone_families(const ExperimentConfig& config);

struct SupRecord {
    double value = 0.0;
    std::vector<std::size_t> argmax;
    std::vector<NormResult> norms;
    bool converged = true;
};

struct SweepRecord {
    std::size_t id = 0;
    std::string kind;
    double rectangular = 0.0;
    std::optional<double> minus_one;
    double product_lower = 0.0;
    SupRecord family;
    std::optional<SupRecord> cone;
    /// sup / product_lower.
    double family_ratio = 0.0;
    std::optional<double> cone_ratio;
    nlohmann::json cone_selection;
};

struct RatioSummary {
    double c1 = 0.0;
    double c2 = 0.0;
    [[nodiscard]] double spread() const { return c2 / c1; }
};

struct ResolutionSweep {
    std::size_t n = 0;
    std::vector<SweepRecord> records;
    std::size_t skipped = 0;
    RatioSummary family;
    std::optional<RatioSummary> cone;
    std::size_t nonconverged = 0;
};

struct SweepResult {
    nlohmann::json criteria;
    bool criteria_pass = true;
    std::vector<ResolutionSweep> resolutions;
    /// spread at n divided by the spread at each compare resolution.
    std::vector<double> family_stability;
    std::vector<double> cone_stability;
    bool all_positive = true;
    std::size_t nonconverged = 0;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string to_csv() const;
};

[[nodiscard]] RatioSummary summarize_ratios(std::span<const double> ratios);
[[nodiscard]] SweepRecord sweep_record(const CorpusSymbol& symbol, const ExperimentConfig& config,
                                       std::span<const SymbolFamily> families, std::span<const SymbolFamily> cones);
/// Normalized corpus at every resolution, sup commutator norms over the configured (and
/// cone) families, ratios to the product BMO proxy and their spread c2 / c1 per resolution.
[[nodiscard]] SweepResult equivalence_sweep(const ExperimentConfig& config);

struct TestFunctionReport {
    bool selection_success = false;
    nlohmann::json selection;
    /// ||T(gamma conj(gamma))||_2, ||T((H_D - T_D) beta conj(gamma))||_2,
    /// ||T((I - H_D) beta conj(gamma))||_2, products of trigonometric interpolants
    /// evaluated without aliasing on the lattice of twice the resolution.
    double main_term = 0.0;
    double leakage_term = 0.0;
    double complement_term = 0.0;
    /// sup |T| over frequencies with some parameter component s where H_{D_s} vanishes.
    double complement_symbol_sup = 0.0;
    /// complement_symbol_sup ||(I - H_D) beta||_4 ||gamma||_4 (interpolant norms).
    double complement_bound = 0.0;
    double gamma_l4 = 0.0;
    double commutator_b = 0.0;
    double commutator_beta = 0.0;
    double beta_l2 = 0.0;
    /// Achieved sup error per parameter when T is the polynomial approximation.
    std::vector<double> approximation_error;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// beta = P_U b (U from product_bmo_lower) normalized in L^2, cone selection on beta,
/// gamma = T_D beta, and the three-term split of T(beta conj(gamma)) with T the product of
/// the per-parameter test operators.
[[nodiscard]] TestFunctionReport test_function_experiment(const GridFunction& b, const ExperimentConfig& config);
/// Same split with beta given directly (already normalized in L^2).
[[nodiscard]] TestFunctionReport test_function_split(const GridFunction& b, const GridFunction& beta,
                                                     const ExperimentConfig& config);

/// Least-squares approximation of h_CD by the closed Riesz family in every degree up to
/// the cap; reports the per-degree sup errors and the first degree reaching epsilon.
[[nodiscard]] nlohmann::json cone_approximation_experiment(const ExperimentConfig& config, int d);

/// Journe enlargement of the product_bmo_lower collection of b, with the damped
/// projections for every exponent in config.cexp.
[[nodiscard]] nlohmann::json journe_experiment(const GridFunction& b, const ExperimentConfig& config);

}  // namespace czl
