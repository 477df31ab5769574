#pragma once

#include "czl/multipliers.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <vector>

namespace czl {

/// Sphere samples with an orthonormal tangent basis at each sample and the index of each
/// sample's antipode (when present in the set).
class SphereSampleSet {
public:
    SphereSampleSet() = default;
    SphereSampleSet(int d, std::vector<double> points);
    /// sphere_samples(d, min_count) with tangents attached.
    static SphereSampleSet standard(int d, std::size_t min_count);

    [[nodiscard]] int dim() const { return d_; }
    [[nodiscard]] std::size_t size() const { return points_.size() / static_cast<std::size_t>(d_); }
    [[nodiscard]] std::span<const double> points() const { return points_; }
    [[nodiscard]] std::span<const double> point(std::size_t i) const;
    /// Tangent j (0 <= j < d-1) at sample i.
    [[nodiscard]] std::span<const double> tangent(std::size_t i, int j) const;
    [[nodiscard]] long antipode(std::size_t i) const { return antipode_[i]; }
    [[nodiscard]] double mesh() const { return mesh_; }

    /// Point reached from sample i along tangent j at arc length h: cos(h) x + sin(h) v.
    [[nodiscard]] std::vector<double> geodesic(std::size_t i, int j, double h) const;

private:
    int d_ = 0;
    std::vector<double> points_;
    std::vector<double> tangents_;
    std::vector<long> antipode_;
    double mesh_ = 0.0;
};

/// A finite family of symbols of one parameter, evaluated on a common sample set.
class SymbolFamily {
public:
    SymbolFamily() = default;
    SymbolFamily(int d, std::vector<MultiplierSymbol> members, SphereSampleSet samples);

    [[nodiscard]] int dim() const { return d_; }
    [[nodiscard]] const std::vector<MultiplierSymbol>& members() const { return members_; }
    [[nodiscard]] const SphereSampleSet& samples() const { return samples_; }
    /// values()[k][i]: member k at sample i.
    [[nodiscard]] const std::vector<std::vector<cplx>>& values() const { return values_; }
    [[nodiscard]] std::size_t size() const { return members_.size(); }

    /// Index of a member whose sample values equal `vals` exactly, if any.
    [[nodiscard]] std::optional<std::size_t> find(std::span<const cplx> vals) const;
    /// The constant 1 is a member (exact on samples).
    [[nodiscard]] bool contains_one() const;
    /// Every member's conjugate is a member (exact on samples).
    [[nodiscard]] bool conjugation_closed() const;

private:
    int d_ = 0;
    std::vector<MultiplierSymbol> members_;
    SphereSampleSet samples_;
    std::vector<std::vector<cplx>> values_;
};

/// Riesz transforms R_1..R_d on the standard sample set.
[[nodiscard]] SymbolFamily riesz_family(int d, std::size_t min_samples);

/// Outcome of a criterion check. On failure `samples` holds the witness sample indices
/// (two for point separation, one otherwise) and `tangent` the tangent index for the
/// derivative check. `margin` is the smallest tested quantity over all samples.
struct CriterionResult {
    bool pass = false;
    std::vector<std::size_t> samples;
    int tangent = -1;
    double margin = 0.0;
    double step = 0.0;

    [[nodiscard]] nlohmann::json to_json(const SphereSampleSet& set) const;
};

/// Pass iff every pair of distinct samples is separated by some member by more than
/// tol. The witness is the unseparated pair farthest apart on the sphere, then the one
/// with the smaller member difference, then the lexicographically first.
[[nodiscard]] CriterionResult check_point_separation(const SymbolFamily& f, double tol);
/// Pass iff sum_k |theta_k(x) - theta_k(-x)| > tol at every sample. The witness has the
/// smallest sum, then the lowest index. The sample set must contain all antipodes.
[[nodiscard]] CriterionResult check_antipodal_separation(const SymbolFamily& f, double tol);
/// Pass iff at every sample and tangent basis direction some member's central
/// finite-difference derivative along the geodesic (step h) exceeds tol in modulus.
/// The witness minimizes the largest derivative, then (sample, tangent) order.
[[nodiscard]] CriterionResult check_tangential_derivatives(const SymbolFamily& f, double tol, double h = 1e-4);

/// [1 (unless present), members..., conjugates not already present].
[[nodiscard]] SymbolFamily close_family(const SymbolFamily& f);

/// Smooth cutoff on the sphere: p_m(b / (a + b)), a the angular distance to the closed
/// outer cone C and b the angular distance to {x . xi_C <= 0} union {x . xi_D <= 0}.
/// Equals 1 on C and 0 on both opposing half spaces. Requires D inside C and C inside the
/// open half space of xi_D.
[[nodiscard]] MultiplierSymbol h_cd_symbol(const ConePair& pair, int order);
/// h_cd_symbol (order = d) evaluated on the samples.
[[nodiscard]] std::vector<double> build_h_CD(const ConePair& pair, const SphereSampleSet& samples);
/// Exact containment of closed cones via the extreme rays of the inner one.
[[nodiscard]] bool cone_contains(const Cone& outer, const Cone& inner);
/// Angle between x and the closed cone.
[[nodiscard]] double angular_distance_to_cone(const Cone& c, std::span<const double> x);

struct Monomial {
    /// Exponent per family member (the identity member, if any, is never used).
    std::vector<int> exponents;
    cplx coefficient;
};

/// Polynomial in family members, with its realization as a symbol.
struct SymbolPolynomial {
    std::vector<Monomial> monomials;
    int degree = 0;
    MultiplierSymbol symbol;
};

[[nodiscard]] SymbolPolynomial make_polynomial(const SymbolFamily& family, std::vector<Monomial> monomials);

struct ApproximationResult {
    SymbolPolynomial polynomial;
    /// Sup error over samples (and tangents for orders >= 1) for derivative orders 0..m.
    std::vector<double> sup_error;
    double loss = 0.0;
    bool regularized = false;
    double ridge = 0.0;
    std::size_t candidates = 0;
};

/// Weighted least-squares fit by monomials of total degree <= degree. Monomials are
/// admitted degree by degree and kept only when linearly independent of those already
/// kept on the stacked value and derivative rows. Derivative rows of order j carry
/// weight 1 / (1 + sup |target^(j)|)^2. Supports m in {0, 1, 2}.
[[nodiscard]] ApproximationResult approximate_symbol(const SymbolFamily& family, const MultiplierSymbol& target,
                                                     int degree, int m, double h = 1e-4);

}  // namespace czl
