#pragma once

#include "czl/lattice.hpp"

#include <json.hpp>

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace czl {

/// Row-major d x d real matrix.
using Matrix = std::vector<double>;

[[nodiscard]] Matrix identity_matrix(int d);
/// Returns true when m is orthogonal with determinant +1 to `tol`.
[[nodiscard]] bool is_rotation(const Matrix& m, int d, double tol = 1e-12);
[[nodiscard]] std::vector<double> mat_vec(const Matrix& m, std::span<const double> x);
[[nodiscard]] std::vector<double> mat_t_vec(const Matrix& m, std::span<const double> x);
[[nodiscard]] Matrix mat_mul(const Matrix& a, const Matrix& b, int d);
/// Plane rotation by `angle` in d = 2.
[[nodiscard]] Matrix rotation_2d(double angle);

[[nodiscard]] double dot(std::span<const double> a, std::span<const double> b);
[[nodiscard]] double norm2(std::span<const double> a);
[[nodiscard]] std::vector<double> normalized(std::span<const double> a);

/// Degree-0 homogeneous multiplier on R^d.
///
/// The evaluator receives the raw frequency vector (not normalized) and is only
/// called for nonzero frequencies; the value at the origin is `zero_value()`.
/// Symbols with a recognised kind are rebuilt exactly from their JSON parameters;
/// other kinds are rebuilt from their sphere samples by interpolation.
class MultiplierSymbol {
public:
    using Evaluator = std::function<cplx(std::span<const double>)>;

    MultiplierSymbol() = default;
    MultiplierSymbol(int dim, std::string kind, nlohmann::json params, Evaluator eval,
                     cplx zero_value = 0.0, int smoothness = -1, double interpolation_tol = 0.0);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] const std::string& kind() const { return kind_; }
    [[nodiscard]] const nlohmann::json& params() const { return params_; }
    /// Number of certified derivatives on the sphere; -1 means smooth.
    [[nodiscard]] int smoothness() const { return smoothness_; }
    /// Interpolation error bound of sample-based symbols; 0 for analytic ones.
    [[nodiscard]] double interpolation_tolerance() const { return interpolation_tol_; }
    [[nodiscard]] cplx zero_value() const { return zero_value_; }
    /// {kind, params}: enough to rebuild an analytic symbol.
    [[nodiscard]] nlohmann::json descriptor() const;

    [[nodiscard]] cplx operator()(std::span<const double> xi) const;
    [[nodiscard]] cplx operator()(std::initializer_list<double> xi) const;

    /// Values at the parameter-s frequencies of a lattice, indexed by parameter-local index.
    [[nodiscard]] std::vector<cplx> lattice_values(const ProductLattice& lattice, int s) const;
    /// Values at unit directions stored consecutively (d doubles each).
    [[nodiscard]] std::vector<cplx> sample_values(std::span<const double> directions) const;

private:
    int dim_ = 0;
    std::string kind_;
    nlohmann::json params_;
    Evaluator eval_;
    cplx zero_value_ = 0.0;
    int smoothness_ = -1;
    double interpolation_tol_ = 0.0;
};

/// Multiplier 1 (including the origin).
[[nodiscard]] MultiplierSymbol identity_symbol(int d);
/// -i xi_j / |xi|, j is 1-based.
[[nodiscard]] MultiplierSymbol riesz_symbol(int d, int j);
/// -i sign(xi) on the line.
[[nodiscard]] MultiplierSymbol hilbert_symbol();
/// xi_j / |xi|, j is 1-based.
[[nodiscard]] MultiplierSymbol coordinate_symbol(int d, int j);
/// Indicator of {theta : xi . theta > 0}; the boundary gets 0.
[[nodiscard]] MultiplierSymbol half_space_symbol(std::span<const double> direction);
[[nodiscard]] MultiplierSymbol conjugate_symbol(const MultiplierSymbol& m);
/// Pointwise product of symbols of the same dimension.
[[nodiscard]] MultiplierSymbol product_symbol(const MultiplierSymbol& a, const MultiplierSymbol& b);

/// Cone (xi, Q): theta with theta . xi > 0 and every aperture coordinate
/// |theta . e_j| <= (theta . xi) side / 2, where e_1..e_{d-1} complete xi to an
/// orthonormal frame. The frame is stored row-major with xi in column 0.
struct Cone {
    Matrix frame;
    double side = 0.0;

    /// Completes `direction` (normalized here) to a frame by Gram-Schmidt on the standard basis.
    static Cone along(std::span<const double> direction, double side);
    /// Uses the given orthonormal frame (validated to 1e-12).
    static Cone with_frame(Matrix frame, int d, double side);

    [[nodiscard]] int dim() const;
    [[nodiscard]] std::vector<double> direction() const;
    /// Aperture scaled by lambda (the cone lambda C).
    [[nodiscard]] Cone dilated(double lambda) const;
    [[nodiscard]] Cone rotated(const Matrix& rho) const;
    /// Normalized aperture coordinates |theta . e_j| / ((theta . xi) side / 2); empty when
    /// theta . xi <= 0.
    [[nodiscard]] std::vector<double> aperture_ratios(std::span<const double> theta) const;
    [[nodiscard]] bool contains(std::span<const double> theta) const;
    /// Largest angle between the axis and a point of the closed cone.
    [[nodiscard]] double half_angle() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Inner cone D, outer cone C (D inside C), smoothing margin tau and order m.
struct ConePair {
    Cone inner;
    Cone outer;
    double tau = 0.5;
    int order = 2;
};

/// Generalized smoothstep of order m: 0 at 0, 1 at 1, m vanishing derivatives at both
/// ends, p(x) + p(1 - x) = 1. Arguments are clamped to [0, 1].
[[nodiscard]] double smoothstep(int m, double x);

[[nodiscard]] MultiplierSymbol cone_projection_symbol(const Cone& c);
/// Product over aperture axes of 1 - p_m((r_j - 1) / tau), r_j the normalized aperture
/// ratio: 1 on D, 0 outside (1 + tau) D.
[[nodiscard]] MultiplierSymbol smoothed_cone_symbol(const Cone& d, double tau, int m);

/// theta -> m(rho^T theta). Cones rotate their frame; other symbols are composed with
/// the rotation, which for sample-based symbols evaluates their interpolant.
[[nodiscard]] MultiplierSymbol rotate_symbol(const MultiplierSymbol& m, const Matrix& rho);

/// Unit sphere samples stored consecutively. d = 1: {1, -1}. d = 2: uniform angles (a
/// multiple of 4, exactly symmetric). d = 3: Fibonacci points on the open upper half and
/// the coordinate vectors, followed by their antipodes. Higher d: seeded Gaussian points
/// and the coordinate vectors, with antipodes.
[[nodiscard]] std::vector<double> sphere_samples(int d, std::size_t min_count);
/// Largest angular distance from any sample to its nearest neighbour.
[[nodiscard]] double sphere_mesh(std::span<const double> samples, int d);

/// Symbol given by values at sphere samples: nearest sample for d = 1, linear in angle
/// for d = 2, quadratic moving least squares on nearest neighbours for d >= 3. The interpolation
/// tolerance is a leave-one-out estimate.
[[nodiscard]] MultiplierSymbol sampled_symbol(int d, std::vector<double> directions,
                                              std::vector<cplx> values, std::string kind = "sampled",
                                              nlohmann::json params = nlohmann::json::object(),
                                              cplx zero_value = 0.0);

/// Symbol file: {d, kind, params, zero_value, sphere_samples:[{dir, re, im}]}.
[[nodiscard]] nlohmann::json symbol_to_json(const MultiplierSymbol& m, std::span<const double> directions);
[[nodiscard]] MultiplierSymbol symbol_from_json(const nlohmann::json& j);
[[nodiscard]] MultiplierSymbol symbol_from_descriptor(int d, const nlohmann::json& descriptor);

/// Tensor-product Fourier multiplier on a lattice: one symbol per parameter.
class TensorMultiplier {
public:
    TensorMultiplier() = default;
    TensorMultiplier(const ProductLattice& lattice, std::span<const MultiplierSymbol> symbols);
    /// Symbol in parameter s, identity elsewhere.
    static TensorMultiplier acting_on(const ProductLattice& lattice, int s, const MultiplierSymbol& m);
    static TensorMultiplier from_factors(const ProductLattice& lattice, std::vector<std::vector<cplx>> factors);

    [[nodiscard]] const ProductLattice& lattice() const { return lattice_; }
    [[nodiscard]] std::span<const cplx> table() const { return table_; }
    [[nodiscard]] std::span<const cplx> factor(int s) const { return factors_[s]; }
    [[nodiscard]] TensorMultiplier adjoint() const;
    /// Composition (product of tables).
    [[nodiscard]] TensorMultiplier then(const TensorMultiplier& other) const;

    [[nodiscard]] GridFunction apply(const GridFunction& f) const;
    /// Multiplies frequency-side data by the table.
    void multiply(std::span<cplx> f_hat) const;
    /// In-place spatial application.
    void apply_inplace(std::span<cplx> data) const;

private:
    ProductLattice lattice_;
    std::vector<std::vector<cplx>> factors_;
    std::vector<cplx> table_;
};

/// f^ multiplied by prod_s m_s(xi_s).
[[nodiscard]] GridFunction apply_multiplier(std::span<const MultiplierSymbol> symbols, const GridFunction& f);

}  // namespace czl
