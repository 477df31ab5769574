#include "czl/multipliers.hpp"

#include "czl/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace czl {

namespace {

constexpr cplx kMinusI{0.0, -1.0};

int sqrt_dim(const Matrix& m) {
    const auto d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m.size()))));
    if (static_cast<std::size_t>(d * d) != m.size()) throw StructuralError("matrix is not square");
    return d;
}

void require_dim(std::span<const double> xi, int d, const char* what) {
    if (xi.size() != static_cast<std::size_t>(d)) {
        throw StructuralError(std::string(what) + ": expected a " + std::to_string(d) +
                              "-dimensional frequency");
    }
}

std::vector<double> json_vector(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

}  // namespace

Matrix identity_matrix(int d) {
    Matrix m(static_cast<std::size_t>(d * d), 0.0);
    for (int i = 0; i < d; ++i) m[static_cast<std::size_t>(i * d + i)] = 1.0;
    return m;
}

bool is_rotation(const Matrix& m, int d, double tol) {
    if (m.size() != static_cast<std::size_t>(d * d)) return false;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(m.data(), d, d);
    const double err = (a * a.transpose() - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
    return err <= tol && a.determinant() > 0.0;
}

std::vector<double> mat_vec(const Matrix& m, std::span<const double> x) {
    const auto d = x.size();
    std::vector<double> y(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) y[i] += m[i * d + j] * x[j];
    }
    return y;
}

std::vector<double> mat_t_vec(const Matrix& m, std::span<const double> x) {
    const auto d = x.size();
    std::vector<double> y(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) y[j] += m[i * d + j] * x[i];
    }
    return y;
}

Matrix mat_mul(const Matrix& a, const Matrix& b, int d) {
    Matrix c(static_cast<std::size_t>(d * d), 0.0);
    for (int i = 0; i < d; ++i) {
        for (int k = 0; k < d; ++k) {
            for (int j = 0; j < d; ++j) c[i * d + j] += a[i * d + k] * b[k * d + j];
        }
    }
    return c;
}

Matrix rotation_2d(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c, -s, s, c};
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> normalized(std::span<const double> a) {
    const double n = norm2(a);
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("cannot normalize a zero or non-finite vector");
    std::vector<double> out(a.begin(), a.end());
    for (auto& v : out) v /= n;
    return out;
}

MultiplierSymbol::MultiplierSymbol(int dim, std::string kind, nlohmann::json params, Evaluator eval,
                                   cplx zero_value, int smoothness, double interpolation_tol)
    : dim_(dim),
      kind_(std::move(kind)),
      params_(std::move(params)),
      eval_(std::move(eval)),
      zero_value_(zero_value),
      smoothness_(smoothness),
      interpolation_tol_(interpolation_tol) {
    if (dim_ < 1) throw StructuralError("symbol dimension must be >= 1");
}

nlohmann::json MultiplierSymbol::descriptor() const {
    return {{"kind", kind_}, {"params", params_}};
}

cplx MultiplierSymbol::operator()(std::span<const double> xi) const {
    require_dim(xi, dim_, "symbol evaluation");
    bool zero = true;
    for (double v : xi) zero = zero && v == 0.0;
    return zero ? zero_value_ : eval_(xi);
}

cplx MultiplierSymbol::operator()(std::initializer_list<double> xi) const {
    return (*this)(std::span<const double>(xi.begin(), xi.size()));
}

std::vector<cplx> MultiplierSymbol::lattice_values(const ProductLattice& lattice, int s) const {
    if (lattice.dim(s) != dim_) {
        throw StructuralError("symbol of dimension " + std::to_string(dim_) + " applied to parameter " +
                              std::to_string(s + 1) + " of dimension " + std::to_string(lattice.dim(s)));
    }
    std::vector<cplx> out(lattice.parameter_size(s));
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = (*this)(parameter_frequency(lattice, s, p));
    return out;
}

std::vector<cplx> MultiplierSymbol::sample_values(std::span<const double> directions) const {
    const auto d = static_cast<std::size_t>(dim_);
    if (directions.size() % d != 0) throw StructuralError("sample directions are not a multiple of the dimension");
    std::vector<cplx> out(directions.size() / d);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)(directions.subspan(i * d, d));
    return out;
}

MultiplierSymbol identity_symbol(int d) {
    return MultiplierSymbol(d, "identity", nlohmann::json::object(),
                            [](std::span<const double>) { return cplx{1.0}; }, 1.0);
}

MultiplierSymbol riesz_symbol(int d, int j) {
    if (d < 1 || j < 1 || j > d) throw DomainError("riesz_symbol: axis index out of range");
    const auto a = static_cast<std::size_t>(j - 1);
    return MultiplierSymbol(d, "riesz", {{"j", j}}, [a](std::span<const double> xi) {
        return kMinusI * (xi[a] / norm2(xi));
    });
}

MultiplierSymbol hilbert_symbol() {
    return MultiplierSymbol(1, "hilbert", nlohmann::json::object(), [](std::span<const double> xi) {
        return xi[0] > 0.0 ? kMinusI : -kMinusI;
    });
}

MultiplierSymbol coordinate_symbol(int d, int j) {
    if (d < 1 || j < 1 || j > d) throw DomainError("coordinate_symbol: axis index out of range");
    const auto a = static_cast<std::size_t>(j - 1);
    return MultiplierSymbol(d, "coordinate", {{"j", j}}, [a](std::span<const double> xi) {
        return cplx{xi[a] / norm2(xi)};
    });
}

MultiplierSymbol half_space_symbol(std::span<const double> direction) {
    auto dir = normalized(direction);
    const int d = static_cast<int>(dir.size());
    return MultiplierSymbol(d, "half_space", {{"direction", dir}},
                            [dir](std::span<const double> xi) { return cplx{dot(dir, xi) > 0.0 ? 1.0 : 0.0}; },
                            0.0, 0);
}

MultiplierSymbol conjugate_symbol(const MultiplierSymbol& m) {
    return MultiplierSymbol(m.dim(), "conjugate", {{"base", m.descriptor()}},
                            [m](std::span<const double> xi) { return std::conj(m(xi)); },
                            std::conj(m.zero_value()), m.smoothness(), m.interpolation_tolerance());
}

MultiplierSymbol product_symbol(const MultiplierSymbol& a, const MultiplierSymbol& b) {
    if (a.dim() != b.dim()) throw StructuralError("product_symbol: dimension mismatch");
    int smooth = -1;
    if (a.smoothness() >= 0 && b.smoothness() >= 0) smooth = std::min(a.smoothness(), b.smoothness());
    else smooth = std::max(a.smoothness(), b.smoothness());
    return MultiplierSymbol(a.dim(), "product", {{"factors", {a.descriptor(), b.descriptor()}}},
                            [a, b](std::span<const double> xi) { return a(xi) * b(xi); },
                            a.zero_value() * b.zero_value(), smooth,
                            a.interpolation_tolerance() + b.interpolation_tolerance());
}

Cone Cone::along(std::span<const double> direction, double side) {
    const auto xi = normalized(direction);
    const auto d = xi.size();
    std::vector<std::vector<double>> cols{xi};
    for (std::size_t e = 0; e < d && cols.size() < d; ++e) {
        std::vector<double> v(d, 0.0);
        v[e] = 1.0;
        for (const auto& c : cols) {
            const double p = dot(v, c);
            for (std::size_t i = 0; i < d; ++i) v[i] -= p * c[i];
        }
        const double n = norm2(v);
        if (n < 1e-6) continue;
        for (auto& x : v) x /= n;
        cols.push_back(std::move(v));
    }
    Matrix frame(d * d);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < d; ++i) frame[i * d + j] = cols[j][i];
    }
    return with_frame(std::move(frame), static_cast<int>(d), side);
}

Cone Cone::with_frame(Matrix frame, int d, double side) {
    if (!(side > 0.0) || !std::isfinite(side)) throw DomainError("cone aperture side must be positive");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(frame.data(), d, d);
    if (frame.size() != static_cast<std::size_t>(d * d) ||
        (a.transpose() * a - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-12) {
        throw DomainError("cone frame is not orthonormal");
    }
    return Cone{std::move(frame), side};
}

int Cone::dim() const { return sqrt_dim(frame); }

std::vector<double> Cone::direction() const {
    const int d = dim();
    std::vector<double> xi(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) xi[i] = frame[static_cast<std::size_t>(i * d)];
    return xi;
}

Cone Cone::dilated(double lambda) const {
    if (!(lambda > 0.0)) throw DomainError("cone dilation must be positive");
    return Cone{frame, side * lambda};
}

Cone Cone::rotated(const Matrix& rho) const {
    const int d = dim();
    if (!is_rotation(rho, d)) throw DomainError("rotation matrix is not in SO(d)");
    return Cone{mat_mul(rho, frame, d), side};
}

std::vector<double> Cone::aperture_ratios(std::span<const double> theta) const {
    const int d = dim();
    require_dim(theta, d, "cone membership");
    const auto coords = mat_t_vec(frame, theta);
    if (!(coords[0] > 0.0)) return {};
    std::vector<double> r(static_cast<std::size_t>(d - 1));
    for (int j = 1; j < d; ++j) r[j - 1] = std::abs(coords[j]) / (coords[0] * side / 2.0);
    return r;
}

bool Cone::contains(std::span<const double> theta) const {
    const auto r = aperture_ratios(theta);
    if (r.empty() && dim() > 1) return false;
    if (dim() == 1) return mat_t_vec(frame, theta)[0] > 0.0;
    return std::all_of(r.begin(), r.end(), [](double v) { return v <= 1.0; });
}

double Cone::half_angle() const {
    return std::atan(std::sqrt(static_cast<double>(dim() - 1)) * side / 2.0);
}

nlohmann::json Cone::to_json() const {
    return {{"frame", frame}, {"side", side}};
}

double smoothstep(int m, double x) {
    if (m < 0) throw DomainError("smoothstep order must be >= 0");
    x = std::clamp(x, 0.0, 1.0);
    double sum = 0.0;
    double binom = 1.0;
    double pw = 1.0;
    for (int k = 0; k <= m; ++k) {
        sum += binom * pw;
        binom = binom * (m + k + 1) / (k + 1);
        pw *= 1.0 - x;
    }
    return std::pow(x, m + 1) * sum;
}

MultiplierSymbol cone_projection_symbol(const Cone& c) {
    return MultiplierSymbol(c.dim(), "cone", c.to_json(),
                            [c](std::span<const double> xi) { return cplx{c.contains(xi) ? 1.0 : 0.0}; }, 0.0, 0);
}

MultiplierSymbol smoothed_cone_symbol(const Cone& cone, double tau, int m) {
    if (!(tau > 0.0)) throw DomainError("smoothing margin tau must be positive");
    if (m < 1) throw DomainError("smoothness order must be >= 1");
    auto params = cone.to_json();
    params["tau"] = tau;
    params["order"] = m;
    const bool line = cone.dim() == 1;
    return MultiplierSymbol(
        cone.dim(), "smoothed_cone", params,
        [cone, tau, m, line](std::span<const double> xi) {
            if (line) return cplx{cone.contains(xi) ? 1.0 : 0.0};
            const auto r = cone.aperture_ratios(xi);
            if (r.empty()) return cplx{0.0};
            double v = 1.0;
            for (double rj : r) {
                if (rj <= 1.0) continue;
                if (rj >= 1.0 + tau) return cplx{0.0};
                v *= 1.0 - smoothstep(m, (rj - 1.0) / tau);
            }
            return cplx{v};
        },
        0.0, m);
}

MultiplierSymbol rotate_symbol(const MultiplierSymbol& m, const Matrix& rho) {
    const int d = m.dim();
    if (!is_rotation(rho, d)) throw DomainError("rotate_symbol: matrix is not orthogonal with determinant 1");
    if (m.kind() == "cone") {
        return cone_projection_symbol(Cone{json_vector(m.params()["frame"]), m.params()["side"].get<double>()}.rotated(rho));
    }
    if (m.kind() == "smoothed_cone") {
        const Cone c{json_vector(m.params()["frame"]), m.params()["side"].get<double>()};
        return smoothed_cone_symbol(c.rotated(rho), m.params()["tau"].get<double>(), m.params()["order"].get<int>());
    }
    if (m.kind() == "identity") return m;
    return MultiplierSymbol(d, "rotated", {{"base", m.descriptor()}, {"rotation", rho}},
                            [m, rho](std::span<const double> xi) { return m(mat_t_vec(rho, xi)); },
                            m.zero_value(), m.smoothness(), m.interpolation_tolerance());
}

MultiplierSymbol symbol_from_descriptor(int d, const nlohmann::json& desc) {
    const auto kind = desc.at("kind").get<std::string>();
    const auto& p = desc.contains("params") ? desc["params"] : nlohmann::json::object();
    if (kind == "identity") return identity_symbol(d);
    if (kind == "riesz") return riesz_symbol(d, p.at("j").get<int>());
    if (kind == "hilbert") return hilbert_symbol();
    if (kind == "coordinate") return coordinate_symbol(d, p.at("j").get<int>());
    if (kind == "half_space") return half_space_symbol(json_vector(p.at("direction")));
    if (kind == "cone") return cone_projection_symbol(Cone::with_frame(json_vector(p.at("frame")), d, p.at("side").get<double>()));
    if (kind == "smoothed_cone") {
        return smoothed_cone_symbol(Cone::with_frame(json_vector(p.at("frame")), d, p.at("side").get<double>()),
                                    p.at("tau").get<double>(), p.at("order").get<int>());
    }
    if (kind == "rotated") return rotate_symbol(symbol_from_descriptor(d, p.at("base")), json_vector(p.at("rotation")));
    if (kind == "conjugate") return conjugate_symbol(symbol_from_descriptor(d, p.at("base")));
    if (kind == "product") {
        const auto& f = p.at("factors");
        return product_symbol(symbol_from_descriptor(d, f.at(0)), symbol_from_descriptor(d, f.at(1)));
    }
    throw StructuralError("no analytic reconstruction for symbol kind '" + kind + "'");
}

nlohmann::json symbol_to_json(const MultiplierSymbol& m, std::span<const double> directions) {
    const auto d = static_cast<std::size_t>(m.dim());
    const auto vals = m.sample_values(directions);
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const auto x = directions.subspan(i * d, d);
        samples.push_back({{"dir", std::vector<double>(x.begin(), x.end())}, {"re", vals[i].real()}, {"im", vals[i].imag()}});
    }
    return {{"d", m.dim()},
            {"kind", m.kind()},
            {"params", m.params()},
            {"zero_value", {m.zero_value().real(), m.zero_value().imag()}},
            {"sphere_samples", samples}};
}

MultiplierSymbol symbol_from_json(const nlohmann::json& j) {
    const int d = j.at("d").get<int>();
    if (d < 1) throw StructuralError("symbol file: dimension must be >= 1");
    const auto kind = j.at("kind").get<std::string>();
    const auto params = j.contains("params") ? j["params"] : nlohmann::json::object();
    if (kind != "sampled") {
        try {
            return symbol_from_descriptor(d, {{"kind", kind}, {"params", params}});
        } catch (const StructuralError&) {
            // Unknown kind: fall through to the sample interpolant.
        }
    }
    const auto& samples = j.at("sphere_samples");
    if (samples.empty()) throw StructuralError("symbol file: no sphere samples for kind '" + kind + "'");
    std::vector<double> dirs;
    std::vector<cplx> vals;
    for (const auto& s : samples) {
        const auto x = json_vector(s.at("dir"));
        if (x.size() != static_cast<std::size_t>(d)) throw StructuralError("symbol file: sample dimension mismatch");
        dirs.insert(dirs.end(), x.begin(), x.end());
        vals.emplace_back(s.at("re").get<double>(), s.at("im").get<double>());
    }
    cplx zero = 0.0;
    if (j.contains("zero_value")) zero = {j["zero_value"].at(0).get<double>(), j["zero_value"].at(1).get<double>()};
    return sampled_symbol(d, std::move(dirs), std::move(vals), kind, params, zero);
}

TensorMultiplier::TensorMultiplier(const ProductLattice& lattice, std::span<const MultiplierSymbol> symbols)
    : lattice_(lattice) {
    if (symbols.size() != static_cast<std::size_t>(lattice.parameters())) {
        throw StructuralError("need one symbol per parameter (" + std::to_string(lattice.parameters()) +
                              "), got " + std::to_string(symbols.size()));
    }
    std::vector<std::vector<cplx>> factors;
    for (int s = 0; s < lattice.parameters(); ++s) factors.push_back(symbols[s].lattice_values(lattice, s));
    *this = from_factors(lattice, std::move(factors));
}

TensorMultiplier TensorMultiplier::acting_on(const ProductLattice& lattice, int s, const MultiplierSymbol& m) {
    std::vector<MultiplierSymbol> symbols;
    for (int r = 0; r < lattice.parameters(); ++r) symbols.push_back(r == s ? m : identity_symbol(lattice.dim(r)));
    return TensorMultiplier(lattice, symbols);
}

TensorMultiplier TensorMultiplier::from_factors(const ProductLattice& lattice,
                                                std::vector<std::vector<cplx>> factors) {
    TensorMultiplier out;
    out.lattice_ = lattice;
    if (factors.size() != static_cast<std::size_t>(lattice.parameters())) {
        throw StructuralError("need one factor table per parameter");
    }
    for (int s = 0; s < lattice.parameters(); ++s) {
        if (factors[s].size() != lattice.parameter_size(s)) throw StructuralError("factor table size mismatch");
    }
    out.table_.assign(lattice.size(), 1.0);
    for (std::size_t i = 0; i < out.table_.size(); ++i) {
        for (int s = 0; s < lattice.parameters(); ++s) out.table_[i] *= factors[s][lattice.parameter_index(i, s)];
    }
    out.factors_ = std::move(factors);
    return out;
}

TensorMultiplier TensorMultiplier::adjoint() const {
    auto factors = factors_;
    for (auto& f : factors) {
        for (auto& v : f) v = std::conj(v);
    }
    return from_factors(lattice_, std::move(factors));
}

TensorMultiplier TensorMultiplier::then(const TensorMultiplier& other) const {
    if (!(lattice_ == other.lattice_)) throw StructuralError("multiplier composition: lattice mismatch");
    auto factors = factors_;
    for (std::size_t s = 0; s < factors.size(); ++s) {
        for (std::size_t p = 0; p < factors[s].size(); ++p) factors[s][p] *= other.factors_[s][p];
    }
    return from_factors(lattice_, std::move(factors));
}

void TensorMultiplier::multiply(std::span<cplx> f_hat) const {
    if (f_hat.size() != table_.size()) throw StructuralError("multiplier: data size does not match lattice");
    for (std::size_t i = 0; i < table_.size(); ++i) f_hat[i] *= table_[i];
}

void TensorMultiplier::apply_inplace(std::span<cplx> data) const {
    fft_forward_inplace(lattice_, data);
    multiply(data);
    fft_inverse_inplace(lattice_, data);
}

GridFunction TensorMultiplier::apply(const GridFunction& f) const {
    if (!(f.lattice() == lattice_)) throw StructuralError("multiplier: lattice mismatch");
    GridFunction out = f;
    apply_inplace(out.values());
    return out;
}

GridFunction apply_multiplier(std::span<const MultiplierSymbol> symbols, const GridFunction& f) {
    return TensorMultiplier(f.lattice(), symbols).apply(f);
}

}  // namespace czl
