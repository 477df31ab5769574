#include "czl/lattice.hpp"

#include "czl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace czl {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

ProductLattice::ProductLattice(std::vector<int> dims, std::vector<std::size_t> n_axis)
    : dims_(std::move(dims)), n_axis_(std::move(n_axis)) {
    if (dims_.empty()) throw StructuralError("lattice needs at least one parameter");
    std::size_t total_axes = 0;
    for (int d : dims_) {
        if (d < 1) throw StructuralError("parameter dimension must be >= 1");
        total_axes += static_cast<std::size_t>(d);
    }
    if (n_axis_.size() != total_axes) {
        throw StructuralError("lattice has " + std::to_string(n_axis_.size()) +
                              " axis lengths but the dimensions sum to " +
                              std::to_string(total_axes));
    }
    for (std::size_t n : n_axis_) {
        if (!is_power_of_two(n) || n < 4) {
            throw StructuralError("axis length " + std::to_string(n) +
                                  " is not a power of two >= 4");
        }
    }

    const auto t = dims_.size();
    first_axis_.resize(t);
    param_size_.resize(t);
    param_stride_.resize(t);
    std::size_t axis = 0;
    for (std::size_t s = 0; s < t; ++s) {
        first_axis_[s] = axis;
        std::size_t sz = 1;
        for (int a = 0; a < dims_[s]; ++a) sz *= n_axis_[axis++];
        param_size_[s] = sz;
    }
    std::size_t stride = 1;
    for (std::size_t s = t; s-- > 0;) {
        param_stride_[s] = stride;
        stride *= param_size_[s];
    }
    size_ = stride;
}

ProductLattice ProductLattice::uniform(std::vector<int> dims, std::size_t n) {
    const auto axes = static_cast<std::size_t>(std::accumulate(dims.begin(), dims.end(), 0));
    return ProductLattice(std::move(dims), std::vector<std::size_t>(axes, n));
}

std::span<const std::size_t> ProductLattice::parameter_axes(int s) const {
    return std::span<const std::size_t>(n_axis_).subspan(first_axis_[s],
                                                         static_cast<std::size_t>(dims_[s]));
}

bool ProductLattice::parameter_is_cubic(int s) const {
    auto axes = parameter_axes(s);
    return std::all_of(axes.begin(), axes.end(), [&](std::size_t n) { return n == axes[0]; });
}

std::string ProductLattice::describe() const {
    std::ostringstream os;
    os << "t=" << dims_.size() << " d=(";
    for (std::size_t s = 0; s < dims_.size(); ++s) os << (s ? "," : "") << dims_[s];
    os << ") n=(";
    for (std::size_t a = 0; a < n_axis_.size(); ++a) os << (a ? "," : "") << n_axis_[a];
    os << ")";
    return os.str();
}

std::vector<double> parameter_frequency(const ProductLattice& lattice, int s, std::size_t p) {
    auto axes = lattice.parameter_axes(s);
    std::vector<double> xi(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
        xi[a] = static_cast<double>(signed_frequency(p % axes[a], axes[a]));
        p /= axes[a];
    }
    return xi;
}

GridFunction::GridFunction(ProductLattice lattice)
    : lattice_(std::move(lattice)), values_(lattice_.size()) {}

GridFunction::GridFunction(ProductLattice lattice, std::vector<cplx> values)
    : lattice_(std::move(lattice)), values_(std::move(values)) {
    if (values_.size() != lattice_.size()) {
        throw StructuralError("sample count " + std::to_string(values_.size()) +
                              " does not match lattice size " +
                              std::to_string(lattice_.size()));
    }
    for (const auto& v : values_) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            throw StructuralError("grid function contains a non-finite sample");
        }
    }
}

void require_same_lattice(const GridFunction& a, const GridFunction& b, const char* what) {
    if (!(a.lattice() == b.lattice())) {
        throw StructuralError(std::string(what) + ": lattice mismatch (" +
                              a.lattice().describe() + " vs " + b.lattice().describe() + ")");
    }
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
    require_same_lattice(*this, other, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
    require_same_lattice(*this, other, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

GridFunction& GridFunction::operator*=(cplx c) {
    for (auto& v : values_) v *= c;
    return *this;
}

double GridFunction::max_abs_imag() const {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, std::abs(v.imag()));
    return m;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(cplx c, GridFunction a) { return a *= c; }

GridFunction pointwise(const GridFunction& a, const GridFunction& b) {
    require_same_lattice(a, b, "pointwise");
    GridFunction out(a.lattice());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

GridFunction conj(const GridFunction& a) {
    GridFunction out(a.lattice());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::conj(a[i]);
    return out;
}

GridFunction fft_forward(const GridFunction& f) {
    GridFunction out = f;
    fft_forward_inplace(out.lattice(), out.values());
    return out;
}

GridFunction fft_inverse(const GridFunction& f_hat) {
    GridFunction out = f_hat;
    fft_inverse_inplace(out.lattice(), out.values());
    return out;
}

double lp_norm(const GridFunction& f, double p) {
    if (std::isnan(p) || p < 1.0) throw DomainError("lp_norm requires p >= 1");
    const auto n = static_cast<double>(f.size());
    if (std::isinf(p)) {
        double m = 0.0;
        for (const auto& v : f.values()) m = std::max(m, std::abs(v));
        return m;
    }
    if (p == 2.0) return l2_norm(f.values());
    // Scale by the sup to avoid overflow for large p.
    double m = 0.0;
    for (const auto& v : f.values()) m = std::max(m, std::abs(v));
    if (m == 0.0) return 0.0;
    double acc = 0.0;
    for (const auto& v : f.values()) acc += std::pow(std::abs(v) / m, p);
    return m * std::pow(acc / n, 1.0 / p);
}

cplx inner_product(std::span<const cplx> f, std::span<const cplx> g) {
    if (f.size() != g.size()) throw StructuralError("inner_product: size mismatch");
    cplx acc{0.0, 0.0};
    for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * std::conj(g[i]);
    return acc / static_cast<double>(f.size());
}

double l2_norm(std::span<const cplx> f) {
    double acc = 0.0;
    for (const auto& v : f) acc += std::norm(v);
    return std::sqrt(acc / static_cast<double>(f.size()));
}

cplx inner_product(const GridFunction& f, const GridFunction& g) {
    require_same_lattice(f, g, "inner_product");
    return inner_product(f.values(), g.values());
}

cplx mean(const GridFunction& f) {
    cplx acc{0.0, 0.0};
    for (const auto& v : f.values()) acc += v;
    return acc / static_cast<double>(f.size());
}

}  // namespace czl
