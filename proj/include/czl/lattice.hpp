#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace czl {

using cplx = std::complex<double>;

/// Periodic sampling of the unit product torus T^{d_1} x ... x T^{d_t}.
///
/// Axes are ordered parameter by parameter; within a parameter the d_s axes are
/// consecutive. Points are stored row-major with the last axis fastest. Because
/// the parameter axes are contiguous, a flat index factors as a row-major
/// combination of one "parameter-local" index per parameter.
class ProductLattice {
public:
    ProductLattice() = default;
    ProductLattice(std::vector<int> dims, std::vector<std::size_t> n_axis);

    /// Every axis sampled with the same power of two `n`.
    static ProductLattice uniform(std::vector<int> dims, std::size_t n);

    [[nodiscard]] int parameters() const { return static_cast<int>(dims_.size()); }
    [[nodiscard]] int dim(int s) const { return dims_[s]; }
    [[nodiscard]] std::span<const int> dims() const { return dims_; }
    [[nodiscard]] std::span<const std::size_t> n_axis() const { return n_axis_; }
    [[nodiscard]] std::size_t axis_count() const { return n_axis_.size(); }
    [[nodiscard]] std::size_t size() const { return size_; }

    [[nodiscard]] std::size_t first_axis(int s) const { return first_axis_[s]; }
    /// Axis lengths belonging to parameter s.
    [[nodiscard]] std::span<const std::size_t> parameter_axes(int s) const;
    /// Number of points of the parameter-s factor lattice.
    [[nodiscard]] std::size_t parameter_size(int s) const { return param_size_[s]; }
    /// Stride of the parameter-local index of s inside a flat index.
    [[nodiscard]] std::size_t parameter_stride(int s) const { return param_stride_[s]; }
    /// Parameter-local index of parameter s for a flat index.
    [[nodiscard]] std::size_t parameter_index(std::size_t flat, int s) const {
        return (flat / param_stride_[s]) % param_size_[s];
    }
    /// True when every axis of parameter s has the same length.
    [[nodiscard]] bool parameter_is_cubic(int s) const;

    bool operator==(const ProductLattice&) const = default;

    [[nodiscard]] std::string describe() const;

private:
    std::vector<int> dims_;
    std::vector<std::size_t> n_axis_;
    std::vector<std::size_t> first_axis_;
    std::vector<std::size_t> param_size_;
    std::vector<std::size_t> param_stride_;
    std::size_t size_ = 0;
};

/// Signed frequency represented by DFT index k on an axis of length n.
/// Indices at or above n/2 map to k - n, so the Nyquist index is -n/2.
[[nodiscard]] inline long signed_frequency(std::size_t k, std::size_t n) {
    return k < n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

/// Signed frequency vector (length d_s) of the parameter-local index p of parameter s.
[[nodiscard]] std::vector<double> parameter_frequency(const ProductLattice& lattice, int s,
                                                      std::size_t p);

/// Complex samples on a ProductLattice. Values are finite.
class GridFunction {
public:
    GridFunction() = default;
    /// Zero function.
    explicit GridFunction(ProductLattice lattice);
    GridFunction(ProductLattice lattice, std::vector<cplx> values);

    [[nodiscard]] const ProductLattice& lattice() const { return lattice_; }
    [[nodiscard]] std::span<const cplx> values() const { return values_; }
    [[nodiscard]] std::span<cplx> values() { return values_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] cplx operator[](std::size_t i) const { return values_[i]; }
    [[nodiscard]] cplx& operator[](std::size_t i) { return values_[i]; }

    /// Releases the sample storage (the function is left empty).
    [[nodiscard]] std::vector<cplx> take_values() && { return std::move(values_); }

    GridFunction& operator+=(const GridFunction& other);
    GridFunction& operator-=(const GridFunction& other);
    GridFunction& operator*=(cplx c);

    [[nodiscard]] double max_abs_imag() const;

private:
    ProductLattice lattice_;
    std::vector<cplx> values_;
};

[[nodiscard]] GridFunction operator+(GridFunction a, const GridFunction& b);
[[nodiscard]] GridFunction operator-(GridFunction a, const GridFunction& b);
[[nodiscard]] GridFunction operator*(cplx c, GridFunction a);
/// Pointwise product.
[[nodiscard]] GridFunction pointwise(const GridFunction& a, const GridFunction& b);
[[nodiscard]] GridFunction conj(const GridFunction& a);

void require_same_lattice(const GridFunction& a, const GridFunction& b, const char* what);

/// Unitary multi-dimensional DFT over all axes: f^(k) = |N|^{-1/2} sum_x f(x) e^{-2 pi i k.x/N}.
[[nodiscard]] GridFunction fft_forward(const GridFunction& f);
[[nodiscard]] GridFunction fft_inverse(const GridFunction& f_hat);

/// In-place unitary transforms on raw storage laid out per `lattice`.
void fft_forward_inplace(const ProductLattice& lattice, std::span<cplx> data);
void fft_inverse_inplace(const ProductLattice& lattice, std::span<cplx> data);

/// Riemann-sum L^p norm on the unit torus (probability normalization; ||1||_p = 1).
/// p = infinity gives the sup norm. p < 1 raises DomainError.
[[nodiscard]] double lp_norm(const GridFunction& f, double p);

/// <f, g> = |N|^{-1} sum f conj(g); conjugate-linear in g.
[[nodiscard]] cplx inner_product(const GridFunction& f, const GridFunction& g);

/// Raw-span counterparts used by the operator kernels.
[[nodiscard]] cplx inner_product(std::span<const cplx> f, std::span<const cplx> g);
[[nodiscard]] double l2_norm(std::span<const cplx> f);

/// Integral over the unit torus (the sample average).
[[nodiscard]] cplx mean(const GridFunction& f);

/// CZL1 grid file: "CZL1", u32 t, t x u32 d_s, (sum d_s) x u32 n_axis, then
/// interleaved little-endian f64 (re, im) samples in lattice order.
void write_czl1(std::ostream& out, const GridFunction& f);
[[nodiscard]] GridFunction read_czl1(std::istream& in);
void write_czl1_file(const std::string& path, const GridFunction& f);
[[nodiscard]] GridFunction read_czl1_file(const std::string& path);

}  // namespace czl
