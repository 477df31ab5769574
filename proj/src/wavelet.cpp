#include "czl/wavelet.hpp"

#include "czl/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <ostream>

namespace czl {

namespace {

int log2_exact(std::size_t n) {
    int k = 0;
    while ((std::size_t{1} << k) < n) ++k;
    return k;
}

std::size_t ipow(std::size_t base, int exp) {
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

// Visits every multi-index of [0, L)^d whose coordinate `fixed` is zero, passing the
// flat offset in a row-major block of side n.
template <typename Fn>
void for_each_line(int d, std::size_t n, std::size_t L, int fixed, Fn&& fn) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    std::vector<std::size_t> stride(static_cast<std::size_t>(d));
    for (int a = d - 1, st = 1; a >= 0; --a) {
        stride[a] = static_cast<std::size_t>(st);
        st *= static_cast<int>(n);
    }
    while (true) {
        std::size_t base = 0;
        for (int a = 0; a < d; ++a) base += idx[a] * stride[a];
        fn(base, stride[fixed]);
        int a = d - 1;
        for (; a >= 0; --a) {
            if (a == fixed) continue;
            if (++idx[a] < L) break;
            idx[a] = 0;
        }
        if (a < 0) break;
    }
}

void mallat_forward(std::span<cplx> x, int d, std::size_t n, std::vector<cplx>& tmp) {
    const double r = std::numbers::sqrt2 / 2.0;
    for (std::size_t L = n; L >= 2; L /= 2) {
        const std::size_t h = L / 2;
        for (int axis = 0; axis < d; ++axis) {
            for_each_line(d, n, L, axis, [&](std::size_t base, std::size_t st) {
                for (std::size_t q = 0; q < L; ++q) tmp[q] = x[base + q * st];
                for (std::size_t q = 0; q < h; ++q) {
                    const cplx a = tmp[2 * q];
                    const cplx b = tmp[2 * q + 1];
                    x[base + q * st] = (a + b) * r;
                    x[base + (h + q) * st] = (b - a) * r;
                }
            });
        }
    }
}

void mallat_inverse(std::span<cplx> x, int d, std::size_t n, std::vector<cplx>& tmp) {
    const double r = std::numbers::sqrt2 / 2.0;
    for (std::size_t L = 2; L <= n; L *= 2) {
        const std::size_t h = L / 2;
        for (int axis = d - 1; axis >= 0; --axis) {
            for_each_line(d, n, L, axis, [&](std::size_t base, std::size_t st) {
                for (std::size_t q = 0; q < h; ++q) {
                    const cplx s = x[base + q * st];
                    const cplx w = x[base + (h + q) * st];
                    tmp[2 * q] = (s - w) * r;
                    tmp[2 * q + 1] = (s + w) * r;
                }
                for (std::size_t q = 0; q < L; ++q) x[base + q * st] = tmp[q];
            });
        }
    }
}

// Applies `op` to the parameter-s block of every fiber of the remaining parameters.
template <typename Op>
void for_each_parameter_block(const ProductLattice& lat, int s, std::span<cplx> data, Op&& op) {
    const std::size_t P = lat.parameter_size(s);
    const std::size_t inner = lat.parameter_stride(s);
    const std::size_t outer = lat.size() / (P * inner);
    std::vector<cplx> block(P);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * P * inner + i;
            for (std::size_t p = 0; p < P; ++p) block[p] = data[base + p * inner];
            op(std::span<cplx>(block));
            for (std::size_t p = 0; p < P; ++p) data[base + p * inner] = block[p];
        }
    }
}

void require_cubic(const ProductLattice& lat) {
    for (int s = 0; s < lat.parameters(); ++s) {
        if (!lat.parameter_is_cubic(s)) {
            throw StructuralError("Haar transform needs equal axis lengths within parameter " +
                                  std::to_string(s + 1));
        }
    }
}

}  // namespace

double DyadicCube::volume() const {
    return std::ldexp(1.0, -scale * static_cast<int>(position.size()));
}

bool DyadicCube::contains(const DyadicCube& inner) const {
    if (inner.position.size() != position.size() || inner.scale < scale) return false;
    const int shift = inner.scale - scale;
    for (std::size_t i = 0; i < position.size(); ++i) {
        if ((inner.position[i] >> shift) != position[i]) return false;
    }
    return true;
}

double DyadicRectangle::volume() const {
    double v = 1.0;
    for (const auto& q : cubes) v *= q.volume();
    return v;
}

bool DyadicRectangle::contains(const DyadicRectangle& inner) const {
    if (inner.cubes.size() != cubes.size()) return false;
    for (std::size_t s = 0; s < cubes.size(); ++s) {
        if (!cubes[s].contains(inner.cubes[s])) return false;
    }
    return true;
}

std::vector<std::vector<int>> signatures(int d) {
    std::vector<std::vector<int>> out;
    for (int code = 0; code < (1 << d) - 1; ++code) out.push_back(signature_from_code(code, d));
    return out;
}

int signature_code(std::span<const int> eps) {
    int code = 0;
    for (int e : eps) {
        if (e != 0 && e != 1) throw DomainError("signature entries must be 0 or 1");
        code = 2 * code + e;
    }
    if (code == (1 << eps.size()) - 1) throw DomainError("signature must not be all ones");
    return code;
}

std::vector<int> signature_from_code(int code, int d) {
    std::vector<int> eps(static_cast<std::size_t>(d));
    for (int i = d - 1; i >= 0; --i) {
        eps[i] = code & 1;
        code >>= 1;
    }
    return eps;
}

CubeIndexer::CubeIndexer(int dim, std::size_t n)
    : dim_(dim), levels_(log2_exact(n)), n_(n), points_(ipow(n, dim)) {
    const auto d = static_cast<std::size_t>(dim);
    scale_offset_.resize(static_cast<std::size_t>(levels_) + 2);
    scale_offset_[0] = 0;
    for (int k = 0; k <= levels_; ++k) {
        scale_offset_[k + 1] = scale_offset_[k] + ipow(std::size_t{1} << k, dim);
    }
    const std::size_t total = scale_offset_[levels_ + 1];
    scale_of_.resize(total);
    parent_.assign(total, 0);
    children_.assign(scale_offset_[levels_] << d, 0);
    for (int k = 0; k <= levels_; ++k) {
        for (std::size_t i = scale_offset_[k]; i < scale_offset_[k + 1]; ++i) scale_of_[i] = k;
    }
    for (std::size_t i = 0; i < total; ++i) {
        const DyadicCube q = cube(i);
        if (q.scale > 0) {
            DyadicCube up{q.scale - 1, q.position};
            for (auto& p : up.position) p >>= 1;
            parent_[i] = index(up);
        }
        if (q.scale < levels_) {
            for (std::size_t c = 0; c < (std::size_t{1} << d); ++c) {
                DyadicCube down{q.scale + 1, q.position};
                for (std::size_t a = 0; a < d; ++a) {
                    down.position[a] = 2 * down.position[a] + static_cast<int>((c >> (d - 1 - a)) & 1u);
                }
                children_[(i << d) + c] = index(down);
            }
        }
    }
    cell_of_point_.resize(points_);
    for (std::size_t p = 0; p < points_; ++p) cell_of_point_[p] = scale_offset_[levels_] + p;

    slot_cube_.assign(points_, -1);
    slot_code_.assign(points_, -1);
    std::vector<std::size_t> m(d);
    for (std::size_t slot = 0; slot < points_; ++slot) {
        std::size_t rem = slot;
        int k = -1;
        for (std::size_t a = d; a-- > 0;) {
            m[a] = rem % n_;
            rem /= n_;
            if (m[a] > 0) k = std::max(k, log2_exact(m[a] + 1) - 1);
        }
        if (k < 0) continue;
        DyadicCube q{k, std::vector<int>(d)};
        int code = 0;
        const std::size_t base = std::size_t{1} << k;
        for (std::size_t a = 0; a < d; ++a) {
            const bool detail = m[a] >= base;
            q.position[a] = static_cast<int>(detail ? m[a] - base : m[a]);
            code = 2 * code + (detail ? 0 : 1);
        }
        slot_cube_[slot] = static_cast<long>(index(q));
        slot_code_[slot] = code;
    }
}

std::size_t CubeIndexer::index(const DyadicCube& q) const {
    if (q.scale < 0 || q.scale > levels_ || q.position.size() != static_cast<std::size_t>(dim_)) {
        throw StructuralError("dyadic cube outside the lattice resolution");
    }
    const std::size_t side = std::size_t{1} << q.scale;
    std::size_t lin = 0;
    for (int j : q.position) {
        if (j < 0 || static_cast<std::size_t>(j) >= side) throw StructuralError("dyadic cube position out of range");
        lin = lin * side + static_cast<std::size_t>(j);
    }
    return scale_offset_[q.scale] + lin;
}

DyadicCube CubeIndexer::cube(std::size_t index) const {
    int k = 0;
    while (index >= scale_offset_[k + 1]) ++k;
    std::size_t lin = index - scale_offset_[k];
    const std::size_t side = std::size_t{1} << k;
    DyadicCube q{k, std::vector<int>(static_cast<std::size_t>(dim_))};
    for (int a = dim_ - 1; a >= 0; --a) {
        q.position[a] = static_cast<int>(lin % side);
        lin /= side;
    }
    return q;
}

double CubeIndexer::volume(std::size_t index) const {
    return std::ldexp(1.0, -scale_of_[index] * dim_);
}

std::span<const std::size_t> CubeIndexer::children(std::size_t index) const {
    const std::size_t c = std::size_t{1} << dim_;
    return std::span<const std::size_t>(children_).subspan(index * c, c);
}

std::size_t CubeIndexer::point_of_cell(std::size_t index) const {
    return index - scale_offset_[levels_];
}

std::vector<std::size_t> CubeIndexer::points_of(std::size_t index) const {
    const DyadicCube q = cube(index);
    const std::size_t c = n_ >> q.scale;
    std::vector<std::size_t> out{0};
    for (int a = 0; a < dim_; ++a) {
        std::vector<std::size_t> next;
        next.reserve(out.size() * c);
        for (std::size_t base : out) {
            for (std::size_t r = 0; r < c; ++r) {
                next.push_back(base * n_ + static_cast<std::size_t>(q.position[a]) * c + r);
            }
        }
        out = std::move(next);
    }
    return out;
}

std::size_t CubeIndexer::slot(std::size_t cube_index, int code) const {
    if (cube_index >= cube_count()) throw StructuralError("coefficient at a cube finer than the lattice resolution");
    const DyadicCube q = cube(cube_index);
    const auto eps = signature_from_code(code, dim_);
    const std::size_t base = std::size_t{1} << q.scale;
    std::size_t s = 0;
    for (int a = 0; a < dim_; ++a) {
        const std::size_t off = eps[a] ? static_cast<std::size_t>(q.position[a])
                                       : base + static_cast<std::size_t>(q.position[a]);
        s = s * n_ + off;
    }
    return s;
}

RectangleSpace::RectangleSpace(const ProductLattice& lattice) : lattice_(lattice) {
    require_cubic(lattice);
    const int t = lattice.parameters();
    indexers_.reserve(static_cast<std::size_t>(t));
    for (int s = 0; s < t; ++s) {
        indexers_.emplace_back(lattice.dim(s), lattice.parameter_axes(s)[0]);
    }
    stride_.resize(static_cast<std::size_t>(t));
    std::size_t st = 1;
    for (int s = t - 1; s >= 0; --s) {
        stride_[s] = st;
        st *= indexers_[s].cube_count();
    }
    count_ = st;
}

std::size_t RectangleSpace::index(const DyadicRectangle& rect) const {
    if (rect.cubes.size() != indexers_.size()) throw StructuralError("rectangle has the wrong number of parameters");
    std::size_t idx = 0;
    for (std::size_t s = 0; s < indexers_.size(); ++s) {
        const std::size_t c = indexers_[s].index(rect.cubes[s]);
        if (c >= indexers_[s].cube_count()) throw StructuralError("rectangle finer than the lattice resolution");
        idx += c * stride_[s];
    }
    return idx;
}

std::vector<std::size_t> RectangleSpace::cube_indices(std::size_t index) const {
    std::vector<std::size_t> out(indexers_.size());
    for (std::size_t s = 0; s < indexers_.size(); ++s) {
        out[s] = (index / stride_[s]) % indexers_[s].cube_count();
    }
    return out;
}

DyadicRectangle RectangleSpace::rectangle(std::size_t index) const {
    DyadicRectangle r;
    const auto cubes = cube_indices(index);
    for (std::size_t s = 0; s < cubes.size(); ++s) r.cubes.push_back(indexers_[s].cube(cubes[s]));
    return r;
}

double RectangleSpace::volume(std::size_t index) const {
    double v = 1.0;
    const auto cubes = cube_indices(index);
    for (std::size_t s = 0; s < cubes.size(); ++s) v *= indexers_[s].volume(cubes[s]);
    return v;
}

std::vector<std::size_t> RectangleSpace::points_of(std::size_t index) const {
    const auto cubes = cube_indices(index);
    std::vector<std::size_t> out{0};
    for (std::size_t s = 0; s < cubes.size(); ++s) {
        const auto local = indexers_[s].points_of(cubes[s]);
        const std::size_t st = lattice_.parameter_stride(static_cast<int>(s));
        std::vector<std::size_t> next;
        next.reserve(out.size() * local.size());
        for (std::size_t base : out) {
            for (std::size_t p : local) next.push_back(base + p * st);
        }
        out = std::move(next);
    }
    return out;
}

void RectangleSpace::mark(std::size_t index, std::vector<std::uint8_t>& mask) const {
    for (std::size_t p : points_of(index)) mask[p] = 1;
}

WaveletCoefficients::WaveletCoefficients(ProductLattice lattice, std::vector<cplx> values)
    : space_(lattice), values_(std::move(values)) {
    if (values_.size() != lattice.size()) throw StructuralError("coefficient count does not match lattice");
}

std::size_t WaveletCoefficients::slot(const DyadicRectangle& rect, const Signature& sig) const {
    const auto& lat = lattice();
    if (rect.cubes.size() != static_cast<std::size_t>(lat.parameters()) ||
        sig.eps.size() != rect.cubes.size()) {
        throw StructuralError("rectangle/signature does not match the lattice parameters");
    }
    std::size_t flat = 0;
    for (int s = 0; s < lat.parameters(); ++s) {
        const auto& ix = space_.indexer(s);
        const std::size_t c = ix.index(rect.cubes[s]);
        flat += ix.slot(c, signature_code(sig.eps[s])) * lat.parameter_stride(s);
    }
    return flat;
}

cplx WaveletCoefficients::at(const DyadicRectangle& rect, const Signature& sig) const {
    return values_[slot(rect, sig)];
}

void WaveletCoefficients::set(const DyadicRectangle& rect, const Signature& sig, cplx value) {
    values_[slot(rect, sig)] = value;
}

bool WaveletCoefficients::is_scaling_slot(std::size_t flat) const {
    const auto& lat = lattice();
    for (int s = 0; s < lat.parameters(); ++s) {
        if (space_.indexer(s).slot_cube(lat.parameter_index(flat, s)) < 0) return true;
    }
    return false;
}

long WaveletCoefficients::slot_rectangle(std::size_t flat) const {
    const auto& lat = lattice();
    long idx = 0;
    long stride = 1;
    for (int s = lat.parameters() - 1; s >= 0; --s) {
        const auto& ix = space_.indexer(s);
        const long c = ix.slot_cube(lat.parameter_index(flat, s));
        if (c < 0) return -1;
        idx += c * stride;
        stride *= static_cast<long>(ix.cube_count());
    }
    return idx;
}

double WaveletCoefficients::scaling_mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (is_scaling_slot(i)) m += std::norm(values_[i]);
    }
    return m;
}

double WaveletCoefficients::wavelet_mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!is_scaling_slot(i)) m += std::norm(values_[i]);
    }
    return m;
}

std::vector<double> WaveletCoefficients::rectangle_masses() const {
    std::vector<double> mass(space_.count(), 0.0);
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const long r = slot_rectangle(i);
        if (r >= 0) mass[static_cast<std::size_t>(r)] += std::norm(values_[i]);
    }
    return mass;
}

WaveletCoefficients& WaveletCoefficients::operator*=(cplx c) {
    for (auto& v : values_) v *= c;
    return *this;
}

WaveletCoefficients haar_transform(const GridFunction& f) {
    const auto& lat = f.lattice();
    require_cubic(lat);
    std::vector<cplx> data(f.values().begin(), f.values().end());
    const double scale = 1.0 / std::sqrt(static_cast<double>(lat.size()));
    for (auto& v : data) v *= scale;
    for (int s = 0; s < lat.parameters(); ++s) {
        const std::size_t n = lat.parameter_axes(s)[0];
        std::vector<cplx> tmp(n);
        for_each_parameter_block(lat, s, data, [&](std::span<cplx> block) {
            mallat_forward(block, lat.dim(s), n, tmp);
        });
    }
    return WaveletCoefficients(lat, std::move(data));
}

GridFunction haar_inverse(const WaveletCoefficients& c) {
    const auto& lat = c.lattice();
    std::vector<cplx> data(c.values().begin(), c.values().end());
    for (int s = 0; s < lat.parameters(); ++s) {
        const std::size_t n = lat.parameter_axes(s)[0];
        std::vector<cplx> tmp(n);
        for_each_parameter_block(lat, s, data, [&](std::span<cplx> block) {
            mallat_inverse(block, lat.dim(s), n, tmp);
        });
    }
    const double scale = std::sqrt(static_cast<double>(lat.size()));
    for (auto& v : data) v *= scale;
    return GridFunction(lat, std::move(data));
}

GridFunction haar_basis_function(const ProductLattice& lattice, const DyadicRectangle& rect,
                                 const Signature& sig) {
    require_cubic(lattice);
    const int t = lattice.parameters();
    if (rect.cubes.size() != static_cast<std::size_t>(t) || sig.eps.size() != rect.cubes.size()) {
        throw StructuralError("rectangle/signature does not match the lattice parameters");
    }
    for (const auto& eps : sig.eps) (void)signature_code(eps);
    GridFunction out(lattice);
    std::vector<std::size_t> coord(lattice.axis_count());
    for (std::size_t flat = 0; flat < lattice.size(); ++flat) {
        std::size_t rem = flat;
        for (std::size_t a = lattice.axis_count(); a-- > 0;) {
            coord[a] = rem % lattice.n_axis()[a];
            rem /= lattice.n_axis()[a];
        }
        double v = 1.0;
        for (int s = 0; s < t && v != 0.0; ++s) {
            const auto& q = rect.cubes[s];
            const std::size_t n = lattice.parameter_axes(s)[0];
            if (q.scale < 0 || q.scale >= std::countr_zero(n)) {
                throw StructuralError("rectangle finer than the lattice resolution");
            }
            const std::size_t cells = n >> q.scale;
            for (int i = 0; i < lattice.dim(s); ++i) {
                const std::size_t m = coord[lattice.first_axis(s) + static_cast<std::size_t>(i)];
                if (m / cells != static_cast<std::size_t>(q.position[i])) {
                    v = 0.0;
                    break;
                }
                double amp = std::sqrt(std::ldexp(1.0, q.scale));
                if (sig.eps[s][i] == 0) amp *= (m % cells) < cells / 2 ? -1.0 : 1.0;
                v *= amp;
            }
        }
        out[flat] = v;
    }
    return out;
}

WaveletCoefficients project_coefficients(const WaveletCoefficients& c,
                                         std::span<const std::size_t> rectangles) {
    std::vector<std::uint8_t> keep(c.space().count(), 0);
    for (std::size_t r : rectangles) {
        if (r >= keep.size()) throw StructuralError("rectangle index out of range");
        keep[r] = 1;
    }
    WaveletCoefficients out = c;
    auto vals = out.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const long r = c.slot_rectangle(i);
        if (r < 0 || !keep[static_cast<std::size_t>(r)]) vals[i] = 0.0;
    }
    return out;
}

GridFunction project_onto_collection(const GridFunction& b,
                                     std::span<const DyadicRectangle> collection) {
    auto coeffs = haar_transform(b);
    std::vector<std::size_t> idx;
    idx.reserve(collection.size());
    for (const auto& r : collection) idx.push_back(coeffs.space().index(r));
    return haar_inverse(project_coefficients(coeffs, idx));
}

GridFunction scaling_projection(const GridFunction& f, const DyadicRectangle& J) {
    auto coeffs = haar_transform(f);
    const auto& lat = coeffs.lattice();
    const int t = lat.parameters();
    if (J.cubes.size() != static_cast<std::size_t>(t)) throw StructuralError("rectangle has the wrong number of parameters");
    // Per parameter: which local slots survive.
    std::vector<std::vector<std::uint8_t>> keep(static_cast<std::size_t>(t));
    for (int s = 0; s < t; ++s) {
        const auto& ix = coeffs.space().indexer(s);
        static_cast<void>(ix.index(J.cubes[s]));
        keep[s].assign(ix.points(), 0);
        for (std::size_t p = 0; p < ix.points(); ++p) {
            const long c = ix.slot_cube(p);
            if (c < 0) {
                keep[s][p] = 1;
                continue;
            }
            const DyadicCube q = ix.cube(static_cast<std::size_t>(c));
            keep[s][p] = q.scale < J.cubes[s].scale && q.contains(J.cubes[s]) ? 1 : 0;
        }
    }
    auto vals = coeffs.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        for (int s = 0; s < t; ++s) {
            if (!keep[s][lat.parameter_index(i, s)]) {
                vals[i] = 0.0;
                break;
            }
        }
    }
    return haar_inverse(coeffs);
}

void dump_coefficients_jsonl(std::ostream& out, const WaveletCoefficients& c, bool skip_zero) {
    const auto& lat = c.lattice();
    const int t = lat.parameters();
    for (std::size_t i = 0; i < c.values().size(); ++i) {
        if (c.is_scaling_slot(i)) continue;
        const cplx v = c.values()[i];
        if (skip_zero && v == cplx{}) continue;
        nlohmann::json scales = nlohmann::json::array();
        nlohmann::json positions = nlohmann::json::array();
        nlohmann::json signature = nlohmann::json::array();
        for (int s = 0; s < t; ++s) {
            const auto& ix = c.space().indexer(s);
            const std::size_t local = lat.parameter_index(i, s);
            const DyadicCube q = ix.cube(static_cast<std::size_t>(ix.slot_cube(local)));
            scales.push_back(q.scale);
            positions.push_back(q.position);
            signature.push_back(signature_from_code(ix.slot_signature(local), lat.dim(s)));
        }
        nlohmann::json line{{"scales", scales}, {"positions", positions},
                            {"signature", signature}, {"re", v.real()}, {"im", v.imag()}};
        out << line.dump() << '\n';
    }
}

}  // namespace czl
