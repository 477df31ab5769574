#pragma once

#include "czl/lattice.hpp"

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace czl {

/// Dyadic cube j 2^{-k} + [0, 2^{-k})^d of the unit torus.
struct DyadicCube {
    int scale = 0;
    std::vector<int> position;

    [[nodiscard]] double volume() const;
    /// True when `inner` is contained in this cube (equality included).
    [[nodiscard]] bool contains(const DyadicCube& inner) const;

    auto operator<=>(const DyadicCube&) const = default;
};

/// Product R = Q_1 x ... x Q_t of one dyadic cube per parameter.
struct DyadicRectangle {
    std::vector<DyadicCube> cubes;

    [[nodiscard]] double volume() const;
    [[nodiscard]] bool contains(const DyadicRectangle& inner) const;

    auto operator<=>(const DyadicRectangle&) const = default;
};

/// Per-parameter vectors eps_s in {0,1}^{d_s} \ {(1,...,1)}. A 0 entry selects the mean-zero
/// Haar factor on that axis, a 1 entry the normalized indicator.
struct Signature {
    std::vector<std::vector<int>> eps;

    auto operator<=>(const Signature&) const = default;
};

/// Signatures of one d-dimensional parameter in lexicographic order.
[[nodiscard]] std::vector<std::vector<int>> signatures(int d);
/// Lexicographic position of eps among signatures(d); eps must not be all ones.
[[nodiscard]] int signature_code(std::span<const int> eps);
[[nodiscard]] std::vector<int> signature_from_code(int code, int d);

/// Dyadic bookkeeping for one parameter: d axes of n samples each, n = 2^levels.
///
/// Cubes carrying wavelets live at scales 0..levels-1. The "extended" numbering
/// also includes the single-cell cubes at scale `levels`, which carry no wavelet but
/// are needed for point-set computations. Extended indices are grouped by scale,
/// coarse first, positions row-major within a scale; the wavelet cubes are exactly
/// the extended indices below cube_count().
///
/// Coefficients are stored in the Mallat layout: the wavelet of the cube at scale k,
/// position j and signature eps sits at per-axis offset j_i when eps_i = 1 and
/// 2^k + j_i when eps_i = 0; slot 0 holds the scaling (constant) coefficient.
class CubeIndexer {
public:
    CubeIndexer() = default;
    CubeIndexer(int dim, std::size_t n);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int levels() const { return levels_; }
    [[nodiscard]] std::size_t side() const { return n_; }
    /// Points (and coefficient slots) of this parameter: n^d.
    [[nodiscard]] std::size_t points() const { return points_; }
    [[nodiscard]] std::size_t cube_count() const { return scale_offset_[levels_]; }
    [[nodiscard]] std::size_t extended_count() const { return scale_offset_[levels_ + 1]; }
    [[nodiscard]] int signature_count() const { return (1 << dim_) - 1; }

    [[nodiscard]] std::size_t index(const DyadicCube& cube) const;
    [[nodiscard]] DyadicCube cube(std::size_t index) const;
    [[nodiscard]] int scale_of(std::size_t index) const { return scale_of_[index]; }
    /// Side length in cells.
    [[nodiscard]] std::size_t cells_per_side(std::size_t index) const {
        return n_ >> scale_of_[index];
    }
    [[nodiscard]] double volume(std::size_t index) const;
    /// Parent cube (scale - 1); index must have scale >= 1.
    [[nodiscard]] std::size_t parent(std::size_t index) const { return parent_[index]; }
    /// The 2^d children (scale + 1); index must have scale < levels.
    [[nodiscard]] std::span<const std::size_t> children(std::size_t index) const;
    /// Extended index of the single-cell cube holding parameter-local point p.
    [[nodiscard]] std::size_t cell_of_point(std::size_t p) const { return cell_of_point_[p]; }
    /// Parameter-local point covered by a cell cube.
    [[nodiscard]] std::size_t point_of_cell(std::size_t index) const;
    /// Parameter-local points inside the cube.
    [[nodiscard]] std::vector<std::size_t> points_of(std::size_t index) const;

    /// Coefficient slot of (cube, signature code) for a wavelet cube.
    [[nodiscard]] std::size_t slot(std::size_t cube_index, int code) const;
    /// Cube index for a slot, or -1 for the scaling slot.
    [[nodiscard]] long slot_cube(std::size_t slot) const { return slot_cube_[slot]; }
    [[nodiscard]] int slot_signature(std::size_t slot) const { return slot_code_[slot]; }

private:
    int dim_ = 0;
    int levels_ = 0;
    std::size_t n_ = 0;
    std::size_t points_ = 0;
    std::vector<std::size_t> scale_offset_;
    std::vector<int> scale_of_;
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> children_;
    std::vector<std::size_t> cell_of_point_;
    std::vector<long> slot_cube_;
    std::vector<int> slot_code_;
};

/// Row-major indexing of rectangles as tuples of wavelet-cube indices, one per parameter.
class RectangleSpace {
public:
    RectangleSpace() = default;
    explicit RectangleSpace(const ProductLattice& lattice);

    [[nodiscard]] const ProductLattice& lattice() const { return lattice_; }
    [[nodiscard]] int parameters() const { return static_cast<int>(indexers_.size()); }
    [[nodiscard]] const CubeIndexer& indexer(int s) const { return indexers_[s]; }
    /// Number of wavelet-bearing rectangles.
    [[nodiscard]] std::size_t count() const { return count_; }
    [[nodiscard]] std::size_t index(const DyadicRectangle& rect) const;
    [[nodiscard]] DyadicRectangle rectangle(std::size_t index) const;
    [[nodiscard]] std::vector<std::size_t> cube_indices(std::size_t index) const;
    [[nodiscard]] double volume(std::size_t index) const;
    /// Flat lattice points covered by the rectangle.
    [[nodiscard]] std::vector<std::size_t> points_of(std::size_t index) const;
    /// Marks the rectangle's points in a lattice-sized mask.
    void mark(std::size_t index, std::vector<std::uint8_t>& mask) const;

private:
    ProductLattice lattice_;
    std::vector<CubeIndexer> indexers_;
    std::vector<std::size_t> stride_;
    std::size_t count_ = 0;
};

/// Product Haar coefficients of a grid function, stored densely in the Mallat layout of
/// every parameter (see CubeIndexer). A flat slot is a scaling slot when at least one
/// parameter sits at its slot 0; all other slots are wavelet coefficients <f, w_R^eps>.
class WaveletCoefficients {
public:
    WaveletCoefficients() = default;
    WaveletCoefficients(ProductLattice lattice, std::vector<cplx> values);

    [[nodiscard]] const ProductLattice& lattice() const { return space_.lattice(); }
    [[nodiscard]] const RectangleSpace& space() const { return space_; }
    [[nodiscard]] std::span<const cplx> values() const { return values_; }
    [[nodiscard]] std::span<cplx> values() { return values_; }

    [[nodiscard]] std::size_t slot(const DyadicRectangle& rect, const Signature& sig) const;
    [[nodiscard]] cplx at(const DyadicRectangle& rect, const Signature& sig) const;
    void set(const DyadicRectangle& rect, const Signature& sig, cplx value);

    [[nodiscard]] bool is_scaling_slot(std::size_t flat) const;
    /// Rectangle index (in space()) of a wavelet slot; -1 for scaling slots.
    [[nodiscard]] long slot_rectangle(std::size_t flat) const;

    [[nodiscard]] double scaling_mass() const;
    [[nodiscard]] double wavelet_mass() const;
    /// Sum over signatures of |<f, w_R^eps>|^2, indexed by RectangleSpace index.
    [[nodiscard]] std::vector<double> rectangle_masses() const;

    WaveletCoefficients& operator*=(cplx c);

private:
    RectangleSpace space_;
    std::vector<cplx> values_;
};

/// Orthonormal product Haar transform. Axes of one parameter must share their length.
[[nodiscard]] WaveletCoefficients haar_transform(const GridFunction& f);
[[nodiscard]] GridFunction haar_inverse(const WaveletCoefficients& c);

/// The basis function w_R^eps sampled on the lattice.
[[nodiscard]] GridFunction haar_basis_function(const ProductLattice& lattice,
                                               const DyadicRectangle& rect, const Signature& sig);

/// Keeps the wavelet terms of rectangles in U (all signatures) and drops everything else,
/// including the scaling part.
[[nodiscard]] GridFunction project_onto_collection(const GridFunction& b,
                                                   std::span<const DyadicRectangle> collection);
[[nodiscard]] WaveletCoefficients project_coefficients(const WaveletCoefficients& c,
                                                       std::span<const std::size_t> rectangles);

/// Sum of the terms whose cube strictly contains J_s in every parameter, with the constant
/// (scaling) factor standing in for the coarser cubes cut off by the torus. On J it equals
/// the average of f over J.
[[nodiscard]] GridFunction scaling_projection(const GridFunction& f, const DyadicRectangle& J);

/// One JSON object per wavelet coefficient:
/// {"scales":[..],"positions":[[..],..],"signature":[[..],..],"re":..,"im":..}.
/// With skip_zero, exactly zero coefficients are omitted.
void dump_coefficients_jsonl(std::ostream& out, const WaveletCoefficients& c, bool skip_zero);

}  // namespace czl
