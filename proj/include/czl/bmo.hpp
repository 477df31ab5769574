#pragma once

#include "czl/wavelet.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace czl {

/// Lattice point set stored as a 0/1 mask over flat lattice indices.
using PointMask = std::vector<std::uint8_t>;

/// Finite collection of wavelet-bearing dyadic rectangles (RectangleSpace indices) with
/// its shadow.
class RectangleCollection {
public:
    RectangleCollection() = default;
    RectangleCollection(const RectangleSpace& space, std::vector<std::size_t> rectangles);
    static RectangleCollection from_rectangles(const RectangleSpace& space, std::span<const DyadicRectangle> rects);

    [[nodiscard]] const RectangleSpace& space() const { return space_; }
    /// Sorted, without duplicates.
    [[nodiscard]] const std::vector<std::size_t>& rectangles() const { return rects_; }
    [[nodiscard]] std::size_t size() const { return rects_.size(); }
    [[nodiscard]] bool empty() const { return rects_.empty(); }
    [[nodiscard]] const PointMask& shadow() const { return shadow_; }
    [[nodiscard]] std::size_t shadow_points() const { return shadow_points_; }
    [[nodiscard]] double shadow_measure() const;
    [[nodiscard]] bool is_single_rectangle() const { return rects_.size() == 1; }
    /// (s, cube index) shared by all rectangles in parameter s, smallest such s; only for
    /// nonempty collections with at least two parameters.
    [[nodiscard]] std::optional<std::pair<int, std::size_t>> fixed_coordinate() const;
    [[nodiscard]] std::vector<DyadicRectangle> as_rectangles() const;

private:
    RectangleSpace space_;
    std::vector<std::size_t> rects_;
    PointMask shadow_;
    std::size_t shadow_points_ = 0;
};

/// Sum over R in U and all signatures of |<b, w_R^eps>|^2.
[[nodiscard]] double coefficient_mass(const WaveletCoefficients& b, const RectangleCollection& U);
/// Sum of rectangle masses over every wavelet rectangle contained in the point set.
[[nodiscard]] double open_set_mass(const WaveletCoefficients& b, const PointMask& set);
/// (open_set_mass / |set|)^(1/2); 0 for the empty set.
[[nodiscard]] double open_set_value(const WaveletCoefficients& b, const PointMask& set);

struct RectangularBmoResult {
    double value = 0.0;
    /// Maximizing rectangle (RectangleSpace index); ties go to the smallest index.
    std::size_t rectangle = 0;
};
/// Exact maximum over dyadic rectangles R of (|R|^-1 sum_{R' in R} mass(R'))^(1/2).
[[nodiscard]] RectangularBmoResult rectangular_bmo(const WaveletCoefficients& b);

struct MinusOneResult {
    /// Value of the returned collection (a valid lower bound).
    double certified = 0.0;
    /// Value found by the search; equals `certified`.
    double heuristic = 0.0;
    /// True when the search is exact (two parameters).
    bool exact = false;
    int parameter = -1;
    std::size_t cube = 0;
    std::vector<std::size_t> collection;
};
/// Supremum over collections whose rectangles share one cube in some parameter. With two
/// parameters the inner problem is solved exactly (ratio maximization over unions of
/// dyadic cubes); with more it uses greedy growth by mass per added shadow.
[[nodiscard]] MinusOneResult bmo_minus_one(const WaveletCoefficients& b);

struct ProductBmoOptions {
    /// Number of randomized greedy restarts after the deterministic one.
    std::size_t budget = 4;
    std::uint64_t seed = 0;
    /// Largest number of rectangles in a greedy union; 0 means unlimited.
    std::size_t max_rectangles = 0;
    /// Candidates evaluated exactly per greedy step.
    std::size_t candidates_per_step = 8;
    /// Also evaluate the shadow of the bmo_minus_one collection.
    bool include_minus_one = true;
};

struct ProductBmoResult {
    double value = 0.0;
    std::vector<std::size_t> collection;
    double shadow_measure = 0.0;
    /// "rectangle", "greedy", "minus_one" or "exhaustive".
    std::string source;
};
/// Certified lower bound for the product BMO norm: the best value of
/// (|sh(U)|^-1 sum_{R in sh(U)} mass(R))^(1/2) over all single rectangles, greedy unions
/// and (optionally) the bmo_minus_one collection.
[[nodiscard]] ProductBmoResult product_bmo_lower(const WaveletCoefficients& b, const ProductBmoOptions& options = {});
/// Same value maximized over every union of at most max_union rectangles. Throws
/// PreconditionError when the rectangle count exceeds `max_rectangles_in_space`.
[[nodiscard]] ProductBmoResult product_bmo_exhaustive(const WaveletCoefficients& b, int max_union,
                                                      std::size_t max_rectangles_in_space = 256);

/// Strong dyadic maximal function of the indicator of a point set: at each point the
/// largest density of the set in a dyadic rectangle (cells included) containing it.
[[nodiscard]] std::vector<double> strong_maximal_function(const RectangleSpace& space, const PointMask& set);

struct EnlargementResult {
    PointMask V;
    std::size_t v_points = 0;
    /// V = {strong maximal function > threshold}.
    double threshold = 1.0;
    double a = 0.0;
    /// E(R) per rectangle of the collection, in its order; +inf when V is the whole torus.
    std::vector<double> E;
    /// Shadow already covers the torus: V = sh(U), E = 1.
    bool degenerate = false;

    [[nodiscard]] double measure() const;
};

/// Points of the open dilation mu R: cells whose centers lie strictly inside the box of
/// side mu times the side of R per parameter, centred at R's centre (periodic distance).
[[nodiscard]] PointMask dilated_rectangle(const RectangleSpace& space, std::size_t rect, double mu);
/// Largest mu >= 1 with dilated_rectangle(R, mu) inside V (+inf when V is everything).
[[nodiscard]] double embeddedness(const RectangleSpace& space, std::size_t rect, const PointMask& V);

/// V = {strong maximal function of 1_sh(U) > lambda} with the smallest admissible lambda
/// satisfying |V| < (1 + a)|sh(U)|, found by bisection over the distinct values of the
/// maximal function, and E(R) = embeddedness(R, V).
[[nodiscard]] EnlargementResult journe_enlarge(const RectangleCollection& U, double a);

/// Coefficients of U scaled by E(R)^-cexp, everything else zeroed. E follows the order of
/// U.rectangles().
[[nodiscard]] WaveletCoefficients damped_projection(const WaveletCoefficients& b, const RectangleCollection& U,
                                                    std::span<const double> E, double cexp);

}  // namespace czl
