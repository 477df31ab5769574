#pragma once

#include "czl/lattice.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

// Independent reference computations used by the unit and acceptance tests.
namespace oracle {

using czl::cplx;

inline czl::GridFunction random_function(const czl::ProductLattice& lat, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<cplx> v(lat.size());
    for (auto& x : v) x = {g(rng), g(rng)};
    return czl::GridFunction(lat, std::move(v));
}

inline czl::GridFunction random_real_function(const czl::ProductLattice& lat, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<cplx> v(lat.size());
    for (auto& x : v) x = g(rng);
    return czl::GridFunction(lat, std::move(v));
}

// Multi-index of a flat point, axis order as stored.
inline std::vector<std::size_t> coords(const czl::ProductLattice& lat, std::size_t flat) {
    std::vector<std::size_t> c(lat.axis_count());
    for (std::size_t a = lat.axis_count(); a-- > 0;) {
        c[a] = flat % lat.n_axis()[a];
        flat /= lat.n_axis()[a];
    }
    return c;
}

// Unitary DFT by direct summation, O(size^2).
inline std::vector<cplx> direct_dft(const czl::GridFunction& f) {
    const auto& lat = f.lattice();
    const std::size_t n = lat.size();
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto kc = coords(lat, k);
        cplx acc{};
        for (std::size_t x = 0; x < n; ++x) {
            const auto xc = coords(lat, x);
            double phase = 0.0;
            for (std::size_t a = 0; a < kc.size(); ++a) {
                phase += static_cast<double>(kc[a] * xc[a]) / static_cast<double>(lat.n_axis()[a]);
            }
            acc += f[x] * std::polar(1.0, -2.0 * std::numbers::pi * phase);
        }
        out[k] = acc / std::sqrt(static_cast<double>(n));
    }
    return out;
}

inline cplx direct_inner(const czl::GridFunction& f, const czl::GridFunction& g) {
    cplx acc{};
    for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * std::conj(g[i]);
    return acc / static_cast<double>(f.size());
}

inline double max_abs_diff(std::span<const cplx> a, std::span<const cplx> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace oracle
