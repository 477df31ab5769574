#include "czl/error.hpp"
#include "czl/lattice.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using czl::cplx;
using czl::GridFunction;
using czl::ProductLattice;

TEST_CASE("lattice rejects malformed shapes") {
    CHECK_THROWS_AS(ProductLattice({1}, {6}), czl::StructuralError);
    CHECK_THROWS_AS(ProductLattice({1}, {2}), czl::StructuralError);
    CHECK_THROWS_AS(ProductLattice({2}, {8}), czl::StructuralError);
    CHECK_THROWS_AS(ProductLattice({}, {}), czl::StructuralError);
    const ProductLattice lat({2, 1}, {8, 4, 16});
    CHECK(lat.size() == 8 * 4 * 16);
    CHECK(lat.parameter_stride(0) == 16);
    CHECK(lat.parameter_stride(1) == 1);
    CHECK_FALSE(lat.parameter_is_cubic(0));
}

TEST_CASE("grid function rejects wrong counts and non-finite samples") {
    const auto lat = ProductLattice::uniform({1}, 4);
    CHECK_THROWS_AS(GridFunction(lat, std::vector<cplx>(3)), czl::StructuralError);
    std::vector<cplx> v(4);
    v[2] = std::nan("");
    CHECK_THROWS_AS(GridFunction(lat, v), czl::StructuralError);
}

TEST_CASE("signed frequency places Nyquist at -n/2") {
    CHECK(czl::signed_frequency(0, 8) == 0);
    CHECK(czl::signed_frequency(3, 8) == 3);
    CHECK(czl::signed_frequency(4, 8) == -4);
    CHECK(czl::signed_frequency(7, 8) == -1);
}

TEST_CASE("fft of a delta on a 16-point line is constant 1/4") {
    const auto lat = ProductLattice::uniform({1}, 16);
    GridFunction f(lat);
    f[0] = 1.0;
    const auto F = czl::fft_forward(f);
    for (const auto& v : F.values()) CHECK(std::abs(v - cplx(0.25)) < 1e-15);
}

TEST_CASE("fft of a constant concentrates at zero frequency") {
    const auto lat = ProductLattice::uniform({2}, 8);
    GridFunction f(lat, std::vector<cplx>(lat.size(), cplx(3.0, -1.0)));
    const auto F = czl::fft_forward(f);
    CHECK(std::abs(F[0] - cplx(3.0, -1.0) * 8.0) < 1e-12);
    for (std::size_t i = 1; i < F.size(); ++i) CHECK(std::abs(F[i]) < 1e-12);
}

TEST_CASE("fft matches direct DFT and satisfies Parseval") {
    const auto lat = ProductLattice::uniform({2}, 16);
    const auto f = oracle::random_function(lat, 7);
    const auto F = czl::fft_forward(f);
    const auto D = oracle::direct_dft(f);
    CHECK(oracle::max_abs_diff(F.values(), D) < 1e-11);
    const double n2 = czl::lp_norm(f, 2.0);
    CHECK(std::abs(czl::lp_norm(F, 2.0) - n2) <= 1e-12 * n2);
}

TEST_CASE("fft round trip over a matrix of shapes") {
    const std::vector<ProductLattice> shapes{
        ProductLattice::uniform({1}, 4),       ProductLattice::uniform({1}, 64),
        ProductLattice::uniform({2}, 8),       ProductLattice::uniform({1, 1}, 16),
        ProductLattice({2, 1}, {4, 8, 16}),    ProductLattice::uniform({2, 2}, 8),
        ProductLattice::uniform({3}, 8),       ProductLattice::uniform({1, 1, 1}, 4)};
    std::uint64_t seed = 1;
    for (const auto& lat : shapes) {
        const auto f = oracle::random_function(lat, seed++);
        const auto back = czl::fft_inverse(czl::fft_forward(f));
        const double n = czl::lp_norm(f, 2.0);
        CHECK(czl::lp_norm(back - f, 2.0) <= 1e-12 * n);
    }
}

TEST_CASE("lp norm normalization and counting") {
    const auto lat = ProductLattice::uniform({1, 1}, 8);
    GridFunction one(lat, std::vector<cplx>(lat.size(), 1.0));
    for (double p : {1.0, 2.0, 3.5, 8.0, static_cast<double>(INFINITY)}) CHECK(czl::lp_norm(one, p) == doctest::Approx(1.0).epsilon(1e-15));
    GridFunction half(lat);
    for (std::size_t i = 0; i < lat.size() / 2; ++i) half[i] = 1.0;
    CHECK(czl::lp_norm(half, 2.0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK_THROWS_AS(static_cast<void>(czl::lp_norm(half, 0.5)), czl::DomainError);
}

TEST_CASE("lp norm is monotone in p for functions bounded by 1") {
    const auto lat = ProductLattice::uniform({2}, 8);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto f = oracle::random_function(lat, seed);
        double m = 0.0;
        for (const auto& v : f.values()) m = std::max(m, std::abs(v));
        f *= 1.0 / m;
        double prev = 0.0;
        for (double p : {1.0, 1.5, 2.0, 4.0, 8.0, 32.0, static_cast<double>(INFINITY)}) {
            const double v = czl::lp_norm(f, p);
            CHECK(v >= prev - 1e-14);
            prev = v;
        }
    }
}

TEST_CASE("inner product conventions") {
    const auto lat = ProductLattice::uniform({1, 1}, 8);
    const auto f = oracle::random_function(lat, 3);
    const auto g = oracle::random_function(lat, 4);
    const cplx fg = czl::inner_product(f, g);
    CHECK(std::abs(fg - oracle::direct_inner(f, g)) < 1e-14);
    CHECK(std::abs(fg - std::conj(czl::inner_product(g, f))) < 1e-14);
    const double n = czl::lp_norm(f, 2.0);
    CHECK(std::abs(czl::inner_product(f, f) - n * n) < 1e-12 * n * n);
    const auto unit = (1.0 / n) * f;
    CHECK(std::abs(czl::inner_product(unit, unit) - 1.0) < 1e-14);
    const auto other = ProductLattice::uniform({2}, 8);
    CHECK_THROWS_AS(static_cast<void>(czl::inner_product(f, GridFunction(other))), czl::StructuralError);
}

TEST_CASE("CZL1 round trip and rejection") {
    const ProductLattice lat({2, 1}, {4, 8, 16});
    const auto f = oracle::random_function(lat, 11);
    std::stringstream ss;
    czl::write_czl1(ss, f);
    const auto g = czl::read_czl1(ss);
    CHECK(g.lattice() == lat);
    CHECK(oracle::max_abs_diff(f.values(), g.values()) == 0.0);

    std::string bytes;
    {
        std::stringstream s2;
        czl::write_czl1(s2, f);
        bytes = s2.str();
    }
    std::string bad_magic = bytes;
    bad_magic[3] = '2';
    std::stringstream s3(bad_magic);
    CHECK_THROWS_AS(static_cast<void>(czl::read_czl1(s3)), czl::StructuralError);

    std::string bad_axis = bytes;
    // First axis length lives after magic, t and two dims.
    bad_axis[4 + 4 + 8] = 6;
    std::stringstream s4(bad_axis);
    CHECK_THROWS_AS(static_cast<void>(czl::read_czl1(s4)), czl::StructuralError);
}
