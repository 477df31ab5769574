#include "czl/error.hpp"
#include "czl/multipliers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numbers>

using czl::cplx;
using czl::GridFunction;
using czl::MultiplierSymbol;
using czl::ProductLattice;

namespace {

// Removes every frequency with a component at or beyond n/4 in absolute value.
GridFunction band_limit(const GridFunction& f) {
    auto F = czl::fft_forward(f);
    const auto& lat = f.lattice();
    for (std::size_t i = 0; i < F.size(); ++i) {
        const auto c = oracle::coords(lat, i);
        for (std::size_t a = 0; a < c.size(); ++a) {
            const long k = czl::signed_frequency(c[a], lat.n_axis()[a]);
            if (std::abs(k) >= static_cast<long>(lat.n_axis()[a] / 4)) F[i] = 0.0;
        }
    }
    return czl::fft_inverse(F);
}

GridFunction dilate(const GridFunction& coarse, const ProductLattice& fine) {
    GridFunction out(fine);
    for (std::size_t i = 0; i < fine.size(); ++i) {
        auto c = oracle::coords(fine, i);
        std::size_t flat = 0;
        for (std::size_t a = 0; a < c.size(); ++a) {
            flat = flat * coarse.lattice().n_axis()[a] + c[a] % coarse.lattice().n_axis()[a];
        }
        out[i] = coarse[flat];
    }
    return out;
}

double p2_oracle(double x) { return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x); }

}  // namespace

TEST_CASE("riesz symbol convention") {
    const auto r1 = czl::riesz_symbol(2, 1);
    CHECK(std::abs(r1({1.0, 0.0}) - cplx(0, -1)) < 1e-15);
    CHECK(std::abs(r1({0.0, 1.0})) < 1e-15);
    CHECK(std::abs(r1({3.0, 4.0}) - cplx(0, -0.6)) < 1e-15);
    CHECK(r1({0.0, 0.0}) == cplx(0.0));
    CHECK_THROWS_AS(static_cast<void>(czl::riesz_symbol(2, 3)), czl::DomainError);
    CHECK_THROWS_AS(static_cast<void>(czl::riesz_symbol(2, 0)), czl::DomainError);
}

TEST_CASE("degree-0 homogeneity on lattice points") {
    const std::vector<MultiplierSymbol> symbols{
        czl::riesz_symbol(2, 2), czl::coordinate_symbol(2, 1),
        czl::smoothed_cone_symbol(czl::Cone::along(std::vector<double>{1.0, 0.3}, 1.0), 0.5, 2),
        czl::cone_projection_symbol(czl::Cone::along(std::vector<double>{0.2, 1.0}, 2.0))};
    for (const auto& m : symbols) {
        for (int a = -8; a < 8; ++a) {
            for (int b = -8; b < 8; ++b) {
                const std::vector<double> x{double(a), double(b)};
                const std::vector<double> y{2.0 * a, 2.0 * b};
                CHECK(m(x) == m(y));
            }
        }
    }
}

TEST_CASE("identity multiplier is the identity") {
    const auto lat = ProductLattice::uniform({2, 1}, 8);
    const auto f = oracle::random_function(lat, 1);
    const std::vector<MultiplierSymbol> id{czl::identity_symbol(2), czl::identity_symbol(1)};
    CHECK(oracle::max_abs_diff(czl::apply_multiplier(id, f).values(), f.values()) < 1e-13);
}

TEST_CASE("sum of squared Riesz transforms is minus the mean-free part") {
    const auto lat = ProductLattice::uniform({2}, 16);
    const auto f = oracle::random_function(lat, 2);
    const auto r1 = czl::TensorMultiplier::acting_on(lat, 0, czl::riesz_symbol(2, 1));
    const auto r2 = czl::TensorMultiplier::acting_on(lat, 0, czl::riesz_symbol(2, 2));
    const auto lhs = r1.apply(r1.apply(f)) + r2.apply(r2.apply(f));
    GridFunction rhs = f;
    const cplx m = czl::mean(f);
    for (auto& v : rhs.values()) v = -(v - m);
    CHECK(oracle::max_abs_diff(lhs.values(), rhs.values()) < 1e-12);
}

TEST_CASE("dimension mismatch is structural") {
    const auto lat = ProductLattice::uniform({2}, 8);
    const std::vector<MultiplierSymbol> wrong{czl::hilbert_symbol()};
    CHECK_THROWS_AS(static_cast<void>(czl::apply_multiplier(wrong, GridFunction(lat))), czl::StructuralError);
    const std::vector<MultiplierSymbol> too_many{czl::riesz_symbol(2, 1), czl::riesz_symbol(2, 1)};
    CHECK_THROWS_AS(static_cast<void>(czl::apply_multiplier(too_many, GridFunction(lat))), czl::StructuralError);
}

TEST_CASE("half-space symbol values and boundary") {
    const std::vector<double> xi{0.6, 0.8};
    const auto h = czl::half_space_symbol(xi);
    CHECK(h(xi) == cplx(1.0));
    CHECK(h({-0.6, -0.8}) == cplx(0.0));
    CHECK(h({-0.8, 0.6}) == cplx(0.0));
    CHECK(h({0.0, 0.0}) == cplx(0.0));
}

TEST_CASE("half-space pair partitions the identity off zero frequency") {
    struct Case {
        ProductLattice lat;
        std::vector<double> dir;
    };
    const std::vector<Case> cases{{ProductLattice::uniform({1}, 32), {1.0}},
                                  {ProductLattice::uniform({2}, 16), {1.0, std::numbers::sqrt2}},
                                  {ProductLattice::uniform({3}, 8), {1.0, std::numbers::sqrt2, std::numbers::pi}}};
    for (const auto& c : cases) {
        const auto f = oracle::random_function(c.lat, 3);
        std::vector<double> neg = c.dir;
        for (auto& v : neg) v = -v;
        const auto hp = czl::TensorMultiplier::acting_on(c.lat, 0, czl::half_space_symbol(c.dir));
        const auto hm = czl::TensorMultiplier::acting_on(c.lat, 0, czl::half_space_symbol(neg));
        const auto sum = hp.apply(f) + hm.apply(f);
        GridFunction expect = f;
        const cplx m = czl::mean(f);
        for (auto& v : expect.values()) v -= m;
        CHECK(oracle::max_abs_diff(sum.values(), expect.values()) < 1e-12);
    }
}

TEST_CASE("cone membership rule") {
    const auto c = czl::Cone::along(std::vector<double>{1.0, 0.0}, 2.0);
    const auto p = czl::cone_projection_symbol(c);
    CHECK(p({2.0, 1.0}) == cplx(1.0));
    CHECK(p({1.0, 3.0}) == cplx(0.0));
    CHECK(p({-1.0, 0.0}) == cplx(0.0));
    CHECK(p({1.0, 1.0}) == cplx(1.0));
    CHECK(std::abs(czl::norm2(c.direction()) - 1.0) < 1e-14);
    CHECK(c.half_angle() == doctest::Approx(std::numbers::pi / 4));
    CHECK_THROWS_AS(static_cast<void>(czl::Cone::along(std::vector<double>{1.0, 0.0}, 0.0)), czl::DomainError);
}

TEST_CASE("projection multipliers are exactly idempotent") {
    const auto lat = ProductLattice::uniform({2, 1}, 16);
    const auto f = oracle::random_function(lat, 4);
    const auto cone = czl::cone_projection_symbol(czl::Cone::along(std::vector<double>{1.0, 0.4}, 1.5));
    const std::vector<MultiplierSymbol> ops{cone, czl::half_space_symbol(std::vector<double>{-1.0})};
    const czl::TensorMultiplier P(lat, ops);
    for (const auto& v : P.table()) CHECK((v == cplx(0.0) || v == cplx(1.0)));
    auto once = czl::fft_forward(f);
    P.multiply(once.values());
    auto twice = once;
    P.multiply(twice.values());
    CHECK(oracle::max_abs_diff(once.values(), twice.values()) == 0.0);
    const auto a1 = P.apply(f);
    const auto a2 = P.apply(a1);
    CHECK(oracle::max_abs_diff(a1.values(), a2.values()) < 1e-13);
}

TEST_CASE("smoothstep polynomial") {
    for (int m = 0; m <= 6; ++m) {
        CHECK(czl::smoothstep(m, 0.0) == 0.0);
        CHECK(czl::smoothstep(m, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(czl::smoothstep(m, 0.5) == doctest::Approx(0.5).epsilon(1e-14));
        for (double x = 0.05; x < 1.0; x += 0.1) {
            CHECK(czl::smoothstep(m, x) + czl::smoothstep(m, 1.0 - x) == doctest::Approx(1.0).epsilon(1e-13));
        }
    }
    for (double x = 0.0; x <= 1.0; x += 0.125) CHECK(czl::smoothstep(2, x) == doctest::Approx(p2_oracle(x)).epsilon(1e-14));
    CHECK(czl::smoothstep(1, 0.25) == doctest::Approx(3 * 0.0625 - 2 * 0.015625).epsilon(1e-14));
}

TEST_CASE("smoothed cone symbol sandwich, exhaustive at N=16") {
    struct Case {
        ProductLattice lat;
        std::vector<double> dir;
        double side;
    };
    const std::vector<Case> cases{{ProductLattice::uniform({2}, 16), {1.0, 0.35}, 0.8},
                                  {ProductLattice::uniform({2}, 16), {-0.2, 1.0}, 2.5},
                                  {ProductLattice::uniform({3}, 16), {0.3, -0.5, 1.0}, 1.2}};
    for (const auto& c : cases) {
        const double tau = 0.5;
        const auto D = czl::Cone::along(c.dir, c.side);
        const auto inner = czl::cone_projection_symbol(D).lattice_values(c.lat, 0);
        const auto outer = czl::cone_projection_symbol(D.dilated(1.0 + tau)).lattice_values(c.lat, 0);
        for (int m : {1, 2, 4}) {
            const auto k = czl::smoothed_cone_symbol(D, tau, m).lattice_values(c.lat, 0);
            std::size_t strict = 0;
            for (std::size_t i = 0; i < k.size(); ++i) {
                CHECK(k[i].imag() == 0.0);
                CHECK(inner[i].real() <= k[i].real());
                CHECK(k[i].real() <= outer[i].real());
                if (k[i].real() > 0.0 && k[i].real() < 1.0) ++strict;
            }
            CHECK(strict > 0);
        }
    }
}

TEST_CASE("smoothed cone symbol at the transition midpoint") {
    const auto D = czl::Cone::along(std::vector<double>{1.0, 0.0}, 2.0);
    const auto k = czl::smoothed_cone_symbol(D, 0.5, 2);
    CHECK(k({1.0, 0.2}) == cplx(1.0));
    CHECK(k({1.0, 2.0}) == cplx(0.0));
    CHECK(k({1.0, 1.25}).real() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(k({1.0, 1.125}).real() == doctest::Approx(1.0 - p2_oracle(0.25)).epsilon(1e-14));
    CHECK_THROWS_AS(static_cast<void>(czl::smoothed_cone_symbol(D, 0.0, 2)), czl::DomainError);
    CHECK_THROWS_AS(static_cast<void>(czl::smoothed_cone_symbol(D, -1.0, 2)), czl::DomainError);
}

TEST_CASE("rotations of symbols") {
    const auto lat = ProductLattice::uniform({2}, 16);
    const auto r1 = czl::riesz_symbol(2, 1);
    const auto r2 = czl::riesz_symbol(2, 2);

    const auto same = czl::rotate_symbol(r1, czl::identity_matrix(2));
    CHECK(oracle::max_abs_diff(same.lattice_values(lat, 0), r1.lattice_values(lat, 0)) == 0.0);

    const auto quarter = czl::rotate_symbol(r1, czl::rotation_2d(std::numbers::pi / 2));
    CHECK(oracle::max_abs_diff(quarter.lattice_values(lat, 0), r2.lattice_values(lat, 0)) < 1e-12);

    const auto half = czl::rotation_2d(std::numbers::pi);
    const auto back = czl::rotate_symbol(czl::rotate_symbol(r1, half), half);
    CHECK(oracle::max_abs_diff(back.lattice_values(lat, 0), r1.lattice_values(lat, 0)) < 1e-12);

    // Sample-based symbol: rotation goes through linear interpolation.
    const auto dirs = czl::sphere_samples(2, 256);
    const auto sampled = czl::sampled_symbol(2, dirs, r1.sample_values(dirs));
    CHECK(sampled.interpolation_tolerance() <= 1e-3);
    const auto sq = czl::rotate_symbol(sampled, czl::rotation_2d(std::numbers::pi / 2));
    CHECK(oracle::max_abs_diff(sq.lattice_values(lat, 0), r2.lattice_values(lat, 0)) <= 1e-3);
    const auto sback = czl::rotate_symbol(czl::rotate_symbol(sampled, half), half);
    CHECK(oracle::max_abs_diff(sback.lattice_values(lat, 0), sampled.lattice_values(lat, 0)) < 1e-12);

    const auto cone = czl::cone_projection_symbol(czl::Cone::along(std::vector<double>{1.0, 0.0}, 1.0));
    const auto rc = czl::rotate_symbol(cone, czl::rotation_2d(std::numbers::pi / 2));
    CHECK(rc({0.0, 1.0}) == cplx(1.0));
    CHECK(rc({1.0, 0.0}) == cplx(0.0));

    CHECK_THROWS_AS(static_cast<void>(czl::rotate_symbol(r1, czl::Matrix{1.0, 0.1, 0.0, 1.0})), czl::DomainError);
    CHECK_THROWS_AS(static_cast<void>(czl::rotate_symbol(r1, czl::Matrix{1.0, 0.0, 0.0, -1.0})), czl::DomainError);
}

TEST_CASE("sample-based interpolation error in three dimensions") {
    const auto dirs = czl::sphere_samples(3, 1024);
    const auto r3 = czl::riesz_symbol(3, 3);
    const auto sampled = czl::sampled_symbol(3, dirs, r3.sample_values(dirs));
    const auto lat = ProductLattice::uniform({3}, 8);
    const double err = oracle::max_abs_diff(sampled.lattice_values(lat, 0), r3.lattice_values(lat, 0));
    MESSAGE("d=3 interpolation error " << err << ", recorded tolerance " << sampled.interpolation_tolerance());
    CHECK(err <= sampled.interpolation_tolerance());
    CHECK(sampled.interpolation_tolerance() <= 1e-3);
}

TEST_CASE("multipliers in different parameters commute") {
    const auto lat = ProductLattice::uniform({2, 1}, 8);
    const auto f = oracle::random_function(lat, 5);
    const auto a = czl::TensorMultiplier::acting_on(lat, 0, czl::riesz_symbol(2, 1));
    const auto b = czl::TensorMultiplier::acting_on(lat, 1, czl::hilbert_symbol());
    CHECK(oracle::max_abs_diff(a.apply(b.apply(f)).values(), b.apply(a.apply(f)).values()) < 1e-12);
}

TEST_CASE("multipliers commute with lattice dilation") {
    const auto coarse = ProductLattice::uniform({2, 1}, 8);
    const auto fine = ProductLattice::uniform({2, 1}, 16);
    const std::vector<MultiplierSymbol> ops{
        czl::smoothed_cone_symbol(czl::Cone::along(std::vector<double>{1.0, 0.5}, 1.0), 0.5, 2),
        czl::hilbert_symbol()};
    const auto f = oracle::random_function(coarse, 6);
    const auto lhs = dilate(czl::apply_multiplier(ops, f), fine);
    const auto rhs = czl::apply_multiplier(ops, dilate(f, fine));
    CHECK(oracle::max_abs_diff(lhs.values(), rhs.values()) < 1e-12);
}

TEST_CASE("real input stays real for conjugate-symmetric symbols") {
    const auto lat = ProductLattice::uniform({2}, 16);
    const auto f = band_limit(oracle::random_real_function(lat, 7));
    CHECK(f.max_abs_imag() < 1e-14);
    const std::vector<MultiplierSymbol> riesz{czl::riesz_symbol(2, 1)};
    CHECK(czl::apply_multiplier(riesz, f).max_abs_imag() < 1e-13);
    // Real even symbols are conjugate-symmetric on the whole lattice, Nyquist included.
    const auto g = oracle::random_real_function(lat, 8);
    const auto c = czl::coordinate_symbol(2, 1);
    const std::vector<MultiplierSymbol> even{czl::product_symbol(c, c)};
    CHECK(czl::apply_multiplier(even, g).max_abs_imag() < 1e-13);
}

TEST_CASE("sphere samples") {
    const auto s2 = czl::sphere_samples(2, 256);
    CHECK(s2.size() == 2 * 256);
    const auto s3 = czl::sphere_samples(3, 1024);
    CHECK(s3.size() == 3 * (1024 + 6));
    for (const auto& [s, d] : {std::pair{s2, 2}, std::pair{s3, 3}}) {
        const std::size_t n = s.size() / d;
        for (std::size_t i = 0; i < n; ++i) {
            const std::span<const double> x(s.data() + i * d, d);
            CHECK(std::abs(czl::norm2(x) - 1.0) < 1e-14);
            bool found = false;
            for (std::size_t j = 0; j < n && !found; ++j) {
                bool eq = true;
                for (int a = 0; a < d; ++a) eq = eq && s[j * d + a] == -x[a];
                found = eq;
            }
            CHECK(found);
        }
    }
    CHECK(czl::sphere_mesh(s2, 2) == doctest::Approx(2 * std::numbers::pi / 256));
}

TEST_CASE("symbol files round trip") {
    const auto lat = ProductLattice::uniform({2}, 8);
    const auto dirs = czl::sphere_samples(2, 256);
    const std::vector<MultiplierSymbol> analytic{
        czl::riesz_symbol(2, 2), czl::identity_symbol(2),
        czl::conjugate_symbol(czl::riesz_symbol(2, 1)),
        czl::rotate_symbol(czl::coordinate_symbol(2, 1), czl::rotation_2d(0.3)),
        czl::smoothed_cone_symbol(czl::Cone::along(std::vector<double>{1.0, 1.0}, 1.0), 0.25, 3),
        czl::half_space_symbol(std::vector<double>{1.0, 2.0})};
    for (const auto& m : analytic) {
        const auto text = czl::symbol_to_json(m, dirs).dump();
        const auto back = czl::symbol_from_json(nlohmann::json::parse(text));
        CHECK(back.kind() == m.kind());
        CHECK(back.zero_value() == m.zero_value());
        CHECK(oracle::max_abs_diff(back.lattice_values(lat, 0), m.lattice_values(lat, 0)) < 1e-15);
    }
    // Unknown kinds are rebuilt from their samples.
    const auto r1 = czl::riesz_symbol(2, 1);
    auto j = czl::symbol_to_json(r1, dirs);
    j["kind"] = "custom";
    const auto interp = czl::symbol_from_json(j);
    CHECK(interp.kind() == "custom");
    CHECK(oracle::max_abs_diff(interp.lattice_values(lat, 0), r1.lattice_values(lat, 0)) <= 1e-3);
    j["sphere_samples"] = nlohmann::json::array();
    CHECK_THROWS_AS(static_cast<void>(czl::symbol_from_json(j)), czl::StructuralError);
}
