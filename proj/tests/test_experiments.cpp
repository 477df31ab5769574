#include "czl/error.hpp"
#include "czl/experiments.hpp"
#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

using czl::cplx;
using czl::ExperimentConfig;
using czl::GridFunction;
using czl::ProductLattice;

namespace {

nlohmann::json load_golden(const std::string& name) {
    std::ifstream in(std::string(CZL_GOLDEN_DIR) + "/" + name);
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

czl::ProductBmoOptions estimator_options(const ExperimentConfig& c) {
    czl::ProductBmoOptions opt;
    opt.budget = c.bmo_budget;
    opt.seed = czl::derive_seed(c.seed, 2, 0);
    return opt;
}

ExperimentConfig small_sweep_config() {
    ExperimentConfig c;
    c.dims = {2, 2};
    c.n = 8;
    c.compare_n = {4};
    c.corpus_count = 6;
    c.corpus_max_scale = 1;
    c.family_samples = 32;
    c.max_tries = 3;
    c.seed = 11;
    return c;
}

// (e^{ik.x} + e^{2ik.x}) / sqrt 2 with k = (2, 1) on one parameter of dimension 2.
GridFunction band_limited_beta(const ProductLattice& lat) {
    std::vector<cplx> v(lat.size());
    for (std::size_t p = 0; p < lat.size(); ++p) {
        const auto x = oracle::coords(lat, p);
        const double phase = 2.0 * std::numbers::pi * (2.0 * double(x[0]) + double(x[1])) / double(lat.n_axis()[0]);
        v[p] = (std::polar(1.0, phase) + std::polar(1.0, 2.0 * phase)) / std::sqrt(2.0);
    }
    return GridFunction(lat, std::move(v));
}

}  // namespace

TEST_CASE("config parsing") {
    std::istringstream in("# comment\n dims = 1, 2\nn=32 # trailing\ncompare_n = 8,16\nkappa = 0.25\n"
                          "apertures = 4, 6\ncone_family = false\nnorm_method = power\nseed = 99\n\n");
    const auto c = czl::parse_config(in);
    CHECK(c.dims == std::vector<int>{1, 2});
    CHECK(c.n == 32);
    CHECK(c.compare_n == std::vector<std::size_t>{8, 16});
    CHECK(c.kappa == 0.25);
    CHECK(c.aperture_list() == std::vector<double>{4.0, 6.0});
    CHECK_FALSE(c.cone_family);
    CHECK(c.norm_options().method == czl::NormMethod::power);
    CHECK(c.seed == 99);
    CHECK(c.tau == ExperimentConfig{}.tau);

    for (const char* bad : {"unknown = 1\n", "n = -3\n", "kappa = abc\n", "family = foo\n", "no equals sign\n",
                            "cone_family = maybe\n", "dims = \n"}) {
        std::istringstream b(bad);
        CHECK_THROWS_AS((void)czl::parse_config(b), czl::StructuralError);
    }
    ExperimentConfig c3;
    c3.dims = {2, 2, 2};
    c3.apertures = {1.0, 2.0};
    CHECK_THROWS_AS((void)c3.aperture_list(), czl::StructuralError);
    CHECK_THROWS_AS((void)czl::parse_config_file("/nonexistent/config.txt"), czl::StructuralError);
}

TEST_CASE("derived seeds") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t tag = 0; tag < 4; ++tag) {
        for (std::uint64_t i = 0; i < 50; ++i) seen.insert(czl::derive_seed(7, tag, i));
    }
    CHECK(seen.size() == 200);
    CHECK(czl::derive_seed(7, 1, 3) == czl::derive_seed(7, 1, 3));
    CHECK(czl::derive_seed(7, 1, 3) != czl::derive_seed(8, 1, 3));
}

TEST_CASE("single wavelet normalizes to proxy one; zero symbols are skipped") {
    ExperimentConfig c;
    const auto lat = c.lattice(8);
    const auto b = cplx{-3.5, 0.0} * czl::haar_basis_function(lat, czl::DyadicRectangle{{czl::DyadicCube{1, {0, 1}},
                                                                                           czl::DyadicCube{0, {0, 0}}}},
                                                                 czl::Signature{{{1, 0}, {0, 1}}});
    const auto sym = czl::normalize_symbol(b, c);
    REQUIRE(sym.has_value());
    CHECK(std::abs(sym->product_lower - 1.0) <= 1e-12);
    // |R| = 1/4, so the raw proxy is 3.5 |R|^{-1/2} = 7.
    CHECK(std::abs(sym->scale - 1.0 / 7.0) <= 1e-12);
    CHECK(std::abs(sym->rectangular - 1.0) <= 1e-12);

    CHECK_FALSE(czl::normalize_symbol(GridFunction(lat), c).has_value());
    GridFunction constant(lat, std::vector<cplx>(lat.size(), cplx{2.0, 0.0}));
    CHECK_FALSE(czl::normalize_symbol(constant, c).has_value());
}

TEST_CASE("corpus draws are resolution independent") {
    ExperimentConfig c;
    c.corpus_count = 10;
    const auto drawn = czl::draw_corpus_terms(c);
    REQUIRE(drawn.size() == 10);
    std::set<std::string> kinds;
    for (const auto& [kind, terms] : drawn) {
        kinds.insert(kind);
        CHECK_FALSE(terms.empty());
    }
    CHECK(kinds == std::set<std::string>{"single", "cluster", "minus_one_small", "random"});
    CHECK(drawn.size() == czl::draw_corpus_terms(c).size());

    const auto coarse = c.lattice(8);
    const auto fine = c.lattice(16);
    for (const auto& [kind, terms] : drawn) {
        const auto f8 = czl::synthesize_terms(coarse, terms);
        const auto f16 = czl::synthesize_terms(fine, terms);
        // Piecewise constant on cells of scale <= 2, so even N=16 samples equal the N=8 samples.
        double err = 0.0;
        for (std::size_t p = 0; p < coarse.size(); ++p) {
            const auto x = oracle::coords(coarse, p);
            std::size_t q = 0;
            for (std::size_t a = 0; a < x.size(); ++a) q = q * 16 + 2 * x[a];
            err = std::max(err, std::abs(f8[p] - f16[q]));
        }
        CHECK(err <= 1e-12);
    }
    ExperimentConfig too_fine = c;
    too_fine.corpus_max_scale = 3;
    CHECK_THROWS_AS((void)czl::generate_corpus(too_fine, 8), czl::StructuralError);
}

TEST_CASE("normalized corpus proxies re-estimate to one") {
    ExperimentConfig c;
    c.corpus_count = 10;
    c.corpus_max_scale = 1;
    const auto corpus = czl::generate_corpus(c, 8);
    CHECK(corpus.symbols.size() + corpus.skipped == 10);
    for (const auto& sym : corpus.symbols) {
        const auto re = czl::product_bmo_lower(czl::haar_transform(sym.b), estimator_options(c));
        CHECK(std::abs(re.value - 1.0) <= 1e-6);
        CHECK(sym.rectangular <= sym.product_lower + 1e-12);
        REQUIRE(sym.minus_one.has_value());
        CHECK(*sym.minus_one >= sym.rectangular - 1e-12);
    }
}

TEST_CASE("equivalence sweep records are recomputable and reproducible") {
    auto c = small_sweep_config();
    const auto result = czl::equivalence_sweep(c);
    CHECK(result.criteria_pass);
    CHECK(result.all_positive);
    REQUIRE(result.resolutions.size() == 2);
    for (const auto& res : result.resolutions) {
        std::vector<double> fam, cone;
        for (const auto& r : res.records) {
            double sup = 0.0;
            for (const auto& n : r.family.norms) sup = std::max(sup, n.value);
            CHECK(sup == r.family.value);
            CHECK(r.family.value > 0.0);
            CHECK(r.family_ratio == r.family.value / r.product_lower);
            REQUIRE(r.cone.has_value());
            CHECK(*r.cone_ratio == r.cone->value / r.product_lower);
            CHECK(r.family.norms.size() == 4);
            fam.push_back(r.family_ratio);
            cone.push_back(*r.cone_ratio);
        }
        CHECK(res.family.c1 == *std::min_element(fam.begin(), fam.end()));
        CHECK(res.family.c2 == *std::max_element(fam.begin(), fam.end()));
        REQUIRE(res.cone.has_value());
        CHECK(res.cone->c1 == *std::min_element(cone.begin(), cone.end()));
    }
    REQUIRE(result.family_stability.size() == 1);
    CHECK(result.family_stability[0] ==
          result.resolutions[0].family.spread() / result.resolutions[1].family.spread());

    const auto again = czl::equivalence_sweep(c);
    CHECK(again.to_json().dump() == result.to_json().dump());
    CHECK(again.to_csv() == result.to_csv());
    c.threads = 3;
    const auto threaded = czl::equivalence_sweep(c);
    CHECK(threaded.to_json().dump() == result.to_json().dump());

    const auto csv = result.to_csv();
    const auto lines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(static_cast<std::size_t>(lines) ==
          1 + result.resolutions[0].records.size() + result.resolutions[1].records.size());
}

TEST_CASE("single-wavelet sweep ratio is positive") {
    auto c = small_sweep_config();
    c.corpus_count = 1;
    c.compare_n.clear();
    c.cone_family = false;
    const auto result = czl::equivalence_sweep(c);
    REQUIRE(result.resolutions.size() == 1);
    REQUIRE(result.resolutions[0].records.size() == 1);
    CHECK(result.resolutions[0].records[0].kind == "single");
    CHECK(result.resolutions[0].family.c1 > 0.0);
    CHECK(result.all_positive);
}

TEST_CASE("test-function split regression instance") {
    const auto g = load_golden("test_function_split.json");
    ExperimentConfig c;
    c.dims = g["dims"].get<std::vector<int>>();
    c.apertures = {g["aperture"].get<double>()};
    c.max_tries = g["max_tries"].get<std::size_t>();
    c.test_operator = g["test_operator"].get<std::string>();
    c.seed = g["seed"].get<std::uint64_t>();
    const auto lat = c.lattice(g["N"].get<std::size_t>());
    const auto b = czl::haar_basis_function(
        lat, czl::DyadicRectangle{{czl::DyadicCube{g["cube_scale"].get<int>(), g["cube_position"].get<std::vector<int>>()}}},
        czl::Signature{{g["signature"].get<std::vector<int>>()}});
    const auto rep = czl::test_function_experiment(b, c);
    REQUIRE(rep.selection_success);
    const double tol = g["tolerance"].get<double>();
    for (const char* key : {"main_term", "leakage_term", "complement_term"}) {
        const double expected = g[key].get<double>();
        CHECK(std::abs(rep.to_json()[key].get<double>() - expected) <= tol * std::max(1.0, expected));
    }
    CHECK(rep.main_term >= 5.0 * rep.leakage_term);
    CHECK(rep.main_term >= 5.0 * rep.complement_term);
    CHECK(rep.complement_term <= rep.complement_bound);
    REQUIRE(rep.approximation_error.size() == 1);
}

TEST_CASE("band-limited beta: complement term below its bound") {
    for (const char* op : {"cone", "approx"}) {
        ExperimentConfig c;
        c.dims = {2};
        c.apertures = {20.0};
        c.kappa = 0.1;
        c.seed = 3;
        c.max_tries = 5;
        c.test_operator = op;
        c.degree_cap = 12;
        const auto lat = c.lattice(16);
        const auto beta = band_limited_beta(lat);
        const auto rep = czl::test_function_split(beta, beta, c);
        REQUIRE(rep.selection_success);
        CHECK(rep.complement_term <= rep.complement_bound + 1e-12);
        CHECK(rep.main_term > 0.0);
        CHECK(std::abs(rep.commutator_b - rep.commutator_beta) <= 1e-12);
    }
}

TEST_CASE("degenerate gamma gives zero terms") {
    ExperimentConfig c;
    c.dims = {2};
    c.max_tries = 2;
    const auto lat = c.lattice(8);
    const GridFunction one(lat, std::vector<cplx>(lat.size(), cplx{1.0, 0.0}));
    const auto rep = czl::test_function_split(one, one, c);
    CHECK_FALSE(rep.selection_success);
    CHECK(rep.main_term == 0.0);
    CHECK(rep.leakage_term == 0.0);
    CHECK(rep.complement_term == 0.0);
    CHECK(rep.gamma_l4 == 0.0);

    const auto zero = czl::test_function_experiment(GridFunction(lat), c);
    CHECK_FALSE(zero.selection_success);
    CHECK(zero.main_term == 0.0);
}

TEST_CASE("cone approximation experiment report") {
    ExperimentConfig c;
    c.degree_cap = 4;
    const auto j = czl::cone_approximation_experiment(c, 2);
    CHECK(j["degrees"].size() == 5);
    double prev = 1e300;
    for (const auto& row : j["degrees"]) {
        const double e = row["sup_error"][0].get<double>();
        CHECK(e <= prev + 1e-9);
        prev = e;
    }
    CHECK(j["nonincreasing"].get<bool>());
    CHECK_THROWS_AS((void)czl::cone_approximation_experiment(c, 1), czl::DomainError);
}

TEST_CASE("journe experiment invariants") {
    ExperimentConfig c;
    c.dims = {1, 1};
    const auto lat = c.lattice(16);
    const auto b = oracle::random_real_function(lat, 5);
    for (double a : {0.5, 1.0}) {
        c.journe_a = a;
        const auto j = czl::journe_experiment(b, c);
        CHECK(j["damped"].size() == c.cexp.size());
        if (!j["degenerate"].get<bool>()) {
            CHECK(j["E_min"].get<double>() >= 1.0);
            CHECK(j["V_measure"].get<double>() < (1.0 + a) * j["shadow_measure"].get<double>());
        }
        for (const auto& d : j["damped"]) CHECK(d["l2"].get<double>() >= 0.0);
    }
}
