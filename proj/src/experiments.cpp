#include "czl/experiments.hpp"

#include "czl/error.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace czl {

namespace {

constexpr std::uint64_t kCorpusStream = 1;
constexpr std::uint64_t kBmoStream = 2;
constexpr std::uint64_t kSelectionStream = 3;
constexpr std::uint64_t kTestFunctionStream = 4;
constexpr std::uint64_t kNormStream = 5;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw StructuralError("config: " + key + " expects a number, got '" + v + "'");
    }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw StructuralError("config: " + key + " expects a nonnegative integer, got '" + v + "'");
    }
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw StructuralError("config: " + key + " expects true or false, got '" + v + "'");
}

std::string parse_choice(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
        if (v == a) return v;
    }
    throw StructuralError("config: invalid value '" + v + "' for " + key);
}

int log2_exact(std::size_t n) {
    int k = 0;
    while ((std::size_t{1} << k) < n) ++k;
    return k;
}

// All cubes of one parameter up to max_scale: (scale, position).
std::vector<std::pair<int, std::vector<int>>> coarse_cubes(int d, int max_scale) {
    std::vector<std::pair<int, std::vector<int>>> out;
    for (int k = 0; k <= max_scale; ++k) {
        const int side = 1 << k;
        std::size_t count = 1;
        for (int a = 0; a < d; ++a) count *= static_cast<std::size_t>(side);
        for (std::size_t c = 0; c < count; ++c) {
            std::vector<int> pos(static_cast<std::size_t>(d));
            std::size_t rest = c;
            for (int a = d; a-- > 0;) {
                pos[static_cast<std::size_t>(a)] = static_cast<int>(rest % static_cast<std::size_t>(side));
                rest /= static_cast<std::size_t>(side);
            }
            out.emplace_back(k, std::move(pos));
        }
    }
    return out;
}

std::vector<int> random_signature(int d, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, (1 << d) - 2);
    const int code = pick(rng);
    std::vector<int> eps(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) eps[static_cast<std::size_t>(a)] = (code >> a) & 1;
    return eps;
}

class LawSampler {
public:
    LawSampler(const std::string& law, std::mt19937_64& rng) : law_(law), rng_(rng) {}
    double operator()() {
        if (law_ == "uniform") return std::uniform_real_distribution<double>(-1.0, 1.0)(rng_);
        return std::normal_distribution<double>()(rng_);
    }

private:
    std::string law_;
    std::mt19937_64& rng_;
};

CorpusTerm make_term(const std::vector<std::pair<int, std::vector<int>>>& cubes, const std::vector<int>& dims,
                     std::mt19937_64& rng, double value) {
    CorpusTerm term;
    for (std::size_t s = 0; s < cubes.size(); ++s) {
        term.scales.push_back(cubes[s].first);
        term.positions.push_back(cubes[s].second);
        term.signature.push_back(random_signature(dims[s], rng));
    }
    term.value = value;
    return term;
}

bool cube_inside(const std::pair<int, std::vector<int>>& inner, const std::pair<int, std::vector<int>>& outer) {
    if (inner.first < outer.first) return false;
    const int shift = inner.first - outer.first;
    for (std::size_t a = 0; a < inner.second.size(); ++a) {
        if ((inner.second[a] >> shift) != outer.second[a]) return false;
    }
    return true;
}

ProductBmoOptions bmo_options(const ExperimentConfig& config) {
    ProductBmoOptions opt;
    opt.budget = config.bmo_budget;
    opt.seed = derive_seed(config.seed, kBmoStream, 0);
    return opt;
}

SupRecord sup_record(const GridFunction& b, std::span<const SymbolFamily> families, const NormOptions& options) {
    const auto res = sup_commutator_norm(b, families, options);
    SupRecord rec;
    rec.value = res.value;
    rec.argmax = res.argmax;
    rec.norms = res.norms;
    for (const auto& n : res.norms) rec.converged = rec.converged && n.converged;
    return rec;
}

nlohmann::json sup_json(const SupRecord& r) {
    nlohmann::json norms = nlohmann::json::array();
    for (const auto& n : r.norms) norms.push_back(n.to_json());
    return {{"sup", r.value}, {"argmax", r.argmax}, {"converged", r.converged}, {"norms", norms}};
}

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

ProductLattice doubled(const ProductLattice& lat) {
    std::vector<int> dims(lat.dims().begin(), lat.dims().end());
    std::vector<std::size_t> n(lat.n_axis().begin(), lat.n_axis().end());
    for (auto& v : n) v *= 2;
    return ProductLattice(std::move(dims), std::move(n));
}

// Trigonometric interpolant with frequencies in [-n/2, n/2) sampled on `fine`.
GridFunction interpolate(const GridFunction& f, const ProductLattice& fine) {
    const auto& lat = f.lattice();
    const auto coarse_hat = fft_forward(f);
    const double gain = std::sqrt(static_cast<double>(fine.size()) / static_cast<double>(lat.size()));
    std::vector<cplx> hat(fine.size(), cplx{0.0, 0.0});
    const std::size_t axes = lat.axis_count();
    for (std::size_t k = 0; k < lat.size(); ++k) {
        std::size_t rest = k, flat = 0, stride = 1;
        for (std::size_t a = axes; a-- > 0;) {
            const std::size_t n = lat.n_axis()[a], m = fine.n_axis()[a];
            const long freq = signed_frequency(rest % n, n);
            rest /= n;
            flat += static_cast<std::size_t>((freq + static_cast<long>(m)) % static_cast<long>(m)) * stride;
            stride *= m;
        }
        hat[flat] = gain * coarse_hat[k];
    }
    return fft_inverse(GridFunction(fine, std::move(hat)));
}

GridFunction collection_projection(const GridFunction& b, std::span<const std::size_t> collection) {
    return haar_inverse(project_coefficients(haar_transform(b), collection));
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
    return {{"dims", dims},
            {"n", n},
            {"compare_n", compare_n},
            {"family", family},
            {"family_samples", family_samples},
            {"cone_family", cone_family},
            {"cone_aperture", cone_aperture},
            {"corpus_count", corpus_count},
            {"corpus_max_scale", corpus_max_scale},
            {"coefficient_law", coefficient_law},
            {"bmo_budget", bmo_budget},
            {"kappa", kappa},
            {"epsilon", epsilon},
            {"tau", tau},
            {"smoothing_order", smoothing_order},
            {"apertures", apertures},
            {"max_tries", max_tries},
            {"test_operator", test_operator},
            {"outer_side", outer_side},
            {"inner_side", inner_side},
            {"degree_cap", degree_cap},
            {"approx_order", approx_order},
            {"journe_a", journe_a},
            {"cexp", cexp},
            {"tol", tol},
            {"max_iter", max_iter},
            {"norm_method", norm_method},
            {"seed", seed}};
}

ProductLattice ExperimentConfig::lattice(std::size_t points) const { return ProductLattice::uniform(dims, points); }

NormOptions ExperimentConfig::norm_options() const {
    NormOptions opt;
    opt.tol = tol;
    opt.max_iter = max_iter;
    opt.seed = derive_seed(seed, kNormStream, 0);
    opt.method = norm_method == "power" ? NormMethod::power : NormMethod::lanczos;
    return opt;
}

std::vector<double> ExperimentConfig::aperture_list() const {
    if (apertures.size() == dims.size()) return apertures;
    if (apertures.size() == 1) return std::vector<double>(dims.size(), apertures[0]);
    throw StructuralError("config: apertures needs one value or one per parameter");
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
    const auto uint_list = [&]() {
        std::vector<std::size_t> out;
        for (const auto& v : split_list(value)) out.push_back(static_cast<std::size_t>(parse_uint(key, v)));
        return out;
    };
    const auto double_list = [&]() {
        std::vector<double> out;
        for (const auto& v : split_list(value)) out.push_back(parse_double(key, v));
        return out;
    };
    if (key == "dims") {
        c.dims.clear();
        for (auto v : uint_list()) c.dims.push_back(static_cast<int>(v));
        if (c.dims.empty()) throw StructuralError("config: dims is empty");
    } else if (key == "n") {
        c.n = static_cast<std::size_t>(parse_uint(key, value));
    } else if (key == "compare_n") {
        c.compare_n = uint_list();
    } else if (key == "family") {
        c.family = parse_choice(key, value, {"riesz", "closed_riesz"});
    } else if (key == "family_samples") {
        c.family_samples = static_cast<std::size_t>(parse_uint(key, value));
    } else if (key == "cone_family") {
        c.cone_family = parse_bool(key, value);
    } else if (key == "cone_aperture") {
        c.cone_aperture = parse_double(key, value);
    } else if (key == "corpus_count") {
        c.corpus_count = static_cast<std::size_t>(parse_uint(key, value));
    } else if (key == "corpus_max_scale") {
        c.corpus_max_scale = static_cast<int>(parse_uint(key, value));
    } else if (key == "coefficient_law") {
        c.coefficient_law = parse_choice(key, value, {"gaussian", "uniform"});
    } else if (key == "bmo_budget") {
        c.bmo_budget = static_cast<std::size_t>(parse_uint(key, value));
    } else if (key == "kappa") {
        c.kappa = parse_double(key, value);
    } else if (key == "epsilon") {
        c.epsilon = parse_double(key, value);
    } else if (key == "tau") {
        c.tau = parse_double(key, value);
    } else if (key == "smoothing_order") {
        c.smoothing_order = static_cast<int>(parse_uint(key, value));
    } else if (key == "apertures") {
        c.apertures = double_list();
    } else if (key == "max_tries") {
        c.max_tries = static_cast<std::size_t>(parse_uint(key, value));
    } else if (key == "test_operator") {
        c.test_operator = parse_choice(key, value, {"cone", "approx"});
    } else if (key == "outer_side") {
        c.outer_side = parse_double(key, value);
    } else if (key == "inner_side") {
        c.inner_side = parse_double(key, value);
    } else if (key == "degree_cap") {
        c.degree_cap = static_cast<int>(parse_uint(key, value));
    } else if (key == "approx_order") {
        c.approx_order = static_cast<int>(parse_uint(key, value));
    } else if (key == "journe_a") {
        c.journe_a = parse_double(key, value);
    } else if (key == "cexp") {
        c.cexp = double_list();
    } else if (key == "tol") {
        c.tol = parse_double(key, value);
    } else if (key == "max_iter") {
        c.max_iter = static_cast<std::size_t>(parse_uint(key, value));
    } else if (key == "norm_method") {
        c.norm_method = parse_choice(key, value, {"power", "lanczos"});
    } else if (key == "seed") {
        c.seed = parse_uint(key, value);
    } else if (key == "threads") {
        c.threads = static_cast<unsigned>(parse_uint(key, value));
    } else if (key == "out") {
        c.out = value;
    } else if (key == "format") {
        c.format = parse_choice(key, value, {"json", "csv"});
    } else {
        throw StructuralError("config: unknown key '" + key + "'");
    }
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig c;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw StructuralError("config line " + std::to_string(number) + ": expected key = value");
        }
        set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open config file " + path);
    return parse_config(in);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
    auto mix = [](std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(master) ^ tag) ^ index);
}

std::vector<std::pair<std::string, std::vector<CorpusTerm>>> draw_corpus_terms(const ExperimentConfig& config) {
    const int t = static_cast<int>(config.dims.size());
    const int L = config.corpus_max_scale;
    std::vector<std::vector<std::pair<int, std::vector<int>>>> cubes;
    for (int d : config.dims) cubes.push_back(coarse_cubes(d, L));

    const std::size_t count = config.corpus_count;
    const std::size_t singles = count == 0 ? 0 : std::max<std::size_t>(1, count / 10);
    const std::size_t clusters = count / 5;
    const std::size_t small = t >= 2 ? count / 10 : 0;

    std::vector<std::pair<std::string, std::vector<CorpusTerm>>> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::mt19937_64 rng(derive_seed(config.seed, kCorpusStream, i));
        LawSampler law(config.coefficient_law, rng);
        std::vector<CorpusTerm> terms;
        std::string kind;
        auto pick_cube = [&](int s, int lo, int hi) {
            std::vector<std::size_t> idx;
            for (std::size_t c = 0; c < cubes[s].size(); ++c) {
                if (cubes[s][c].first >= lo && cubes[s][c].first <= hi) idx.push_back(c);
            }
            std::uniform_int_distribution<std::size_t> u(0, idx.size() - 1);
            return cubes[s][idx[u(rng)]];
        };
        if (i < singles) {
            kind = "single";
            std::vector<std::pair<int, std::vector<int>>> rect;
            for (int s = 0; s < t; ++s) rect.push_back(pick_cube(s, 0, L));
            double v = 0.0;
            while (v == 0.0) v = law();
            terms.push_back(make_term(rect, config.dims, rng, v));
        } else if (i < singles + clusters) {
            kind = "cluster";
            // Every rectangle inside a base rectangle, down to one scale finer.
            std::vector<std::pair<int, std::vector<int>>> base;
            for (int s = 0; s < t; ++s) base.push_back(pick_cube(s, std::max(0, L - 1), std::max(0, L - 1)));
            std::vector<std::vector<std::pair<int, std::vector<int>>>> inside(static_cast<std::size_t>(t));
            for (int s = 0; s < t; ++s) {
                for (const auto& q : cubes[s]) {
                    if (cube_inside(q, base[s]) && q.first <= base[s].first + 1) inside[s].push_back(q);
                }
            }
            std::vector<std::size_t> idx(static_cast<std::size_t>(t), 0);
            for (;;) {
                std::vector<std::pair<int, std::vector<int>>> rect;
                for (int s = 0; s < t; ++s) rect.push_back(inside[s][idx[s]]);
                terms.push_back(make_term(rect, config.dims, rng, law()));
                int s = t - 1;
                while (s >= 0 && ++idx[s] == inside[s].size()) idx[s--] = 0;
                if (s < 0) break;
            }
        } else if (i < singles + clusters + small) {
            kind = "minus_one_small";
            // Finest-scale rectangles whose cubes are pairwise distinct in every parameter.
            std::vector<std::vector<std::pair<int, std::vector<int>>>> finest(static_cast<std::size_t>(t));
            for (int s = 0; s < t; ++s) {
                for (const auto& q : cubes[s]) {
                    if (q.first == L) finest[s].push_back(q);
                }
                std::shuffle(finest[s].begin(), finest[s].end(), rng);
            }
            std::size_t m = finest[0].size();
            for (int s = 1; s < t; ++s) m = std::min(m, finest[s].size());
            for (std::size_t r = 0; r < m; ++r) {
                std::vector<std::pair<int, std::vector<int>>> rect;
                for (int s = 0; s < t; ++s) rect.push_back(finest[s][r]);
                terms.push_back(make_term(rect, config.dims, rng, law()));
            }
        } else {
            kind = "random";
            std::bernoulli_distribution keep(0.3);
            std::vector<std::size_t> idx(static_cast<std::size_t>(t), 0);
            for (;;) {
                if (keep(rng)) {
                    std::vector<std::pair<int, std::vector<int>>> rect;
                    for (int s = 0; s < t; ++s) rect.push_back(cubes[s][idx[s]]);
                    terms.push_back(make_term(rect, config.dims, rng, law()));
                }
                int s = t - 1;
                while (s >= 0 && ++idx[s] == cubes[s].size()) idx[s--] = 0;
                if (s < 0) break;
            }
        }
        out.emplace_back(std::move(kind), std::move(terms));
    }
    return out;
}

GridFunction synthesize_terms(const ProductLattice& lattice, const std::vector<CorpusTerm>& terms) {
    WaveletCoefficients c(lattice, std::vector<cplx>(lattice.size(), cplx{0.0, 0.0}));
    for (const auto& term : terms) {
        DyadicRectangle rect;
        for (std::size_t s = 0; s < term.scales.size(); ++s) rect.cubes.push_back(DyadicCube{term.scales[s], term.positions[s]});
        const Signature sig{term.signature};
        c.set(rect, sig, c.at(rect, sig) + term.value);
    }
    return haar_inverse(c);
}

std::optional<CorpusSymbol> normalize_symbol(GridFunction b, const ExperimentConfig& config) {
    auto c = haar_transform(b);
    const auto opt = bmo_options(config);
    const double raw = product_bmo_lower(c, opt).value;
    if (!(raw > 0.0) || !std::isfinite(raw)) return std::nullopt;
    CorpusSymbol sym;
    sym.scale = 1.0 / raw;
    b *= cplx{sym.scale, 0.0};
    c *= cplx{sym.scale, 0.0};
    const auto pb = product_bmo_lower(c, opt);
    sym.product_lower = pb.value;
    sym.collection = pb.collection;
    sym.rectangular = rectangular_bmo(c).value;
    if (b.lattice().parameters() >= 2) sym.minus_one = bmo_minus_one(c).certified;
    sym.b = std::move(b);
    return sym;
}

Corpus generate_corpus(const ExperimentConfig& config, std::size_t points) {
    if (config.corpus_max_scale > log2_exact(points) - 1) {
        throw StructuralError("corpus_max_scale too fine for " + std::to_string(points) + " points per axis");
    }
    const auto lat = config.lattice(points);
    const auto drawn = draw_corpus_terms(config);
    Corpus corpus;
    std::vector<std::optional<CorpusSymbol>> slots(drawn.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < drawn.size(); i = next++) {
            slots[i] = normalize_symbol(synthesize_terms(lat, drawn[i].second), config);
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(drawn.size())));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < drawn.size(); ++i) {
        if (!slots[i]) {
            ++corpus.skipped;
            continue;
        }
        slots[i]->id = i;
        slots[i]->kind = drawn[i].first;
        slots[i]->terms = drawn[i].second;
        corpus.symbols.push_back(std::move(*slots[i]));
    }
    return corpus;
}

std::vector<SymbolFamily> configured_families(const ExperimentConfig& config) {
    std::vector<SymbolFamily> out;
    for (int d : config.dims) {
        auto f = riesz_family(d, config.family_samples);
        out.push_back(config.family == "closed_riesz" ? close_family(f) : f);
    }
    return out;
}

std::vector<SymbolFamily> cone_families(const ExperimentConfig& config) {
    std::vector<SymbolFamily> out;
    for (int d : config.dims) {
        std::vector<MultiplierSymbol> members;
        for (int j = 0; j < d; ++j) {
            std::vector<double> axis(static_cast<std::size_t>(d), 0.0);
            axis[static_cast<std::size_t>(j)] = 1.0;
            members.push_back(smoothed_cone_symbol(Cone::along(axis, config.cone_aperture), config.tau,
                                                   config.smoothing_order));
        }
        out.emplace_back(d, std::move(members), SphereSampleSet::standard(d, config.family_samples));
    }
    return out;
}

RatioSummary summarize_ratios(std::span<const double> ratios) {
    if (ratios.empty()) throw DomainError("summarize_ratios: no ratios");
    RatioSummary s;
    s.c1 = *std::min_element(ratios.begin(), ratios.end());
    s.c2 = *std::max_element(ratios.begin(), ratios.end());
    return s;
}

SweepRecord sweep_record(const CorpusSymbol& symbol, const ExperimentConfig& config,
                         std::span<const SymbolFamily> families, std::span<const SymbolFamily> cones) {
    SweepRecord rec;
    rec.id = symbol.id;
    rec.kind = symbol.kind;
    rec.rectangular = symbol.rectangular;
    rec.minus_one = symbol.minus_one;
    rec.product_lower = symbol.product_lower;
    const auto opt = config.norm_options();
    rec.family = sup_record(symbol.b, families, opt);
    rec.family_ratio = rec.family.value / rec.product_lower;
    if (!cones.empty()) {
        rec.cone = sup_record(symbol.b, cones, opt);
        rec.cone_ratio = rec.cone->value / rec.product_lower;
    }
    auto beta = collection_projection(symbol.b, symbol.collection);
    const double nb = lp_norm(beta, 2.0);
    if (nb > 0.0) {
        beta *= cplx{1.0 / nb, 0.0};
        ConeSelectionOptions sel;
        sel.kappa = config.kappa;
        sel.apertures = config.aperture_list();
        sel.seed = derive_seed(config.seed, kSelectionStream, symbol.id);
        sel.max_tries = config.max_tries;
        sel.tau = config.tau;
        sel.order = config.smoothing_order;
        const auto s = select_cones(beta, sel);
        rec.cone_selection = {{"success", s.success},
                              {"tries", s.tries},
                              {"energy", s.quantities.energy},
                              {"leakage_l4", s.quantities.leakage},
                              {"square_leakage_l2", s.quantities.square_leakage}};
    } else {
        rec.cone_selection = {{"success", false}, {"reason", "zero projection"}};
    }
    return rec;
}

SweepResult equivalence_sweep(const ExperimentConfig& config) {
    SweepResult result;
    result.criteria = nlohmann::json::object();
    std::vector<int> seen;
    for (int d : config.dims) {
        if (std::find(seen.begin(), seen.end(), d) != seen.end()) continue;
        seen.push_back(d);
        const auto fam = close_family(riesz_family(d, config.family_samples));
        const auto sep = check_point_separation(fam, 1e-6);
        const auto anti = check_antipodal_separation(fam, 1e-6);
        const auto tan = check_tangential_derivatives(fam, 1e-6);
        const bool ok = sep.pass && anti.pass && tan.pass;
        result.criteria_pass = result.criteria_pass && ok;
        result.criteria["d" + std::to_string(d)] = {{"point_separation", sep.to_json(fam.samples())},
                                                    {"antipodal_separation", anti.to_json(fam.samples())},
                                                    {"tangential_derivatives", tan.to_json(fam.samples())},
                                                    {"pass", ok}};
    }

    const auto families = configured_families(config);
    const auto cones = config.cone_family ? cone_families(config) : std::vector<SymbolFamily>{};
    std::vector<std::size_t> resolutions{config.n};
    resolutions.insert(resolutions.end(), config.compare_n.begin(), config.compare_n.end());
    for (std::size_t points : resolutions) {
        const auto corpus = generate_corpus(config, points);
        ResolutionSweep sweep;
        sweep.n = points;
        sweep.skipped = corpus.skipped;
        sweep.records.resize(corpus.symbols.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (std::size_t i = next++; i < corpus.symbols.size(); i = next++) {
                sweep.records[i] = sweep_record(corpus.symbols[i], config, families, cones);
            }
        };
        const unsigned n_threads =
            std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(corpus.symbols.size())));
        if (n_threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        std::vector<double> fam_ratios, cone_ratios;
        for (const auto& r : sweep.records) {
            fam_ratios.push_back(r.family_ratio);
            if (!r.family.converged) ++sweep.nonconverged;
            if (!(r.family.value > 0.0)) result.all_positive = false;
            if (r.cone) {
                cone_ratios.push_back(*r.cone_ratio);
                if (!r.cone->converged) ++sweep.nonconverged;
                if (!(r.cone->value > 0.0)) result.all_positive = false;
            }
        }
        if (!fam_ratios.empty()) sweep.family = summarize_ratios(fam_ratios);
        if (!cone_ratios.empty()) sweep.cone = summarize_ratios(cone_ratios);
        result.nonconverged += sweep.nonconverged;
        result.resolutions.push_back(std::move(sweep));
    }
    const auto& main = result.resolutions.front();
    for (std::size_t i = 1; i < result.resolutions.size(); ++i) {
        const auto& other = result.resolutions[i];
        result.family_stability.push_back(main.family.spread() / other.family.spread());
        if (main.cone && other.cone) result.cone_stability.push_back(main.cone->spread() / other.cone->spread());
    }
    return result;
}

nlohmann::json SweepResult::to_json() const {
    nlohmann::json res = nlohmann::json::array();
    for (const auto& r : resolutions) {
        nlohmann::json records = nlohmann::json::array();
        for (const auto& rec : r.records) {
            nlohmann::json j{{"id", rec.id},
                             {"kind", rec.kind},
                             {"rectangular", rec.rectangular},
                             {"minus_one", optional_json(rec.minus_one)},
                             {"product_lower", rec.product_lower},
                             {"family", sup_json(rec.family)},
                             {"family_ratio", rec.family_ratio},
                             {"cone_selection", rec.cone_selection}};
            if (rec.cone) {
                j["cone"] = sup_json(*rec.cone);
                j["cone_ratio"] = *rec.cone_ratio;
            }
            records.push_back(std::move(j));
        }
        nlohmann::json summary{{"family", {{"c1", r.family.c1}, {"c2", r.family.c2}, {"spread", r.family.spread()}}}};
        if (r.cone) summary["cone"] = {{"c1", r.cone->c1}, {"c2", r.cone->c2}, {"spread", r.cone->spread()}};
        res.push_back({{"n", r.n},
                       {"records", records},
                       {"skipped", r.skipped},
                       {"nonconverged", r.nonconverged},
                       {"summary", summary}});
    }
    return {{"criteria", criteria},
            {"criteria_pass", criteria_pass},
            {"resolutions", res},
            {"family_stability", family_stability},
            {"cone_stability", cone_stability},
            {"all_positive", all_positive},
            {"nonconverged", nonconverged}};
}

std::string SweepResult::to_csv() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "n,id,kind,rectangular,minus_one,product_lower,family_sup,family_ratio,family_converged,cone_sup,"
           "cone_ratio,cone_converged,selection_success\n";
    for (const auto& r : resolutions) {
        for (const auto& rec : r.records) {
            out << r.n << ',' << rec.id << ',' << rec.kind << ',' << rec.rectangular << ',';
            if (rec.minus_one) out << *rec.minus_one;
            out << ',' << rec.product_lower << ',' << rec.family.value << ',' << rec.family_ratio << ','
                << (rec.family.converged ? 1 : 0) << ',';
            if (rec.cone) {
                out << rec.cone->value << ',' << *rec.cone_ratio << ',' << (rec.cone->converged ? 1 : 0);
            } else {
                out << ",,";
            }
            out << ',' << (rec.cone_selection.value("success", false) ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

nlohmann::json TestFunctionReport::to_json() const {
    return {{"selection_success", selection_success},
            {"selection", selection},
            {"main_term", main_term},
            {"leakage_term", leakage_term},
            {"complement_term", complement_term},
            {"complement_symbol_sup", complement_symbol_sup},
            {"complement_bound", complement_bound},
            {"gamma_l4", gamma_l4},
            {"commutator_b", commutator_b},
            {"commutator_beta", commutator_beta},
            {"beta_l2", beta_l2},
            {"approximation_error", approximation_error}};
}

TestFunctionReport test_function_split(const GridFunction& b, const GridFunction& beta, const ExperimentConfig& config) {
    require_same_lattice(b, beta, "test_function_split");
    const auto& lat = beta.lattice();
    const int t = lat.parameters();
    TestFunctionReport rep;
    rep.beta_l2 = lp_norm(beta, 2.0);

    ConeSelectionOptions sel;
    sel.kappa = config.kappa;
    sel.apertures = config.aperture_list();
    sel.seed = derive_seed(config.seed, kTestFunctionStream, 0);
    sel.max_tries = config.max_tries;
    sel.tau = config.tau;
    sel.order = config.smoothing_order;
    const auto selection = select_cones(beta, sel);
    rep.selection_success = selection.success;
    rep.selection = selection.to_json();

    std::vector<MultiplierSymbol> t_syms, td_syms, hd_syms;
    for (int s = 0; s < t; ++s) {
        const auto& pair = selection.pairs[static_cast<std::size_t>(s)];
        const int d = lat.dim(s);
        td_syms.push_back(smoothed_cone_symbol(pair.inner, pair.tau, pair.order));
        hd_syms.push_back(half_space_symbol(pair.inner.direction()));
        if (config.test_operator == "approx" && d >= 2) {
            const auto fam = close_family(riesz_family(d, config.family_samples));
            const auto target = h_cd_symbol(pair, d);
            std::optional<ApproximationResult> best;
            for (int deg = 0; deg <= config.degree_cap; ++deg) {
                auto r = approximate_symbol(fam, target, deg, config.approx_order);
                const bool good = r.sup_error[0] <= config.epsilon;
                best = std::move(r);
                if (good) break;
            }
            rep.approximation_error.push_back(best->sup_error[0]);
            t_syms.push_back(best->polynomial.symbol);
        } else {
            t_syms.push_back(smoothed_cone_symbol(pair.outer, pair.tau, pair.order));
            if (config.test_operator == "approx") rep.approximation_error.push_back(0.0);
        }
    }
    const TensorMultiplier td(lat, td_syms), hd(lat, hd_syms);
    const auto gamma = td.apply(beta);
    const auto h_beta = hd.apply(beta);

    // Products are formed between trigonometric interpolants on the doubled lattice.
    const auto fine = doubled(lat);
    const TensorMultiplier t_op(fine, t_syms);
    const auto gamma_f = interpolate(gamma, fine);
    const auto leak_f = interpolate(h_beta - gamma, fine);
    const auto comp_f = interpolate(beta - h_beta, fine);
    const auto gamma_bar_f = conj(gamma_f);
    rep.gamma_l4 = lp_norm(gamma_f, 4.0);
    rep.main_term = lp_norm(t_op.apply(pointwise(gamma_f, gamma_bar_f)), 2.0);
    rep.leakage_term = lp_norm(t_op.apply(pointwise(leak_f, gamma_bar_f)), 2.0);
    rep.complement_term = lp_norm(t_op.apply(pointwise(comp_f, gamma_bar_f)), 2.0);

    // Off H_D some parameter lies where its half-space symbol vanishes.
    std::vector<double> off(static_cast<std::size_t>(t), 0.0), full(static_cast<std::size_t>(t), 0.0);
    for (int s = 0; s < t; ++s) {
        const auto tv = t_syms[static_cast<std::size_t>(s)].lattice_values(fine, s);
        const auto hv = hd_syms[static_cast<std::size_t>(s)].lattice_values(fine, s);
        for (std::size_t p = 0; p < tv.size(); ++p) {
            full[static_cast<std::size_t>(s)] = std::max(full[static_cast<std::size_t>(s)], std::abs(tv[p]));
            if (hv[p] == cplx{0.0, 0.0}) {
                off[static_cast<std::size_t>(s)] = std::max(off[static_cast<std::size_t>(s)], std::abs(tv[p]));
            }
        }
    }
    double sup = 0.0;
    for (int s = 0; s < t; ++s) {
        double m = off[static_cast<std::size_t>(s)];
        for (int r = 0; r < t; ++r) {
            if (r != s) m *= full[static_cast<std::size_t>(r)];
        }
        sup = std::max(sup, m);
    }
    rep.complement_symbol_sup = sup;
    rep.complement_bound = sup * lp_norm(comp_f, 4.0) * rep.gamma_l4;

    const auto gamma_bar = conj(gamma);
    const OperatorChoice ops(lat, t_syms);
    rep.commutator_b = lp_norm(expanded_commutator_apply(b, gamma_bar, ops), 2.0);
    rep.commutator_beta = lp_norm(expanded_commutator_apply(beta, gamma_bar, ops), 2.0);
    return rep;
}

TestFunctionReport test_function_experiment(const GridFunction& b, const ExperimentConfig& config) {
    const auto c = haar_transform(b);
    const auto pb = product_bmo_lower(c, bmo_options(config));
    auto beta = haar_inverse(project_coefficients(c, pb.collection));
    const double nb = lp_norm(beta, 2.0);
    if (!(nb > 0.0)) {
        TestFunctionReport rep;
        rep.selection = {{"success", false}, {"reason", "zero projection"}};
        return rep;
    }
    beta *= cplx{1.0 / nb, 0.0};
    auto rep = test_function_split(b, beta, config);
    rep.beta_l2 = nb;
    return rep;
}

nlohmann::json cone_approximation_experiment(const ExperimentConfig& config, int d) {
    if (d < 2) throw DomainError("cone_approximation_experiment requires d >= 2");
    const auto fam = close_family(riesz_family(d, config.family_samples));
    const std::vector<double> diag(static_cast<std::size_t>(d), 1.0);
    const ConePair pair{Cone::along(diag, config.inner_side), Cone::along(diag, config.outer_side), config.tau,
                        config.smoothing_order};
    const auto target = h_cd_symbol(pair, d);
    nlohmann::json errors = nlohmann::json::array();
    int first = -1;
    bool monotone = true;
    double prev = std::numeric_limits<double>::infinity();
    for (int deg = 0; deg <= config.degree_cap; ++deg) {
        const auto r = approximate_symbol(fam, target, deg, config.approx_order);
        errors.push_back({{"degree", deg},
                          {"sup_error", r.sup_error},
                          {"terms", r.polynomial.monomials.size()},
                          {"regularized", r.regularized}});
        if (first < 0 && r.sup_error[0] <= config.epsilon) first = deg;
        if (r.sup_error[0] > prev + 1e-9) monotone = false;
        prev = r.sup_error[0];
    }
    return {{"d", d},
            {"samples", fam.samples().size()},
            {"family_size", fam.size()},
            {"inner", pair.inner.to_json()},
            {"outer", pair.outer.to_json()},
            {"epsilon", config.epsilon},
            {"order", config.approx_order},
            {"degrees", errors},
            {"first_degree", first >= 0 ? nlohmann::json(first) : nlohmann::json(nullptr)},
            {"nonincreasing", monotone}};
}

nlohmann::json journe_experiment(const GridFunction& b, const ExperimentConfig& config) {
    const auto c = haar_transform(b);
    const auto pb = product_bmo_lower(c, bmo_options(config));
    const RectangleCollection U(c.space(), pb.collection);
    const auto enl = journe_enlarge(U, config.journe_a);

    // Rectangles inside V but not inside the shadow.
    const auto masses = c.rectangle_masses();
    double v_mass = 0.0;
    std::size_t v_count = 0;
    for (std::size_t r = 0; r < masses.size(); ++r) {
        const auto pts = c.space().points_of(r);
        const bool in_v = std::all_of(pts.begin(), pts.end(), [&](std::size_t p) { return enl.V[p] != 0; });
        const bool in_sh = std::all_of(pts.begin(), pts.end(), [&](std::size_t p) { return U.shadow()[p] != 0; });
        if (in_v && !in_sh) {
            v_mass += masses[r];
            ++v_count;
        }
    }
    double e_min = std::numeric_limits<double>::infinity(), e_max = 0.0;
    for (double e : enl.E) {
        e_min = std::min(e_min, e);
        e_max = std::max(e_max, e);
    }
    nlohmann::json damped = nlohmann::json::array();
    for (double cexp : config.cexp) {
        const auto d = damped_projection(c, U, enl.E, cexp);
        double mass = 0.0;
        for (double m : d.rectangle_masses()) mass += m;
        damped.push_back({{"cexp", cexp},
                          {"l2", std::sqrt(mass)},
                          {"product_lower", product_bmo_lower(d, bmo_options(config)).value},
                          {"rectangular", rectangular_bmo(d).value}});
    }
    return {{"product_lower", pb.value},
            {"collection_size", U.size()},
            {"shadow_measure", U.shadow_measure()},
            {"V_measure", enl.measure()},
            {"a", enl.a},
            {"threshold", enl.threshold},
            {"degenerate", enl.degenerate},
            {"E_min", enl.E.empty() ? nlohmann::json(nullptr) : nlohmann::json(e_min)},
            {"E_max", enl.E.empty() ? nlohmann::json(nullptr) : nlohmann::json(e_max)},
            {"between_rectangles", v_count},
            {"between_l2", std::sqrt(v_mass)},
            {"damped", damped}};
}

}  // namespace czl
