#include "czl/bmo.hpp"
#include "czl/commutator.hpp"
#include "czl/error.hpp"
#include "czl/experiments.hpp"
#include "czl/lattice.hpp"
#include "czl/multipliers.hpp"
#include "czl/symbol_family.hpp"
#include "czl/wavelet.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNonConverged = 2;

void emit(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw czl::StructuralError("cannot write " + path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw czl::StructuralError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw czl::StructuralError(path + ": " + e.what());
    }
}

// A symbol file holds one symbol object, an array of them, or {"members": [...]}.
std::vector<czl::MultiplierSymbol> read_symbols(const std::string& path) {
    const auto j = read_json_file(path);
    const auto& list = j.is_object() && j.contains("members") ? j["members"] : j;
    std::vector<czl::MultiplierSymbol> out;
    try {
        if (list.is_array()) {
            for (const auto& s : list) out.push_back(czl::symbol_from_json(s));
        } else {
            out.push_back(czl::symbol_from_json(list));
        }
    } catch (const nlohmann::json::exception& e) {
        throw czl::StructuralError(path + ": " + e.what());
    }
    if (out.empty()) throw czl::StructuralError(path + ": no symbols");
    return out;
}

czl::SymbolFamily make_family(std::vector<czl::MultiplierSymbol> members, std::size_t samples) {
    const int d = members.front().dim();
    for (const auto& m : members) {
        if (m.dim() != d) throw czl::StructuralError("family members have different dimensions");
    }
    return czl::SymbolFamily(d, std::move(members), czl::SphereSampleSet::standard(d, samples));
}

struct Shared {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format;
    std::vector<std::string> overrides;
};

void add_shared(CLI::App* app, Shared& s) {
    app->add_option("--config", s.config_path, "key = value configuration file");
    app->add_option("--seed", s.seed, "Master seed");
    app->add_option("--out", s.out, "Output path (stdout when omitted)");
    app->add_option("--format", s.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    app->add_option("--set", s.overrides, "Configuration override key=value (repeatable)");
}

czl::ExperimentConfig load_config(const Shared& s) {
    auto c = s.config_path.empty() ? czl::ExperimentConfig{} : czl::parse_config_file(s.config_path);
    for (const auto& kv : s.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw czl::StructuralError("--set expects key=value, got '" + kv + "'");
        czl::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (s.seed) c.seed = *s.seed;
    if (!s.out.empty()) c.out = s.out;
    if (!s.format.empty()) c.format = s.format;
    return c;
}

void require_json(const czl::ExperimentConfig& c, const char* command) {
    if (c.format != "json") throw czl::StructuralError(std::string(command) + " writes json only");
}

// Symbols to analyse: the given grid file, or the normalized corpus at the main resolution.
std::vector<std::pair<std::string, czl::GridFunction>> input_symbols(const std::string& input,
                                                                     const czl::ExperimentConfig& c) {
    std::vector<std::pair<std::string, czl::GridFunction>> out;
    if (!input.empty()) {
        out.emplace_back(input, czl::read_czl1_file(input));
        return out;
    }
    auto corpus = czl::generate_corpus(c, c.n);
    for (auto& s : corpus.symbols) out.emplace_back("corpus:" + std::to_string(s.id), std::move(s.b));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for multi-parameter commutators"};
    app.require_subcommand(1);

    auto* criterion = app.add_subcommand("criterion-check", "Check a symbol family against the criterion");
    std::vector<std::string> criterion_files;
    double criterion_tol = 1e-6;
    std::size_t criterion_samples = 256;
    bool criterion_close = false;
    std::string criterion_out;
    criterion->add_option("files", criterion_files, "Symbol files forming one family")->required();
    criterion->add_option("--tol", criterion_tol, "Separation and derivative tolerance");
    criterion->add_option("--samples", criterion_samples, "Minimum number of sphere samples");
    criterion->add_flag("--close", criterion_close, "Add 1 and conjugates before checking");
    criterion->add_option("--out", criterion_out, "Output path");

    auto* bmo = app.add_subcommand("bmo-estimate", "Product BMO estimates of a grid function");
    std::string bmo_input, bmo_norm = "product", bmo_out;
    std::size_t bmo_budget = 4;
    std::uint64_t bmo_seed = 0;
    bmo->add_option("--input", bmo_input, "CZL1 grid file")->required();
    bmo->add_option("--norm", bmo_norm, "product, rect or minus1")->check(CLI::IsMember({"product", "rect", "minus1"}));
    bmo->add_option("--budget", bmo_budget, "Randomized greedy restarts");
    bmo->add_option("--seed", bmo_seed, "Seed of the restarts");
    bmo->add_option("--out", bmo_out, "Output path");

    auto* comm = app.add_subcommand("commutator-norm", "Sup of iterated commutator norms over families");
    std::string comm_b, comm_out, comm_method = "lanczos";
    std::vector<std::string> comm_families;
    double comm_tol = 1e-6;
    std::uint64_t comm_seed = 0;
    std::size_t comm_max_iter = 2000, comm_samples = 64;
    unsigned comm_threads = 1;
    comm->add_option("--b", comm_b, "CZL1 grid file of the symbol b")->required();
    comm->add_option("--family", comm_families, "One symbol file per parameter")->required();
    comm->add_option("--tol", comm_tol, "Relative tolerance");
    comm->add_option("--seed", comm_seed, "Start vector seed");
    comm->add_option("--method", comm_method, "lanczos or power")->check(CLI::IsMember({"lanczos", "power"}));
    comm->add_option("--max-iter", comm_max_iter, "Largest number of applications of C*C");
    comm->add_option("--samples", comm_samples, "Sphere samples of each family");
    comm->add_option("--threads", comm_threads, "Worker threads over choices");
    comm->add_option("--out", comm_out, "Output path");

    Shared sweep_opts, approx_opts, journe_opts, test_opts;
    auto* sweep = app.add_subcommand("equivalence-sweep", "Commutator norms against the product BMO proxy");
    add_shared(sweep, sweep_opts);
    auto* approx = app.add_subcommand("cone-approx", "Polynomial approximation of a cone cutoff");
    add_shared(approx, approx_opts);
    int approx_dim = 2;
    approx->add_option("--dim", approx_dim, "Sphere dimension d >= 2");
    auto* journe = app.add_subcommand("journe", "Journe enlargement of the product BMO collection");
    add_shared(journe, journe_opts);
    std::string journe_input;
    journe->add_option("--input", journe_input, "CZL1 grid file (default: the corpus)");
    auto* test = app.add_subcommand("test-function", "Three-term split of the test-function argument");
    add_shared(test, test_opts);
    std::string test_input;
    test->add_option("--input", test_input, "CZL1 grid file (default: the corpus)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*criterion) {
            std::vector<czl::MultiplierSymbol> members;
            for (const auto& f : criterion_files) {
                auto syms = read_symbols(f);
                members.insert(members.end(), syms.begin(), syms.end());
            }
            auto family = make_family(std::move(members), criterion_samples);
            if (criterion_close) family = czl::close_family(family);
            const auto sep = czl::check_point_separation(family, criterion_tol);
            const auto anti = czl::check_antipodal_separation(family, criterion_tol);
            const auto tan = czl::check_tangential_derivatives(family, criterion_tol);
            nlohmann::json members_json = nlohmann::json::array();
            for (const auto& m : family.members()) members_json.push_back(m.descriptor());
            const nlohmann::json report{{"d", family.dim()},
                                        {"members", members_json},
                                        {"samples", family.samples().size()},
                                        {"tol", criterion_tol},
                                        {"contains_one", family.contains_one()},
                                        {"conjugation_closed", family.conjugation_closed()},
                                        {"point_separation", sep.to_json(family.samples())},
                                        {"antipodal_separation", anti.to_json(family.samples())},
                                        {"tangential_derivatives", tan.to_json(family.samples())},
                                        {"pass", sep.pass && anti.pass && tan.pass}};
            emit(report.dump(2), criterion_out);
            return kExitOk;
        }
        if (*bmo) {
            const auto b = czl::read_czl1_file(bmo_input);
            const auto c = czl::haar_transform(b);
            nlohmann::json report{{"input", bmo_input}, {"norm", bmo_norm}};
            if (bmo_norm == "product") {
                czl::ProductBmoOptions opt;
                opt.budget = bmo_budget;
                opt.seed = bmo_seed;
                const auto r = czl::product_bmo_lower(c, opt);
                report.update({{"value", r.value},
                               {"source", r.source},
                               {"shadow_measure", r.shadow_measure},
                               {"collection", r.collection},
                               {"budget", bmo_budget},
                               {"seed", bmo_seed}});
            } else if (bmo_norm == "rect") {
                const auto r = czl::rectangular_bmo(c);
                report.update({{"value", r.value}, {"rectangle", r.rectangle}});
            } else {
                const auto r = czl::bmo_minus_one(c);
                report.update({{"value", r.certified},
                               {"heuristic", r.heuristic},
                               {"exact", r.exact},
                               {"parameter", r.parameter},
                               {"cube", r.cube},
                               {"collection", r.collection}});
            }
            emit(report.dump(2), bmo_out);
            return kExitOk;
        }
        if (*comm) {
            const auto b = czl::read_czl1_file(comm_b);
            std::vector<czl::SymbolFamily> families;
            for (const auto& f : comm_families) families.push_back(make_family(read_symbols(f), comm_samples));
            czl::NormOptions opt;
            opt.tol = comm_tol;
            opt.seed = comm_seed;
            opt.max_iter = comm_max_iter;
            opt.method = comm_method == "power" ? czl::NormMethod::power : czl::NormMethod::lanczos;
            const auto r = czl::sup_commutator_norm(b, families, opt, comm_threads);
            nlohmann::json choices = nlohmann::json::array();
            bool converged = true;
            for (std::size_t i = 0; i < r.choices.size(); ++i) {
                auto j = r.norms[i].to_json();
                j["choice"] = r.choices[i];
                choices.push_back(std::move(j));
                converged = converged && r.norms[i].converged;
            }
            const nlohmann::json report{{"sup", r.value},
                                        {"argmax", r.argmax},
                                        {"converged", converged},
                                        {"method", comm_method},
                                        {"tol", comm_tol},
                                        {"seed", comm_seed},
                                        {"choices", choices}};
            emit(report.dump(2), comm_out);
            return converged ? kExitOk : kExitNonConverged;
        }
        if (*sweep) {
            const auto c = load_config(sweep_opts);
            const auto r = czl::equivalence_sweep(c);
            if (!r.criteria_pass) std::cerr << "warning: a closed Riesz family failed the criterion checks\n";
            if (c.format == "csv") {
                emit(r.to_csv(), c.out);
            } else {
                auto j = r.to_json();
                j["config"] = c.to_json();
                emit(j.dump(2), c.out);
            }
            return r.nonconverged == 0 ? kExitOk : kExitNonConverged;
        }
        if (*approx) {
            const auto c = load_config(approx_opts);
            require_json(c, "cone-approx");
            auto j = czl::cone_approximation_experiment(c, approx_dim);
            j["config"] = c.to_json();
            emit(j.dump(2), c.out);
            return kExitOk;
        }
        if (*journe) {
            const auto c = load_config(journe_opts);
            require_json(c, "journe");
            nlohmann::json runs = nlohmann::json::array();
            for (const auto& [name, b] : input_symbols(journe_input, c)) {
                auto j = czl::journe_experiment(b, c);
                j["symbol"] = name;
                runs.push_back(std::move(j));
            }
            emit(nlohmann::json{{"config", c.to_json()}, {"runs", runs}}.dump(2), c.out);
            return kExitOk;
        }
        if (*test) {
            const auto c = load_config(test_opts);
            require_json(c, "test-function");
            nlohmann::json runs = nlohmann::json::array();
            for (const auto& [name, b] : input_symbols(test_input, c)) {
                auto j = czl::test_function_experiment(b, c).to_json();
                j["symbol"] = name;
                runs.push_back(std::move(j));
            }
            emit(nlohmann::json{{"config", c.to_json()}, {"runs", runs}}.dump(2), c.out);
            return kExitOk;
        }
    } catch (const czl::StructuralError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitOk;
}
