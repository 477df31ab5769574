#include "czl/commutator.hpp"

#include "czl/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace czl {

namespace {

void require_ops(const GridFunction& f, const OperatorChoice& ops, const char* what) {
    if (!(f.lattice() == ops.lattice())) throw StructuralError(std::string(what) + ": lattice mismatch");
}

double sign_of(unsigned mask) { return (std::popcount(mask) % 2 == 0) ? 1.0 : -1.0; }

void multiply_by(std::span<cplx> data, std::span<const cplx> table) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] *= table[i];
}

// Inverse transform of table * f_hat.
std::vector<cplx> filtered(const ProductLattice& lattice, std::span<const cplx> f_hat, std::span<const cplx> table) {
    std::vector<cplx> out(f_hat.begin(), f_hat.end());
    multiply_by(out, table);
    fft_inverse_inplace(lattice, out);
    return out;
}

std::vector<cplx> forward(const ProductLattice& lattice, std::span<const cplx> f) {
    std::vector<cplx> out(f.begin(), f.end());
    fft_forward_inplace(lattice, out);
    return out;
}

}  // namespace

OperatorChoice::OperatorChoice(const ProductLattice& lattice, std::vector<MultiplierSymbol> symbols)
    : lattice_(lattice), symbols_(std::move(symbols)) {
    const int t = lattice_.parameters();
    if (static_cast<int>(symbols_.size()) != t) throw StructuralError("operator choice: one symbol per parameter required");
    if (t > 16) throw StructuralError("operator choice: too many parameters");
    std::vector<std::vector<cplx>> factors;
    for (int s = 0; s < t; ++s) {
        if (symbols_[s].dim() != lattice_.dim(s)) throw StructuralError("operator choice: symbol dimension mismatch");
        factors.push_back(symbols_[s].lattice_values(lattice_, s));
        double m = 0.0;
        for (const auto& v : factors.back()) m = std::max(m, std::abs(v));
        bounds_.push_back(m);
    }
    const unsigned count = 1u << t;
    for (unsigned mask = 0; mask < count; ++mask) {
        std::vector<std::vector<cplx>> chosen;
        for (int s = 0; s < t; ++s) {
            if (mask & (1u << s)) {
                chosen.push_back(factors[s]);
            } else {
                chosen.emplace_back(lattice_.parameter_size(s), cplx{1.0, 0.0});
            }
        }
        const auto m = TensorMultiplier::from_factors(lattice_, std::move(chosen));
        tables_.emplace_back(m.table().begin(), m.table().end());
        auto& adj = adjoint_tables_.emplace_back(tables_.back());
        for (auto& v : adj) v = std::conj(v);
    }
}

std::span<const cplx> OperatorChoice::subset_table(unsigned mask, bool adjoint) const {
    if (mask >= tables_.size()) throw StructuralError("operator choice: subset out of range");
    return adjoint ? adjoint_tables_[mask] : tables_[mask];
}

GridFunction iterated_commutator_apply(const GridFunction& b, const GridFunction& f, const OperatorChoice& ops) {
    require_same_lattice(b, f, "iterated_commutator_apply");
    require_ops(f, ops, "iterated_commutator_apply");
    const auto& lat = ops.lattice();
    const int t = ops.parameters();
    // level(s, g) = [T_s, level(s + 1, .)] g, level(t, g) = b g.
    auto level = [&](auto&& self, int s, std::vector<cplx> g) -> std::vector<cplx> {
        if (s == t) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= b[i];
            return g;
        }
        const auto table = ops.subset_table(1u << s);
        auto outer = self(self, s + 1, g);
        fft_forward_inplace(lat, outer);
        multiply_by(outer, table);
        fft_inverse_inplace(lat, outer);
        fft_forward_inplace(lat, g);
        multiply_by(g, table);
        fft_inverse_inplace(lat, g);
        const auto inner = self(self, s + 1, std::move(g));
        for (std::size_t i = 0; i < outer.size(); ++i) outer[i] -= inner[i];
        return outer;
    };
    const std::vector<cplx> start(f.values().begin(), f.values().end());
    return GridFunction(lat, level(level, 0, start));
}

GridFunction commutator_term(const GridFunction& b, const GridFunction& f, const OperatorChoice& ops, unsigned mask) {
    require_same_lattice(b, f, "commutator_term");
    require_ops(f, ops, "commutator_term");
    const auto& lat = ops.lattice();
    const unsigned full = (1u << ops.parameters()) - 1u;
    if (mask > full) throw StructuralError("commutator_term: subset out of range");
    auto g = filtered(lat, forward(lat, f.values()), ops.subset_table(mask));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= b[i];
    fft_forward_inplace(lat, g);
    multiply_by(g, ops.subset_table(full & ~mask));
    fft_inverse_inplace(lat, g);
    return GridFunction(lat, std::move(g));
}

GridFunction expanded_commutator_apply(const GridFunction& b, const GridFunction& f, const OperatorChoice& ops) {
    require_same_lattice(b, f, "expanded_commutator_apply");
    require_ops(f, ops, "expanded_commutator_apply");
    const auto& lat = ops.lattice();
    const unsigned full = (1u << ops.parameters()) - 1u;
    const auto f_hat = forward(lat, f.values());
    std::vector<cplx> acc(lat.size(), cplx{0.0, 0.0});
    for (unsigned mask = 0; mask <= full; ++mask) {
        auto g = mask == 0 ? std::vector<cplx>(f.values().begin(), f.values().end())
                           : filtered(lat, f_hat, ops.subset_table(mask));
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= b[i];
        fft_forward_inplace(lat, g);
        const auto outer = ops.subset_table(full & ~mask);
        const double sgn = sign_of(mask);
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += sgn * outer[i] * g[i];
    }
    fft_inverse_inplace(lat, acc);
    return GridFunction(lat, std::move(acc));
}

GridFunction commutator_adjoint_apply(const GridFunction& b, const GridFunction& g, const OperatorChoice& ops) {
    require_same_lattice(b, g, "commutator_adjoint_apply");
    require_ops(g, ops, "commutator_adjoint_apply");
    const auto& lat = ops.lattice();
    const unsigned full = (1u << ops.parameters()) - 1u;
    const auto g_hat = forward(lat, g.values());
    std::vector<cplx> acc(lat.size(), cplx{0.0, 0.0});
    for (unsigned mask = 0; mask <= full; ++mask) {
        const unsigned comp = full & ~mask;
        auto h = comp == 0 ? std::vector<cplx>(g.values().begin(), g.values().end())
                           : filtered(lat, g_hat, ops.subset_table(comp, true));
        for (std::size_t i = 0; i < h.size(); ++i) h[i] *= std::conj(b[i]);
        fft_forward_inplace(lat, h);
        const auto outer = ops.subset_table(mask, true);
        const double sgn = sign_of(mask);
        for (std::size_t i = 0; i < h.size(); ++i) acc[i] += sgn * outer[i] * h[i];
    }
    fft_inverse_inplace(lat, acc);
    return GridFunction(lat, std::move(acc));
}

GridFunction pi_form(const GridFunction& f, const GridFunction& g, const OperatorChoice& ops) {
    require_same_lattice(f, g, "pi_form");
    require_ops(f, ops, "pi_form");
    const auto& lat = ops.lattice();
    const unsigned full = (1u << ops.parameters()) - 1u;
    const auto f_hat = forward(lat, f.values());
    const auto g_hat = forward(lat, g.values());
    std::vector<cplx> acc(lat.size(), cplx{0.0, 0.0});
    for (unsigned mask = 0; mask <= full; ++mask) {
        const auto tf = filtered(lat, f_hat, ops.subset_table(mask));
        const auto tg = filtered(lat, g_hat, ops.subset_table(full & ~mask, true));
        const double sgn = sign_of(mask);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += sgn * std::conj(tf[i]) * tg[i];
    }
    return GridFunction(lat, std::move(acc));
}

nlohmann::json NormResult::to_json() const {
    return {{"value", value}, {"iterations", iterations}, {"converged", converged}, {"zero_map", zero_map}};
}

namespace {

double map_bound(const GridFunction& b, const OperatorChoice& ops) {
    double bound = lp_norm(b, std::numeric_limits<double>::infinity()) * std::ldexp(1.0, ops.parameters());
    for (int s = 0; s < ops.parameters(); ++s) bound *= ops.symbol_bound(s);
    return bound;
}

GridFunction random_unit(const ProductLattice& lat, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    GridFunction v(lat);
    for (auto& x : v.values()) x = cplx{normal(rng), normal(rng)};
    v *= cplx{1.0 / lp_norm(v, 2.0), 0.0};
    return v;
}

void power_iteration(const GridFunction& b, const OperatorChoice& ops, const NormOptions& options, double bound,
                     NormResult& res) {
    auto v = random_unit(ops.lattice(), options.seed);
    double prev = 0.0;
    for (std::size_t it = 1; it <= options.max_iter; ++it) {
        res.iterations = it;
        const auto u = expanded_commutator_apply(b, v, ops);
        if (lp_norm(u, 2.0) <= 1e-13 * bound) {
            res.value = 0.0;
            res.zero_map = true;
            res.converged = true;
            return;
        }
        auto w = commutator_adjoint_apply(b, u, ops);
        const double nw = lp_norm(w, 2.0);
        const double est = std::sqrt(nw);
        res.value = std::max(res.value, est);
        w *= cplx{1.0 / nw, 0.0};
        v = std::move(w);
        if (it > 1 && std::abs(est - prev) <= options.tol * est) {
            res.converged = true;
            return;
        }
        prev = est;
    }
}

void lanczos(const GridFunction& b, const OperatorChoice& ops, const NormOptions& options, double bound,
             NormResult& res) {
    constexpr std::size_t max_basis = 60;
    const std::size_t n = ops.lattice().size();
    auto start = random_unit(ops.lattice(), options.seed);
    std::vector<cplx> q0(start.values().begin(), start.values().end());
    while (res.iterations < options.max_iter) {
        std::vector<std::vector<cplx>> basis{q0};
        std::vector<double> alpha, beta;
        for (;;) {
            const GridFunction q(ops.lattice(), basis.back());
            const auto u = expanded_commutator_apply(b, q, ops);
            ++res.iterations;
            if (res.iterations == 1 && lp_norm(u, 2.0) <= 1e-13 * bound) {
                res.value = 0.0;
                res.zero_map = true;
                res.converged = true;
                return;
            }
            auto w = commutator_adjoint_apply(b, u, ops).take_values();
            alpha.push_back(inner_product(w, basis.back()).real());
            // Two passes of classical Gram-Schmidt against the whole basis.
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& v : basis) {
                    const cplx p = inner_product(w, v);
                    for (std::size_t i = 0; i < n; ++i) w[i] -= p * v[i];
                }
            }
            const double nb = l2_norm(w);
            const std::size_t k = alpha.size();
            Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
            for (std::size_t i = 0; i < k; ++i) {
                tri(i, i) = alpha[i];
                if (i + 1 < k) tri(i, i + 1) = tri(i + 1, i) = beta[i];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(tri);
            const Eigen::Index top = static_cast<Eigen::Index>(k) - 1;
            const double theta = std::max(eig.eigenvalues()(top), 0.0);
            const double residual = nb * std::abs(eig.eigenvectors()(top, top));
            res.value = std::max(res.value, std::sqrt(theta));
            const bool done = residual <= options.tol * theta || nb <= 1e-14 * std::max(theta, 1e-300);
            if (done || k == max_basis || res.iterations >= options.max_iter) {
                // Ritz vector for the restart.
                std::vector<cplx> ritz(n, cplx{0.0, 0.0});
                for (std::size_t j = 0; j < k; ++j) {
                    const double c = eig.eigenvectors()(static_cast<Eigen::Index>(j), top);
                    for (std::size_t i = 0; i < n; ++i) ritz[i] += c * basis[j][i];
                }
                const double nr = l2_norm(ritz);
                for (auto& x : ritz) x /= nr;
                q0 = std::move(ritz);
                if (done) {
                    res.converged = true;
                    return;
                }
                break;
            }
            beta.push_back(nb);
            for (auto& x : w) x /= nb;
            basis.push_back(std::move(w));
        }
    }
}

}  // namespace

NormResult operator_norm(const GridFunction& b, const OperatorChoice& ops, const NormOptions& options) {
    if (!(options.tol > 0.0)) throw DomainError("operator_norm requires tol > 0");
    if (!(b.lattice() == ops.lattice())) throw StructuralError("operator_norm: lattice mismatch");
    const double bound = map_bound(b, ops);
    NormResult res;
    if (bound == 0.0) {
        res.zero_map = true;
        res.converged = true;
        return res;
    }
    if (options.method == NormMethod::power) {
        power_iteration(b, ops, options, bound, res);
    } else {
        lanczos(b, ops, options, bound, res);
    }
    return res;
}

SupNormResult sup_commutator_norm(const GridFunction& b, std::span<const SymbolFamily> families,
                                  const NormOptions& options, unsigned threads) {
    const auto& lat = b.lattice();
    if (static_cast<int>(families.size()) != lat.parameters()) {
        throw StructuralError("sup_commutator_norm: one family per parameter required");
    }
    SupNormResult res;
    std::size_t total = 1;
    for (const auto& fam : families) {
        if (fam.size() == 0) throw DomainError("sup_commutator_norm: empty family");
        total *= fam.size();
    }
    for (std::size_t c = 0; c < total; ++c) {
        std::vector<std::size_t> k(families.size());
        std::size_t rest = c;
        for (std::size_t s = families.size(); s-- > 0;) {
            k[s] = rest % families[s].size();
            rest /= families[s].size();
        }
        res.choices.push_back(std::move(k));
    }
    res.norms.resize(total);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t c = next++; c < total; c = next++) {
            std::vector<MultiplierSymbol> symbols;
            for (std::size_t s = 0; s < families.size(); ++s) symbols.push_back(families[s].members()[res.choices[c][s]]);
            const OperatorChoice ops(lat, std::move(symbols));
            res.norms[c] = operator_norm(b, ops, options);
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(total)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t c = 0; c < total; ++c) {
        if (c == 0 || res.norms[c].value > res.value) {
            res.value = res.norms[c].value;
            res.argmax = res.choices[c];
        }
    }
    return res;
}

ConeQuantities cone_quantities(const GridFunction& beta, std::span<const ConePair> pairs) {
    const auto& lat = beta.lattice();
    const int t = lat.parameters();
    if (static_cast<int>(pairs.size()) != t) throw StructuralError("cone_quantities: one pair per parameter required");
    std::vector<MultiplierSymbol> td, hd, hc, pc;
    for (const auto& p : pairs) {
        td.push_back(smoothed_cone_symbol(p.inner, p.tau, p.order));
        hd.push_back(half_space_symbol(p.inner.direction()));
        hc.push_back(half_space_symbol(p.outer.direction()));
        pc.push_back(cone_projection_symbol(p.outer));
    }
    const TensorMultiplier m_td(lat, td), m_hd(lat, hd), m_hc(lat, hc), m_pc(lat, pc);
    const auto t_d = m_td.table();
    const auto h_d = m_hd.table();
    const auto h_c = m_hc.table();
    const auto p_c = m_pc.table();
    std::vector<cplx> leak_table(lat.size()), square_table(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) {
        leak_table[i] = h_d[i] - t_d[i];
        square_table[i] = h_c[i] - p_c[i];
    }

    ConeQuantities q;
    const auto b_hat = forward(lat, beta.values());
    auto gamma = filtered(lat, b_hat, t_d);
    q.energy = l2_norm(gamma);
    const GridFunction leak(lat, filtered(lat, b_hat, leak_table));
    q.leakage = lp_norm(leak, 4.0);
    for (auto& v : gamma) v = cplx{std::norm(v), 0.0};
    q.square_leakage = l2_norm(filtered(lat, forward(lat, gamma), square_table));
    return q;
}

bool inner_inside_outer(const ConePair& pair, double tol) {
    const int d = pair.inner.dim();
    if (pair.outer.dim() != d) throw StructuralError("cone pair: dimension mismatch");
    const auto& fr = pair.inner.frame;
    const std::size_t corners = std::size_t{1} << (d - 1);
    for (std::size_t c = 0; c < corners; ++c) {
        std::vector<double> ray(d);
        for (int i = 0; i < d; ++i) ray[i] = fr[i * d];
        for (int j = 1; j < d; ++j) {
            const double sgn = (c >> (j - 1)) & 1u ? -1.0 : 1.0;
            for (int i = 0; i < d; ++i) ray[i] += sgn * 0.5 * pair.inner.side * fr[i * d + j];
        }
        const auto r = pair.outer.aperture_ratios(ray);
        if (r.empty() && d > 1) return false;
        if (d == 1 && dot(ray, pair.outer.direction()) <= 0.0) return false;
        for (double x : r) {
            if (x > 1.0 + tol) return false;
        }
    }
    return true;
}

Matrix random_rotation(int d, std::mt19937_64& rng) {
    if (d < 1) throw DomainError("random_rotation requires d >= 1");
    if (d == 1) return identity_matrix(1);
    if (d == 2) {
        std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
        return rotation_2d(angle(rng));
    }
    std::normal_distribution<double> normal;
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j) {
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    if (q.determinant() < 0.0) q.col(0) *= -1.0;
    Matrix out(static_cast<std::size_t>(d * d));
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) out[i * d + j] = q(i, j);
    }
    return out;
}

nlohmann::json ConeSelection::to_json() const {
    nlohmann::json cones = nlohmann::json::array();
    for (const auto& p : pairs) {
        cones.push_back({{"D", p.inner.to_json()}, {"C", p.outer.to_json()}, {"tau", p.tau}, {"order", p.order}});
    }
    return {{"success", success},
            {"pairs", cones},
            {"energy", quantities.energy},
            {"leakage_l4", quantities.leakage},
            {"square_leakage_l2", quantities.square_leakage},
            {"energy_threshold", energy_threshold},
            {"seed", seed},
            {"tries", tries}};
}

ConeSelection select_cones(const GridFunction& beta, const ConeSelectionOptions& options) {
    const auto& lat = beta.lattice();
    const int t = lat.parameters();
    if (!(options.kappa > 0.0)) throw DomainError("select_cones requires kappa > 0");
    if (static_cast<int>(options.apertures.size()) != t) throw DomainError("select_cones: one aperture per parameter");
    for (double a : options.apertures) {
        if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("select_cones: apertures must be positive");
    }
    if (std::abs(lp_norm(beta, 2.0) - 1.0) > 1e-8) throw PreconditionError("select_cones requires ||beta||_2 = 1");

    ConeSelection best;
    best.energy_threshold = std::pow(4.0, -t);
    best.seed = options.seed;
    double best_violation = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t attempt = 1; attempt <= options.max_tries; ++attempt) {
        // Base D and C per parameter for the positive sign pattern.
        std::vector<Matrix> frames;
        std::vector<std::vector<double>> tilts;
        std::vector<double> tilt_angles;
        std::vector<double> outer_sides;
        for (int s = 0; s < t; ++s) {
            const int d = lat.dim(s);
            frames.push_back(random_rotation(d, rng));
            const Cone base = Cone::with_frame(frames.back(), d, options.apertures[s]);
            const double half = base.half_angle();
            const double margin = std::numbers::pi / 2.0 - half;
            std::vector<double> tangent(d, 0.0);
            double psi = 0.0;
            if (d > 1) {
                const auto xi = base.direction();
                for (auto& x : tangent) x = normal(rng);
                const double p = dot(tangent, xi);
                for (int i = 0; i < d; ++i) tangent[i] -= p * xi[i];
                tangent = normalized(tangent);
                psi = unit(rng) * margin / 4.0;
            }
            tilts.push_back(std::move(tangent));
            tilt_angles.push_back(psi);
            outer_sides.push_back(d > 1 ? 2.0 * std::tan(half + margin / 4.0) : options.apertures[s]);
        }
        const unsigned patterns = 1u << t;
        for (unsigned pattern = 0; pattern < patterns; ++pattern) {
            std::vector<ConePair> pairs;
            for (int s = 0; s < t; ++s) {
                const int d = lat.dim(s);
                Matrix fr = frames[s];
                if (pattern & (1u << s)) {
                    for (int i = 0; i < d; ++i) {
                        fr[i * d] = -fr[i * d];
                        if (d > 1) fr[i * d + 1] = -fr[i * d + 1];
                    }
                }
                const Cone inner = Cone::with_frame(fr, d, options.apertures[s]);
                const auto xi = inner.direction();
                std::vector<double> axis(d);
                for (int i = 0; i < d; ++i) {
                    axis[i] = std::cos(tilt_angles[s]) * xi[i] + std::sin(tilt_angles[s]) * tilts[s][i];
                }
                const Cone outer = Cone::along(axis, outer_sides[s]);
                pairs.push_back(ConePair{inner, outer, options.tau, options.order});
            }
            bool contained = true;
            for (const auto& p : pairs) contained = contained && inner_inside_outer(p);
            const auto q = cone_quantities(beta, pairs);
            const double violation = std::max({best.energy_threshold - q.energy, q.leakage - options.kappa,
                                               q.square_leakage - options.kappa});
            const bool ok = contained && violation <= 0.0;
            if (ok || (contained && violation < best_violation) || best.pairs.empty()) {
                best.pairs = pairs;
                best.quantities = q;
                best.tries = attempt;
                if (contained) best_violation = violation;
            }
            if (ok) {
                best.success = true;
                return best;
            }
        }
    }
    best.tries = options.max_tries;
    return best;
}

}  // namespace czl
