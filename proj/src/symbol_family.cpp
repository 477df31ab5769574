#include "czl/symbol_family.hpp"

#include "czl/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

namespace czl {

namespace {

std::vector<std::vector<double>> tangent_basis(std::span<const double> x) {
    const auto d = x.size();
    std::vector<std::vector<double>> basis;
    if (d == 2) {
        basis.push_back({-x[1], x[0]});
        return basis;
    }
    for (std::size_t e = 0; e < d && basis.size() + 1 < d; ++e) {
        std::vector<double> v(d, 0.0);
        v[e] = 1.0;
        const double px = dot(v, x);
        for (std::size_t i = 0; i < d; ++i) v[i] -= px * x[i];
        for (const auto& b : basis) {
            const double p = dot(v, b);
            for (std::size_t i = 0; i < d; ++i) v[i] -= p * b[i];
        }
        const double n = norm2(v);
        if (n < 1e-6) continue;
        for (auto& c : v) c /= n;
        basis.push_back(std::move(v));
    }
    return basis;
}

// Extreme rays of a cone with an aperture (d >= 2): xi + sum_j sigma_j (side/2) e_j.
std::vector<std::vector<double>> extreme_rays(const Cone& c) {
    const int d = c.dim();
    std::vector<std::vector<double>> rays;
    for (unsigned mask = 0; mask < (1u << (d - 1)); ++mask) {
        std::vector<double> r(static_cast<std::size_t>(d), 0.0);
        for (int i = 0; i < d; ++i) {
            r[i] = c.frame[static_cast<std::size_t>(i * d)];
            for (int j = 1; j < d; ++j) {
                const double sigma = (mask >> (j - 1)) & 1u ? -1.0 : 1.0;
                r[i] += sigma * c.side / 2.0 * c.frame[static_cast<std::size_t>(i * d + j)];
            }
        }
        rays.push_back(std::move(r));
    }
    return rays;
}

double distance_to_half_space_complement(std::span<const double> x, std::span<const double> xi) {
    return std::asin(std::clamp(dot(x, xi), 0.0, 1.0));
}

}  // namespace

SphereSampleSet::SphereSampleSet(int d, std::vector<double> points) : d_(d), points_(std::move(points)) {
    if (d < 1 || points_.empty() || points_.size() % static_cast<std::size_t>(d) != 0) {
        throw StructuralError("sphere sample set: malformed point list");
    }
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(norm2(point(i)) - 1.0) > 1e-12) throw DomainError("sphere sample set: point off the unit sphere");
        for (const auto& t : tangent_basis(point(i))) tangents_.insert(tangents_.end(), t.begin(), t.end());
    }
    antipode_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            bool eq = true;
            for (int a = 0; a < d_ && eq; ++a) eq = point(j)[a] == -point(i)[a];
            if (eq) {
                antipode_[i] = static_cast<long>(j);
                break;
            }
        }
    }
    mesh_ = n > 1 ? sphere_mesh(points_, d_) : std::numbers::pi;
}

SphereSampleSet SphereSampleSet::standard(int d, std::size_t min_count) {
    return SphereSampleSet(d, sphere_samples(d, min_count));
}

std::span<const double> SphereSampleSet::point(std::size_t i) const {
    const auto d = static_cast<std::size_t>(d_);
    return std::span<const double>(points_).subspan(i * d, d);
}

std::span<const double> SphereSampleSet::tangent(std::size_t i, int j) const {
    const auto d = static_cast<std::size_t>(d_);
    const auto t = d - 1;
    return std::span<const double>(tangents_).subspan((i * t + static_cast<std::size_t>(j)) * d, d);
}

std::vector<double> SphereSampleSet::geodesic(std::size_t i, int j, double h) const {
    const auto x = point(i);
    const auto v = tangent(i, j);
    std::vector<double> y(x.size());
    for (std::size_t a = 0; a < y.size(); ++a) y[a] = std::cos(h) * x[a] + std::sin(h) * v[a];
    return y;
}

SymbolFamily::SymbolFamily(int d, std::vector<MultiplierSymbol> members, SphereSampleSet samples)
    : d_(d), members_(std::move(members)), samples_(std::move(samples)) {
    if (samples_.dim() != d_) throw StructuralError("symbol family: sample set dimension mismatch");
    for (const auto& m : members_) {
        if (m.dim() != d_) throw StructuralError("symbol family: member dimension mismatch");
        values_.push_back(m.sample_values(samples_.points()));
    }
}

std::optional<std::size_t> SymbolFamily::find(std::span<const cplx> vals) const {
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (std::equal(values_[k].begin(), values_[k].end(), vals.begin(), vals.end())) return k;
    }
    return std::nullopt;
}

bool SymbolFamily::contains_one() const {
    const std::vector<cplx> ones(samples_.size(), 1.0);
    return find(ones).has_value();
}

bool SymbolFamily::conjugation_closed() const {
    for (const auto& v : values_) {
        std::vector<cplx> c(v.size());
        std::transform(v.begin(), v.end(), c.begin(), [](cplx z) { return std::conj(z); });
        if (!find(c)) return false;
    }
    return true;
}

SymbolFamily riesz_family(int d, std::size_t min_samples) {
    std::vector<MultiplierSymbol> members;
    for (int j = 1; j <= d; ++j) members.push_back(riesz_symbol(d, j));
    return SymbolFamily(d, std::move(members), SphereSampleSet::standard(d, min_samples));
}

nlohmann::json CriterionResult::to_json(const SphereSampleSet& set) const {
    nlohmann::json j{{"pass", pass}, {"margin", margin}};
    if (step > 0.0) j["step"] = step;
    if (!pass) {
        nlohmann::json w = nlohmann::json::array();
        for (std::size_t i : samples) {
            const auto x = set.point(i);
            w.push_back({{"index", i}, {"point", std::vector<double>(x.begin(), x.end())}});
        }
        j["witness"] = w;
        if (tangent >= 0 && !samples.empty()) {
            const auto v = set.tangent(samples[0], tangent);
            j["tangent"] = std::vector<double>(v.begin(), v.end());
        }
    }
    return j;
}

CriterionResult check_point_separation(const SymbolFamily& f, double tol) {
    const auto& set = f.samples();
    const std::size_t n = set.size();
    CriterionResult res;
    res.pass = true;
    res.margin = std::numeric_limits<double>::infinity();
    // Farthest pair first (distances within rounding tie), then smaller difference, then index order.
    struct Key {
        double dist2, diff;
        std::size_t i, j;
    };
    Key best{0.0, 0.0, 0, 0};
    const auto better = [](const Key& a, const Key& b) {
        if (std::abs(a.dist2 - b.dist2) > 1e-12) return a.dist2 > b.dist2;
        if (a.diff != b.diff) return a.diff < b.diff;
        return std::tie(a.i, a.j) < std::tie(b.i, b.j);
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double diff = 0.0;
            for (const auto& v : f.values()) diff = std::max(diff, std::abs(v[i] - v[j]));
            res.margin = std::min(res.margin, diff);
            if (diff > tol) continue;
            double dist2 = 0.0;
            for (int a = 0; a < set.dim(); ++a) {
                const double e = set.point(i)[a] - set.point(j)[a];
                dist2 += e * e;
            }
            const Key key{dist2, diff, i, j};
            if (res.pass || better(key, best)) best = key;
            res.pass = false;
        }
    }
    if (!res.pass) res.samples = {best.i, best.j};
    if (n < 2) res.margin = 0.0;
    return res;
}

CriterionResult check_antipodal_separation(const SymbolFamily& f, double tol) {
    const auto& set = f.samples();
    CriterionResult res;
    res.pass = true;
    res.margin = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const long a = set.antipode(i);
        if (a < 0) throw PreconditionError("antipodal check needs a sample set closed under x -> -x");
        double sum = 0.0;
        for (const auto& v : f.values()) sum += std::abs(v[i] - v[static_cast<std::size_t>(a)]);
        if (sum < res.margin) {
            res.margin = sum;
            arg = i;
        }
    }
    res.pass = res.margin > tol;
    if (!res.pass) res.samples = {arg};
    return res;
}

CriterionResult check_tangential_derivatives(const SymbolFamily& f, double tol, double h) {
    const auto& set = f.samples();
    const int tangents = set.dim() - 1;
    CriterionResult res;
    res.step = h;
    res.margin = std::numeric_limits<double>::infinity();
    std::size_t arg_i = 0;
    int arg_j = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (int j = 0; j < tangents; ++j) {
            const auto plus = set.geodesic(i, j, h);
            const auto minus = set.geodesic(i, j, -h);
            double best = 0.0;
            for (const auto& m : f.members()) best = std::max(best, std::abs((m(plus) - m(minus)) / (2.0 * h)));
            if (best < res.margin) {
                res.margin = best;
                arg_i = i;
                arg_j = j;
            }
        }
    }
    if (tangents == 0) res.margin = std::numeric_limits<double>::infinity();
    res.pass = res.margin > tol;
    if (!res.pass) {
        res.samples = {arg_i};
        res.tangent = arg_j;
    }
    return res;
}

SymbolFamily close_family(const SymbolFamily& f) {
    std::vector<MultiplierSymbol> members;
    if (!f.contains_one()) members.push_back(identity_symbol(f.dim()));
    for (const auto& m : f.members()) members.push_back(m);
    SymbolFamily partial(f.dim(), members, f.samples());
    for (std::size_t k = 0; k < f.size(); ++k) {
        std::vector<cplx> c(f.values()[k].size());
        std::transform(f.values()[k].begin(), f.values()[k].end(), c.begin(), [](cplx z) { return std::conj(z); });
        if (partial.find(c)) continue;
        members.push_back(conjugate_symbol(f.members()[k]));
        partial = SymbolFamily(f.dim(), members, f.samples());
    }
    return partial;
}

bool cone_contains(const Cone& outer, const Cone& inner) {
    if (outer.dim() != inner.dim()) throw StructuralError("cone dimension mismatch");
    if (outer.dim() == 1) return dot(outer.direction(), inner.direction()) > 0.0;
    for (const auto& r : extreme_rays(inner)) {
        const auto ratios = outer.aperture_ratios(r);
        if (ratios.empty()) return false;
        for (double v : ratios) {
            if (v > 1.0 + 1e-12) return false;
        }
    }
    return true;
}

double angular_distance_to_cone(const Cone& c, std::span<const double> x) {
    const int d = c.dim();
    const auto u = normalized(x);
    const auto coords = mat_t_vec(c.frame, u);
    if (d == 1) return coords[0] > 0.0 ? 0.0 : std::numbers::pi;
    const double s = c.side / 2.0;
    // Constraint normals in frame coordinates: +-e_j - s e_0 (feasible when <= 0).
    std::vector<Eigen::VectorXd> normals;
    for (int j = 1; j < d; ++j) {
        for (double sign : {1.0, -1.0}) {
            Eigen::VectorXd n = Eigen::VectorXd::Zero(d);
            n(0) = -s;
            n(j) = sign;
            normals.push_back(n);
        }
    }
    const Eigen::Map<const Eigen::VectorXd> cvec(coords.data(), d);
    const auto feasible = [&](const Eigen::VectorXd& p) {
        for (const auto& n : normals) {
            if (n.dot(p) > 1e-12) return false;
        }
        return true;
    };
    // The projection onto a polyhedral cone is the projection onto the span of one of its
    // faces; enumerate faces given by up to d-1 active constraints.
    double best = cvec.norm();
    Eigen::VectorXd best_p = Eigen::VectorXd::Zero(d);
    const auto m = static_cast<unsigned>(normals.size());
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        const int k = std::popcount(mask);
        if (k > d - 1) continue;
        Eigen::MatrixXd N(k, d);
        int r = 0;
        for (unsigned b = 0; b < m; ++b) {
            if (mask & (1u << b)) N.row(r++) = normals[b].transpose();
        }
        Eigen::VectorXd p = cvec;
        if (k > 0) {
            const Eigen::MatrixXd G = N * N.transpose();
            Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
            if (lu.rank() < k) continue;
            p = cvec - N.transpose() * lu.solve(N * cvec);
        }
        if (!feasible(p)) continue;
        const double dist = (cvec - p).norm();
        if (dist < best) {
            best = dist;
            best_p = p;
        }
    }
    if (best_p.norm() > 1e-300) return std::atan2(best, best_p.norm());
    // x lies in the polar cone: the closest direction is an extreme ray.
    double cos_best = -1.0;
    for (const auto& r : extreme_rays(c)) cos_best = std::max(cos_best, dot(normalized(r), u));
    return std::acos(std::clamp(cos_best, -1.0, 1.0));
}

MultiplierSymbol h_cd_symbol(const ConePair& pair, int order) {
    const Cone& C = pair.outer;
    const Cone& D = pair.inner;
    if (C.dim() != D.dim()) throw StructuralError("cone pair dimension mismatch");
    if (!cone_contains(C, D)) throw DomainError("h_CD needs the inner cone D inside the outer cone C");
    const auto xi_c = C.direction();
    const auto xi_d = D.direction();
    if (C.dim() > 1) {
        for (const auto& r : extreme_rays(C)) {
            if (!(dot(r, xi_d) > 0.0) || !(dot(r, xi_c) > 0.0)) {
                throw DomainError("h_CD needs the outer cone inside the open half space of xi_D");
            }
        }
    } else if (!(dot(xi_c, xi_d) > 0.0)) {
        throw DomainError("h_CD needs the outer cone inside the open half space of xi_D");
    }
    nlohmann::json params{{"outer", C.to_json()}, {"inner", D.to_json()}, {"order", order}};
    return MultiplierSymbol(
        C.dim(), "h_cd", params,
        [C, xi_c, xi_d, order](std::span<const double> xi) {
            const auto x = normalized(xi);
            const double b = std::min(distance_to_half_space_complement(x, xi_c),
                                      distance_to_half_space_complement(x, xi_d));
            if (b <= 0.0) return cplx{0.0};
            const double a = angular_distance_to_cone(C, x);
            if (a <= 0.0) return cplx{1.0};
            return cplx{smoothstep(order, b / (a + b))};
        },
        0.0, order);
}

std::vector<double> build_h_CD(const ConePair& pair, const SphereSampleSet& samples) {
    const auto h = h_cd_symbol(pair, pair.outer.dim());
    const auto vals = h.sample_values(samples.points());
    std::vector<double> out(vals.size());
    std::transform(vals.begin(), vals.end(), out.begin(), [](cplx v) { return v.real(); });
    return out;
}

SymbolPolynomial make_polynomial(const SymbolFamily& family, std::vector<Monomial> monomials) {
    const auto& members = family.members();
    int degree = 0;
    cplx zero = 0.0;
    int smooth = -1;
    nlohmann::json mono_json = nlohmann::json::array();
    for (const auto& mono : monomials) {
        if (mono.exponents.size() != members.size()) throw StructuralError("monomial exponent count mismatch");
        int deg = 0;
        cplx z = mono.coefficient;
        for (std::size_t k = 0; k < members.size(); ++k) {
            if (mono.exponents[k] < 0) throw DomainError("negative monomial exponent");
            deg += mono.exponents[k];
            if (mono.exponents[k] > 0) {
                z *= std::pow(members[k].zero_value(), mono.exponents[k]);
                if (members[k].smoothness() >= 0) smooth = smooth < 0 ? members[k].smoothness() : std::min(smooth, members[k].smoothness());
            }
        }
        degree = std::max(degree, deg);
        zero += z;
        mono_json.push_back({{"exponents", mono.exponents}, {"re", mono.coefficient.real()}, {"im", mono.coefficient.imag()}});
    }
    nlohmann::json member_json = nlohmann::json::array();
    for (const auto& m : members) member_json.push_back(m.descriptor());
    auto eval = [members, monomials](std::span<const double> xi) {
        std::vector<cplx> v(members.size());
        for (std::size_t k = 0; k < members.size(); ++k) v[k] = members[k](xi);
        cplx acc = 0.0;
        for (const auto& mono : monomials) {
            cplx term = mono.coefficient;
            for (std::size_t k = 0; k < v.size(); ++k) {
                for (int e = 0; e < mono.exponents[k]; ++e) term *= v[k];
            }
            acc += term;
        }
        return acc;
    };
    SymbolPolynomial poly;
    poly.monomials = std::move(monomials);
    poly.degree = degree;
    poly.symbol = MultiplierSymbol(family.dim(), "polynomial", {{"members", member_json}, {"monomials", mono_json}},
                                   eval, zero, smooth);
    return poly;
}

ApproximationResult approximate_symbol(const SymbolFamily& family, const MultiplierSymbol& target, int degree,
                                       int m, double h) {
    if (!family.contains_one() || !family.conjugation_closed()) {
        throw PreconditionError("approximate_symbol needs a family closed under close_family");
    }
    if (degree < 0) throw DomainError("degree must be >= 0");
    if (m < 0 || m > 2) throw DomainError("derivative order must be 0, 1 or 2");
    if (target.dim() != family.dim()) throw StructuralError("target dimension mismatch");

    const auto& set = family.samples();
    const std::size_t n = set.size();
    const auto T = static_cast<std::size_t>(set.dim() - 1);
    const std::size_t off = m > 0 ? n * T : 0;

    // Offset points for the finite-difference stencils, ordered (sample, tangent).
    std::vector<std::vector<double>> plus_pts;
    std::vector<std::vector<double>> minus_pts;
    for (std::size_t i = 0; i < n && m > 0; ++i) {
        for (std::size_t j = 0; j < T; ++j) {
            plus_pts.push_back(set.geodesic(i, static_cast<int>(j), h));
            minus_pts.push_back(set.geodesic(i, static_cast<int>(j), -h));
        }
    }

    struct Values {
        std::vector<cplx> center, plus, minus;
    };
    const auto evaluate = [&](const MultiplierSymbol& s) {
        Values v;
        v.center = s.sample_values(set.points());
        for (const auto& p : plus_pts) v.plus.push_back(s(p));
        for (const auto& p : minus_pts) v.minus.push_back(s(p));
        return v;
    };
    // Derivative of order `ord` at (sample i, tangent j) by central differences.
    const auto deriv = [&](const Values& v, int ord, std::size_t idx) {
        const std::size_t i = idx / T;
        if (ord == 1) return (v.plus[idx] - v.minus[idx]) / (2.0 * h);
        return (v.plus[idx] - 2.0 * v.center[i] + v.minus[idx]) / (h * h);
    };

    const Values tv = evaluate(target);
    std::vector<double> scale(static_cast<std::size_t>(m) + 1, 1.0);
    for (int ord = 1; ord <= m; ++ord) {
        double sup = 0.0;
        for (std::size_t idx = 0; idx < off; ++idx) sup = std::max(sup, std::abs(deriv(tv, ord, idx)));
        scale[ord] = 1.0 / (1.0 + sup);
    }
    const std::size_t rows = n + static_cast<std::size_t>(m) * off;
    const auto stack = [&](const Values& v) {
        Eigen::VectorXcd r(static_cast<Eigen::Index>(rows));
        for (std::size_t i = 0; i < n; ++i) r(static_cast<Eigen::Index>(i)) = v.center[i];
        for (int ord = 1; ord <= m; ++ord) {
            for (std::size_t idx = 0; idx < off; ++idx) {
                r(static_cast<Eigen::Index>(n + (ord - 1) * off + idx)) = scale[ord] * deriv(v, ord, idx);
            }
        }
        return r;
    };

    // Non-identity members generate the monomials; 1 is the empty monomial.
    const std::vector<cplx> ones(n, 1.0);
    const auto one_index = family.find(ones);
    std::vector<std::size_t> gens;
    std::vector<Values> gen_vals;
    for (std::size_t k = 0; k < family.size(); ++k) {
        if (one_index && *one_index == k) continue;
        gens.push_back(k);
        gen_vals.push_back(evaluate(family.members()[k]));
    }

    struct Kept {
        std::vector<int> exps;
        Values vals;
        int degree;
    };
    std::vector<Kept> kept;
    std::vector<Eigen::VectorXcd> basis;
    std::size_t candidates = 0;
    const auto try_add = [&](std::vector<int> exps, Values vals, int deg) {
        ++candidates;
        Eigen::VectorXcd r = stack(vals);
        const double norm0 = r.norm();
        if (!(norm0 > 0.0)) return;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) r -= q * q.dot(r);
        }
        const double res = r.norm();
        if (res <= 1e-9 * norm0) return;
        basis.push_back(r / res);
        kept.push_back({std::move(exps), std::move(vals), deg});
    };

    Values unit{ones, std::vector<cplx>(plus_pts.size(), 1.0), std::vector<cplx>(minus_pts.size(), 1.0)};
    try_add(std::vector<int>(family.size(), 0), unit, 0);
    std::map<std::vector<int>, bool> seen;
    seen[std::vector<int>(family.size(), 0)] = true;
    for (int deg = 1; deg <= degree; ++deg) {
        const std::size_t count = kept.size();
        for (std::size_t p = 0; p < count; ++p) {
            if (kept[p].degree != deg - 1) continue;
            for (std::size_t g = 0; g < gens.size(); ++g) {
                auto exps = kept[p].exps;
                ++exps[gens[g]];
                if (seen.count(exps)) continue;
                seen[exps] = true;
                Values v;
                const auto& a = kept[p].vals;
                const auto& b = gen_vals[g];
                v.center.resize(n);
                for (std::size_t i = 0; i < n; ++i) v.center[i] = a.center[i] * b.center[i];
                v.plus.resize(a.plus.size());
                v.minus.resize(a.minus.size());
                for (std::size_t i = 0; i < a.plus.size(); ++i) {
                    v.plus[i] = a.plus[i] * b.plus[i];
                    v.minus[i] = a.minus[i] * b.minus[i];
                }
                try_add(std::move(exps), std::move(v), deg);
            }
        }
    }

    const auto cols = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXcd A(static_cast<Eigen::Index>(rows), cols);
    for (Eigen::Index c = 0; c < cols; ++c) A.col(c) = stack(kept[static_cast<std::size_t>(c)].vals);
    const Eigen::VectorXcd y = stack(tv);

    ApproximationResult out;
    out.candidates = candidates;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(A);
    Eigen::VectorXcd coef;
    if (qr.rank() == cols) {
        coef = qr.solve(y);
    } else {
        out.regularized = true;
        const double a2 = A.norm();
        out.ridge = 1e-10 * a2 * a2;
        const Eigen::MatrixXcd G = A.adjoint() * A + out.ridge * Eigen::MatrixXcd::Identity(cols, cols);
        coef = G.ldlt().solve(A.adjoint() * y);
    }
    const Eigen::VectorXcd fit = A * coef;
    out.loss = (fit - y).squaredNorm();
    out.sup_error.assign(static_cast<std::size_t>(m) + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        out.sup_error[0] = std::max(out.sup_error[0], std::abs(fit(static_cast<Eigen::Index>(i)) - y(static_cast<Eigen::Index>(i))));
    }
    for (int ord = 1; ord <= m; ++ord) {
        for (std::size_t idx = 0; idx < off; ++idx) {
            const auto r = static_cast<Eigen::Index>(n + (ord - 1) * off + idx);
            out.sup_error[ord] = std::max(out.sup_error[ord], std::abs(fit(r) - y(r)) / scale[ord]);
        }
    }

    std::vector<Monomial> monos;
    for (Eigen::Index c = 0; c < cols; ++c) monos.push_back({kept[static_cast<std::size_t>(c)].exps, coef(c)});
    out.polynomial = make_polynomial(family, std::move(monos));
    return out;
}

}  // namespace czl
