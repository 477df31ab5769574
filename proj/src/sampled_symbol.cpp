#include "czl/error.hpp"
#include "czl/multipliers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

namespace czl {

namespace {

class Interpolant {
public:
    Interpolant(int d, std::vector<double> dirs, std::vector<cplx> vals)
        : d_(d), dirs_(std::move(dirs)), vals_(std::move(vals)) {
        if (vals_.empty() || dirs_.size() != vals_.size() * static_cast<std::size_t>(d_)) {
            throw StructuralError("sampled symbol: directions and values disagree");
        }
        for (std::size_t i = 0; i < vals_.size(); ++i) {
            const auto x = normalized(dir(i));
            std::copy(x.begin(), x.end(), dirs_.begin() + static_cast<long>(i * static_cast<std::size_t>(d_)));
        }
        if (d_ == 2) {
            order_.resize(vals_.size());
            for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
            angles_.resize(vals_.size());
            for (std::size_t i = 0; i < vals_.size(); ++i) angles_[i] = angle(dir(i));
            std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
                return angles_[a] < angles_[b] || (angles_[a] == angles_[b] && a < b);
            });
            sorted_.resize(order_.size());
            for (std::size_t r = 0; r < order_.size(); ++r) sorted_[r] = angles_[order_[r]];
        }
    }

    [[nodiscard]] std::size_t size() const { return vals_.size(); }

    [[nodiscard]] std::span<const double> dir(std::size_t i) const {
        return std::span<const double>(dirs_).subspan(i * static_cast<std::size_t>(d_), static_cast<std::size_t>(d_));
    }

    /// Value at unit x, optionally ignoring sample `exclude`.
    [[nodiscard]] cplx eval(std::span<const double> x, long exclude = -1) const {
        if (d_ == 1) return eval_nearest(x, exclude);
        if (d_ == 2) return eval_angle(x, exclude);
        return eval_mls(x, exclude);
    }

private:
    static double angle(std::span<const double> x) {
        double a = std::atan2(x[1], x[0]);
        if (a < 0.0) a += 2.0 * std::numbers::pi;
        return a;
    }

    [[nodiscard]] cplx eval_nearest(std::span<const double> x, long exclude) const {
        double best = -2.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < vals_.size(); ++i) {
            if (static_cast<long>(i) == exclude) continue;
            const double c = dot(dir(i), x);
            if (c > best) {
                best = c;
                arg = i;
            }
        }
        return vals_[arg];
    }

    [[nodiscard]] cplx eval_angle(std::span<const double> x, long exclude) const {
        const std::size_t n = order_.size();
        if (n - (exclude >= 0 ? 1 : 0) < 2) return eval_nearest(x, exclude);
        const double a = angle(x);
        std::size_t hi = static_cast<std::size_t>(std::upper_bound(sorted_.begin(), sorted_.end(), a) - sorted_.begin()) % n;
        std::size_t lo = (hi + n - 1) % n;
        if (static_cast<long>(order_[lo]) == exclude) lo = (lo + n - 1) % n;
        if (static_cast<long>(order_[hi]) == exclude) hi = (hi + 1) % n;
        const double two_pi = 2.0 * std::numbers::pi;
        double span = std::fmod(sorted_[hi] - sorted_[lo] + two_pi, two_pi);
        double off = std::fmod(a - sorted_[lo] + two_pi, two_pi);
        if (span == 0.0) return vals_[order_[lo]];
        const double w = std::clamp(off / span, 0.0, 1.0);
        return (1.0 - w) * vals_[order_[lo]] + w * vals_[order_[hi]];
    }

    [[nodiscard]] cplx eval_mls(std::span<const double> x, long exclude) const {
        const auto d = static_cast<std::size_t>(d_);
        const std::size_t k = std::min<std::size_t>(4 * d + 2, vals_.size() - (exclude >= 0 ? 1 : 0));
        std::vector<std::pair<double, std::size_t>> near;
        near.reserve(vals_.size());
        for (std::size_t i = 0; i < vals_.size(); ++i) {
            if (static_cast<long>(i) == exclude) continue;
            near.emplace_back(-dot(dir(i), x), i);
        }
        std::partial_sort(near.begin(), near.begin() + static_cast<long>(k), near.end());
        if (-near[0].first >= 1.0 - 1e-15) return vals_[near[0].second];

        // Tangent frame at x.
        std::vector<std::vector<double>> basis;
        for (std::size_t e = 0; e < d && basis.size() + 1 < d; ++e) {
            std::vector<double> v(d, 0.0);
            v[e] = 1.0;
            const double px = dot(v, x);
            for (std::size_t i = 0; i < d; ++i) v[i] -= px * x[i];
            for (const auto& b : basis) {
                const double p = dot(v, b);
                for (std::size_t i = 0; i < d; ++i) v[i] -= p * b[i];
            }
            const double nv = norm2(v);
            if (nv < 1e-6) continue;
            for (auto& c : v) c /= nv;
            basis.push_back(std::move(v));
        }
        // Local quadratic model in tangent coordinates, weighted by inverse distance.
        const std::size_t m = basis.size();
        const auto cols = static_cast<Eigen::Index>(1 + m + m * (m + 1) / 2);
        Eigen::MatrixXd A(static_cast<Eigen::Index>(k), cols);
        Eigen::MatrixXd rhs(static_cast<Eigen::Index>(k), 2);
        std::vector<double> t(m);
        for (std::size_t r = 0; r < k; ++r) {
            const auto y = dir(near[r].second);
            std::vector<double> diff(d);
            for (std::size_t i = 0; i < d; ++i) diff[i] = y[i] - x[i];
            const double w = 1.0 / std::max(norm2(diff), 1e-12);
            for (std::size_t b = 0; b < m; ++b) t[b] = dot(basis[b], diff);
            const auto row = static_cast<Eigen::Index>(r);
            Eigen::Index c = 0;
            A(row, c++) = w;
            for (std::size_t b = 0; b < m; ++b) A(row, c++) = w * t[b];
            for (std::size_t a = 0; a < m; ++a) {
                for (std::size_t b = a; b < m; ++b) A(row, c++) = w * t[a] * t[b];
            }
            rhs(row, 0) = w * vals_[near[r].second].real();
            rhs(row, 1) = w * vals_[near[r].second].imag();
        }
        const Eigen::MatrixXd sol = A.colPivHouseholderQr().solve(rhs);
        return {sol(0, 0), sol(0, 1)};
    }

    int d_;
    std::vector<double> dirs_;
    std::vector<cplx> vals_;
    std::vector<double> angles_;
    std::vector<std::size_t> order_;
    std::vector<double> sorted_;
};

}  // namespace

std::vector<double> sphere_samples(int d, std::size_t min_count) {
    if (d < 1) throw DomainError("sphere dimension must be >= 1");
    std::vector<double> out;
    if (d == 1) return {1.0, -1.0};
    if (d == 2) {
        const std::size_t quarter = std::max<std::size_t>(1, (min_count + 3) / 4);
        const std::size_t n = 4 * quarter;
        std::vector<double> c(quarter);
        std::vector<double> s(quarter);
        for (std::size_t i = 0; i < quarter; ++i) {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
            c[i] = i == 0 ? 1.0 : std::cos(a);
            s[i] = i == 0 ? 0.0 : std::sin(a);
        }
        // Quarter turns are applied exactly so that antipodes are exact negatives.
        for (int q = 0; q < 4; ++q) {
            for (std::size_t i = 0; i < quarter; ++i) {
                double x = c[i];
                double y = s[i];
                for (int r = 0; r < q; ++r) {
                    const double t = x;
                    x = -y;
                    y = t;
                }
                out.push_back(x);
                out.push_back(y);
            }
        }
        return out;
    }
    const std::size_t half = std::max<std::size_t>(1, (min_count + 1) / 2);
    if (d == 3) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (std::size_t i = 0; i < half; ++i) {
            const double z = 1.0 - (static_cast<double>(i) + 0.5) / static_cast<double>(half);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = golden * static_cast<double>(i);
            out.push_back(r * std::cos(phi));
            out.push_back(r * std::sin(phi));
            out.push_back(z);
        }
    } else {
        std::mt19937_64 rng(0x5eedu + static_cast<unsigned>(d));
        std::normal_distribution<double> g;
        for (std::size_t i = 0; i < half; ++i) {
            std::vector<double> v(static_cast<std::size_t>(d));
            for (auto& c : v) c = g(rng);
            if (v[static_cast<std::size_t>(d - 1)] < 0.0) {
                for (auto& c : v) c = -c;
            }
            const auto u = normalized(v);
            out.insert(out.end(), u.begin(), u.end());
        }
    }
    // Coordinate poles, where coordinate-aligned symbols vanish or peak.
    for (int j = 0; j < d; ++j) {
        for (int a = 0; a < d; ++a) out.push_back(a == j ? 1.0 : 0.0);
    }
    const std::size_t upper = out.size();
    for (std::size_t i = 0; i < upper; ++i) out.push_back(-out[i]);
    return out;
}

double sphere_mesh(std::span<const double> samples, int d) {
    const auto dd = static_cast<std::size_t>(d);
    const std::size_t n = samples.size() / dd;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = -2.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            best = std::max(best, dot(samples.subspan(i * dd, dd), samples.subspan(j * dd, dd)));
        }
        worst = std::max(worst, std::acos(std::clamp(best, -1.0, 1.0)));
    }
    return worst;
}

MultiplierSymbol sampled_symbol(int d, std::vector<double> directions, std::vector<cplx> values, std::string kind,
                                nlohmann::json params, cplx zero_value) {
    auto interp = std::make_shared<const Interpolant>(d, std::move(directions), std::move(values));
    double tol = 0.0;
    if (d > 1) {
        for (std::size_t i = 0; i < interp->size(); ++i) {
            tol = std::max(tol, std::abs(interp->eval(interp->dir(i), static_cast<long>(i)) -
                                         interp->eval(interp->dir(i))));
        }
    }
    return MultiplierSymbol(
        d, std::move(kind), std::move(params),
        [interp](std::span<const double> xi) { return interp->eval(normalized(xi)); }, zero_value, 0, tol);
}

}  // namespace czl
