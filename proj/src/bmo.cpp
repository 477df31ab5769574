#include "czl/bmo.hpp"

#include "czl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace czl {

namespace {

// Tuples of extended cube indices (cells included), one per parameter, row-major.
class TupleSpace {
public:
    explicit TupleSpace(const RectangleSpace& space) : space_(space) {
        const int t = space.parameters();
        ext_.resize(static_cast<std::size_t>(t));
        stride_.resize(static_cast<std::size_t>(t));
        size_ = 1;
        for (int s = t - 1; s >= 0; --s) {
            ext_[s] = space.indexer(s).extended_count();
            stride_[s] = size_;
            size_ *= ext_[s];
        }
    }

    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] int parameters() const { return static_cast<int>(ext_.size()); }
    [[nodiscard]] std::size_t stride(int s) const { return stride_[s]; }
    [[nodiscard]] std::size_t coordinate(std::size_t flat, int s) const { return (flat / stride_[s]) % ext_[s]; }

    [[nodiscard]] std::size_t of_rectangle(std::size_t rect) const {
        const auto cubes = space_.cube_indices(rect);
        std::size_t flat = 0;
        for (std::size_t s = 0; s < cubes.size(); ++s) flat += cubes[s] * stride_[s];
        return flat;
    }

    [[nodiscard]] std::size_t of_point(std::size_t point) const {
        const auto& lat = space_.lattice();
        std::size_t flat = 0;
        for (int s = 0; s < parameters(); ++s) {
            flat += space_.indexer(s).cell_of_point(lat.parameter_index(point, s)) * stride_[s];
        }
        return flat;
    }

    /// Number of lattice points in the tuple's rectangle.
    [[nodiscard]] std::size_t points(std::size_t flat) const {
        std::size_t n = 1;
        for (int s = 0; s < parameters(); ++s) {
            const auto& ix = space_.indexer(s);
            const std::size_t side = ix.cells_per_side(coordinate(flat, s));
            for (int a = 0; a < ix.dim(); ++a) n *= side;
        }
        return n;
    }

    /// Number of set points inside every tuple; children are summed through the first
    /// parameter that is not yet at cell scale.
    [[nodiscard]] std::vector<std::uint32_t> counts(const PointMask& set) const {
        const auto& lat = space_.lattice();
        std::vector<std::uint32_t> c(size_, 0);
        for (std::size_t flat = size_; flat-- > 0;) {
            int split = -1;
            for (int s = 0; s < parameters(); ++s) {
                const auto& ix = space_.indexer(s);
                if (ix.scale_of(coordinate(flat, s)) < ix.levels()) {
                    split = s;
                    break;
                }
            }
            if (split < 0) {
                std::size_t point = 0;
                for (int s = 0; s < parameters(); ++s) {
                    point += space_.indexer(s).point_of_cell(coordinate(flat, s)) * lat.parameter_stride(s);
                }
                c[flat] = set[point];
                continue;
            }
            const std::size_t e = coordinate(flat, split);
            std::uint32_t sum = 0;
            for (std::size_t child : space_.indexer(split).children(e)) sum += c[flat + (child - e) * stride_[split]];
            c[flat] = sum;
        }
        return c;
    }

private:
    const RectangleSpace& space_;
    std::vector<std::size_t> ext_;
    std::vector<std::size_t> stride_;
    std::size_t size_ = 1;
};

std::size_t count_points(const PointMask& m) {
    return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

double mass_from_counts(const std::vector<double>& masses,
                        const std::vector<std::size_t>& rect_tuple, const std::vector<std::size_t>& rect_points,
                        const std::vector<std::uint32_t>& counts) {
    double mass = 0.0;
    for (std::size_t r = 0; r < masses.size(); ++r) {
        if (counts[rect_tuple[r]] == rect_points[r]) mass += masses[r];
    }
    return mass;
}

// Precomputed rectangle geometry shared by the estimators.
struct Geometry {
    explicit Geometry(const RectangleSpace& space) : tuples(space) {
        const std::size_t m = space.count();
        tuple.resize(m);
        points.resize(m);
        for (std::size_t r = 0; r < m; ++r) {
            tuple[r] = tuples.of_rectangle(r);
            points[r] = tuples.points(tuple[r]);
        }
    }
    TupleSpace tuples;
    std::vector<std::size_t> tuple;
    std::vector<std::size_t> points;
};

double value_of(double mass, std::size_t pts, std::size_t total) {
    if (pts == 0) return 0.0;
    return std::sqrt(std::max(0.0, mass) / (static_cast<double>(pts) / static_cast<double>(total)));
}

// Sums over dyadic sub-rectangles, computed one parameter at a time.
std::vector<double> subtree_sums(const RectangleSpace& space, std::vector<double> s) {
    const int t = space.parameters();
    std::vector<std::size_t> count(static_cast<std::size_t>(t));
    std::vector<std::size_t> stride(static_cast<std::size_t>(t));
    std::size_t st = 1;
    for (int p = t - 1; p >= 0; --p) {
        count[p] = space.indexer(p).cube_count();
        stride[p] = st;
        st *= count[p];
    }
    for (int p = 0; p < t; ++p) {
        const auto& ix = space.indexer(p);
        for (std::size_t flat = s.size(); flat-- > 0;) {
            const std::size_t c = (flat / stride[p]) % count[p];
            if (ix.scale_of(c) == 0) continue;
            s[flat - (c - ix.parent(c)) * stride[p]] += s[flat];
        }
    }
    return s;
}

PointMask mask_of(const RectangleSpace& space, std::span<const std::size_t> rects) {
    PointMask m(space.lattice().size(), 0);
    for (std::size_t r : rects) space.mark(r, m);
    return m;
}

// Exact maximization of mass(cubes inside Omega) / |Omega| over unions Omega of dyadic
// cubes of one parameter, by Dinkelbach iteration on a tree dynamic program.
struct CubeRatio {
    double ratio = 0.0;
    std::vector<std::size_t> cubes;
};

CubeRatio best_cube_union(const CubeIndexer& ix, const std::vector<double>& mass) {
    const std::size_t m = ix.cube_count();
    const auto has_children = [&](std::size_t c) { return ix.scale_of(c) + 1 < ix.levels(); };
    std::vector<double> sub(mass);
    for (std::size_t c = m; c-- > 0;) {
        if (ix.scale_of(c) > 0) sub[ix.parent(c)] += sub[c];
    }
    // Start from the best single cube.
    std::vector<std::size_t> tops;
    double lambda = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        if (sub[c] / ix.volume(c) > lambda) {
            lambda = sub[c] / ix.volume(c);
            tops = {c};
        }
    }
    CubeRatio out;
    if (tops.empty()) return out;
    std::vector<double> best(m);
    std::vector<std::uint8_t> take(m);
    for (int iter = 0; iter < 200; ++iter) {
        for (std::size_t c = m; c-- > 0;) {
            const double incl = sub[c] - lambda * ix.volume(c);
            double split = 0.0;
            if (has_children(c)) {
                for (std::size_t ch : ix.children(c)) split += best[ch];
            }
            take[c] = incl > split;
            best[c] = std::max(incl, split);
        }
        if (best[0] <= 1e-14 * lambda) break;
        std::vector<std::size_t> chosen;
        std::vector<std::size_t> stack{0};
        while (!stack.empty()) {
            const std::size_t c = stack.back();
            stack.pop_back();
            if (take[c]) {
                chosen.push_back(c);
            } else if (has_children(c)) {
                for (std::size_t ch : ix.children(c)) stack.push_back(ch);
            }
        }
        double mass_sum = 0.0;
        double vol = 0.0;
        for (std::size_t c : chosen) {
            mass_sum += sub[c];
            vol += ix.volume(c);
        }
        if (!(vol > 0.0) || !(mass_sum / vol > lambda)) break;
        lambda = mass_sum / vol;
        tops = std::move(chosen);
    }
    double mass_sum = 0.0;
    double vol = 0.0;
    for (std::size_t top : tops) {
        mass_sum += sub[top];
        vol += ix.volume(top);
        std::vector<std::size_t> st{top};
        while (!st.empty()) {
            const std::size_t c = st.back();
            st.pop_back();
            out.cubes.push_back(c);
            if (has_children(c)) {
                for (std::size_t ch : ix.children(c)) st.push_back(ch);
            }
        }
    }
    std::sort(out.cubes.begin(), out.cubes.end());
    out.ratio = mass_sum / vol;
    return out;
}

}  // namespace

RectangleCollection::RectangleCollection(const RectangleSpace& space, std::vector<std::size_t> rectangles)
    : space_(space), rects_(std::move(rectangles)) {
    std::sort(rects_.begin(), rects_.end());
    rects_.erase(std::unique(rects_.begin(), rects_.end()), rects_.end());
    for (std::size_t r : rects_) {
        if (r >= space_.count()) throw StructuralError("rectangle index outside the lattice");
    }
    shadow_ = mask_of(space_, rects_);
    shadow_points_ = count_points(shadow_);
}

RectangleCollection RectangleCollection::from_rectangles(const RectangleSpace& space,
                                                         std::span<const DyadicRectangle> rects) {
    std::vector<std::size_t> idx;
    idx.reserve(rects.size());
    for (const auto& r : rects) idx.push_back(space.index(r));
    return RectangleCollection(space, std::move(idx));
}

double RectangleCollection::shadow_measure() const {
    return static_cast<double>(shadow_points_) / static_cast<double>(space_.lattice().size());
}

std::optional<std::pair<int, std::size_t>> RectangleCollection::fixed_coordinate() const {
    if (rects_.empty() || space_.parameters() < 2) return std::nullopt;
    const auto first = space_.cube_indices(rects_[0]);
    for (int s = 0; s < space_.parameters(); ++s) {
        bool shared = true;
        for (std::size_t r : rects_) {
            if (space_.cube_indices(r)[s] != first[s]) {
                shared = false;
                break;
            }
        }
        if (shared) return std::make_pair(s, first[s]);
    }
    return std::nullopt;
}

std::vector<DyadicRectangle> RectangleCollection::as_rectangles() const {
    std::vector<DyadicRectangle> out;
    out.reserve(rects_.size());
    for (std::size_t r : rects_) out.push_back(space_.rectangle(r));
    return out;
}

double coefficient_mass(const WaveletCoefficients& b, const RectangleCollection& U) {
    if (b.lattice().describe() != U.space().lattice().describe()) {
        throw StructuralError("collection and coefficients live on different lattices");
    }
    const auto masses = b.rectangle_masses();
    double m = 0.0;
    for (std::size_t r : U.rectangles()) m += masses[r];
    return m;
}

double open_set_mass(const WaveletCoefficients& b, const PointMask& set) {
    if (set.size() != b.lattice().size()) throw StructuralError("point set does not match the lattice");
    const Geometry g(b.space());
    return mass_from_counts(b.rectangle_masses(), g.tuple, g.points, g.tuples.counts(set));
}

double open_set_value(const WaveletCoefficients& b, const PointMask& set) {
    return value_of(open_set_mass(b, set), count_points(set), set.size());
}

RectangularBmoResult rectangular_bmo(const WaveletCoefficients& b) {
    const auto& space = b.space();
    const auto sums = subtree_sums(space, b.rectangle_masses());
    RectangularBmoResult res;
    for (std::size_t r = 0; r < sums.size(); ++r) {
        const double v = std::sqrt(std::max(0.0, sums[r]) / space.volume(r));
        if (v > res.value) {
            res.value = v;
            res.rectangle = r;
        }
    }
    return res;
}

MinusOneResult bmo_minus_one(const WaveletCoefficients& b) {
    const auto& space = b.space();
    const int t = space.parameters();
    if (t < 2) throw DomainError("BMO_-1 needs at least two parameters");
    const auto masses = b.rectangle_masses();
    MinusOneResult res;
    res.exact = t == 2;
    const std::size_t total = b.lattice().size();

    // Rectangle index from per-parameter cube indices.
    std::vector<std::size_t> stride(static_cast<std::size_t>(t));
    std::size_t st = 1;
    for (int p = t - 1; p >= 0; --p) {
        stride[p] = st;
        st *= space.indexer(p).cube_count();
    }

    for (int s = 0; s < t; ++s) {
        const auto& ixs = space.indexer(s);
        for (std::size_t q = 0; q < ixs.cube_count(); ++q) {
            if (t == 2) {
                const int o = 1 - s;
                const auto& ixo = space.indexer(o);
                std::vector<double> m(ixo.cube_count());
                for (std::size_t c = 0; c < m.size(); ++c) m[c] = masses[q * stride[s] + c * stride[o]];
                const auto best = best_cube_union(ixo, m);
                const double v = std::sqrt(best.ratio / ixs.volume(q));
                if (v > res.certified) {
                    res.certified = v;
                    res.parameter = s;
                    res.cube = q;
                    res.collection.clear();
                    for (std::size_t c : best.cubes) res.collection.push_back(q * stride[s] + c * stride[o]);
                    std::sort(res.collection.begin(), res.collection.end());
                }
                continue;
            }
            // Greedy growth over rectangles sharing cube q in parameter s.
            std::vector<std::size_t> cand;
            for (std::size_t r = 0; r < masses.size(); ++r) {
                if ((r / stride[s]) % ixs.cube_count() == q && masses[r] > 0.0) cand.push_back(r);
            }
            PointMask shadow(total, 0);
            std::size_t pts = 0;
            double mass = 0.0;
            std::vector<std::size_t> chosen;
            std::vector<std::uint8_t> used(cand.size(), 0);
            for (;;) {
                double best_v = pts > 0 ? value_of(mass, pts, total) : 0.0;
                long arg = -1;
                std::size_t arg_pts = 0;
                for (std::size_t k = 0; k < cand.size(); ++k) {
                    if (used[k]) continue;
                    std::size_t added = 0;
                    for (std::size_t p : space.points_of(cand[k])) added += shadow[p] ? 0 : 1;
                    const double v = value_of(mass + masses[cand[k]], pts + added, total);
                    if (v > best_v) {
                        best_v = v;
                        arg = static_cast<long>(k);
                        arg_pts = added;
                    }
                }
                if (arg < 0) break;
                used[static_cast<std::size_t>(arg)] = 1;
                const std::size_t r = cand[static_cast<std::size_t>(arg)];
                space.mark(r, shadow);
                pts += arg_pts;
                mass += masses[r];
                chosen.push_back(r);
            }
            const double v = value_of(mass, pts, total);
            if (v > res.certified) {
                res.certified = v;
                res.parameter = s;
                res.cube = q;
                res.collection = chosen;
                std::sort(res.collection.begin(), res.collection.end());
            }
        }
    }
    res.heuristic = res.certified;
    return res;
}

ProductBmoResult product_bmo_lower(const WaveletCoefficients& b, const ProductBmoOptions& options) {
    const auto& space = b.space();
    const std::size_t total = b.lattice().size();
    const auto masses = b.rectangle_masses();
    const auto sums = subtree_sums(space, masses);
    const Geometry g(space);

    ProductBmoResult best;
    const auto rect = rectangular_bmo(b);
    best.value = rect.value;
    best.collection = {rect.rectangle};
    best.shadow_measure = space.volume(rect.rectangle);
    best.source = "rectangle";

    if (options.include_minus_one && space.parameters() >= 2) {
        const auto mo = bmo_minus_one(b);
        if (!mo.collection.empty()) {
            const auto m = mask_of(space, mo.collection);
            const double v = open_set_value(b, m);
            if (v > best.value) {
                best.value = v;
                best.collection = mo.collection;
                best.shadow_measure = static_cast<double>(count_points(m)) / static_cast<double>(total);
                best.source = "minus_one";
            }
        }
    }

    // Ratio of a single rectangle, for seeding.
    std::vector<double> ratio(masses.size());
    for (std::size_t r = 0; r < masses.size(); ++r) ratio[r] = std::max(0.0, sums[r]) / space.volume(r);

    const auto evaluate = [&](const PointMask& m) {
        return mass_from_counts(masses, g.tuple, g.points, g.tuples.counts(m));
    };

    for (std::size_t restart = 0; restart <= options.budget; ++restart) {
        std::size_t seed_rect = rect.rectangle;
        if (restart > 0) {
            std::mt19937_64 rng(options.seed * 0x9E3779B97F4A7C15ull + restart);
            if (std::none_of(ratio.begin(), ratio.end(), [](double v) { return v > 0.0; })) break;
            std::discrete_distribution<std::size_t> pick(ratio.begin(), ratio.end());
            seed_rect = pick(rng);
        }
        std::vector<std::size_t> coll{seed_rect};
        PointMask mask(total, 0);
        space.mark(seed_rect, mask);
        std::size_t pts = g.points[seed_rect];
        double mass = evaluate(mask);
        double cur = value_of(mass, pts, total);
        for (;;) {
            if (options.max_rectangles > 0 && coll.size() >= options.max_rectangles) break;
            const auto counts = g.tuples.counts(mask);
            struct Cand {
                double proxy;
                std::size_t r;
            };
            std::vector<Cand> cands;
            for (std::size_t r = 0; r < masses.size(); ++r) {
                const std::uint32_t inside = counts[g.tuple[r]];
                if (inside == g.points[r] || !(sums[r] > 0.0)) continue;
                const double proxy = (mass + sums[r]) / static_cast<double>(pts + g.points[r] - inside);
                cands.push_back({proxy, r});
            }
            if (cands.empty()) break;
            const std::size_t k = std::min(options.candidates_per_step, cands.size());
            std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(k), cands.end(),
                              [&](const Cand& x, const Cand& y) {
                                  if (x.proxy != y.proxy) return x.proxy > y.proxy;
                                  if (masses[x.r] != masses[y.r]) return masses[x.r] > masses[y.r];
                                  if (g.points[x.r] != g.points[y.r]) return g.points[x.r] > g.points[y.r];
                                  return x.r < y.r;
                              });
            double best_v = cur;
            long arg = -1;
            PointMask best_mask;
            double best_mass = 0.0;
            std::size_t best_pts = 0;
            for (std::size_t c = 0; c < k; ++c) {
                PointMask m = mask;
                space.mark(cands[c].r, m);
                const std::size_t p = pts + g.points[cands[c].r] - counts[g.tuple[cands[c].r]];
                const double ms = evaluate(m);
                const double v = value_of(ms, p, total);
                if (v > best_v * (1.0 + 1e-12)) {
                    best_v = v;
                    arg = static_cast<long>(c);
                    best_mask = std::move(m);
                    best_mass = ms;
                    best_pts = p;
                }
            }
            if (arg < 0) break;
            coll.push_back(cands[static_cast<std::size_t>(arg)].r);
            mask = std::move(best_mask);
            mass = best_mass;
            pts = best_pts;
            cur = best_v;
        }
        if (cur > best.value) {
            best.value = cur;
            best.collection = coll;
            std::sort(best.collection.begin(), best.collection.end());
            best.shadow_measure = static_cast<double>(pts) / static_cast<double>(total);
            best.source = "greedy";
        }
    }
    return best;
}

ProductBmoResult product_bmo_exhaustive(const WaveletCoefficients& b, int max_union,
                                        std::size_t max_rectangles_in_space) {
    const auto& space = b.space();
    const std::size_t m = space.count();
    if (m > max_rectangles_in_space) throw PreconditionError("too many rectangles for exhaustive search");
    if (max_union < 1) throw DomainError("union size must be >= 1");
    const std::size_t total = b.lattice().size();
    const auto masses = b.rectangle_masses();
    const Geometry g(space);
    ProductBmoResult best;
    best.source = "exhaustive";
    std::vector<std::size_t> pick;
    std::vector<PointMask> masks{PointMask(total, 0)};
    // Depth-first enumeration of increasing index tuples.
    const auto recurse = [&](auto&& self, std::size_t start) -> void {
        for (std::size_t r = start; r < m; ++r) {
            PointMask next = masks.back();
            space.mark(r, next);
            pick.push_back(r);
            const double v = value_of(mass_from_counts(masses, g.tuple, g.points, g.tuples.counts(next)),
                                      count_points(next), total);
            if (v > best.value) {
                best.value = v;
                best.collection = pick;
                best.shadow_measure = static_cast<double>(count_points(next)) / static_cast<double>(total);
            }
            if (static_cast<int>(pick.size()) < max_union) {
                masks.push_back(std::move(next));
                self(self, r + 1);
                masks.pop_back();
            }
            pick.pop_back();
        }
    };
    recurse(recurse, 0);
    return best;
}

std::vector<double> strong_maximal_function(const RectangleSpace& space, const PointMask& set) {
    const auto& lat = space.lattice();
    if (set.size() != lat.size()) throw StructuralError("point set does not match the lattice");
    const TupleSpace ts(space);
    const auto counts = ts.counts(set);
    std::vector<double> md(ts.size());
    for (std::size_t flat = 0; flat < ts.size(); ++flat) {
        double v = static_cast<double>(counts[flat]) / static_cast<double>(ts.points(flat));
        for (int s = 0; s < ts.parameters(); ++s) {
            const auto& ix = space.indexer(s);
            const std::size_t c = ts.coordinate(flat, s);
            if (ix.scale_of(c) == 0) continue;
            v = std::max(v, md[flat - (c - ix.parent(c)) * ts.stride(s)]);
        }
        md[flat] = v;
    }
    std::vector<double> out(lat.size());
    for (std::size_t p = 0; p < lat.size(); ++p) out[p] = md[ts.of_point(p)];
    return out;
}

namespace {

// Smallest mu for which the open dilation of the rectangle reaches each lattice point.
std::vector<double> reach(const RectangleSpace& space, std::size_t rect) {
    const auto& lat = space.lattice();
    const auto r = space.rectangle(rect);
    std::vector<double> out(lat.size(), 0.0);
    for (std::size_t p = 0; p < lat.size(); ++p) {
        double mu = 0.0;
        for (int s = 0; s < space.parameters(); ++s) {
            const auto& ix = space.indexer(s);
            const auto n = static_cast<double>(ix.side());
            const double side = static_cast<double>(ix.side() >> r.cubes[s].scale);
            std::size_t local = lat.parameter_index(p, s);
            for (int a = ix.dim() - 1; a >= 0; --a) {
                const auto coord = static_cast<double>(local % ix.side());
                local /= ix.side();
                const double centre = r.cubes[s].position[a] * side + side / 2.0;
                double delta = std::abs(coord + 0.5 - centre);
                delta = std::min(delta, n - delta);
                mu = std::max(mu, 2.0 * delta / side);
            }
        }
        out[p] = mu;
    }
    return out;
}

}  // namespace

PointMask dilated_rectangle(const RectangleSpace& space, std::size_t rect, double mu) {
    const auto r = reach(space, rect);
    PointMask m(r.size(), 0);
    for (std::size_t p = 0; p < r.size(); ++p) m[p] = r[p] < mu ? 1 : 0;
    return m;
}

double embeddedness(const RectangleSpace& space, std::size_t rect, const PointMask& V) {
    const auto r = reach(space, rect);
    double e = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < r.size(); ++p) {
        if (!V[p]) e = std::min(e, r[p]);
    }
    return e;
}

double EnlargementResult::measure() const {
    return V.empty() ? 0.0 : static_cast<double>(v_points) / static_cast<double>(V.size());
}

EnlargementResult journe_enlarge(const RectangleCollection& U, double a) {
    if (!(a > 0.0)) throw DomainError("enlargement parameter a must be positive");
    const auto& space = U.space();
    const std::size_t total = space.lattice().size();
    EnlargementResult res;
    res.a = a;
    res.V.assign(total, 0);
    if (U.empty()) {
        res.threshold = 1.0;
        return res;
    }
    if (U.shadow_points() == total) {
        res.V = U.shadow();
        res.v_points = total;
        res.degenerate = true;
        res.E.assign(U.size(), 1.0);
        return res;
    }
    const auto M = strong_maximal_function(space, U.shadow());
    std::vector<double> levels(M.begin(), M.end());
    std::sort(levels.begin(), levels.end(), std::greater<>());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    // |{M >= levels[k]}| grows with k; find the largest k below the bound.
    const double bound = (1.0 + a) * static_cast<double>(U.shadow_points());
    const auto size_at = [&](std::size_t k) {
        return static_cast<std::size_t>(std::count_if(M.begin(), M.end(), [&](double v) { return v >= levels[k]; }));
    };
    std::size_t lo = 0;
    std::size_t hi = levels.size();
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (static_cast<double>(size_at(mid)) < bound) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    res.threshold = lo + 1 < levels.size() ? levels[lo + 1] : 0.0;
    for (std::size_t p = 0; p < total; ++p) res.V[p] = M[p] >= levels[lo] ? 1 : 0;
    res.v_points = count_points(res.V);
    res.E.reserve(U.size());
    for (std::size_t r : U.rectangles()) res.E.push_back(embeddedness(space, r, res.V));
    return res;
}

WaveletCoefficients damped_projection(const WaveletCoefficients& b, const RectangleCollection& U,
                                      std::span<const double> E, double cexp) {
    if (E.size() != U.size()) throw StructuralError("embeddedness values do not match the collection");
    std::vector<double> factor(b.space().count(), 0.0);
    for (std::size_t k = 0; k < U.size(); ++k) {
        if (!(E[k] >= 1.0)) throw DomainError("embeddedness values must be >= 1");
        factor[U.rectangles()[k]] = std::pow(E[k], -cexp);
    }
    std::vector<cplx> out(b.values().size(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const long r = b.slot_rectangle(i);
        if (r >= 0) out[i] = b.values()[i] * factor[static_cast<std::size_t>(r)];
    }
    return WaveletCoefficients(b.lattice(), std::move(out));
}

}  // namespace czl
