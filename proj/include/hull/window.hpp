#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "hull/tiling.hpp"

namespace hull {

struct IVecHash {
    std::size_t operator()(const IVec& v) const noexcept {
        std::uint64_t h = static_cast<std::uint64_t>(v[0]) * 0x9E3779B97F4A7C15ULL;
        h ^= static_cast<std::uint64_t>(v[1]) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

/// Pointed patch translated so the pointed tile's puncture is 0; tiles in canonical order.
struct PatchClass {
    int dim = 1;
    std::vector<Tile> tiles;
    std::uint32_t pointed = 0;

    friend bool operator==(const PatchClass& a, const PatchClass& b) {
        return a.dim == b.dim && a.pointed == b.pointed && a.tiles == b.tiles;
    }
    friend bool operator<(const PatchClass& a, const PatchClass& b) {
        if (a.tiles.size() != b.tiles.size()) return a.tiles.size() < b.tiles.size();
        if (a.tiles != b.tiles) return a.tiles < b.tiles;
        return a.pointed < b.pointed;
    }
};

inline __int128 to_int128_clamped(const mpz_class& z) {
    static const mpz_class cap = mpz_class(1) << 120;
    if (z > cap) return static_cast<__int128>(1) << 120;
    if (z.fits_slong_p()) return z.get_si();
    __int128 out = 0;
    for (char ch : z.get_str()) out = out * 10 + (ch - '0');
    return out;
}

inline mpz_class to_mpz(__int128 v) {
    bool neg = v < 0;
    unsigned __int128 m = neg ? static_cast<unsigned __int128>(-(v + 1)) + 1 : static_cast<unsigned __int128>(v);
    mpz_class hi(static_cast<unsigned long>(m >> 64)), lo(static_cast<unsigned long>(m & 0xFFFFFFFFFFFFFFFFULL));
    mpz_class out = (hi << 64) + lo;
    return neg ? mpz_class(-out) : out;
}

/// Squared scaled length back to an exact rational: v / den^2.
inline Rational unscale2(__int128 v, std::int64_t den) {
    Rational q{to_mpz(v), mpz_class(den) * den};
    q.canonicalize();
    return q;
}

/// Integer comparison threshold: |z|^2 < R^2 (scaled) iff inorm2(z) <= limit.
inline __int128 strict_ball_limit(const Rational& radius, std::int64_t den) {
    if (radius <= 0) return -1;
    Rational r2 = radius * radius * Rational(den) * Rational(den);
    return to_int128_clamped(ceil(r2) - 1);
}

/// Integer threshold for the closed comparison |z|^2 <= R^2 (scaled).
inline __int128 closed_ball_limit(const Rational& radius, std::int64_t den) {
    if (radius < 0) return -1;
    Rational r2 = radius * radius * Rational(den) * Rational(den);
    return to_int128_clamped(floor(r2));
}

/**
 * Finite tile set with exact integer coordinates (all coordinates are
 * multiples of 1/den) and a bucket grid over punctures.
 */
class TileSet {
public:
    TileSet() = default;

    TileSet(std::shared_ptr<const SubstitutionRule> rule, const std::vector<Tile>& tiles) : rule_(std::move(rule)) {
        dim_ = rule_->dim;
        mpz_class l = 1;
        auto absorb = [&](const Rational& q) { mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), q.get_den_mpz_t()); };
        for (const auto& p : rule_->prototiles) {
            for (const auto& v : p.support.vertices) absorb(v.x), absorb(v.y);
            absorb(p.puncture.x), absorb(p.puncture.y);
        }
        for (const auto& t : tiles) absorb(t.offset.x), absorb(t.offset.y);
        den_ = to_int64(l);
        auto to_i = [&](const Vec& v) {
            Rational x = v.x * Rational(l), y = v.y * Rational(l);
            return IVec{to_int64(x.get_num()), to_int64(y.get_num())};
        };
        for (const auto& p : rule_->prototiles) {
            std::vector<IVec> vs;
            for (const auto& v : p.support.vertices) vs.push_back(to_i(v));
            proto_vertices_.push_back(std::move(vs));
            proto_puncture_.push_back(to_i(p.puncture));
            Rational r2 = reach2(p.support, p.puncture);
            reach_ = std::max(reach_, sqrt_upper(r2, 20));
        }
        std::vector<std::pair<IVec, std::uint32_t>> items;
        items.reserve(tiles.size());
        for (std::uint32_t i = 0; i < tiles.size(); ++i) items.push_back({to_i(tiles[i].offset), tiles[i].proto});
        order_.resize(tiles.size());
        std::iota(order_.begin(), order_.end(), 0u);
        std::vector<IVec> punct(tiles.size());
        for (std::size_t i = 0; i < tiles.size(); ++i) punct[i] = items[i].first + proto_puncture_[items[i].second];
        std::sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
            return punct[a] < punct[b];
        });
        for (auto i : order_) {
            offset_.push_back(items[i].first);
            proto_.push_back(items[i].second);
            puncture_.push_back(punct[i]);
        }
        max_abs_ = 0;
        for (const auto& p : puncture_) max_abs_ = std::max({max_abs_, std::abs(p[0]), std::abs(p[1])});
        if (max_abs_ > (std::int64_t(1) << 40))
            throw Error(ErrorKind::internal, "tiling-core", "scaled coordinates too large");
        build_grid();
        for (std::uint32_t i = 0; i < puncture_.size(); ++i) by_position_.emplace(puncture_[i], i);
    }

    int dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return proto_.size(); }
    std::int64_t den() const noexcept { return den_; }
    const SubstitutionRule& rule() const noexcept { return *rule_; }
    std::shared_ptr<const SubstitutionRule> rule_ptr() const noexcept { return rule_; }

    std::uint32_t proto(std::uint32_t i) const { return proto_[i]; }
    const IVec& ipuncture(std::uint32_t i) const { return puncture_[i]; }
    const IVec& ioffset(std::uint32_t i) const { return offset_[i]; }
    /// Position of tile i in the construction order handed to the constructor.
    std::uint32_t source_index(std::uint32_t i) const { return order_[i]; }

    Vec to_vec(const IVec& v) const {
        Rational x(mpz_class(static_cast<long>(v[0])), mpz_class(static_cast<long>(den_)));
        Rational y(mpz_class(static_cast<long>(v[1])), mpz_class(static_cast<long>(den_)));
        x.canonicalize();
        y.canonicalize();
        return {x, y};
    }
    /// Exact conversion of a rational vector; nullopt if not on the 1/den grid.
    std::optional<IVec> to_ivec(const Vec& v) const {
        Rational x = v.x * Rational(den_), y = v.y * Rational(den_);
        if (x.get_den() != 1 || y.get_den() != 1) return std::nullopt;
        if (!x.get_num().fits_slong_p() || !y.get_num().fits_slong_p()) return std::nullopt;
        return IVec{x.get_num().get_si(), y.get_num().get_si()};
    }
    Vec puncture(std::uint32_t i) const { return to_vec(puncture_[i]); }
    Tile tile(std::uint32_t i) const { return Tile{proto_[i], to_vec(offset_[i])}; }
    Support support(std::uint32_t i) const { return translate(rule_->prototiles[proto_[i]].support, to_vec(offset_[i])); }

    std::optional<std::uint32_t> tile_at(const IVec& puncture) const {
        auto it = by_position_.find(puncture);
        if (it == by_position_.end()) return std::nullopt;
        return it->second;
    }

    /// Punctures p with |p - c| < radius, in index order.
    std::vector<std::uint32_t> punctures_in_ball(const IVec& c, const Rational& radius) const {
        std::vector<std::uint32_t> out;
        visit_ball(c, radius, [&](std::uint32_t i) { out.push_back(i); });
        std::sort(out.begin(), out.end());
        return out;
    }

    template <class F>
    void visit_ball(const IVec& c, const Rational& radius, F&& f) const {
        visit_ball_limit(c, strict_ball_limit(radius, den_), std::forward<F>(f));
    }

    /// Visits punctures p with inorm2(p - c) <= limit (scaled units).
    template <class F>
    void visit_ball_limit(const IVec& c, __int128 limit, F&& f) const {
        if (limit < 0) return;
        double r = std::sqrt(static_cast<double>(limit)) + 2.0;
        visit_box(c, r, [&](std::uint32_t i) {
            if (inorm2(puncture_[i] - c) <= limit) f(i);
        });
    }

    /// Tiles meeting the open ball B_radius(c), in index order (exact).
    std::vector<std::uint32_t> tiles_meeting_ball(const Vec& c, const Rational& radius) const {
        std::vector<std::uint32_t> out;
        if (radius <= 0) return out;
        double cx = c.x.get_d() * static_cast<double>(den_), cy = c.y.get_d() * static_cast<double>(den_);
        double rs = radius.get_d() * static_cast<double>(den_);
        double reach = reach_.get_d() * static_cast<double>(den_);
        IVec ci{static_cast<std::int64_t>(std::llround(cx)), static_cast<std::int64_t>(std::llround(cy))};
        visit_box(ci, rs + reach + 2.0, [&](std::uint32_t i) {
            if (meets_ball_filtered(i, c, cx, cy, rs, radius)) out.push_back(i);
        });
        std::sort(out.begin(), out.end());
        return out;
    }

    Rational reach() const { return reach_; }

protected:
    template <class F>
    void visit_box(const IVec& c, double r, F&& f) const {
        if (proto_.empty()) return;
        auto cell_of = [&](double v, std::int64_t lo) { return static_cast<std::int64_t>(std::floor((v - static_cast<double>(lo)) / static_cast<double>(cell_))); };
        std::int64_t x0 = std::max<std::int64_t>(0, cell_of(static_cast<double>(c[0]) - r, min_[0]));
        std::int64_t x1 = std::min<std::int64_t>(nx_ - 1, cell_of(static_cast<double>(c[0]) + r, min_[0]));
        std::int64_t y0 = 0, y1 = 0;
        if (dim_ == 2) {
            y0 = std::max<std::int64_t>(0, cell_of(static_cast<double>(c[1]) - r, min_[1]));
            y1 = std::min<std::int64_t>(ny_ - 1, cell_of(static_cast<double>(c[1]) + r, min_[1]));
        }
        for (std::int64_t y = y0; y <= y1; ++y)
            for (std::int64_t x = x0; x <= x1; ++x) {
                std::size_t cell = static_cast<std::size_t>(y * nx_ + x);
                for (std::uint32_t k = start_[cell]; k < start_[cell + 1]; ++k) f(items_[k]);
            }
    }

    bool meets_ball_filtered(std::uint32_t i, const Vec& c, double cx, double cy, double rs,
                             const Rational& radius) const {
        const auto& vs = proto_vertices_[proto_[i]];
        const IVec& o = offset_[i];
        double d2;
        if (dim_ == 1) {
            double lo = static_cast<double>(vs[0][0] + o[0]), hi = static_cast<double>(vs[1][0] + o[0]);
            double d = std::max({lo - cx, cx - hi, 0.0});
            d2 = d * d;
        } else {
            std::vector<std::array<double, 2>> poly;
            for (const auto& v : vs) poly.push_back({static_cast<double>(v[0] + o[0]), static_cast<double>(v[1] + o[1])});
            bool inside = false;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0, b = poly.size() - 1; a < poly.size(); b = a++) {
                const auto &p = poly[a], &q = poly[b];
                if ((p[1] > cy) != (q[1] > cy)) {
                    double xi = q[0] + (cy - q[1]) * (p[0] - q[0]) / (p[1] - q[1]);
                    if (cx < xi) inside = !inside;
                }
                double ex = p[0] - q[0], ey = p[1] - q[1];
                double t = ((cx - q[0]) * ex + (cy - q[1]) * ey) / (ex * ex + ey * ey);
                t = std::clamp(t, 0.0, 1.0);
                double dx = q[0] + t * ex - cx, dy = q[1] + t * ey - cy;
                best = std::min(best, dx * dx + dy * dy);
            }
            d2 = inside ? 0.0 : best;
        }
        double r2 = rs * rs;
        double slack = 1e-9 * (r2 + 1.0);
        if (d2 < r2 - slack) return true;
        if (d2 > r2 + slack) return false;
        return meets_ball(support(i), dim_, c, radius);
    }

    void build_grid() {
        min_ = {std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max()};
        IVec max{std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::min()};
        for (const auto& p : puncture_) {
            min_[0] = std::min(min_[0], p[0]);
            min_[1] = std::min(min_[1], p[1]);
            max[0] = std::max(max[0], p[0]);
            max[1] = std::max(max[1], p[1]);
        }
        if (puncture_.empty()) {
            nx_ = ny_ = 0;
            start_.assign(1, 0);
            return;
        }
        cell_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(reach_.get_d() * static_cast<double>(den_))));
        nx_ = (max[0] - min_[0]) / cell_ + 1;
        ny_ = dim_ == 2 ? (max[1] - min_[1]) / cell_ + 1 : 1;
        std::vector<std::uint32_t> count(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
        std::vector<std::size_t> cell_of(puncture_.size());
        for (std::size_t i = 0; i < puncture_.size(); ++i) {
            std::int64_t cx = (puncture_[i][0] - min_[0]) / cell_;
            std::int64_t cy = dim_ == 2 ? (puncture_[i][1] - min_[1]) / cell_ : 0;
            cell_of[i] = static_cast<std::size_t>(cy * nx_ + cx);
            ++count[cell_of[i] + 1];
        }
        start_.assign(count.size(), 0);
        for (std::size_t c = 1; c < count.size(); ++c) start_[c] = start_[c - 1] + count[c];
        items_.assign(puncture_.size(), 0);
        std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
        for (std::uint32_t i = 0; i < puncture_.size(); ++i) items_[fill[cell_of[i]]++] = i;
    }

    std::shared_ptr<const SubstitutionRule> rule_;
    int dim_ = 1;
    std::int64_t den_ = 1;
    std::vector<std::vector<IVec>> proto_vertices_;
    std::vector<IVec> proto_puncture_;
    Rational reach_ = 0;
    std::vector<std::uint32_t> order_;
    std::vector<std::uint32_t> proto_;
    std::vector<IVec> offset_;
    std::vector<IVec> puncture_;
    std::int64_t max_abs_ = 0;
    std::unordered_map<IVec, std::uint32_t, IVecHash> by_position_;
    IVec min_{0, 0};
    std::int64_t cell_ = 1, nx_ = 0, ny_ = 0;
    std::vector<std::uint32_t> start_, items_;
};

/// Canonical pointed patch of all tiles of `set` meeting B_R(x(center)).
inline PatchClass patch_class_at(const TileSet& set, std::uint32_t center, const Rational& radius) {
    Vec c = set.puncture(center);
    auto ids = set.tiles_meeting_ball(c, radius);
    PatchClass pc;
    pc.dim = set.dim();
    std::vector<std::pair<Tile, std::uint32_t>> tagged;
    for (auto i : ids) tagged.push_back({Tile{set.proto(i), set.to_vec(set.ioffset(i) - set.ipuncture(center))}, i});
    std::sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::uint32_t k = 0; k < tagged.size(); ++k) {
        pc.tiles.push_back(tagged[k].first);
        if (tagged[k].second == center) pc.pointed = k;
    }
    return pc;
}

/// Hierarchy record: child-index path (top level first) for every tile, in window order.
struct Hierarchy {
    int levels = 0;
    std::uint32_t seed = 0;
    std::vector<std::uint8_t> paths;  ///< size() * levels entries

    const std::uint8_t* path(std::uint32_t tile) const { return paths.data() + static_cast<std::size_t>(tile) * levels; }
};

/**
 * Sample T restricted to B_N(0): tiles meeting the open ball, with the
 * origin at a puncture when origin() is set.
 */
class Window : public TileSet {
public:
    Window() = default;

    Window(std::shared_ptr<const SubstitutionRule> rule, const std::vector<Tile>& tiles, Rational radius,
           std::optional<std::uint32_t> origin_source, Hierarchy hierarchy = {})
        : TileSet(std::move(rule), tiles), radius_(std::move(radius)) {
        std::vector<std::uint32_t> inverse(size());
        for (std::uint32_t i = 0; i < size(); ++i) inverse[source_index(i)] = i;
        if (origin_source) origin_ = inverse.at(*origin_source);
        if (hierarchy.levels > 0) {
            hierarchy_.levels = hierarchy.levels;
            hierarchy_.seed = hierarchy.seed;
            hierarchy_.paths.resize(hierarchy.paths.size());
            auto L = static_cast<std::size_t>(hierarchy.levels);
            for (std::uint32_t i = 0; i < size(); ++i)
                std::copy_n(hierarchy.paths.data() + source_index(i) * L, L, hierarchy_.paths.data() + i * L);
        }
        compute_gap();
    }

    const Rational& radius() const noexcept { return radius_; }
    std::optional<std::uint32_t> origin() const noexcept { return origin_; }
    const Hierarchy& hierarchy() const noexcept { return hierarchy_; }
    /// Squared minimal puncture distance.
    const Rational& gap2() const noexcept { return gap2_; }

    /// B_r(x(u)) inside B_N(0).
    bool is_valid(std::uint32_t u, const Rational& r) const {
        Rational room = radius_ - r;
        if (room < 0) return false;
        return inorm2(ipuncture(u)) <= closed_ball_limit(room, den());
    }

    std::vector<std::uint32_t> valid_units(const Rational& r) const {
        std::vector<std::uint32_t> out;
        Rational room = radius_ - r;
        if (room < 0) return out;
        __int128 lim = closed_ball_limit(room, den());
        for (std::uint32_t u = 0; u < size(); ++u)
            if (inorm2(ipuncture(u)) <= lim) out.push_back(u);
        return out;
    }

    void require_valid(std::uint32_t u, const Rational& r, const char* module) const {
        if (!is_valid(u, r))
            throw Error(ErrorKind::margin, module,
                        "puncture " + std::to_string(u) + " is not " + to_string(r) + "-valid in window of radius " +
                            to_string(radius_));
    }

    std::vector<Tile> tiles() const {
        std::vector<Tile> out;
        for (std::uint32_t i = 0; i < size(); ++i) out.push_back(tile(i));
        return out;
    }

private:
    void compute_gap() {
        gap2_ = -1;
        if (size() < 2) return;
        __int128 best = -1;
        Rational rr = Rational(static_cast<long>(std::ceil(2.0 * reach().get_d() + 1.0)));
        __int128 lim = strict_ball_limit(rr, den());
        for (std::uint32_t i = 0; i < size(); ++i) {
            visit_ball_limit(ipuncture(i), lim, [&](std::uint32_t j) {
                if (j == i) return;
                __int128 d = inorm2(ipuncture(j) - ipuncture(i));
                if (best < 0 || d < best) best = d;
            });
        }
        if (best < 0) return;
        gap2_ = unscale2(best, den());
    }

    Rational radius_;
    std::optional<std::uint32_t> origin_;
    Hierarchy hierarchy_;
    Rational gap2_;
};

/// Canonical pointed patch class of B_R around a window puncture, with margin check.
inline PatchClass patch_around(const Window& w, std::uint32_t center, const Rational& radius) {
    w.require_valid(center, radius, "tiling-core");
    return patch_class_at(w, center, radius);
}

namespace window_detail {

struct Node {
    std::uint32_t proto;
    int level;
    Vec offset;  // region = lambda^level * support(proto) + offset
    std::vector<std::uint8_t> path;
};

inline Support region(const SubstitutionRule& rule, const Node& n, const std::vector<Rational>& powers) {
    return translate(scale(rule.prototiles[n.proto].support, powers[static_cast<std::size_t>(n.level)]), n.offset);
}

inline bool region_meets_ball(const SubstitutionRule& rule, const Node& n, const std::vector<Rational>& powers,
                              const Vec& c, const Rational& r) {
    return meets_ball(region(rule, n, powers), rule.dim, c, r);
}

} // namespace window_detail

/// Interior reference point of a supertile region: the area centroid, else the vertex mean.
inline Vec region_anchor(const Support& region, int dim) {
    Vec c = centroid(region, dim);
    if (strictly_interior(region, dim, c)) return c;
    return vertex_mean(region);
}

/// Level-`level` supertile of `seed` is centred at the puncture of the tile containing its anchor point.
inline Vec centring_puncture(const SubstitutionRule& rule, std::uint32_t seed, int level) {
    using window_detail::Node;
    std::vector<Rational> powers(static_cast<std::size_t>(level) + 1, Rational(1));
    for (int i = 1; i <= level; ++i) powers[static_cast<std::size_t>(i)] = powers[static_cast<std::size_t>(i) - 1] * rule.inflation;
    Node cur{seed, level, Vec{}, {}};
    Vec target = region_anchor(window_detail::region(rule, cur, powers), rule.dim);
    while (cur.level > 0) {
        bool found = false;
        const auto& kids = rule.children[cur.proto];
        for (const auto& k : kids) {
            Node child{k.proto, cur.level - 1, cur.offset + powers[static_cast<std::size_t>(cur.level) - 1] * k.offset, {}};
            if (contains_closed(window_detail::region(rule, child, powers), rule.dim, target)) {
                cur = std::move(child);
                found = true;
                break;
            }
        }
        if (!found) throw Error(ErrorKind::internal, "tiling-core", "supertile children do not cover their parent");
    }
    return rule.prototiles[cur.proto].puncture + cur.offset;
}

inline bool level_covers(const SubstitutionRule& rule, std::uint32_t seed, int level, const Rational& radius) {
    Vec c = centring_puncture(rule, seed, level);
    Rational lam = 1;
    for (int i = 0; i < level; ++i) lam *= rule.inflation;
    return ball_inside(scale(rule.prototiles[seed].support, lam), rule.dim, c, radius);
}

/**
 * Window of radius N cut from the level-`level` supertile of `seed`, recentred
 * at the puncture of the tile containing the supertile's anchor point.
 */
inline Window sample_window(std::shared_ptr<const SubstitutionRule> rule_ptr, std::uint32_t seed, int level,
                            const Rational& radius) {
    const auto& rule = *rule_ptr;
    require_valid(rule);
    if (level < 0) throw Error(ErrorKind::precondition, "tiling-core", "negative level");
    if (seed >= rule.prototiles.size()) throw Error(ErrorKind::precondition, "tiling-core", "seed index out of range");
    if (!level_covers(rule, seed, level, radius)) {
        int need = level + 1;
        while (need < 64 && !level_covers(rule, seed, need, radius)) ++need;
        throw Error(ErrorKind::coverage, "tiling-core",
                    "level " + std::to_string(level) + " does not cover B_" + to_string(radius) +
                        "; required level " + (need < 64 ? std::to_string(need) : std::string(">= 64")));
    }
    using window_detail::Node;
    std::vector<Rational> powers(static_cast<std::size_t>(level) + 1, Rational(1));
    for (int i = 1; i <= level; ++i) powers[static_cast<std::size_t>(i)] = powers[static_cast<std::size_t>(i) - 1] * rule.inflation;
    Vec c = centring_puncture(rule, seed, level);

    std::vector<Tile> tiles;
    Hierarchy h;
    h.levels = level;
    h.seed = seed;
    std::optional<std::uint32_t> origin;
    std::vector<Node> stack{{seed, level, Vec{}, {}}};
    while (!stack.empty()) {
        Node n = std::move(stack.back());
        stack.pop_back();
        if (!window_detail::region_meets_ball(rule, n, powers, c, radius)) continue;
        if (n.level == 0) {
            Vec off = n.offset - c;
            if (rule.prototiles[n.proto].puncture + off == Vec{}) origin = static_cast<std::uint32_t>(tiles.size());
            tiles.push_back({n.proto, off});
            h.paths.insert(h.paths.end(), n.path.begin(), n.path.end());
            continue;
        }
        const auto& kids = rule.children[n.proto];
        for (std::size_t k = kids.size(); k-- > 0;) {
            Node child{kids[k].proto, n.level - 1,
                       n.offset + powers[static_cast<std::size_t>(n.level) - 1] * kids[k].offset, n.path};
            child.path.push_back(static_cast<std::uint8_t>(k));
            stack.push_back(std::move(child));
        }
    }
    return Window(std::move(rule_ptr), tiles, radius, origin, std::move(h));
}

/// Smallest level whose supertile of `seed` covers B_N around its centring puncture.
inline int required_level(const SubstitutionRule& rule, std::uint32_t seed, const Rational& radius, int cap = 63) {
    for (int l = 0; l <= cap; ++l)
        if (level_covers(rule, seed, l, radius)) return l;
    throw Error(ErrorKind::coverage, "tiling-core", "no level up to " + std::to_string(cap) + " covers the ball");
}

inline Window sample_window(std::shared_ptr<const SubstitutionRule> rule, std::uint32_t seed, const Rational& radius) {
    int level = required_level(*rule, seed, radius);
    return sample_window(std::move(rule), seed, level, radius);
}

/// Same tiles translated by v, with the radius shrunk to a ball the result still covers.
inline Window translated(const Window& w, const Vec& v) {
    std::vector<Tile> tiles;
    std::optional<std::uint32_t> origin;
    for (std::uint32_t i = 0; i < w.size(); ++i) {
        Tile t = w.tile(i);
        t.offset += v;
        if (w.rule().puncture(t) == Vec{}) origin = i;
        tiles.push_back(std::move(t));
    }
    Rational r = w.radius() - sqrt_upper(norm2(v));
    if (r < 0) r = 0;
    return Window(w.rule_ptr(), tiles, r, origin);
}

/// Window re-centred at puncture u, cropped to the largest ball it still covers.
inline Window recentred(const Window& w, std::uint32_t u, const Rational& radius) {
    w.require_valid(u, radius, "tiling-core");
    Vec shift = -w.puncture(u);
    auto ids = w.tiles_meeting_ball(w.puncture(u), radius);
    std::vector<Tile> tiles;
    std::optional<std::uint32_t> origin;
    for (auto i : ids) {
        Tile t = w.tile(i);
        t.offset += shift;
        if (i == u) origin = static_cast<std::uint32_t>(tiles.size());
        tiles.push_back(std::move(t));
    }
    return Window(w.rule_ptr(), tiles, radius, origin);
}

} // namespace hull
