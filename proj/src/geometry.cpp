#include "nhsparse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace nhsparse {

namespace {

// floor division by 2^k for possibly negative coordinates
std::int64_t floor_shift(std::int64_t v, int k) {
    if (k <= 0) return v << (-k);
    return v >> k;  // arithmetic shift floors on two's complement
}

const std::uint32_t kPrimes[] = {2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,
                                 41,  43,  47,  53,  59,  61,  67,  71,  73,  79,  83,  89,
                                 97,  101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
                                 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223};

double frac(double x) { return x - std::floor(x); }

}  // namespace

int grid_count(int n, double alpha) {
    const double fl = std::floor(alpha);
    const bool integer_alpha = (alpha - fl) == 0.0;
    return n - static_cast<int>(fl) + (integer_alpha ? 1 : 0);
}

GridFamily make_grids(int n, double alpha, double base_side, std::uint64_t offset_seed,
                      int boundary_depth) {
    if (n < 1 || n > kMaxDim) throw DomainError("make_grids: dimension out of range");
    if (!(alpha > 0.0 && alpha <= static_cast<double>(n)))
        throw DomainError("make_grids: alpha must lie in (0, n]");
    if (!(base_side > 0.0)) throw DomainError("make_grids: base_side must be positive");

    GridFamily g;
    g.n = n;
    g.k = grid_count(n, alpha);
    g.base_side = base_side;
    g.seed = offset_seed;

    const std::size_t nprimes = sizeof(kPrimes) / sizeof(kPrimes[0]);
    for (std::uint64_t attempt = 0;; ++attempt) {
        g.offsets.clear();
        for (int i = 0; i < g.k; ++i) {
            const std::uint32_t p = kPrimes[(offset_seed + attempt * 7 + i) % nprimes];
            double lam = frac(std::sqrt(static_cast<double>(p)));
            if (lam < 1e-3) lam += 0.125;  // square primes would land here
            // shifted below the first quadrant so that a support inside
            // [0, 2 base_side]^n sits centrally in one coarse cell
            g.offsets.push_back((lam - 2.0) * base_side);
        }
        // no two grids may share a boundary hyperplane down to boundary_depth
        bool ok = true;
        const double unit = std::ldexp(base_side, -boundary_depth);
        for (int a = 0; a < g.k && ok; ++a)
            for (int b = a + 1; b < g.k && ok; ++b) {
                const double d = frac(std::abs(g.offsets[a] - g.offsets[b]) / unit);
                if (std::min(d, 1.0 - d) < 1e-6) ok = false;
            }
        if (ok) return g;
        if (attempt > 64) throw DomainError("make_grids: could not separate grid offsets");
    }
}

double cube_side(const GridFamily& g, const Cube& c) {
    return std::ldexp(g.base_side, -c.scale);
}

Box cube_box(const GridFamily& g, const Cube& c, Openness open) {
    Box b;
    b.n = g.n;
    b.open = open;
    const double side = cube_side(g, c);
    const double off = g.offsets.empty() ? 0.0 : g.offsets[static_cast<std::size_t>(c.grid)];
    for (int d = 0; d < g.n; ++d) {
        b.lo[d] = off + side * static_cast<double>(c.j[d]);
        b.hi[d] = b.lo[d] + side;
    }
    return b;
}

Box cube_box(const GridFamily& g, const Cube& c) { return cube_box(g, c, c.open); }

Cube parent(const Cube& c) {
    Cube p = c;
    p.scale = c.scale - 1;
    for (auto& v : p.j) v = floor_shift(v, 1);
    return p;
}

std::vector<Cube> children(const GridFamily& g, const Cube& c) {
    std::vector<Cube> out;
    const int count = 1 << g.n;
    out.reserve(static_cast<std::size_t>(count));
    for (int mask = 0; mask < count; ++mask) {
        Cube ch = c;
        ch.scale = c.scale + 1;
        for (int d = 0; d < g.n; ++d) ch.j[d] = 2 * c.j[d] + ((mask >> d) & 1);
        out.push_back(ch);
    }
    return out;
}

std::vector<Cube> descendants(const GridFamily& g, const Cube& c, int depth) {
    if (depth < 1) throw DomainError("descendants: depth must be >= 1");
    std::vector<Cube> cur{c}, next;
    for (int r = 0; r < depth; ++r) {
        next.clear();
        for (const Cube& q : cur) {
            auto ch = children(g, q);
            next.insert(next.end(), ch.begin(), ch.end());
        }
        cur.swap(next);
    }
    return cur;
}

std::vector<Cube> friends_of(const GridFamily& g, const Cube& c) {
    std::vector<Cube> out;
    const int count = 1;
    (void)count;
    std::array<int, kMaxDim> d{{0, 0, 0}};
    const int total = static_cast<int>(std::pow(3.0, g.n));
    for (int idx = 0; idx < total; ++idx) {
        int rem = idx;
        Cube f = c;
        for (int dim = 0; dim < g.n; ++dim) {
            d[dim] = rem % 3 - 1;
            rem /= 3;
            f.j[dim] = c.j[dim] + d[dim];
        }
        out.push_back(f);
    }
    return out;
}

Cube cube_at(const GridFamily& g, int grid, int scale, const Point& x) {
    Cube c;
    c.grid = grid;
    c.scale = scale;
    const double side = std::ldexp(g.base_side, -scale);
    const double off = g.offsets.empty() ? 0.0 : g.offsets[static_cast<std::size_t>(grid)];
    for (int d = 0; d < g.n; ++d) c.j[d] = static_cast<std::int64_t>(std::floor((x[d] - off) / side));
    return c;
}

bool box_contains(const Box& outer, const Box& inner) {
    for (int d = 0; d < outer.n; ++d)
        if (!(outer.lo[d] <= inner.lo[d] && inner.hi[d] <= outer.hi[d])) return false;
    return true;
}

bool cube_contains(const GridFamily& g, const Cube& outer, const Cube& inner) {
    if (outer.grid == inner.grid) {
        if (outer.scale > inner.scale) return false;
        const int k = inner.scale - outer.scale;
        for (int d = 0; d < g.n; ++d)
            if (floor_shift(inner.j[d], k) != outer.j[d]) return false;
        return true;
    }
    if (cube_side(g, outer) < cube_side(g, inner)) return false;
    return box_contains(cube_box(g, outer), cube_box(g, inner));
}

Box dilate(const Box& b, double r) {
    Box out = b;
    out.open = Openness::Closed;
    for (int d = 0; d < b.n; ++d) {
        const double c = 0.5 * (b.lo[d] + b.hi[d]);
        const double h = 0.5 * r * (b.hi[d] - b.lo[d]);
        out.lo[d] = c - h;
        out.hi[d] = c + h;
    }
    return out;
}

Box dilate(const GridFamily& g, const Cube& c, double r) { return dilate(cube_box(g, c), r); }

Box intersect_box(const Box& a, const Box& b) {
    Box out = a;
    out.open = Openness::Closed;
    for (int d = 0; d < a.n; ++d) {
        out.lo[d] = std::max(a.lo[d], b.lo[d]);
        out.hi[d] = std::min(a.hi[d], b.hi[d]);
        if (out.hi[d] < out.lo[d]) out.lo[d] = out.hi[d] = 0.5 * (out.lo[d] + out.hi[d]);
    }
    return out;
}

double set_distance(const Box& a, const Box& b) {
    double s = 0.0;
    for (int d = 0; d < a.n; ++d) {
        const double gap = std::max({0.0, b.lo[d] - a.hi[d], a.lo[d] - b.hi[d]});
        s += gap * gap;
    }
    return std::sqrt(s);
}

double inner_boundary_distance(const Box& j, const Box& r) {
    // The inner boundary is the union, over coordinates i, of the three
    // hyperplane pieces x_i in {lo, mid, hi} clipped to the closure of r.
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < r.n; ++i) {
        const double mid = 0.5 * (r.lo[i] + r.hi[i]);
        for (double plane : {r.lo[i], mid, r.hi[i]}) {
            double s = 0.0;
            {
                const double gap = std::max({0.0, j.lo[i] - plane, plane - j.hi[i]});
                s += gap * gap;
            }
            for (int d = 0; d < r.n; ++d) {
                if (d == i) continue;
                const double gap = std::max({0.0, j.lo[d] - r.hi[d], r.lo[d] - j.hi[d]});
                s += gap * gap;
            }
            best = std::min(best, std::sqrt(s));
        }
    }
    return best;
}

namespace {

Box enclosing_box(const Box& a, const Box& b) {
    // Smallest closed cube containing a and b; among minimizers, the one
    // whose center coordinate sum is minimal sits as low as possible.
    Box out;
    out.n = a.n;
    out.open = Openness::Closed;
    double side = 0.0;
    for (int d = 0; d < a.n; ++d)
        side = std::max(side, std::max(a.hi[d], b.hi[d]) - std::min(a.lo[d], b.lo[d]));
    for (int d = 0; d < a.n; ++d) {
        out.lo[d] = std::max(a.hi[d], b.hi[d]) - side;
        out.hi[d] = out.lo[d] + side;
    }
    return out;
}

}  // namespace

CubePairMetrics pair_metrics(const GridFamily& g, const Cube& I, const Cube& J, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw DomainError("pair_metrics: theta must be in (0,1)");
    CubePairMetrics m;
    const Box bi = cube_box(g, I);
    const Box bj = cube_box(g, J);
    const double li = bi.side();
    const double lj = bj.side();
    const Box& small_box = (lj <= li) ? bj : bi;
    const Box& large_box = (lj <= li) ? bi : bj;
    m.ec = small_box.side() / large_box.side();
    m.dist = set_distance(bi, bj);
    m.rdist = m.dist / large_box.side();
    m.inrdist = inner_boundary_distance(small_box, large_box) / small_box.side();
    m.enclosing = enclosing_box(bi, bj);

    const Box bpi = cube_box(g, parent(I));
    const Box bpj = cube_box(g, parent(J));
    const Box& psmall = (bpj.side() <= bpi.side()) ? bpj : bpi;
    const Box& plarge = (bpj.side() <= bpi.side()) ? bpi : bpj;
    m.inrdist_hat = inner_boundary_distance(psmall, plarge) / psmall.side();
    m.lambda = std::pow(m.ec, theta) * (1.0 + m.inrdist_hat);

    if (m.rdist >= 1.0)
        m.cls = PairClass::Distant;
    else if (m.lambda > 1.0)
        m.cls = (m.rdist > 0.0) ? PairClass::Close : PairClass::Nested;
    else
        m.cls = PairClass::Attached;
    return m;
}

std::vector<Cube> cube_family(const GridFamily& g, const Cube& J, int e, int m,
                              std::optional<int> k_band, const std::vector<Cube>& universe,
                              double theta) {
    if (m < 1) throw DomainError("cube_family: m must be >= 1");
    if (k_band && m != 1) throw DomainError("cube_family: k band requires m == 1");
    std::vector<Cube> out;
    const int want_scale = J.scale - e;
    for (const Cube& I : universe) {
        if (I.scale != want_scale) continue;
        const CubePairMetrics pm = pair_metrics(g, I, J, theta);
        const CubePairMetrics hat = pair_metrics(g, parent(I), parent(J), theta);
        if (!(hat.rdist >= static_cast<double>(m - 1) && hat.rdist < static_cast<double>(m)))
            continue;
        if (k_band) {
            const double ir = hat.inrdist;
            if (!(ir >= static_cast<double>(*k_band - 1) && ir < static_cast<double>(*k_band)))
                continue;
        }
        (void)pm;
        out.push_back(I);
    }
    return out;
}

std::string cube_to_string(const Cube& c, int n) {
    std::string s = "g" + std::to_string(c.grid) + ":s" + std::to_string(c.scale) + ":[";
    for (int d = 0; d < n; ++d) {
        if (d) s += ",";
        s += std::to_string(c.j[d]);
    }
    s += "]";
    return s;
}

Cube cube_from_string(const std::string& s) {
    Cube c;
    int grid = 0, scale = 0;
    long long j0 = 0, j1 = 0, j2 = 0;
    int matched = std::sscanf(s.c_str(), "g%d:s%d:[%lld,%lld,%lld]", &grid, &scale, &j0, &j1, &j2);
    if (matched < 3) throw DomainError("cube_from_string: bad cube literal '" + s + "'");
    c.grid = grid;
    c.scale = scale;
    c.j = {j0, j1, j2};
    return c;
}

double default_theta(double alpha, double delta) { return alpha / (alpha + delta / 2.0); }

}  // namespace nhsparse
