#include "nhsparse/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace nhsparse {

AtomicMeasure::AtomicMeasure(int n, double alpha, std::vector<MeasureAtom> atoms)
    : n_(n), alpha_(alpha), atoms_(std::move(atoms)) {
    if (n < 1 || n > kMaxDim) throw DomainError("AtomicMeasure: dimension out of range");
    if (!(alpha > 0.0)) throw DomainError("AtomicMeasure: alpha must be positive");
    support_.n = n;
    support_.open = Openness::Closed;
    for (int d = 0; d < n; ++d) {
        support_.lo[d] = std::numeric_limits<double>::infinity();
        support_.hi[d] = -std::numeric_limits<double>::infinity();
    }
    std::vector<double> ws;
    ws.reserve(atoms_.size());
    for (const auto& a : atoms_) {
        if (!(a.w > 0.0)) throw DomainError("AtomicMeasure: weights must be positive");
        ws.push_back(a.w);
        for (int d = 0; d < n; ++d) {
            support_.lo[d] = std::min(support_.lo[d], a.x[d]);
            support_.hi[d] = std::max(support_.hi[d], a.x[d]);
        }
    }
    if (atoms_.empty())
        for (int d = 0; d < n; ++d) support_.lo[d] = support_.hi[d] = 0.0;
    total_ = pairwise_sum(ws);
}

double AtomicMeasure::mass(const Box& b) const {
    std::vector<double> ws;
    ws.reserve(atoms_.size());
    for (const auto& a : atoms_)
        if (b.contains(a.x)) ws.push_back(a.w);
    return pairwise_sum(ws);
}

double AtomicMeasure::mass(const GridFamily& g, const Cube& c) const {
    {
        std::shared_lock lk(cache_mu_);
        auto it = cache_.find(c);
        if (it != cache_.end()) return it->second;
    }
    const double m = mass(cube_box(g, c));
    if (enforce_cert_ && cert_depth_ >= 0 && c.scale <= cert_depth_ && c_growth_ > 0.0) {
        const double bound = c_growth_ * std::pow(cube_side(g, c), alpha_);
        if (m > bound * (1.0 + 1e-9))
            throw DomainError("power growth certificate violated at cube " +
                              cube_to_string(c, n_));
    }
    std::unique_lock lk(cache_mu_);
    cache_.emplace(c, m);
    return m;
}

namespace {

int top_scale_for(const AtomicMeasure& mu, const GridFamily& g) {
    double diam = g.base_side;
    for (int d = 0; d < mu.dim(); ++d)
        diam = std::max(diam, mu.support_box().hi[d] - mu.support_box().lo[d] +
                                  std::abs(mu.support_box().lo[d]) + 1.0);
    int s = 0;
    while (std::ldexp(g.base_side, -s) < 2.0 * diam) --s;
    return s;
}

}  // namespace

void AtomicMeasure::certify_growth(const GridFamily& g, int depth) {
    double best = 0.0;
    const int s_top = top_scale_for(*this, g);
    for (int grid = 0; grid < g.k; ++grid) {
        for (int s = s_top; s <= depth; ++s) {
            std::unordered_set<Cube, CubeHash> seen;
            for (const auto& a : atoms_) {
                Cube c = cube_at(g, grid, s, a.x);
                if (!seen.insert(c).second) continue;
                const double m = mass(cube_box(g, c));
                best = std::max(best, m / std::pow(cube_side(g, c), alpha_));
            }
        }
    }
    c_growth_ = best;
    cert_depth_ = depth;
    std::unique_lock lk(cache_mu_);
    cache_.clear();
}

bool AtomicMeasure::check_growth(const GridFamily& g, int depth, double tol) const {
    const int s_top = top_scale_for(*this, g);
    for (int grid = 0; grid < g.k; ++grid) {
        for (int s = s_top; s <= depth; ++s) {
            std::unordered_set<Cube, CubeHash> seen;
            for (const auto& a : atoms_) {
                Cube c = cube_at(g, grid, s, a.x);
                if (!seen.insert(c).second) continue;
                const double m = mass(cube_box(g, c));
                if (m > c_growth_ * std::pow(cube_side(g, c), alpha_) * (1.0 + tol)) return false;
            }
        }
    }
    return true;
}

void AtomicMeasure::set_growth(double c_growth, int cert_depth) {
    c_growth_ = c_growth;
    cert_depth_ = cert_depth;
}

ExtendedMeasure::ExtendedMeasure(const AtomicMeasure& mu, const GridFamily& g,
                                 const Cube& q_prime, double c)
    : mu_(&mu), g_(&g), qp_(q_prime), c_(c) {
    const Box qbox = cube_box(g, q_prime);
    for (const auto& a : mu.atoms())
        if (!qbox.contains(a.x)) throw DomainError("ExtendedMeasure: atom outside Q'");
}

double ExtendedMeasure::mass(const Cube& a) const {
    if (a.grid != qp_.grid) {
        // the extension only changes values outside Q', so cubes of other
        // grids are admissible exactly when they sit inside it
        if (box_contains(cube_box(*g_, qp_), cube_box(*g_, a))) return mu_->mass(*g_, a);
        throw DomainError("ExtendedMeasure: cube from another grid outside Q'");
    }
    if (cube_contains(*g_, qp_, a)) return mu_->mass(*g_, a);
    if (cube_contains(*g_, a, qp_)) {
        // additivity over the sibling decomposition of a \ Q'
        const int r = qp_.scale - a.scale;
        const double lq = cube_side(*g_, qp_);
        const int sibs = (1 << g_->n) - 1;
        double m = mu_->mass(*g_, qp_);
        for (int j = 1; j <= r; ++j)
            m += sibs * c_ * std::pow(lq * std::ldexp(1.0, j - 1), mu_->alpha());
        return m;
    }
    return c_ * std::pow(cube_side(*g_, a), mu_->alpha());
}

double ExtendedMeasure::average(const std::vector<double>& f, const Cube& a) const {
    const double m = mass(a);
    if (m <= 0.0) return 0.0;
    const Box b = cube_box(*g_, a);
    const auto& atoms = mu_->atoms();
    std::vector<double> terms;
    terms.reserve(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i)
        if (b.contains(atoms[i].x)) terms.push_back(f[i] * atoms[i].w);
    return pairwise_sum(terms) / m;
}

DensityReport density(const AtomicMeasure& mu, const Box& I, int M, int samples, double delta) {
    if (M < 1) throw DomainError("density: truncation must be >= 1");
    DensityReport rep;
    rep.truncation = M;
    const double side = I.side();

    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(M));
    for (int m = 1; m <= M; ++m) {
        const double lm = m * side;
        terms.push_back(mu.mass(dilate(I, m)) / std::pow(lm, mu.alpha()) *
                        std::pow(static_cast<double>(m), -(delta / 2.0 + 1.0)));
    }
    rep.series_term = pairwise_sum(terms);
    rep.tail_bound = mu.growth_constant() * (2.0 / delta) * std::pow(static_cast<double>(M), -delta / 2.0);

    std::vector<Point> centers;
    for (const auto& a : mu.atoms())
        if (I.contains(a.x)) centers.push_back(a.x);
    centers.push_back(I.center());
    double sup = 0.0;
    for (const auto& t : centers) {
        for (int jr = 1; jr <= samples; ++jr) {
            const double r = side * static_cast<double>(jr) / static_cast<double>(samples);
            std::vector<double> ws;
            for (const auto& a : mu.atoms()) {
                if (!I.contains(a.x)) continue;
                double d2 = 0.0;
                for (int d = 0; d < mu.dim(); ++d) d2 += (a.x[d] - t[d]) * (a.x[d] - t[d]);
                if (d2 < r * r) ws.push_back(a.w);
            }
            sup = std::max(sup, pairwise_sum(ws) / std::pow(r, mu.alpha()));
        }
    }
    rep.sup_term = sup;
    rep.rho = rep.sup_term + rep.series_term;
    return rep;
}

namespace {

CarveResult carve_impl(const AtomicMeasure& mu, const GridFamily& g, const Cube& I,
                       const Point& shift, double a) {
    const Box base_plain = cube_box(g, I);
    Box base = base_plain;
    for (int d = 0; d < g.n; ++d) {
        base.lo[d] += shift[d];
        base.hi[d] += shift[d];
    }
    double m0 = mu.mass(base);
    if (!(a > 0.0 && a < m0)) throw DomainError("carve_subset: need 0 < a < mu(I)");

    const double c = mu.growth_constant() > 0 ? mu.growth_constant() : 1.0;
    const double target_side = std::pow(a / (2.0 * c), 1.0 / mu.alpha());
    int s_rel = 1;
    while (std::ldexp(cube_side(g, I), -s_rel) > target_side && s_rel < 50) ++s_rel;

    CarveResult res;
    res.base = base;
    res.scale = I.scale + s_rel;

    // bucket atoms into the scale-s sublattice of I (shifted back if needed)
    const double piece_side = std::ldexp(cube_side(g, I), -s_rel);
    struct Piece {
        std::array<std::int64_t, kMaxDim> key;
        Box box;
        double mass;
    };
    std::vector<Piece> pieces;
    {
        std::unordered_map<std::string, std::size_t> index;
        for (const auto& at : mu.atoms()) {
            if (!base.contains(at.x)) continue;
            std::array<std::int64_t, kMaxDim> key{{0, 0, 0}};
            Box pb;
            pb.n = g.n;
            pb.open = Openness::HalfOpen;
            for (int d = 0; d < g.n; ++d) {
                key[d] = static_cast<std::int64_t>(std::floor((at.x[d] - base.lo[d]) / piece_side));
                pb.lo[d] = base.lo[d] + piece_side * static_cast<double>(key[d]);
                pb.hi[d] = pb.lo[d] + piece_side;
            }
            std::string ks;
            for (int d = 0; d < g.n; ++d) ks += std::to_string(key[d]) + ",";
            auto it = index.find(ks);
            if (it == index.end()) {
                index.emplace(ks, pieces.size());
                pieces.push_back({key, pb, at.w});
            } else {
                pieces[it->second].mass += at.w;
            }
        }
    }
    std::sort(pieces.begin(), pieces.end(),
              [](const Piece& x, const Piece& y) { return x.key < y.key; });

    double m = m0;
    for (const auto& p : pieces) {
        if (m <= a) break;
        res.removed.push_back(p.box);
        m -= p.mass;
    }
    res.mass = mu.mass(base);
    {
        std::vector<double> removed_mass;
        for (const auto& rb : res.removed) removed_mass.push_back(mu.mass(rb));
        res.mass -= pairwise_sum(removed_mass);
    }
    res.feasible = (res.mass > a / 2.0 && res.mass <= a);
    return res;
}

}  // namespace

bool CarveResult::contains(const Point& x) const {
    if (!base.contains(x)) return false;
    for (const auto& r : removed)
        if (r.contains(x)) return false;
    return true;
}

CarveResult carve_subset(const AtomicMeasure& mu, const GridFamily& g, const Cube& I, double a) {
    return carve_impl(mu, g, I, Point{{0, 0, 0}}, a);
}

CarveResult carve_subset_box(const AtomicMeasure& mu, const GridFamily& g, const Cube& I,
                             const Point& shift, double a) {
    return carve_impl(mu, g, I, shift, a);
}

bool atom_grid_separation(const AtomicMeasure& mu, const GridFamily& g, int depth) {
    // fixed guard well above accumulated double rounding; a depth-relative
    // margin of 2^-(depth+4) is unsatisfiable once atoms outnumber 2^4
    const double margin = std::ldexp(g.base_side, -44);
    for (int grid = 0; grid < g.k; ++grid) {
        for (int s = 0; s <= depth; ++s) {
            const double side = std::ldexp(g.base_side, -s);
            for (const auto& a : mu.atoms()) {
                for (int d = 0; d < g.n; ++d) {
                    const double rel = (a.x[d] - g.offsets[static_cast<std::size_t>(grid)]) / side;
                    const double gap = std::abs(rel - std::round(rel)) * side;
                    if (gap <= margin) return false;
                }
            }
        }
    }
    return true;
}

ShellSeries shell_series_check(const AtomicMeasure& mu, const GridFamily& g, const Box& I, int M,
                               int samples, double delta) {
    (void)g;
    if (M < 2) throw DomainError("shell_series_check: M must be >= 2");
    ShellSeries out;
    const double side = I.side();
    std::vector<double> terms;
    double prev = 0.0;
    for (int m = 1; m <= M; ++m) {
        const double cur = mu.mass(dilate(I, m));
        terms.push_back(std::pow(static_cast<double>(m), -(mu.alpha() + delta)) * (cur - prev));
        prev = cur;
    }
    out.lhs = pairwise_sum(terms) / std::pow(side, mu.alpha());
    out.rhs = density(mu, I, M, samples, delta).rho;
    return out;
}

double boundary_shell_mass(const AtomicMeasure& mu, const GridFamily& g, const Cube& Q, int N0,
                           double theta, int r) {
    if (r <= N0) throw DomainError("boundary_shell_mass: need r > N0");
    // cubes I = Q and descendants down to relative depth N0
    std::vector<Cube> eyes{Q};
    {
        std::vector<Cube> level{Q};
        for (int d = 1; d <= N0; ++d) {
            std::vector<Cube> next;
            for (const Cube& c : level)
                for (const Cube& ch : children(g, c)) next.push_back(ch);
            eyes.insert(eyes.end(), next.begin(), next.end());
            level.swap(next);
        }
    }
    const int j_scale = Q.scale + r;
    std::vector<double> ws;
    for (const auto& at : mu.atoms()) {
        Cube J = cube_at(g, Q.grid, j_scale, at.x);
        J.open = Openness::Open;
        const Box jb = cube_box(g, J, Openness::Open);
        if (!jb.contains(at.x)) continue;  // atom on a grid boundary, excluded by openness
        bool qualifies = false;
        for (const Cube& I : eyes) {
            if (cube_side(g, I) < jb.side()) continue;
            const Box three = dilate(g, I, 3.0);
            const Box jparent = cube_box(g, parent(J));
            if (!box_contains(three, jparent)) continue;
            const Box ib = cube_box(g, I);
            const double ec = jb.side() / ib.side();
            const double inr = inner_boundary_distance(jb, ib) / jb.side();
            if (std::pow(ec, theta) * (1.0 + inr) <= 1.0) {
                qualifies = true;
                break;
            }
        }
        if (qualifies) ws.push_back(at.w);
    }
    return pairwise_sum(ws);
}

}  // namespace nhsparse
