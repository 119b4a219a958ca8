#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "nhsparse/squarefns.hpp"
#include "nhsparse/fixtures.hpp"

namespace nhtest {

using namespace nhsparse;

// Brute-force re-computation of the square functions: plain nested loops,
// coefficients evaluated atom by atom, families re-derived from the pair
// metrics, companion sets rebuilt from the written selection rules (with
// carve_subset as a primitive). No SquareContext caches, no square_fn.
struct Oracle {
    const AtomicMeasure& mu;
    const GridFamily& g;
    Cube q;
    std::vector<Cube> universe;
    double theta, alpha, delta;
    int m_max;
    double mu_q;
    double eps;

    Oracle(const Fixture& fx, const Cube& q_in, int depth, double theta_in, double delta_in,
           int m_max_in)
        : mu(fx.measure), g(fx.grids), q(q_in), theta(theta_in), alpha(fx.measure.alpha()),
          delta(delta_in), m_max(m_max_in) {
        universe = atom_cubes(mu, g, q, depth);
        mu_q = mu.mass(g, q);
        double minpos = 0.0;
        for (const Cube& c : universe) {
            const double m = mu.mass(g, c);
            if (m > 0.0 && (minpos == 0.0 || m < minpos)) minpos = m;
        }
        const double et = minpos > 0.0 ? minpos : 1.0;
        eps = 1.0 / ((1.0 + 1.0 / (et * et)) * (mu_q + 1.0));
    }

    double coef(const GridFunction& f, const Cube& I) const {
        const double mi = mu.mass(g, I);
        if (mi <= 0.0) return 0.0;
        const double mp = mu.mass(g, parent(I));
        const double on_cube = std::sqrt(mi) * (1.0 / mi - 1.0 / mp);
        const double on_ring = -std::sqrt(mi) / mp;
        const Box bi = cube_box(g, I);
        const Box bp = cube_box(g, parent(I));
        double acc = 0.0;
        for (std::size_t a = 0; a < f.size(); ++a) {
            const Point& x = mu.atoms()[a].x;
            if (bi.contains(x))
                acc += f[a] * on_cube * mu.atoms()[a].w;
            else if (bp.contains(x))
                acc += f[a] * on_ring * mu.atoms()[a].w;
        }
        return acc;
    }

    // partners of side 2^{rel} * side(anchor) in the hat-rdist band [m-1, m)
    std::vector<Cube> partners(const Cube& anchor, int rel, int m,
                               std::optional<int> k_band) const {
        std::vector<Cube> out;
        for (const Cube& c : universe) {
            if (c.scale != anchor.scale - rel) continue;
            const auto hat = pair_metrics(g, parent(c), parent(anchor), theta);
            if (!(hat.rdist >= m - 1 && hat.rdist < m)) continue;
            if (k_band && !(hat.inrdist >= *k_band - 1 && hat.inrdist < *k_band)) continue;
            out.push_back(c);
        }
        return out;
    }

    struct Set {
        Box base;
        std::vector<Box> removed;
        double mass = 0.0;
        bool contains(const Point& x) const {
            if (!base.contains(x)) return false;
            for (const auto& r : removed)
                if (r.contains(x)) return false;
            return true;
        }
    };

    Set aux_distant(const Cube& I, const Cube& J) const {
        const double a = mu.mass(g, I) * mu.mass(g, J) / mu_q;
        auto kids = children(g, J);
        std::sort(kids.begin(), kids.end(),
                  [](const Cube& x, const Cube& y) { return x.j < y.j; });
        const Cube* positive = nullptr;
        const Cube* zero = nullptr;
        for (const Cube& c : kids) {
            const double m = mu.mass(g, c);
            if (m > 0.0 && m <= a) return {cube_box(g, c), {}, m};
            if (m > 0.0 && !positive) positive = &c;
            if (m == 0.0 && !zero) zero = &c;
        }
        if (positive) {
            if (a > 0.0 && a < mu.mass(g, *positive)) {
                const CarveResult cr = carve_subset(mu, g, *positive, a);
                if (cr.feasible) return {cr.base, cr.removed, cr.mass};
            }
            if (zero) return {cube_box(g, *zero), {}, 0.0};
            return {cube_box(g, *positive), {}, mu.mass(g, *positive)};
        }
        return {cube_box(g, kids.front()), {}, 0.0};
    }

    Set aux_nested(const Cube& I, const Cube& J) const {
        const Box bi = cube_box(g, I);
        const Box bj = cube_box(g, J);
        Box target = bj;
        bool found = false;
        for (int dir = 0; dir < g.n && !found; ++dir) {
            for (double lam : {0.0, -1.0, 1.0}) {
                Box moved = bj;
                moved.lo[dir] += lam * bi.side();
                moved.hi[dir] += lam * bi.side();
                if (box_contains(bi, moved)) {
                    target = moved;
                    found = true;
                    break;
                }
            }
        }
        if (!found) {
            const double lj = bj.side();
            for (int d = 0; d < g.n; ++d) {
                const double clamped = std::clamp(bj.lo[d], bi.lo[d], bi.hi[d] - lj);
                const double k = std::round((clamped - bi.lo[d]) / lj);
                target.lo[d] = bi.lo[d] + k * lj;
                target.hi[d] = target.lo[d] + lj;
            }
        }
        target.open = Openness::HalfOpen;
        const double cap = mu.mass(g, J);
        const double mt = mu.mass(target);
        if (mt <= cap) return {target, {}, mt};
        Point shift{{0, 0, 0}};
        for (int d = 0; d < g.n; ++d) shift[d] = target.lo[d] - bj.lo[d];
        const CarveResult cr = carve_subset_box(mu, g, J, shift, cap);
        return {cr.base, cr.removed, cr.mass};
    }

    Set companion(const Cube& I, int e) const {
        Box moved = cube_box(g, I);
        const double shift = (std::ldexp(1.0, e) + 1.0) * moved.side();
        moved.lo[0] += shift;
        moved.hi[0] += shift;
        moved.open = Openness::HalfOpen;
        const double cap = mu.mass(g, I);
        const double mt = mu.mass(moved);
        if (mt <= cap) return {moved, {}, mt};
        const CarveResult cr = carve_subset_box(mu, g, I, Point{{shift, 0, 0}}, cap);
        return {cr.base, cr.removed, cr.mass};
    }

    GridFunction square(const GridFunction& f, int j, int sign, int e) const {
        GridFunction sq(mu.atoms().size(), 0.0);
        if (j == 1 && sign == +1) {
            for (const Cube& I : universe) {
                const double c = coef(f, I);
                if (c == 0.0) continue;
                for (int m = 2; m <= m_max; ++m) {
                    for (const Cube& J : partners(I, -e, m, std::nullopt)) {
                        const double mj = mu.mass(g, J);
                        if (mj <= 0.0) continue;
                        const Set s = aux_distant(I, J);
                        const double w = c * c / std::pow(cube_side(g, I), alpha) *
                                         std::pow(double(m), -(alpha + delta)) * mj /
                                         (s.mass + eps);
                        for (std::size_t a = 0; a < sq.size(); ++a)
                            if (s.contains(mu.atoms()[a].x)) sq[a] += w;
                    }
                }
            }
        } else if (j == 1 && sign == -1) {
            for (const Cube& J : universe) {
                const double c = coef(f, J);
                if (c == 0.0) continue;
                for (int m = 2; m <= m_max; ++m) {
                    for (const Cube& I : partners(J, e, m, std::nullopt)) {
                        const double mi = mu.mass(g, I);
                        if (mi <= 0.0) continue;
                        const Set s = aux_distant(I, J);
                        const double w =
                            c * c /
                            std::pow(std::ldexp(1.0, e) * cube_side(g, J), alpha) *
                            std::pow(double(m), -(alpha + delta)) * mi / (s.mass + eps);
                        for (std::size_t a = 0; a < sq.size(); ++a)
                            if (s.contains(mu.atoms()[a].x)) sq[a] += w;
                    }
                }
            }
        } else if (j == 2 && sign == +1) {
            for (const Cube& I : universe) {
                const double c = coef(f, I);
                if (c == 0.0) continue;
                const double w = c * c * mu.mass(g, I) /
                                 std::pow(cube_side(g, I), 2.0 * alpha);
                const Box three = dilate(g, I, 3.0);
                for (std::size_t a = 0; a < sq.size(); ++a)
                    if (three.contains(mu.atoms()[a].x)) sq[a] += w;
            }
        } else if (j == 2 && sign == -1) {
            for (const Cube& J : universe) {
                const double c = coef(f, J);
                const double mj = mu.mass(g, J);
                if (c == 0.0 || mj <= 0.0) continue;
                const double rho = density(mu, dilate(g, J, std::ldexp(1.0, e)), 64, 8, delta).rho;
                const double w = rho * c * c / mj;
                const Box bj = cube_box(g, J);
                for (std::size_t a = 0; a < sq.size(); ++a)
                    if (bj.contains(mu.atoms()[a].x)) sq[a] += w;
            }
        } else if (j == 3 && sign == +1) {
            const int k_lo = static_cast<int>(std::ceil(std::pow(2.0, theta * e)));
            const int k_hi = static_cast<int>(std::floor(std::ldexp(1.0, e)));
            for (const Cube& I : universe) {
                const double c = coef(f, I);
                if (c == 0.0) continue;
                for (int k = k_lo; k <= k_hi; ++k) {
                    for (const Cube& J : partners(I, -e, 1, k)) {
                        double rsum = 0.0;
                        for (const Cube& R : {I, parent(I)}) {
                            const double mr = mu.mass(g, R);
                            if (mr <= 0.0) continue;
                            rsum += mu.mass(intersect_box(cube_box(g, R), cube_box(g, J))) / mr;
                        }
                        if (rsum == 0.0) continue;
                        const Set s = aux_nested(I, J);
                        const double w = c * c * rsum / (s.mass + eps);
                        for (std::size_t a = 0; a < sq.size(); ++a)
                            if (s.contains(mu.atoms()[a].x)) sq[a] += w;
                    }
                }
            }
        } else if (j == 3 && sign == -1) {
            for (const Cube& I : universe) {
                const double c = coef(f, I);
                if (c == 0.0) continue;
                const Set s = companion(I, e);
                const double w = c * c / (s.mass + eps);
                for (std::size_t a = 0; a < sq.size(); ++a)
                    if (s.contains(mu.atoms()[a].x)) sq[a] += w;
            }
        }
        for (double& v : sq) v = std::sqrt(std::max(0.0, v));
        return sq;
    }
};

}  // namespace nhtest
