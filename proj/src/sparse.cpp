#include "nhsparse/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace nhsparse {

void StoppingConfig::validate(int k, double alpha) const {
    if (!(c_stop > 4.0)) throw ConfigError("StoppingConfig: C must exceed 4");
    const double t = tau(k);
    if (!(t > 0.0 && t < std::pow(2.0, -alpha * q) && std::pow(2.0, -alpha * q) < 1.0))
        throw ConfigError("StoppingConfig: need 0 < tau < 2^{-alpha q} < 1");
    if (n_depth < 1) throw ConfigError("StoppingConfig: depth must be positive");
}

std::vector<SelectedCube> SparseFamily::all() const {
    std::vector<SelectedCube> out;
    // ancestor R at side 2^i side(Q') carries generation -i
    for (const Cube& c : chain)
        out.push_back({c, -(q_prime.scale - c.scale), Provenance::Ancestor});
    for (const auto& lvl : levels) out.insert(out.end(), lvl.begin(), lvl.end());
    return out;
}

std::size_t SparseFamily::size() const {
    std::size_t s = chain.size();
    for (const auto& lvl : levels) s += lvl.size();
    return s;
}

namespace {

double cube_average(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                    const Cube& c) {
    const double m = mu.mass(g, c);
    if (m <= 0.0) return 0.0;
    const Box b = cube_box(g, c);
    std::vector<double> acc;
    const auto& atoms = mu.atoms();
    for (std::size_t i = 0; i < atoms.size(); ++i)
        if (b.contains(atoms[i].x)) acc.push_back(f[i] * atoms[i].w);
    return pairwise_sum(acc) / m;
}

Box half_box(const GridFamily& g, const Cube& c) { return dilate(g, c, 0.5); }

struct CubeLess {
    bool operator()(const Cube& a, const Cube& b) const {
        return std::tie(a.grid, a.scale, a.j) < std::tie(b.grid, b.scale, b.j);
    }
};

}  // namespace

SparseFamily build_family(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                          const GridFunction& gfun, const Cube& q_prime, const Cube& q,
                          const StoppingConfig& cfg) {
    cfg.validate(g.k, mu.alpha());
    for (double v : f)
        if (v < 0.0) throw DomainError("build_family: f must be non-negative");
    for (double v : gfun)
        if (v < 0.0) throw DomainError("build_family: g must be non-negative");
    if (!cube_contains(g, q, q_prime) || q.grid != q_prime.grid ||
        q_prime.scale - q.scale != cfg.q)
        throw ConfigError("build_family: Q must be the 2^q-fold ancestor of Q'");
    {
        const Box hb = half_box(g, q_prime);
        const auto& atoms = mu.atoms();
        for (std::size_t i = 0; i < atoms.size(); ++i)
            if ((f[i] != 0.0 || gfun[i] != 0.0) && !hb.contains(atoms[i].x))
                throw DomainError("build_family: support must sit inside 2^{-1}Q'");
    }

    SparseFamily fam;
    fam.q_prime = q_prime;
    fam.q = q;
    for (Cube r = parent(q_prime); ; r = parent(r)) {
        fam.chain.push_back(r);
        if (r.scale == q.scale) break;
    }
    std::reverse(fam.chain.begin(), fam.chain.end());

    // per-grid, per-scale buckets of atom-carrying cubes
    const int max_scale = q_prime.scale + cfg.n_depth;
    std::vector<std::vector<std::vector<Cube>>> buckets(static_cast<std::size_t>(g.k));
    for (int grid = 0; grid < g.k; ++grid) {
        auto& per_scale = buckets[static_cast<std::size_t>(grid)];
        per_scale.resize(static_cast<std::size_t>(max_scale - q_prime.scale) + 1);
        for (int s = q_prime.scale + 1; s <= max_scale; ++s) {
            std::unordered_set<Cube, CubeHash> seen;
            std::vector<Cube>& lvl = per_scale[static_cast<std::size_t>(s - q_prime.scale)];
            for (const auto& a : mu.atoms()) {
                Cube c = cube_at(g, grid, s, a.x);
                if (seen.insert(c).second) lvl.push_back(c);
            }
            std::sort(lvl.begin(), lvl.end(), CubeLess{});
        }
    }

    std::unordered_set<Cube, CubeHash> in_family;
    in_family.insert(q_prime);
    fam.levels.push_back({SelectedCube{q_prime, 0, Provenance::Root}});
    fam.coefficients[cube_to_string(q_prime, g.n)] = 1.0;
    for (const Cube& r : fam.chain) fam.coefficients[cube_to_string(r, g.n)] = 1.0;

    int level = 0;
    while (!fam.levels.back().empty() && level < cfg.n_depth) {
        ++level;
        std::vector<SelectedCube> next;
        for (const SelectedCube& sc : fam.levels[static_cast<std::size_t>(level - 1)]) {
            const Cube& I = sc.cube;
            const Box hb = half_box(g, I);
            const double af = cube_average(mu, g, f, I);
            const double ag = cube_average(mu, g, gfun, I);
            for (int grid = 0; grid < g.k; ++grid) {
                std::vector<Cube> picked;
                for (int s = std::max(I.scale + 1, q_prime.scale + 1); s <= max_scale; ++s) {
                    for (const Cube& J :
                         buckets[static_cast<std::size_t>(grid)]
                                [static_cast<std::size_t>(s - q_prime.scale)]) {
                        if (!box_contains(hb, cube_box(g, parent(J)))) continue;
                        bool covered = false;
                        for (const Cube& P : picked)
                            if (cube_contains(g, P, J)) {
                                covered = true;
                                break;
                            }
                        if (covered) continue;
                        const double fj = cube_average(mu, g, f, J);
                        const double gj = cube_average(mu, g, gfun, J);
                        const bool f_hit = fj > cfg.c_stop * af;
                        const bool g_hit = gj > cfg.c_stop * ag;
                        if (!f_hit && !g_hit) continue;
                        picked.push_back(J);
                        if (in_family.insert(J).second)
                            next.push_back({J, level,
                                            f_hit ? Provenance::FCondition : Provenance::GCondition});
                        for (const Cube& c1 : children(g, J)) {
                            if (mu.mass(g, c1) <= 0.0) continue;
                            if (in_family.insert(c1).second)
                                next.push_back({c1, level, Provenance::Offspring1});
                            for (const Cube& c2 : children(g, c1)) {
                                if (mu.mass(g, c2) <= 0.0) continue;
                                if (in_family.insert(c2).second)
                                    next.push_back({c2, level, Provenance::Offspring2});
                            }
                        }
                    }
                }
            }
        }
        if (next.empty()) break;
        fam.levels.push_back(next);
        for (const SelectedCube& sc : next) fam.coefficients[cube_to_string(sc.cube, g.n)] = 1.0;
    }
    return fam;
}

PackingReport packing_check(const AtomicMeasure& mu, const GridFamily& g,
                            const SparseFamily& family) {
    PackingReport rep;
    const auto all = family.all();
    for (const auto& sc : all) {
        if (sc.level >= 0 && mu.mass(g, sc.cube) <= 0.0)
            throw DomainError("packing_check: selected cube with zero mass " +
                              cube_to_string(sc.cube, g.n));
    }
    const ExtendedMeasure ext(mu, g, family.q_prime, mu.growth_constant());
    for (const auto& S : all) {
        const bool on_chain = S.level < 0;
        // per-generation accounting: a selection round's own offspring tile
        // their parent exactly, so only later rounds count against a cube
        std::vector<double> parts;
        for (const auto& T : all) {
            if (T.cube == S.cube) continue;
            if (T.level <= S.level) continue;
            if (!cube_contains(g, S.cube, T.cube)) continue;
            parts.push_back(on_chain ? ext.mass(T.cube) : mu.mass(g, T.cube));
        }
        const double denom = on_chain ? ext.mass(S.cube) : mu.mass(g, S.cube);
        const double ratio = pairwise_sum(parts) / denom;
        if (on_chain) {
            if (ratio > rep.worst_ratio_chain) {
                rep.worst_ratio_chain = ratio;
                if (ratio >= 1.0) rep.offender = S.cube;
            }
        } else if (ratio > rep.worst_ratio_levels) {
            rep.worst_ratio_levels = ratio;
            if (ratio >= 1.0) rep.offender = S.cube;
        }
    }
    rep.sparse = rep.worst_ratio_levels < 1.0 && rep.worst_ratio_chain < 1.0;
    return rep;
}

namespace {

double form_impl(const AtomicMeasure& mu, const GridFamily& g, const SparseFamily& family,
                 const GridFunction& f, const GridFunction& gfun, bool extended) {
    std::optional<ExtendedMeasure> ext;
    if (extended) ext.emplace(mu, g, family.q_prime, mu.growth_constant());
    GridFunction fa(f.size()), ga(gfun.size());
    for (std::size_t i = 0; i < f.size(); ++i) fa[i] = std::abs(f[i]);
    for (std::size_t i = 0; i < gfun.size(); ++i) ga[i] = std::abs(gfun[i]);
    std::vector<double> terms;
    for (const auto& sc : family.all()) {
        const std::string key = cube_to_string(sc.cube, g.n);
        auto it = family.coefficients.find(key);
        const double a_s = it == family.coefficients.end() ? 1.0 : it->second;
        double m, avg_f, avg_g;
        if (extended && sc.level < 0) {
            m = ext->mass(sc.cube);
            avg_f = ext->average(fa, sc.cube);
            avg_g = ext->average(ga, sc.cube);
        } else {
            m = mu.mass(g, sc.cube);
            avg_f = cube_average(mu, g, fa, sc.cube);
            avg_g = cube_average(mu, g, ga, sc.cube);
        }
        if (m <= 0.0) continue;
        terms.push_back(a_s * avg_f * avg_g * m);
    }
    return pairwise_sum(terms);
}

}  // namespace

double sparse_form(const AtomicMeasure& mu, const GridFamily& g, const SparseFamily& family,
                   const GridFunction& f, const GridFunction& gfun) {
    return form_impl(mu, g, family, f, gfun, false);
}

double sparse_form_extended(const AtomicMeasure& mu, const GridFamily& g,
                            const SparseFamily& family, const GridFunction& f,
                            const GridFunction& gfun) {
    return form_impl(mu, g, family, f, gfun, true);
}

std::vector<Cube> unselected(const GridFamily& g, const SparseFamily& family, const Cube& S,
                             const std::vector<Cube>& universe) {
    const auto all = family.all();
    bool found = false;
    for (const auto& sc : all)
        if (sc.cube == S) found = true;
    if (!found) throw DomainError("unselected: cube is not part of the family");

    auto minimal_selected = [&](const Cube& I) -> std::optional<Cube> {
        std::optional<Cube> best;
        for (const auto& sc : all) {
            if (!cube_contains(g, sc.cube, parent(I))) continue;
            if (!best) {
                best = sc.cube;
                continue;
            }
            const auto key = [&](const Cube& c) {
                return std::make_tuple(-c.scale, c.grid, c.j);
            };
            if (key(sc.cube) < key(*best)) best = sc.cube;
        }
        return best;
    };

    std::vector<Cube> out;
    for (const Cube& I : universe) {
        auto m = minimal_selected(I);
        if (m && *m == S) out.push_back(I);
    }
    return out;
}

CZDecomposition cz_decompose(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                             double lambda, double a, const Cube& root) {
    if (!(lambda > 0.0) || !(a > 0.0)) throw DomainError("cz_decompose: lambda, a must be positive");
    CZDecomposition out;
    out.lambda = lambda;
    out.a = a;
    const double threshold = lambda / std::sqrt(a);
    const int max_scale = root.scale + resolving_depth(mu, g, root) + 1;

    auto integral_abs = [&](const Cube& c) {
        const Box b = cube_box(g, c);
        std::vector<double> acc;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (b.contains(mu.atoms()[i].x)) acc.push_back(std::abs(f[i]) * mu.atoms()[i].w);
        return pairwise_sum(acc);
    };

    std::vector<Cube> stack{root};
    while (!stack.empty()) {
        Cube c = stack.back();
        stack.pop_back();
        const double m3 = mu.mass(dilate(g, c, 3.0));
        const double integ = integral_abs(c);
        if (m3 > 0.0 && integ / m3 > threshold) {
            out.stopping_cubes.push_back(c);
            continue;
        }
        if (c.scale >= max_scale || integ == 0.0) continue;
        auto kids = children(g, c);
        std::sort(kids.begin(), kids.end(), CubeLess{});
        for (auto it = kids.rbegin(); it != kids.rend(); ++it)
            if (mu.mass(g, *it) > 0.0) stack.push_back(*it);
    }
    std::sort(out.stopping_cubes.begin(), out.stopping_cubes.end(), CubeLess{});

    out.good = f;
    const auto& atoms = mu.atoms();
    for (const Cube& P : out.stopping_cubes) {
        const Box bp = cube_box(g, P);
        const Box bhat = cube_box(g, parent(P));
        const double mhat = mu.mass(g, parent(P));
        std::vector<double> acc;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (bp.contains(atoms[i].x)) acc.push_back(f[i] * atoms[i].w);
        const double avg = pairwise_sum(acc) / mhat;
        GridFunction b(f.size(), 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (bp.contains(atoms[i].x)) b[i] += f[i];
            if (bhat.contains(atoms[i].x)) b[i] -= avg;
        }
        out.bad_parts.push_back(b);
        for (std::size_t i = 0; i < f.size(); ++i) out.good[i] -= b[i];
    }

    std::vector<double> emass;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        bool in_e = false;
        for (const Cube& P : out.stopping_cubes)
            if (dilate(g, P, 3.0).contains(atoms[i].x)) {
                in_e = true;
                break;
            }
        if (in_e) emass.push_back(atoms[i].w);
    }
    out.exceptional_mass = pairwise_sum(emass);
    for (double v : out.good) out.good_sup = std::max(out.good_sup, std::abs(v));
    return out;
}

Cube enclosing_half_support_cube(const AtomicMeasure& mu, const GridFamily& g, int grid) {
    const auto& atoms = mu.atoms();
    if (atoms.empty()) throw DomainError("enclosing_half_support_cube: empty measure");
    for (int s = 16; s >= -48; --s) {
        Cube c = cube_at(g, grid, s, atoms[0].x);
        const Box hb = dilate(g, c, 0.5);
        bool ok = true;
        for (const auto& a : atoms)
            if (!hb.contains(a.x)) {
                ok = false;
                break;
            }
        if (ok) return c;
    }
    throw DomainError("enclosing_half_support_cube: support too spread out");
}

DominationReport domination_report(const OperatorHandle& op, const AtomicMeasure& mu,
                                   const GridFamily& g, const GridFunction& f,
                                   const GridFunction& gfun, const DominationConfig& cfg) {
    if (!op.truncation() || !(op.truncation()->gamma > 0.0))
        throw DomainError("domination_report: operator must be truncated");
    DominationReport rep;
    rep.dual_pair_value = op.dual_pair(f, gfun);

    const Cube q_prime = enclosing_half_support_cube(mu, g, 0);
    Cube q = q_prime;
    for (int i = 0; i < cfg.stopping.q; ++i) q = parent(q);

    auto positive_parts = [](const GridFunction& v) {
        GridFunction pos(v.size(), 0.0), neg(v.size(), 0.0);
        bool has_neg = false;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] >= 0.0)
                pos[i] = v[i];
            else {
                neg[i] = -v[i];
                has_neg = true;
            }
        }
        std::vector<GridFunction> parts{pos};
        if (has_neg) parts.push_back(neg);
        return parts;
    };

    double sparse_total = 0.0;
    std::size_t family_size = 0;
    double worst_lvl = 0.0, worst_chain = 0.0;
    for (const auto& fp : positive_parts(f)) {
        for (const auto& gp : positive_parts(gfun)) {
            SparseFamily fam = build_family(mu, g, fp, gp, q_prime, q, cfg.stopping);
            if (cfg.policy == CoefficientPolicy::RhoWeighted) {
                for (const auto& sc : fam.all()) {
                    const double r =
                        density(mu, cube_box(g, sc.cube), cfg.density_truncation,
                                cfg.density_samples, op.kernel().delta)
                            .rho;
                    fam.coefficients[cube_to_string(sc.cube, g.n)] = (1.0 + r) * (1.0 + r);
                }
            }
            sparse_total += sparse_form(mu, g, fam, fp, gp);
            family_size += fam.size();
            const PackingReport pr = packing_check(mu, g, fam);
            worst_lvl = std::max(worst_lvl, pr.worst_ratio_levels);
            worst_chain = std::max(worst_chain, pr.worst_ratio_chain);
        }
    }
    rep.sparse_value = sparse_total;
    rep.family_size = family_size;
    rep.worst_packing_levels = worst_lvl;
    rep.worst_packing_chain = worst_chain;
    if (rep.sparse_value > 0.0) {
        rep.ratio = std::abs(rep.dual_pair_value) / rep.sparse_value;
    } else if (rep.dual_pair_value != 0.0) {
        rep.ratio_infinite = true;
        rep.ratio = std::numeric_limits<double>::infinity();
    }
    return rep;
}

}  // namespace nhsparse
