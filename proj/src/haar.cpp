#include "nhsparse/haar.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace nhsparse {

double inner(const AtomicMeasure& mu, const GridFunction& f, const GridFunction& g) {
    const auto& atoms = mu.atoms();
    std::vector<double> terms(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) terms[i] = f[i] * g[i] * atoms[i].w;
    return pairwise_sum(terms);
}

double norm_sq(const AtomicMeasure& mu, const GridFunction& f) { return inner(mu, f, f); }

double l1_norm(const AtomicMeasure& mu, const GridFunction& f) {
    const auto& atoms = mu.atoms();
    std::vector<double> terms(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) terms[i] = std::abs(f[i]) * atoms[i].w;
    return pairwise_sum(terms);
}

HaarFn haar(const AtomicMeasure& mu, const GridFamily& g, const Cube& I) {
    HaarFn h;
    h.cube = I;
    const double mi = mu.mass(g, I);
    if (mi <= 0.0) return h;
    const double mp = mu.mass(g, parent(I));
    const double root = std::sqrt(mi);
    h.zero = false;
    h.value_on_cube = root * (1.0 / mi - 1.0 / mp);
    h.value_on_ring = -root / mp;
    h.norm_sq = 1.0 - mi / mp;
    return h;
}

double haar_eval(const HaarFn& h, const GridFamily& g, const Point& x) {
    if (h.zero) return 0.0;
    const Box bi = cube_box(g, h.cube);
    const Box bp = cube_box(g, parent(h.cube));
    if (bi.contains(x)) return h.value_on_cube;
    if (bp.contains(x)) return h.value_on_ring;
    return 0.0;
}

GridFunction haar_values(const AtomicMeasure& mu, const GridFamily& g, const HaarFn& h) {
    GridFunction out(mu.atoms().size(), 0.0);
    if (h.zero) return out;
    const Box bi = cube_box(g, h.cube);
    const Box bp = cube_box(g, parent(h.cube));
    const auto& atoms = mu.atoms();
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (bi.contains(atoms[i].x))
            out[i] = h.value_on_cube;
        else if (bp.contains(atoms[i].x))
            out[i] = h.value_on_ring;
    }
    return out;
}

ModifiedHaar modified_haar(const AtomicMeasure& mu, const GridFamily& g, const Cube& I,
                           const Cube& J, const Box& Q) {
    ModifiedHaar h;
    h.cube = I;
    h.q = Q;
    const double mi = mu.mass(g, I);
    if (mi <= 0.0) return h;
    const double mp = mu.mass(g, parent(I));
    const Point cj = cube_box(g, J).center();
    const Box bi = cube_box(g, I);
    const Box bp = cube_box(g, parent(I));
    const double ind_i = bi.contains(cj) ? 1.0 : 0.0;
    const double ind_p = bp.contains(cj) ? 1.0 : 0.0;
    h.value = std::sqrt(mi) * (ind_i / mi - ind_p / mp);
    h.zero = false;
    return h;
}

GridFunction modified_haar_values(const AtomicMeasure& mu, const ModifiedHaar& h) {
    GridFunction out(mu.atoms().size(), 0.0);
    if (h.zero || h.value == 0.0) return out;
    const auto& atoms = mu.atoms();
    for (std::size_t i = 0; i < atoms.size(); ++i)
        if (h.q.contains(atoms[i].x)) out[i] = h.value;
    return out;
}

double haar_coefficient(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                        const Cube& I) {
    const double mi = mu.mass(g, I);
    if (mi <= 0.0) return 0.0;
    const double mp = mu.mass(g, parent(I));
    const Box bi = cube_box(g, I);
    const Box bp = cube_box(g, parent(I));
    const auto& atoms = mu.atoms();
    std::vector<double> in_i, in_p;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (bi.contains(atoms[i].x)) in_i.push_back(f[i] * atoms[i].w);
        if (bp.contains(atoms[i].x)) in_p.push_back(f[i] * atoms[i].w);
    }
    return std::sqrt(mi) * (pairwise_sum(in_i) / mi - pairwise_sum(in_p) / mp);
}

CoefficientMap analyze(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                       const std::vector<Cube>& cubes) {
    CoefficientMap cm;
    for (const Cube& c : cubes) {
        if (mu.mass(g, c) <= 0.0) continue;
        cm.entries[{c.grid, c.scale, c.j}] = haar_coefficient(mu, g, f, c);
    }
    return cm;
}

std::vector<Cube> atom_cubes(const AtomicMeasure& mu, const GridFamily& g, const Cube& Q,
                             int depth) {
    std::vector<Cube> out;
    const Box qbox = cube_box(g, Q);
    for (int rel = 1; rel <= depth; ++rel) {
        std::unordered_set<Cube, CubeHash> seen;
        std::vector<Cube> level;
        for (const auto& a : mu.atoms()) {
            if (!qbox.contains(a.x)) continue;
            Cube c = cube_at(g, Q.grid, Q.scale + rel, a.x);
            if (!seen.insert(c).second) continue;
            if (!cube_contains(g, Q, parent(c))) continue;
            level.push_back(c);
        }
        std::sort(level.begin(), level.end(), [](const Cube& a, const Cube& b) {
            return std::tie(a.scale, a.j) < std::tie(b.scale, b.j);
        });
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

int resolving_depth(const AtomicMeasure& mu, const GridFamily& g, const Cube& Q, int max_depth) {
    for (int N = 1; N <= max_depth; ++N) {
        std::unordered_set<Cube, CubeHash> seen;
        bool ok = true;
        for (const auto& a : mu.atoms()) {
            Cube c = cube_at(g, Q.grid, Q.scale + N, a.x);
            if (!seen.insert(c).second) {
                ok = false;
                break;
            }
        }
        if (ok) return N;
    }
    return max_depth;
}

Projection project(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                   const Cube& Q, int N) {
    const Box qbox = cube_box(g, Q);
    for (std::size_t i = 0; i < mu.atoms().size(); ++i)
        if (f[i] != 0.0 && !qbox.contains(mu.atoms()[i].x))
            throw DomainError("project: f not supported inside Q");

    Projection out;
    out.p.assign(f.size(), 0.0);
    out.e.assign(f.size(), 0.0);
    out.d.assign(f.size(), 0.0);

    const auto cubes = atom_cubes(mu, g, Q, N);
    for (const Cube& I : cubes) {
        const double coef = haar_coefficient(mu, g, f, I);
        if (coef == 0.0) continue;
        const HaarFn h = haar(mu, g, I);
        const Box bi = cube_box(g, I);
        const Box bp = cube_box(g, parent(I));
        for (std::size_t i = 0; i < f.size(); ++i) {
            const Point& x = mu.atoms()[i].x;
            if (bi.contains(x))
                out.p[i] += coef * h.value_on_cube;
            else if (bp.contains(x))
                out.p[i] += coef * h.value_on_ring;
        }
    }
    const double mq = mu.mass(g, Q);
    if (mq > 0.0) {
        std::vector<double> in_q;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (qbox.contains(mu.atoms()[i].x)) in_q.push_back(f[i] * mu.atoms()[i].w);
        const double avg = pairwise_sum(in_q) / mq;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (qbox.contains(mu.atoms()[i].x)) out.e[i] = avg;
    }
    for (std::size_t i = 0; i < f.size(); ++i) out.d[i] = f[i] - out.p[i] - out.e[i];
    out.d_norm = std::sqrt(norm_sq(mu, out.d));
    return out;
}

TelescopePair telescope(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                        const Cube& R) {
    TelescopePair tp;
    tp.lhs.assign(f.size(), 0.0);
    tp.rhs.assign(f.size(), 0.0);
    const auto kids = children(g, R);
    for (const Cube& I : kids) {
        const double coef = haar_coefficient(mu, g, f, I);
        const HaarFn h = haar(mu, g, I);
        if (!h.zero && coef != 0.0) {
            const Box bi = cube_box(g, I);
            const Box bp = cube_box(g, R);
            for (std::size_t i = 0; i < f.size(); ++i) {
                const Point& x = mu.atoms()[i].x;
                if (bi.contains(x))
                    tp.lhs[i] += coef * h.value_on_cube;
                else if (bp.contains(x))
                    tp.lhs[i] += coef * h.value_on_ring;
            }
        }
        const double mi = mu.mass(g, I);
        if (mi > 0.0) {
            const Box bi = cube_box(g, I);
            std::vector<double> acc;
            for (std::size_t i = 0; i < f.size(); ++i)
                if (bi.contains(mu.atoms()[i].x)) acc.push_back(f[i] * mu.atoms()[i].w);
            const double avg = pairwise_sum(acc) / mi;
            for (std::size_t i = 0; i < f.size(); ++i)
                if (bi.contains(mu.atoms()[i].x)) tp.rhs[i] += avg;
        }
    }
    const double mr = mu.mass(g, R);
    if (mr > 0.0) {
        const Box br = cube_box(g, R);
        std::vector<double> acc;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (br.contains(mu.atoms()[i].x)) acc.push_back(f[i] * mu.atoms()[i].w);
        const double avg = pairwise_sum(acc) / mr;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (br.contains(mu.atoms()[i].x)) tp.rhs[i] -= avg;
    }
    return tp;
}

TelescopePair telescope_modified(const AtomicMeasure& mu, const GridFamily& g,
                                 const GridFunction& f, const Cube& R, const Cube& J,
                                 const Box& Q) {
    TelescopePair tp;
    tp.lhs.assign(f.size(), 0.0);
    tp.rhs.assign(f.size(), 0.0);
    const Cube jhat = parent(J);
    const Point cj = cube_box(g, jhat).center();
    for (const Cube& I : children(g, R)) {
        const double coef = haar_coefficient(mu, g, f, I);
        const ModifiedHaar h = modified_haar(mu, g, I, jhat, Q);
        if (!h.zero && coef != 0.0 && h.value != 0.0) {
            for (std::size_t i = 0; i < f.size(); ++i)
                if (Q.contains(mu.atoms()[i].x)) tp.lhs[i] += coef * h.value;
        }
        const double mi = mu.mass(g, I);
        if (mi > 0.0 && cube_box(g, I).contains(cj)) {
            const Box bi = cube_box(g, I);
            std::vector<double> acc;
            for (std::size_t i = 0; i < f.size(); ++i)
                if (bi.contains(mu.atoms()[i].x)) acc.push_back(f[i] * mu.atoms()[i].w);
            const double avg = pairwise_sum(acc) / mi;
            for (std::size_t i = 0; i < f.size(); ++i)
                if (Q.contains(mu.atoms()[i].x)) tp.rhs[i] += avg;
        }
    }
    const double mr = mu.mass(g, R);
    if (mr > 0.0 && cube_box(g, R).contains(cj)) {
        const Box br = cube_box(g, R);
        std::vector<double> acc;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (br.contains(mu.atoms()[i].x)) acc.push_back(f[i] * mu.atoms()[i].w);
        const double avg = pairwise_sum(acc) / mr;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (Q.contains(mu.atoms()[i].x)) tp.rhs[i] -= avg;
    }
    return tp;
}

PlancherelReport plancherel(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                            const Cube& Q, int depth) {
    PlancherelReport rep;
    const int N = depth > 0 ? depth : resolving_depth(mu, g, Q);
    std::vector<double> energies;
    for (const Cube& I : atom_cubes(mu, g, Q, N)) {
        const double c = haar_coefficient(mu, g, f, I);
        energies.push_back(c * c);
    }
    rep.coef_energy = pairwise_sum(energies);
    rep.function_norm_sq = norm_sq(mu, f);
    rep.ratio = rep.function_norm_sq > 0.0 ? rep.coef_energy / rep.function_norm_sq : 0.0;
    return rep;
}

}  // namespace nhsparse
