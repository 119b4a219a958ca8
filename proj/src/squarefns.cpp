#include "nhsparse/squarefns.hpp"

#include <algorithm>
#include <cmath>

namespace nhsparse {

namespace {

std::string pair_key(const GridFamily& g, const Cube& a, const Cube& b, const char* tag) {
    return std::string(tag) + cube_to_string(a, g.n) + "|" + cube_to_string(b, g.n);
}

AuxSet from_carve(const CarveResult& cr) {
    AuxSet s;
    s.base = cr.base;
    s.removed = cr.removed;
    s.mass = cr.mass;
    s.carved = true;
    s.flagged = !cr.feasible;
    return s;
}

AuxSet whole_box(const Box& b, double mass) {
    AuxSet s;
    s.base = b;
    s.mass = mass;
    return s;
}

}  // namespace

SquareContext::SquareContext(const AtomicMeasure& mu, const GridFamily& g, int grid,
                             const Cube& Q, int depth)
    : mu_(&mu), g_(&g), grid_(grid), q_(Q) {
    depth_ = depth > 0 ? depth : resolving_depth(mu, g, Q);
    Cube root = Q;
    root.grid = grid;
    universe_ = atom_cubes(mu, g, root, depth_);
    mu_q_ = mu.mass(g, root);
    min_positive_mass_ = 0.0;
    for (const Cube& c : universe_) {
        const double m = mu.mass(g, c);
        if (m > 0.0 && (min_positive_mass_ == 0.0 || m < min_positive_mass_))
            min_positive_mass_ = m;
    }
    const double et = min_positive_mass_ > 0.0 ? min_positive_mass_ : 1.0;
    epsilon_ = 1.0 / ((1.0 + 1.0 / (et * et)) * (mu_q_ + 1.0));
}

const std::vector<Cube>& SquareContext::family(const Cube& J, int e, int m,
                                               std::optional<int> k_band, double theta) const {
    const auto key = std::make_tuple(cube_to_string(J, g_->n), e, m, k_band ? *k_band : -1);
    auto it = family_cache_.find(key);
    if (it != family_cache_.end()) return it->second;
    auto fam = cube_family(*g_, J, e, m, k_band, universe_, theta);
    return family_cache_.emplace(key, std::move(fam)).first->second;
}

AuxSet SquareContext::build_aux_distant(const Cube& I, const Cube& J) const {
    const double a = mu_->mass(*g_, I) * mu_->mass(*g_, J) / mu_q_;
    auto kids = children(*g_, J);
    std::sort(kids.begin(), kids.end(), [](const Cube& x, const Cube& y) { return x.j < y.j; });
    const Cube* first_positive = nullptr;
    const Cube* first_zero = nullptr;
    for (const Cube& c : kids) {
        const double m = mu_->mass(*g_, c);
        if (m > 0.0 && m <= a) return whole_box(cube_box(*g_, c), m);
        if (m > 0.0 && !first_positive) first_positive = &c;
        if (m == 0.0 && !first_zero) first_zero = &c;
    }
    if (first_positive) {
        if (a > 0.0 && a < mu_->mass(*g_, *first_positive)) {
            CarveResult cr = carve_subset(*mu_, *g_, *first_positive, a);
            if (cr.feasible) return from_carve(cr);
        }
        if (first_zero) {
            AuxSet s = whole_box(cube_box(*g_, *first_zero), 0.0);
            s.flagged = true;
            return s;
        }
        AuxSet s = whole_box(cube_box(*g_, *first_positive), mu_->mass(*g_, *first_positive));
        s.flagged = true;
        return s;
    }
    return whole_box(cube_box(*g_, kids.front()), 0.0);
}

AuxSet SquareContext::build_aux_nested(const Cube& I, const Cube& J) const {
    const Box bi = cube_box(*g_, I);
    const Box bj = cube_box(*g_, J);
    const double li = bi.side();
    Point shift{{0, 0, 0}};
    bool found = false;
    for (int dir = 0; dir < g_->n && !found; ++dir) {
        for (double lam : {0.0, -1.0, 1.0}) {
            Box moved = bj;
            moved.lo[dir] += lam * li;
            moved.hi[dir] += lam * li;
            if (box_contains(bi, moved)) {
                shift[dir] = lam * li;
                found = true;
                break;
            }
        }
    }
    Box target = bj;
    bool snapped = false;
    if (found) {
        for (int d = 0; d < g_->n; ++d) {
            target.lo[d] += shift[d];
            target.hi[d] += shift[d];
        }
    } else {
        // no single axis translate lands inside I: snap to the nearest slot
        // of the side(J) sublattice of I
        snapped = true;
        const double lj = bj.side();
        for (int d = 0; d < g_->n; ++d) {
            const double clamped = std::clamp(bj.lo[d], bi.lo[d], bi.hi[d] - lj);
            const double k = std::round((clamped - bi.lo[d]) / lj);
            target.lo[d] = bi.lo[d] + k * lj;
            target.hi[d] = target.lo[d] + lj;
        }
    }
    target.open = Openness::HalfOpen;
    const double cap = mu_->mass(*g_, J);
    const double mt = mu_->mass(target);
    if (mt <= cap) {
        AuxSet s = whole_box(target, mt);
        s.flagged = snapped;
        return s;
    }
    Point total_shift{{0, 0, 0}};
    for (int d = 0; d < g_->n; ++d) total_shift[d] = target.lo[d] - bj.lo[d];
    CarveResult cr = carve_subset_box(*mu_, *g_, J, total_shift, cap);
    AuxSet s = from_carve(cr);
    s.flagged = s.flagged || snapped;
    return s;
}

AuxSet SquareContext::build_companion(const Cube& I, int e) const {
    const Box bi = cube_box(*g_, I);
    const double li = bi.side();
    Box moved = bi;
    const double shift = (std::ldexp(1.0, std::abs(e)) + 1.0) * li;
    moved.lo[0] += shift;
    moved.hi[0] += shift;
    moved.open = Openness::HalfOpen;
    const double cap = mu_->mass(*g_, I);
    const double mt = mu_->mass(moved);
    if (mt <= cap) return whole_box(moved, mt);
    CarveResult cr = carve_subset_box(*mu_, *g_, I, Point{{shift, 0, 0}}, cap);
    return from_carve(cr);
}

const AuxSet& SquareContext::aux_distant(const Cube& I, const Cube& J) const {
    const std::string key = pair_key(*g_, I, J, "d:");
    auto it = aux_cache_.find(key);
    if (it != aux_cache_.end()) return it->second;
    return aux_cache_.emplace(key, build_aux_distant(I, J)).first->second;
}

const AuxSet& SquareContext::aux_nested(const Cube& I, const Cube& J) const {
    const std::string key = pair_key(*g_, I, J, "n:");
    auto it = aux_cache_.find(key);
    if (it != aux_cache_.end()) return it->second;
    return aux_cache_.emplace(key, build_aux_nested(I, J)).first->second;
}

const AuxSet& SquareContext::companion(const Cube& I, int e) const {
    const std::string key = "c" + std::to_string(e) + ":" + cube_to_string(I, g_->n);
    auto it = aux_cache_.find(key);
    if (it != aux_cache_.end()) return it->second;
    return aux_cache_.emplace(key, build_companion(I, e)).first->second;
}

double SquareContext::rho(const Cube& J, int e, double delta) const {
    const auto key = std::make_pair(cube_to_string(J, g_->n), e);
    auto it = rho_cache_.find(key);
    if (it != rho_cache_.end()) return it->second;
    const Box dil = dilate(*g_, J, std::ldexp(1.0, e));
    const double r = density(*mu_, dil, 64, 8, delta).rho;
    rho_cache_.emplace(key, r);
    return r;
}

double SquareContext::f_total(const Cube& I, const Cube& J, const KernelSpec& k,
                              const BumpParams& bp) const {
    double total = 0.0;
    const Box bpi = cube_box(*g_, parent(I));
    const Box bpj = cube_box(*g_, parent(J));
    const double dhat = set_distance(bpi, bpj);
    auto mod = [](const Modulator& m, double x) { return m ? m(x) : 1.0; };
    Box bref;
    bref.n = g_->n;
    for (int d = 0; d < g_->n; ++d) {
        bref.lo[d] = -0.5;
        bref.hi[d] = 0.5;
    }
    const Box bi = cube_box(*g_, I);
    const Box bj = cube_box(*g_, J);
    const double lmin = std::min(bi.side(), bj.side());
    if (dhat > 0.0) {
        const Box psmall = bpi.side() <= bpj.side() ? bpi : bpj;
        const Box enc = pair_metrics(*g_, parent(I), parent(J), bp.theta).enclosing;
        total += mod(k.L, dhat) * mod(k.S, psmall.side()) *
                 mod(k.D, 1.0 + set_distance(enc, bref) / std::max(enc.side(), bref.side()));
    } else {
        const CubePairMetrics m = pair_metrics(*g_, I, J, bp.theta);
        if (m.lambda > 1.0) {
            const Box& small_box = bj.side() <= bi.side() ? bj : bi;
            const Box kbox = dilate(small_box, 1.0 + m.inrdist_hat);
            const double ls = mod(k.L, lmin) * mod(k.S, lmin);
            for (int kk = 0; kk <= bp.dilate_terms; ++kk) {
                const Box dil = dilate(kbox, std::ldexp(1.0, kk));
                const double decay = std::pow(2.0, -kk * k.delta);
                const double dfac =
                    mod(k.D, 1.0 + set_distance(dil, bref) / std::max(dil.side(), bref.side()));
                total += ls * decay * mu_->mass(dil) / std::pow(dil.side(), k.alpha) * dfac;
                total += ls * decay * dfac;
            }
        }
    }
    return total;
}

namespace {

double coeff_weight(const SquareContext& ctx, const Cube& I, const std::vector<const Cube*>& partners,
                    const SquareParams& p, const KernelSpec* kernel) {
    if (p.coeff_policy == SquareCoeffPolicy::Unit) return 1.0;
    if (!kernel) throw DomainError("square_fn: FSup coefficients need a kernel");
    double best = 0.0;
    for (const Cube* J : partners) best = std::max(best, ctx.f_total(I, *J, *kernel, p.bump));
    return best;
}

}  // namespace

GridFunction square_fn(const SquareContext& ctx, const GridFunction& f, int j, int sign,
                       const SquareParams& params, const KernelSpec* kernel) {
    const AtomicMeasure& mu = ctx.measure();
    const GridFamily& g = ctx.grids();
    const auto& atoms = mu.atoms();
    const int e = params.e;
    if (e < 0) throw DomainError("square_fn: e must be non-negative; the sign selects the branch");
    GridFunction sq(atoms.size(), 0.0);
    const double eps = params.epsilon > 0.0 ? params.epsilon : ctx.epsilon_default();

    const CoefficientMap cm = analyze(mu, g, f, ctx.universe());

    auto add_on_aux = [&](const AuxSet& s, double weight) {
        if (weight == 0.0) return;
        const double denom = s.mass + eps;
        for (std::size_t i = 0; i < atoms.size(); ++i)
            if (s.contains(atoms[i].x)) sq[i] += weight / denom;
    };
    auto add_on_box = [&](const Box& b, double weight) {
        if (weight == 0.0) return;
        for (std::size_t i = 0; i < atoms.size(); ++i)
            if (b.contains(atoms[i].x)) sq[i] += weight;
    };

    if (j == 1 && sign == +1) {
        for (const Cube& I : ctx.universe()) {
            const double c = cm.at(I);
            if (c == 0.0) continue;
            const double li = cube_side(g, I);
            for (int m = 2; m <= params.m_max; ++m) {
                const auto& fam = ctx.family(I, -e, m, std::nullopt, params.theta);
                if (fam.empty()) continue;
                std::vector<const Cube*> partners;
                for (const Cube& J : fam) partners.push_back(&J);
                const double a_i = coeff_weight(ctx, I, partners, params, kernel);
                const double base = a_i * c * c / std::pow(li, params.alpha) *
                                    std::pow(static_cast<double>(m), -(params.alpha + params.delta));
                for (const Cube& J : fam) {
                    const double mj = mu.mass(g, J);
                    if (mj <= 0.0) continue;
                    add_on_aux(ctx.aux_distant(I, J), base * mj);
                }
            }
        }
    } else if (j == 1 && sign == -1) {
        for (const Cube& J : ctx.universe()) {
            const double c = cm.at(J);
            if (c == 0.0) continue;
            const double lj = cube_side(g, J);
            const double norm = std::pow(std::ldexp(1.0, e) * lj, params.alpha);
            for (int m = 2; m <= params.m_max; ++m) {
                const auto& fam = ctx.family(J, e, m, std::nullopt, params.theta);
                if (fam.empty()) continue;
                std::vector<const Cube*> partners;
                for (const Cube& I : fam) partners.push_back(&I);
                const double b_j = coeff_weight(ctx, J, partners, params, kernel);
                const double base =
                    b_j * c * c / norm *
                    std::pow(static_cast<double>(m), -(params.alpha + params.delta));
                for (const Cube& I : fam) {
                    const double mi = mu.mass(g, I);
                    if (mi <= 0.0) continue;
                    add_on_aux(ctx.aux_distant(I, J), base * mi);
                }
            }
        }
    } else if (j == 2 && sign == +1) {
        for (const Cube& I : ctx.universe()) {
            const double c = cm.at(I);
            if (c == 0.0) continue;
            std::vector<const Cube*> partners;
            const auto& fam = ctx.family(I, -e, 1, std::nullopt, params.theta);
            for (const Cube& J : fam) partners.push_back(&J);
            const double a_i = coeff_weight(ctx, I, partners, params, kernel);
            const double li = cube_side(g, I);
            const double w = a_i * c * c * mu.mass(g, I) / std::pow(li, 2.0 * params.alpha);
            add_on_box(dilate(g, I, 3.0), w);
        }
    } else if (j == 2 && sign == -1) {
        for (const Cube& J : ctx.universe()) {
            const double c = cm.at(J);
            if (c == 0.0) continue;
            const double mj = mu.mass(g, J);
            if (mj <= 0.0) continue;
            std::vector<const Cube*> partners;
            const auto& fam = ctx.family(J, e, 1, std::nullopt, params.theta);
            for (const Cube& I : fam) partners.push_back(&I);
            const double b_j = coeff_weight(ctx, J, partners, params, kernel);
            const double w = b_j * ctx.rho(J, e, params.delta) * c * c / mj;
            add_on_box(cube_box(g, J), w);
        }
    } else if (j == 3 && sign == +1) {
        const int k_lo = static_cast<int>(std::ceil(std::pow(2.0, params.theta * e)));
        const int k_hi = static_cast<int>(std::floor(std::ldexp(1.0, e)));
        for (const Cube& I : ctx.universe()) {
            const double c = cm.at(I);
            if (c == 0.0) continue;
            const Box bi = cube_box(g, I);
            const Box bpi = cube_box(g, parent(I));
            const double mi = mu.mass(g, I);
            const double mpi = mu.mass(g, parent(I));
            for (int k = k_lo; k <= k_hi; ++k) {
                const auto& fam = ctx.family(I, -e, 1, k, params.theta);
                if (fam.empty()) continue;
                std::vector<const Cube*> partners;
                for (const Cube& J : fam) partners.push_back(&J);
                const double a_i = coeff_weight(ctx, I, partners, params, kernel);
                for (const Cube& J : fam) {
                    const Box bj = cube_box(g, J);
                    double rsum = 0.0;
                    if (mi > 0.0) rsum += mu.mass(intersect_box(bi, bj)) / mi;
                    if (mpi > 0.0) rsum += mu.mass(intersect_box(bpi, bj)) / mpi;
                    if (rsum == 0.0) continue;
                    add_on_aux(ctx.aux_nested(I, J), a_i * c * c * rsum);
                }
            }
        }
    } else if (j == 3 && sign == -1) {
        for (const Cube& I : ctx.universe()) {
            const double c = cm.at(I);
            if (c == 0.0) continue;
            std::vector<const Cube*> partners;
            const auto& fam = ctx.family(I, e, 1, std::nullopt, params.theta);
            for (const Cube& J : fam) partners.push_back(&J);
            const double b_i = coeff_weight(ctx, I, partners, params, kernel);
            add_on_aux(ctx.companion(I, e), b_i * c * c);
        }
    } else {
        throw DomainError("square_fn: j must be 1..3 and sign +-1");
    }

    for (double& v : sq) v = std::sqrt(std::max(0.0, v));
    return sq;
}

double square_bilinear(const SquareContext& ctx, const GridFunction& f, const GridFunction& g,
                       const SquareParams& params, const KernelSpec* kernel) {
    std::vector<double> terms;
    for (int e = -params.e_max; e <= params.e_max; ++e) {
        const double damp = std::pow(2.0, -std::abs(e) * params.theta * params.delta / 2.0);
        SquareParams p = params;
        p.e = std::abs(e);
        const int s = (e >= 0) ? +1 : -1;
        double sum = 0.0;
        for (int j = 1; j <= 3; ++j) {
            const GridFunction sf = square_fn(ctx, f, j, s, p, kernel);
            const GridFunction sg = square_fn(ctx, g, j, -s, p, kernel);
            sum += inner(ctx.measure(), sf, sg);
        }
        terms.push_back(damp * sum);
    }
    return pairwise_sum(terms);
}

double paraproduct(const SquareContext& ctx, const OperatorHandle& op, const GridFunction& f,
                   const GridFunction& g, int side, const SquareParams& params) {
    if (side != 1 && side != 2) throw DomainError("paraproduct: side must be 1 or 2");
    const AtomicMeasure& mu = ctx.measure();
    const GridFamily& gr = ctx.grids();
    const auto& atoms = mu.atoms();
    const Box qbox = cube_box(gr, ctx.q());
    const CoefficientMap cf = analyze(mu, gr, f, ctx.universe());
    const CoefficientMap cg = analyze(mu, gr, g, ctx.universe());

    GridFunction ind_q(atoms.size(), 0.0);
    for (std::size_t i = 0; i < atoms.size(); ++i)
        if (qbox.contains(atoms[i].x)) ind_q[i] = 1.0;

    // <T 1_Q, h_J> (side 1) or <T h_I, 1_Q> (side 2), one O(N^2) pass per cube
    std::unordered_map<std::string, double> entry;
    for (const Cube& c : ctx.universe()) {
        const HaarFn h = haar(mu, gr, c);
        if (h.zero) continue;
        const GridFunction hv = haar_values(mu, gr, h);
        entry[cube_to_string(c, gr.n)] =
            side == 1 ? op.dual_pair(ind_q, hv) : op.dual_pair(hv, ind_q);
    }

    std::vector<double> terms;
    for (const Cube& outer : ctx.universe()) {
        const double c_outer = side == 1 ? cf.at(outer) : cg.at(outer);
        if (c_outer == 0.0) continue;
        for (const Cube& inner_cube : ctx.universe()) {
            if (!cube_contains(gr, parent(outer), parent(inner_cube))) continue;
            const double c_inner = side == 1 ? cg.at(inner_cube) : cf.at(inner_cube);
            if (c_inner == 0.0) continue;
            const CubePairMetrics m = pair_metrics(gr, outer, inner_cube, params.theta);
            if (!(m.lambda > 1.0)) continue;
            const ModifiedHaar mh =
                modified_haar(mu, gr, outer, parent(inner_cube), qbox);
            if (mh.zero || mh.value == 0.0) continue;
            auto it = entry.find(cube_to_string(inner_cube, gr.n));
            if (it == entry.end()) continue;
            terms.push_back(c_outer * c_inner * mh.value * it->second);
        }
    }
    return pairwise_sum(terms);
}

ProbeReport operator_norm_probe(const SquareContext& ctx, ProbeKind probe, int j, int sign,
                                const SquareParams& params,
                                const std::vector<GridFunction>& corpus,
                                const KernelSpec* kernel) {
    if (corpus.empty()) throw DomainError("operator_norm_probe: corpus must be non-empty");
    ProbeReport rep;
    double a = 1.0;
    if (params.coeff_policy == SquareCoeffPolicy::FSup) {
        if (!kernel) throw DomainError("operator_norm_probe: FSup policy needs a kernel");
        a = weak_a_constant(ctx, params, *kernel);
    }
    rep.a_value = a;
    const AtomicMeasure& mu = ctx.measure();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const GridFunction& f = corpus[i];
        const GridFunction sf = square_fn(ctx, f, j, sign, params, kernel);
        double value = 0.0;
        if (probe == ProbeKind::L2) {
            const double nf = std::sqrt(norm_sq(mu, f));
            if (nf == 0.0) continue;
            value = std::sqrt(norm_sq(mu, sf)) / (std::sqrt(a) * nf);
        } else {
            const double n1 = l1_norm(mu, f);
            if (n1 == 0.0) continue;
            // sup_v v * mu({Sf >= v}) over the attained positive values
            std::vector<std::pair<double, double>> vals;
            for (std::size_t k = 0; k < sf.size(); ++k)
                if (sf[k] > 0.0) vals.push_back({sf[k], mu.atoms()[k].w});
            std::sort(vals.begin(), vals.end());
            double tailmass = 0.0;
            for (const auto& vw : vals) tailmass += vw.second;
            double best = 0.0;
            double seen = 0.0;
            for (std::size_t k = 0; k < vals.size(); ++k) {
                best = std::max(best, vals[k].first * (tailmass - seen));
                seen += vals[k].second;
            }
            value = best / (std::sqrt(a) * n1);
        }
        if (value > rep.constant) {
            rep.constant = value;
            rep.witness = static_cast<int>(i);
        }
    }
    return rep;
}

double weak_a_constant(const SquareContext& ctx, const SquareParams& params,
                       const KernelSpec& kernel, int e_cap) {
    double best = 0.0;
    for (const Cube& I : ctx.universe()) {
        const double rho_i = ctx.rho(I, 0, params.delta);
        for (int e = -e_cap; e <= e_cap; ++e) {
            const double rho_e = ctx.rho(I, e, params.delta);
            double fsup = 0.0;
            for (int m = 1; m <= params.m_max; ++m) {
                const auto& fam = ctx.family(I, e, m, std::nullopt, params.theta);
                for (const Cube& J : fam)
                    fsup = std::max(fsup, ctx.f_total(I, J, kernel, params.bump));
            }
            best = std::max(best,
                            (1.0 + rho_e) * (1.0 + rho_e) * (1.0 + rho_i) * (1.0 + rho_i) * fsup);
        }
    }
    return best;
}

}  // namespace nhsparse
