#include "nhsparse/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace nhsparse {

using nlohmann::json;

void SuiteResult::add(const std::string& check_name, bool ok, double value, double tol,
                      const std::string& witness) {
    checks.push_back({check_name, ok, value, tol, witness});
    pass = pass && ok;
}

namespace {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

Cube support_cube(const Fixture& fx) {
    return enclosing_half_support_cube(fx.measure, fx.grids, 0);
}

double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

double max_abs(const GridFunction& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

Fixture fixture_for_config(const ExperimentConfig& cfg) {
    if (!cfg.measure_file.empty()) {
        std::ifstream in(cfg.measure_file);
        if (!in) throw ConfigError("missing measure file: " + cfg.measure_file);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        Fixture fx;
        fx.name = cfg.measure_file;
        fx.measure = measure_from_json(text);
        fx.grids = make_grids(fx.measure.dim(), fx.measure.alpha(), 1.0, cfg.grid_seed);
        if (fx.measure.cert_depth() < 0) fx.measure.certify_growth(fx.grids, cfg.n_max);
        return fx;
    }
    return make_fixture(cfg.measure_name, cfg.grid_seed, cfg.n_max);
}

SuiteResult run_geometry_suite(const Fixture& fx, const ExperimentConfig& cfg) {
    Stopwatch sw;
    SuiteResult res;
    res.name = "geometry";
    const GridFamily& g = fx.grids;
    const AtomicMeasure& mu = fx.measure;
    const Cube q = support_cube(fx);
    const auto universe = atom_cubes(mu, g, q, std::min(5, resolving_depth(mu, g, q)));
    Rng rng(cfg.run_seed ^ 0x9e01);

    double worst_tile = 0.0;
    for (const Cube& c : universe) {
        double vol = 0.0;
        for (const Cube& ch : children(g, c)) vol += std::pow(cube_side(g, ch), g.n);
        worst_tile = std::max(worst_tile, rel_err(vol, std::pow(cube_side(g, c), g.n)));
    }
    res.add("children tile parent volume", worst_tile <= 1e-12, worst_tile, 1e-12);

    bool counts_ok = true;
    if (!universe.empty()) {
        const Cube& c = universe.front();
        counts_ok = counts_ok && children(g, c).size() == (1u << g.n);
        counts_ok = counts_ok &&
                    friends_of(g, c).size() == static_cast<std::size_t>(std::pow(3, g.n));
        counts_ok = counts_ok && descendants(g, c, 3).size() == (1u << (3 * g.n));
        for (const Cube& ch : children(g, c)) counts_ok = counts_ok && (parent(ch) == c);
    }
    res.add("relatives cardinalities", counts_ok, counts_ok ? 1 : 0, 0);

    const double theta = default_theta(mu.alpha(), cfg.kernel.delta);
    bool sym_ok = true, part_ok = true;
    for (int trial = 0; trial < 200 && universe.size() > 1; ++trial) {
        const Cube& a = universe[rng.next_below(universe.size())];
        const Cube& b = universe[rng.next_below(universe.size())];
        const auto mab = pair_metrics(g, a, b, theta);
        const auto mba = pair_metrics(g, b, a, theta);
        sym_ok = sym_ok && rel_err(mab.ec, mba.ec) <= 1e-12 &&
                 rel_err(mab.rdist, mba.rdist) <= 1e-12 && mab.cls == mba.cls;
        int hits = 0;
        if (mab.rdist >= 1.0) ++hits;
        if (mab.rdist > 0.0 && mab.rdist < 1.0 && mab.lambda > 1.0) ++hits;
        if (mab.rdist == 0.0 && mab.lambda > 1.0) ++hits;
        if (mab.rdist < 1.0 && mab.lambda <= 1.0) ++hits;
        part_ok = part_ok && hits == 1;
    }
    res.add("pair metrics symmetric", sym_ok, sym_ok ? 1 : 0, 0);
    res.add("classification is a partition", part_ok, part_ok ? 1 : 0, 0);

    bool dual_ok = true;
    for (const Cube& J : universe) {
        for (int e : {-1, 0, 1}) {
            for (int m = 1; m <= 3; ++m) {
                for (const Cube& I : cube_family(g, J, e, m, std::nullopt, universe, theta)) {
                    const auto back = cube_family(g, I, -e, m, std::nullopt, universe, theta);
                    dual_ok = dual_ok && std::find(back.begin(), back.end(), J) != back.end();
                }
            }
        }
        if (!dual_ok) break;
    }
    res.add("cube family duality", dual_ok, dual_ok ? 1 : 0, 0);

    res.wall_ms = sw.ms();
    return res;
}

SuiteResult run_haar_suite(const Fixture& fx, const ExperimentConfig& cfg) {
    Stopwatch sw;
    SuiteResult res;
    res.name = "haar";
    const GridFamily& g = fx.grids;
    const AtomicMeasure& mu = fx.measure;
    const Cube q = support_cube(fx);
    const int nres = resolving_depth(mu, g, q);
    const auto universe = atom_cubes(mu, g, q, std::min(nres, 8));
    Rng rng(cfg.run_seed ^ 0x11aa);

    double worst_mean = 0.0, worst_norm = 0.0;
    for (const Cube& I : universe) {
        const HaarFn h = haar(mu, g, I);
        if (h.zero) continue;
        const GridFunction hv = haar_values(mu, g, h);
        GridFunction ones(hv.size(), 1.0);
        const double mean = std::abs(inner(mu, hv, ones));
        const double scale = std::max(1e-300, max_abs(hv) * mu.mass(g, parent(I)));
        worst_mean = std::max(worst_mean, mean / scale);
        worst_norm = std::max(worst_norm, rel_err(norm_sq(mu, hv), h.norm_sq));
    }
    res.add("haar mean zero", worst_mean <= 1e-12, worst_mean, 1e-12);
    res.add("haar norm identity", worst_norm <= 1e-12, worst_norm, 1e-12);

    double worst_tel = 0.0;
    for (int trial = 0; trial < 20 && !universe.empty(); ++trial) {
        const GridFunction f = gen_function(mu, "random", cfg.run_seed + trial);
        const Cube R = universe[rng.next_below(universe.size())];
        const TelescopePair tp = telescope(mu, g, f, R);
        const double scale = std::max(1.0, max_abs(f));
        for (std::size_t i = 0; i < f.size(); ++i)
            worst_tel = std::max(worst_tel, std::abs(tp.lhs[i] - tp.rhs[i]) / scale);
    }
    res.add("telescoping identity", worst_tel <= 1e-12, worst_tel, 1e-12);

    const GridFunction f = gen_function(mu, "trig", cfg.run_seed);
    const Projection pr = project(mu, g, f, q, nres);
    res.add("projection reconstructs at resolving depth", pr.d_norm <= 1e-12 * std::sqrt(norm_sq(mu, f)),
            pr.d_norm, 1e-12);

    double cp = 0.0;
    for (int i = 0; i < 8; ++i) {
        Rng r2(cfg.run_seed + 31 * i);
        const GridFunction fr = random_decayed_function(mu, g, r2);
        cp = std::max(cp, plancherel(mu, g, fr, q).ratio);
    }
    res.constants["C_P"] = cp;
    res.add("plancherel ratio finite", std::isfinite(cp), cp, 0);

    res.wall_ms = sw.ms();
    return res;
}

SuiteResult run_measure_suite(const Fixture& fx, const ExperimentConfig& cfg) {
    Stopwatch sw;
    SuiteResult res;
    res.name = "measure-lemmas";
    const GridFamily& g = fx.grids;
    const AtomicMeasure& mu = fx.measure;
    const Cube q = support_cube(fx);
    const auto universe = atom_cubes(mu, g, q, std::min(6, resolving_depth(mu, g, q)));
    Rng rng(cfg.run_seed ^ 0x2bb2);

    double worst_add = 0.0;
    for (const Cube& c : universe) {
        double sum = 0.0;
        for (const Cube& ch : children(g, c)) sum += mu.mass(g, ch);
        worst_add = std::max(worst_add, rel_err(sum, mu.mass(g, c)));
    }
    res.add("mass additivity over children", worst_add <= 1e-12, worst_add, 1e-12);

    res.add("growth certificate", mu.check_growth(g, std::min(cfg.n_max, mu.cert_depth())), 1, 0);

    int carve_fail = 0, carve_trials = 0;
    for (int trial = 0; trial < 50 && !universe.empty(); ++trial) {
        const Cube& I = universe[rng.next_below(universe.size())];
        const double mi = mu.mass(g, I);
        const double floor_a =
            2.0 * mu.growth_constant() *
            std::pow(cube_side(g, I) * std::ldexp(1.0, -(mu.cert_depth() - I.scale)), mu.alpha());
        if (!(floor_a * 1.05 < mi)) continue;
        const double a = floor_a * 1.05 + (mi - floor_a * 1.05) * rng.next_double() * 0.95;
        ++carve_trials;
        const CarveResult cr = carve_subset(mu, g, I, a);
        if (!(cr.feasible && cr.mass > a / 2.0 && cr.mass <= a)) ++carve_fail;
    }
    res.add("carve mass window", carve_fail == 0, carve_fail, 0,
            "trials=" + std::to_string(carve_trials));

    const Cube qp = support_cube(fx);
    const ExtendedMeasure ext(mu, g, qp, mu.growth_constant());
    bool ext_ok = true;
    for (const Cube& c : universe) ext_ok = ext_ok && mu.mass(g, c) <= ext.mass(c) * (1 + 1e-12);
    {
        Cube up = qp;
        for (int i = 0; i < 3; ++i) {
            up = parent(up);
            ext_ok = ext_ok && mu.mass(g, up) <= ext.mass(up) * (1 + 1e-12);
        }
    }
    res.add("mu <= extended mu", ext_ok, ext_ok ? 1 : 0, 0);

    const Box ibox = cube_box(g, qp);
    const ShellSeries ss = shell_series_check(mu, g, ibox, 32, 8, cfg.kernel.delta);
    res.constants["shell_lhs_over_rho"] = ss.rhs > 0 ? ss.lhs / ss.rhs : 0.0;
    res.add("shell series controlled by density", ss.lhs <= 4.0 * ss.rhs + 1e-12, ss.lhs,
            4.0 * ss.rhs);

    const int n0 = 2;
    double prev = std::numeric_limits<double>::infinity();
    bool dec_ok = true;
    double last = 0.0;
    for (int r = n0 + 1; r <= n0 + 8; ++r) {
        const double m = boundary_shell_mass(mu, g, qp, n0, default_theta(mu.alpha(), cfg.kernel.delta), r);
        dec_ok = dec_ok && m <= prev + 1e-12;
        prev = m;
        last = m;
    }
    res.constants["boundary_shell_final"] = last;
    res.add("boundary shells shrink", dec_ok, last, 0);

    res.wall_ms = sw.ms();
    return res;
}

SuiteResult run_bump_suite(const Fixture& fx, const ExperimentConfig& cfg) {
    Stopwatch sw;
    SuiteResult res;
    res.name = "bumps";
    const GridFamily& g = fx.grids;
    const AtomicMeasure& mu = fx.measure;
    const Cube q = support_cube(fx);
    OperatorHandle op(cfg.kernel, cfg.truncation, mu, g);
    BumpParams bp;
    bp.theta = default_theta(cfg.kernel.alpha, cfg.kernel.delta);

    const auto sweep = [&](int depth) {
        std::array<double, 4> best{{0, 0, 0, 0}};
        const auto universe = atom_cubes(mu, g, q, std::min(depth, resolving_depth(mu, g, q)));
        const Box qbox = cube_box(g, q);
        for (const Cube& I : universe) {
            for (const Cube& J : universe) {
                const auto regime = bump_regime(g, I, J, bp.theta);
                if (!regime) continue;
                const double bound = bump_bound(op, I, J, *regime, bp);
                if (bound <= 0.0) continue;
                const double entry = (*regime == BumpKind::Nested)
                                         ? std::abs(op.wavelet_entry_modified(I, J, qbox))
                                         : std::abs(op.wavelet_entry(I, J));
                best[static_cast<std::size_t>(*regime)] =
                    std::max(best[static_cast<std::size_t>(*regime)], entry / bound);
            }
        }
        return best;
    };

    const auto c4 = sweep(4);
    res.constants["C_bump_separated"] = c4[1];
    res.constants["C_bump_adjacent"] = c4[2];
    res.constants["C_bump_nested"] = c4[3];
    bool finite = std::isfinite(c4[1]) && std::isfinite(c4[2]) && std::isfinite(c4[3]);
    res.add("bump ratios finite at depth 4", finite, c4[1], 0);

    double ftmax = 0.0;
    const auto universe = atom_cubes(mu, g, q, 3);
    for (const Cube& I : universe)
        if (mu.mass(g, I) > 0.0) ftmax = std::max(ftmax, op.testing_ratio(I));
    res.constants["F_T_max"] = ftmax;
    res.add("testing ratios finite", std::isfinite(ftmax), ftmax, 0);

    // the same ratios recorded along the configured truncation sweep
    for (std::size_t gi = 0; gi < cfg.gammas.size(); ++gi) {
        TruncationSpec tg = cfg.truncation;
        tg.gamma = cfg.gammas[gi];
        OperatorHandle og(cfg.kernel, tg, mu, g);
        double m = 0.0;
        for (const Cube& I : universe)
            if (mu.mass(g, I) > 0.0) m = std::max(m, og.testing_ratio(I));
        res.constants["F_T_max_gamma" + std::to_string(gi)] = m;
    }

    Rng rng(cfg.run_seed ^ 0x77cc);
    double csm = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto& atoms = mu.atoms();
        const Point t = atoms[rng.next_below(atoms.size())].x;
        const Point x = atoms[rng.next_below(atoms.size())].x;
        double r = 0.0;
        for (int d = 0; d < mu.dim(); ++d) r += (t[d] - x[d]) * (t[d] - x[d]);
        r = std::sqrt(r);
        if (r <= 0.0) continue;
        Point tp = t, xp = x;
        tp[0] += 0.1 * r * (rng.next_double() - 0.5);
        xp[0] += 0.1 * r * (rng.next_double() - 0.5);
        double move = std::abs(tp[0] - t[0]) + std::abs(xp[0] - x[0]);
        if (!(2.0 * move < r) || move == 0.0) continue;
        csm = std::max(csm, smoothness_ratio(cfg.kernel, mu.dim(), t, tp, x, xp));
    }
    res.constants["C_K_sampled"] = csm;
    res.add("kernel smoothness ratio finite", std::isfinite(csm), csm, 0);

    res.wall_ms = sw.ms();
    return res;
}

SuiteResult run_sparse_suite(const Fixture& fx, const ExperimentConfig& cfg) {
    Stopwatch sw;
    SuiteResult res;
    res.name = "sparse";
    const GridFamily& g = fx.grids;
    const AtomicMeasure& mu = fx.measure;
    const Cube qp = support_cube(fx);
    Cube q = qp;
    for (int i = 0; i < cfg.q; ++i) q = parent(q);
    StoppingConfig sc;
    sc.c_stop = cfg.c_stop;
    sc.q = cfg.q;
    sc.n_depth = std::min(cfg.n_max, resolving_depth(mu, g, qp) + 1);
    Rng rng(cfg.run_seed ^ 0x3dd3);

    double worst_lvl = 0.0, worst_chain = 0.0;
    bool ok_lvl = true, ok_chain = true;
    std::string offender;
    const double tau = sc.tau(g.k);
    const double chain_bound = tau + 1.0 - std::pow(2.0, -mu.alpha() * sc.q);
    for (int trial = 0; trial < 6; ++trial) {
        const GridFunction f = random_positive_function(mu, rng);
        const GridFunction h = random_positive_function(mu, rng);
        const SparseFamily fam = build_family(mu, g, f, h, qp, q, sc);
        const PackingReport pr = packing_check(mu, g, fam);
        worst_lvl = std::max(worst_lvl, pr.worst_ratio_levels);
        worst_chain = std::max(worst_chain, pr.worst_ratio_chain);
        ok_lvl = ok_lvl && pr.worst_ratio_levels <= tau;
        ok_chain = ok_chain && pr.worst_ratio_chain <= chain_bound;
        if (pr.offender) offender = cube_to_string(*pr.offender, g.n);
    }
    res.constants["packing_levels_worst"] = worst_lvl;
    res.constants["packing_chain_worst"] = worst_chain;
    res.add("level packing within tau", ok_lvl, worst_lvl, tau, offender);
    res.add("chain packing within bound", ok_chain, worst_chain, chain_bound, offender);

    {
        const GridFunction f = random_positive_function(mu, rng);
        const GridFunction h = random_positive_function(mu, rng);
        const SparseFamily fam = build_family(mu, g, f, h, qp, q, sc);
        const auto universe = atom_cubes(mu, g, qp, std::min(5, resolving_depth(mu, g, qp)));
        std::size_t covered = 0;
        bool disjoint = true;
        std::vector<char> seen(universe.size(), 0);
        for (const auto& sel : fam.all()) {
            const auto us = unselected(g, fam, sel.cube, universe);
            covered += us.size();
            for (const Cube& c : us) {
                for (std::size_t i = 0; i < universe.size(); ++i)
                    if (universe[i] == c) {
                        if (seen[i]) disjoint = false;
                        seen[i] = 1;
                    }
            }
        }
        std::size_t reachable = 0;
        for (const Cube& c : universe)
            if (cube_contains(g, qp, parent(c))) ++reachable;
        res.add("unselected cubes partition the universe", disjoint && covered == reachable,
                static_cast<double>(covered), static_cast<double>(reachable));
    }

    bool cz_ok = true;
    double worst_e = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        GridFunction f = random_positive_function(mu, rng);
        for (auto& v : f) v *= (rng.next_double() < 0.5 ? -1.0 : 1.0);
        const double a = 1.0;
        const double lambda = 0.2 + 2.0 * rng.next_double();
        const CZDecomposition cz = cz_decompose(mu, g, f, lambda, a, qp);
        GridFunction rec = cz.good;
        for (const auto& b : cz.bad_parts)
            for (std::size_t i = 0; i < rec.size(); ++i) rec[i] += b[i];
        for (std::size_t i = 0; i < rec.size(); ++i)
            cz_ok = cz_ok && rel_err(rec[i], f[i]) <= 1e-12;
        const double l1 = l1_norm(mu, f);
        for (const auto& b : cz.bad_parts) {
            GridFunction ones(f.size(), 1.0);
            cz_ok = cz_ok && std::abs(inner(mu, b, ones)) <= 1e-12 * std::max(1.0, l1);
        }
        const double bound = std::sqrt(a) / lambda * l1;
        worst_e = std::max(worst_e, cz.exceptional_mass - bound);
        cz_ok = cz_ok && cz.exceptional_mass <= bound + 1e-12;
    }
    res.add("cz decomposition invariants", cz_ok, worst_e, 0);

    res.wall_ms = sw.ms();
    return res;
}

SuiteResult run_squarefns_suite(const Fixture& fx, const ExperimentConfig& cfg) {
    Stopwatch sw;
    SuiteResult res;
    res.name = "squarefns";
    const GridFamily& g = fx.grids;
    const AtomicMeasure& mu = fx.measure;
    const Cube q = support_cube(fx);
    SquareContext ctx(mu, g, 0, q, std::min(resolving_depth(mu, g, q), 8));
    SquareParams params;
    params.alpha = mu.alpha();
    params.delta = cfg.kernel.delta;
    params.theta = default_theta(mu.alpha(), cfg.kernel.delta);
    params.e_max = 4;
    params.m_max = 16;
    Rng rng(cfg.run_seed ^ 0x5ee5);

    const GridFunction f = random_positive_function(mu, rng);
    const GridFunction h = random_positive_function(mu, rng);

    // ||S2' f||^2 equals the weighted coefficient energy
    {
        SquareParams p = params;
        p.e = 1;
        const GridFunction s2 = square_fn(ctx, f, 2, -1, p);
        const CoefficientMap cm = analyze(mu, g, f, ctx.universe());
        double expect = 0.0;
        for (const Cube& J : ctx.universe()) {
            const double c = cm.at(J);
            if (c == 0.0 || mu.mass(g, J) <= 0.0) continue;
            expect += ctx.rho(J, p.e, p.delta) * c * c;
        }
        const double got = norm_sq(mu, s2);
        res.add("S2' norm identity", rel_err(got, expect) <= 1e-10, rel_err(got, expect), 1e-10);
    }

    // S3 disjointness bound: sum_k sum_J mu(R cap J) <= mu(R)
    {
        bool ok = true;
        const int e = 2;
        const int k_lo = static_cast<int>(std::ceil(std::pow(2.0, params.theta * e)));
        const int k_hi = 1 << e;
        for (const Cube& I : ctx.universe()) {
            for (const Cube& R : {I, parent(I)}) {
                const double mr = mu.mass(g, R);
                if (mr <= 0.0) continue;
                double sum = 0.0;
                for (int k = k_lo; k <= k_hi; ++k)
                    for (const Cube& J : ctx.family(I, -e, 1, k, params.theta))
                        sum += mu.mass(intersect_box(cube_box(g, R), cube_box(g, J)));
                ok = ok && sum <= mr * (1 + 1e-12);
            }
        }
        res.add("S3 overlap bound", ok, ok ? 1 : 0, 0);
    }

    // auxiliary set windows
    {
        bool ok = true;
        int checked = 0;
        for (const Cube& I : ctx.universe()) {
            for (const Cube& J : ctx.family(I, -1, 2, std::nullopt, params.theta)) {
                const AuxSet& s = ctx.aux_distant(I, J);
                if (s.flagged) continue;
                const double cap = mu.mass(g, I) * mu.mass(g, J) / mu.mass(g, q);
                ok = ok && s.mass <= cap + 1e-12 && box_contains(dilate(cube_box(g, J), 1.0), s.base);
                if (s.carved) ok = ok && s.mass > cap / 2.0;
                ++checked;
            }
        }
        res.add("auxiliary mass windows", ok, checked, 0);
    }

    // Cauchy-Schwarz across the square pairings
    {
        SquareParams p = params;
        p.e = 1;
        bool ok = true;
        for (int j = 1; j <= 3; ++j) {
            const GridFunction sf = square_fn(ctx, f, j, +1, p);
            const GridFunction sg = square_fn(ctx, h, j, -1, p);
            const double ip = inner(mu, sf, sg);
            const double bound = std::sqrt(norm_sq(mu, sf) * norm_sq(mu, sg));
            ok = ok && ip <= bound + 1e-10 * std::max(1.0, bound);
        }
        res.add("square pairings obey Cauchy-Schwarz", ok, ok ? 1 : 0, 0);
    }

    // swapping the arguments flips the sign of e; the e = 0 term is the
    // one-sided remainder
    {
        auto e0_term = [&](const GridFunction& a, const GridFunction& b) {
            SquareParams p0 = params;
            p0.e = 0;
            double sum = 0.0;
            for (int j = 1; j <= 3; ++j)
                sum += inner(mu, square_fn(ctx, a, j, +1, p0), square_fn(ctx, b, j, -1, p0));
            return sum;
        };
        const double b1 = square_bilinear(ctx, f, h, params);
        const double b2 = square_bilinear(ctx, h, f, params);
        const double err = rel_err(b1 - e0_term(f, h), b2 - e0_term(h, f));
        res.constants["B_value"] = b1;
        res.add("square bilinear symmetric off e=0", err <= 1e-10, err, 1e-10);
    }

    // paraproducts against the sparse form
    {
        OperatorHandle op(cfg.kernel, cfg.truncation, mu, g);
        const double p1 = paraproduct(ctx, op, f, h, 1, params);
        const double p2 = paraproduct(ctx, op, f, h, 2, params);
        StoppingConfig sc;
        sc.c_stop = cfg.c_stop;
        sc.q = cfg.q;
        sc.n_depth = std::min(cfg.n_max, resolving_depth(mu, g, q) + 1);
        Cube qq = q;
        for (int i = 0; i < cfg.q; ++i) qq = parent(qq);
        const SparseFamily fam = build_family(mu, g, f, h, q, qq, sc);
        const double lam = sparse_form(mu, g, fam, f, h);
        res.constants["C_Pi"] = lam > 0 ? std::max(std::abs(p1), std::abs(p2)) / lam : 0.0;
        res.add("paraproducts finite", std::isfinite(p1) && std::isfinite(p2),
                std::max(std::abs(p1), std::abs(p2)), 0);
    }

    res.wall_ms = sw.ms();
    return res;
}

SuiteResult run_domination_suite(const Fixture& fx, const ExperimentConfig& cfg) {
    Stopwatch sw;
    SuiteResult res;
    res.name = "domination";
    const GridFamily& g = fx.grids;
    const AtomicMeasure& mu = fx.measure;
    Rng rng(cfg.run_seed ^ 0x7ff7);

    DominationConfig dc;
    dc.stopping.c_stop = cfg.c_stop;
    dc.stopping.q = cfg.q;
    dc.stopping.n_depth = std::min(cfg.n_max, resolving_depth(mu, g, support_cube(fx)) + 1);

    double global_max = 0.0;
    double max_excl_smallest = 0.0;
    bool all_finite = true;
    std::vector<double> gammas = cfg.gammas;
    std::sort(gammas.begin(), gammas.end(), std::greater<>());
    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
        TruncationSpec tr = cfg.truncation;
        tr.gamma = gammas[gi];
        OperatorHandle op(cfg.kernel, tr, mu, g);
        double cell_max = 0.0;
        for (int trial = 0; trial < 3; ++trial) {
            const GridFunction f = smooth_positive_function(mu, rng);
            const GridFunction h = smooth_positive_function(mu, rng);
            const DominationReport rep = domination_report(op, mu, g, f, h, dc);
            all_finite = all_finite && !rep.ratio_infinite && std::isfinite(rep.ratio);
            cell_max = std::max(cell_max, rep.ratio);
        }
        global_max = std::max(global_max, cell_max);
        if (gi + 1 < gammas.size()) max_excl_smallest = std::max(max_excl_smallest, cell_max);
    }
    res.constants["C_dom"] = global_max;
    res.add("domination ratios finite", all_finite, global_max, 0);
    const bool stable = global_max <= 1.10 * std::max(max_excl_smallest, 1e-300);
    res.constants["gamma_growth"] =
        max_excl_smallest > 0 ? global_max / max_excl_smallest : 1.0;
    res.add("no blow-up as gamma shrinks", stable, res.constants["gamma_growth"], 1.10);

    res.wall_ms = sw.ms();
    return res;
}

std::string RunReport::to_json(bool include_timings) const {
    json j;
    j["schema_version"] = schema_version;
    j["pass"] = pass;
    json env(environment);
    j["environment"] = env;
    json arr = json::array();
    for (const auto& s : suites) {
        json js;
        js["name"] = s.name;
        js["pass"] = s.pass;
        js["constants"] = json(s.constants);
        json checks = json::array();
        for (const auto& c : s.checks) {
            json jc;
            jc["name"] = c.name;
            jc["pass"] = c.pass;
            jc["value"] = c.value;
            jc["tolerance"] = c.tolerance;
            if (!c.witness.empty()) jc["witness"] = c.witness;
            checks.push_back(jc);
        }
        js["checks"] = checks;
        if (include_timings) js["wall_ms"] = s.wall_ms;
        arr.push_back(js);
    }
    j["suites"] = arr;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
    json j = json::parse(text);
    ExperimentConfig cfg;
    if (j.contains("measure")) {
        if (j["measure"].is_string())
            cfg.measure_name = j["measure"].get<std::string>();
        else if (j["measure"].contains("file"))
            cfg.measure_file = j["measure"]["file"].get<std::string>();
    }
    if (j.contains("kernel")) {
        auto [k, t] = kernel_from_json(j["kernel"].dump());
        cfg.kernel = k;
        cfg.truncation = t;
    }
    cfg.grid_seed = j.value("grid_seed", 7);
    cfg.run_seed = j.value("seed", 1);
    cfg.c_stop = j.value("C_stop", 16.0);
    cfg.q = j.value("q", 1);
    if (j.contains("gammas")) cfg.gammas = j["gammas"].get<std::vector<double>>();
    cfg.n_max = j.value("N_max", 14);
    if (j.contains("suites")) cfg.suites = j["suites"].get<std::vector<std::string>>();
    cfg.output_path = j.value("output", "report.json");
    cfg.format = j.value("format", "json");
    return cfg;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
    RunReport rep;
    rep.environment["compiler"] =
#if defined(__clang__)
        "clang " __clang_version__;
#elif defined(__GNUC__)
        "gcc " + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__);
#else
        "unknown";
#endif
    rep.environment["measure"] = cfg.measure_file.empty() ? cfg.measure_name : cfg.measure_file;

    const Fixture fx = fixture_for_config(cfg);
    for (const std::string& name : cfg.suites) {
        SuiteResult sr;
        if (name == "geometry")
            sr = run_geometry_suite(fx, cfg);
        else if (name == "haar")
            sr = run_haar_suite(fx, cfg);
        else if (name == "measure-lemmas")
            sr = run_measure_suite(fx, cfg);
        else if (name == "bumps")
            sr = run_bump_suite(fx, cfg);
        else if (name == "sparse")
            sr = run_sparse_suite(fx, cfg);
        else if (name == "squarefns")
            sr = run_squarefns_suite(fx, cfg);
        else if (name == "domination")
            sr = run_domination_suite(fx, cfg);
        else
            throw ConfigError("unknown suite '" + name + "'");
        rep.pass = rep.pass && sr.pass;
        rep.suites.push_back(std::move(sr));
    }
    return rep;
}

}  // namespace nhsparse
