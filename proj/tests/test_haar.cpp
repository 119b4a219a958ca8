#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "test_helpers.hpp"

using namespace nhsparse;
using nhtest::mk_cube;
using nhtest::rel_err;
using nhtest::uniform_measure;

namespace {

struct Setup {
    Fixture fx;
    Cube q;
    int nres;
    std::vector<Cube> universe;
};

Setup setup(const char* name, int max_depth = 8) {
    Setup s{make_fixture(name), {}, 0, {}};
    s.q = enclosing_half_support_cube(s.fx.measure, s.fx.grids, 0);
    s.nres = resolving_depth(s.fx.measure, s.fx.grids, s.q);
    s.universe = atom_cubes(s.fx.measure, s.fx.grids, s.q, std::min(s.nres, max_depth));
    return s;
}

}  // namespace

TEST_CASE("haar: zero-mass cube gives the zero function") {
    const Setup s = setup("cantor6");
    // the middle third carries no mass
    Cube hole = cube_at(s.fx.grids, 0, 4, Point{{0.45, 0, 0}});
    REQUIRE(s.fx.measure.mass(s.fx.grids, hole) == 0.0);
    const HaarFn h = haar(s.fx.measure, s.fx.grids, hole);
    CHECK(h.zero);
    CHECK(haar_coefficient(s.fx.measure, s.fx.grids,
                           GridFunction(s.fx.measure.atoms().size(), 1.0), hole) == 0.0);
}

TEST_CASE("haar: degenerate sibling (I carries all of its parent)") {
    const Setup s = setup("twocluster");
    // a small cube whose parent has the same mass exists near each cluster
    bool found = false;
    for (const Cube& I : s.universe) {
        const double mi = s.fx.measure.mass(s.fx.grids, I);
        const double mp = s.fx.measure.mass(s.fx.grids, parent(I));
        if (mi > 0.0 && mi == mp) {
            const HaarFn h = haar(s.fx.measure, s.fx.grids, I);
            CHECK(h.norm_sq == 0.0);
            const GridFunction hv = haar_values(s.fx.measure, s.fx.grids, h);
            CHECK(norm_sq(s.fx.measure, hv) <= 1e-24);
            found = true;
            break;
        }
    }
    CHECK(found);
}

TEST_CASE("haar: mean zero and norm identity on an exhaustive depth-6 sweep") {
    for (const char* name : {"uniform64-1d", "cantor6"}) {
        const Setup s = setup(name, 6);
        GridFunction ones(s.fx.measure.atoms().size(), 1.0);
        for (const Cube& I : s.universe) {
            const HaarFn h = haar(s.fx.measure, s.fx.grids, I);
            if (h.zero) continue;
            const GridFunction hv = haar_values(s.fx.measure, s.fx.grids, h);
            const double mp = s.fx.measure.mass(s.fx.grids, parent(I));
            double sup = 0.0;
            for (double v : hv) sup = std::max(sup, std::abs(v));
            CHECK(std::abs(inner(s.fx.measure, hv, ones)) <= 1e-12 * std::max(1.0, sup * mp));
            CHECK(rel_err(norm_sq(s.fx.measure, hv), h.norm_sq) <= 1e-12);
            CHECK(h.norm_sq >= 0.0);
            CHECK(h.norm_sq <= 1.0);
        }
    }
}

TEST_CASE("haar: uniform measure gives norm^2 = 1/2") {
    const Setup s = setup("uniform64-1d");
    // any cube whose parent splits evenly
    for (const Cube& I : s.universe) {
        const double mi = s.fx.measure.mass(s.fx.grids, I);
        const double mp = s.fx.measure.mass(s.fx.grids, parent(I));
        if (mi > 0.0 && rel_err(mi * 2.0, mp) <= 1e-12) {
            CHECK(haar(s.fx.measure, s.fx.grids, I).norm_sq == doctest::Approx(0.5).epsilon(1e-12));
            return;
        }
    }
    FAIL("no evenly split cube found");
}

TEST_CASE("modified haar: vanishing, restriction, and ring value") {
    const Setup s = setup("uniform64-1d");
    const AtomicMeasure& mu = s.fx.measure;
    const GridFamily& g = s.fx.grids;
    const Box qbox = cube_box(g, s.q);

    // J with parent disjoint from Ihat -> zero function
    Cube I = {};
    for (const Cube& c : s.universe)
        if (c.scale == s.q.scale + 2 && mu.mass(g, c) > 0) {
            I = c;
            break;
        }
    REQUIRE(mu.mass(g, I) > 0.0);
    Cube far = I;
    far.j[0] += 64;
    const ModifiedHaar off = modified_haar(mu, g, I, far, qbox);
    CHECK((off.zero || off.value == 0.0));

    // J inside I: restriction identity h_I^{J,Q} 1_I = h_I 1_I atomwise
    const Cube J = children(g, I)[0];
    const ModifiedHaar mh = modified_haar(mu, g, I, J, qbox);
    const HaarFn h = haar(mu, g, I);
    const GridFunction mv = modified_haar_values(mu, mh);
    const GridFunction hv = haar_values(mu, g, h);
    const Box ib = cube_box(g, I);
    for (std::size_t i = 0; i < mv.size(); ++i)
        if (ib.contains(mu.atoms()[i].x)) CHECK(mv[i] == doctest::Approx(hv[i]).epsilon(1e-12));

    // c(J) in Ihat minus I -> the constant is -sqrt(mu(I))/mu(Ihat)
    Cube sib = I;
    sib.j[0] = (I.j[0] % 2 == 0) ? I.j[0] + 1 : I.j[0] - 1;
    const ModifiedHaar ring = modified_haar(mu, g, I, sib, qbox);
    const double expect = -std::sqrt(mu.mass(g, I)) / mu.mass(g, parent(I));
    CHECK(ring.value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("analyze: constants vanish, haar self-coefficient, linearity") {
    const Setup s = setup("cantor6", 6);
    const AtomicMeasure& mu = s.fx.measure;
    const GridFamily& g = s.fx.grids;

    const CoefficientMap c0 = analyze(mu, g, GridFunction(mu.atoms().size(), 3.25), s.universe);
    for (const auto& [key, v] : c0.entries) CHECK(std::abs(v) <= 1e-12);

    for (const Cube& I : s.universe) {
        const HaarFn h = haar(mu, g, I);
        if (h.zero) continue;
        const GridFunction hv = haar_values(mu, g, h);
        CHECK(rel_err(haar_coefficient(mu, g, hv, I), h.norm_sq) <= 1e-12);
        break;
    }

    Rng rng(5);
    GridFunction f(mu.atoms().size()), h2(mu.atoms().size());
    for (auto& v : f) v = rng.next_double();
    for (auto& v : h2) v = rng.next_double();
    GridFunction combo(mu.atoms().size());
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = 2.0 * f[i] - 0.5 * h2[i];
    for (const Cube& I : s.universe) {
        const double lhs = haar_coefficient(mu, g, combo, I);
        const double rhs =
            2.0 * haar_coefficient(mu, g, f, I) - 0.5 * haar_coefficient(mu, g, h2, I);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("project: indicator of Q, exact reconstruction at the resolving depth") {
    const Setup s = setup("uniform8-1d");
    const AtomicMeasure& mu = s.fx.measure;
    const GridFamily& g = s.fx.grids;

    GridFunction indicator(mu.atoms().size(), 1.0);
    const Projection p1 = project(mu, g, indicator, s.q, 3);
    for (double v : p1.p) CHECK(std::abs(v) <= 1e-12);
    for (std::size_t i = 0; i < p1.e.size(); ++i) CHECK(p1.e[i] == doctest::Approx(1.0));
    CHECK(p1.d_norm <= 1e-12);

    const GridFunction f = gen_function(mu, "random", 17);
    const Projection p2 = project(mu, g, f, s.q, s.nres);
    CHECK(p2.d_norm <= 1e-12 * std::sqrt(norm_sq(mu, f)));

    // shallow depth leaves a nonzero remainder
    const Projection p3 = project(mu, g, f, s.q, 1);
    CHECK(p3.d_norm > 1e-6);
}

TEST_CASE("averaging at one scale does not increase the L2 norm") {
    const Setup s = setup("cantor6");
    const AtomicMeasure& mu = s.fx.measure;
    const GridFamily& g = s.fx.grids;
    const GridFunction f = gen_function(mu, "random", 23);
    for (int level = 1; level <= 6; ++level) {
        double avg_norm = 0.0;
        std::unordered_set<Cube, CubeHash> seen;
        for (const auto& a : mu.atoms()) {
            Cube c = cube_at(g, 0, s.q.scale + level, a.x);
            if (!seen.insert(c).second) continue;
            const double m = mu.mass(g, c);
            if (m <= 0.0) continue;
            const Box b = cube_box(g, c);
            double acc = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i)
                if (b.contains(mu.atoms()[i].x)) acc += f[i] * mu.atoms()[i].w;
            avg_norm += (acc / m) * (acc / m) * m;
        }
        CHECK(avg_norm <= norm_sq(mu, f) * (1 + 1e-12));
    }
}

TEST_CASE("telescoping identity, plain and modified") {
    for (const char* name : {"uniform64-1d", "cantor6"}) {
        const Setup s = setup(name, 5);
        const AtomicMeasure& mu = s.fx.measure;
        const GridFamily& g = s.fx.grids;
        Rng rng(41);
        for (int trial = 0; trial < 25; ++trial) {
            GridFunction f(mu.atoms().size());
            for (auto& v : f) v = rng.uniform(-1.0, 2.0);
            const Cube R = s.universe[rng.next_below(s.universe.size())];
            const TelescopePair tp = telescope(mu, g, f, R);
            for (std::size_t i = 0; i < f.size(); ++i)
                CHECK(std::abs(tp.lhs[i] - tp.rhs[i]) <= 1e-12 * std::max(1.0, std::abs(tp.rhs[i])));
        }

        // constant function: both sides vanish
        const Cube R0 = s.universe.front();
        const TelescopePair tc = telescope(mu, g, GridFunction(mu.atoms().size(), 2.0), R0);
        for (std::size_t i = 0; i < tc.lhs.size(); ++i) {
            CHECK(std::abs(tc.lhs[i]) <= 1e-12);
            CHECK(std::abs(tc.rhs[i]) <= 1e-12);
        }

        // modified variant: J whose parent is separated from R kills both sides
        const Box qbox = cube_box(g, s.q);
        Cube far = R0;
        far.j[0] += 1000;
        const GridFunction f = gen_function(mu, "random", 3);
        const TelescopePair tm = telescope_modified(mu, g, f, R0, far, qbox);
        for (std::size_t i = 0; i < tm.lhs.size(); ++i) {
            CHECK(tm.lhs[i] == 0.0);
            CHECK(tm.rhs[i] == 0.0);
        }

        // modified variant with c(Jhat) inside a positive-mass child
        Rng rng2(77);
        int done = 0;
        for (int trial = 0; trial < 200 && done < 10; ++trial) {
            const Cube R = s.universe[rng2.next_below(s.universe.size())];
            const Cube J = s.universe[rng2.next_below(s.universe.size())];
            if (J.scale <= R.scale) continue;
            const Point cj = cube_box(g, parent(J)).center();
            bool well_posed = false;
            for (const Cube& ch : children(g, R))
                if (cube_box(g, ch).contains(cj) && mu.mass(g, ch) > 0.0) well_posed = true;
            if (!cube_box(g, R).contains(cj)) well_posed = true;
            if (!well_posed) continue;
            GridFunction f2(mu.atoms().size());
            for (auto& v : f2) v = rng2.uniform(-1.0, 2.0);
            const TelescopePair tp = telescope_modified(mu, g, f2, R, J, qbox);
            for (std::size_t i = 0; i < f2.size(); ++i)
                CHECK(std::abs(tp.lhs[i] - tp.rhs[i]) <=
                      1e-12 * std::max(1.0, std::abs(tp.rhs[i])));
            ++done;
        }
        CHECK(done == 10);
    }
}

TEST_CASE("plancherel: zero function, single-atom indicator, projection bound") {
    const Setup s = setup("cantor6");
    const AtomicMeasure& mu = s.fx.measure;
    const GridFamily& g = s.fx.grids;

    const PlancherelReport z =
        plancherel(mu, g, GridFunction(mu.atoms().size(), 0.0), s.q);
    CHECK(z.coef_energy == 0.0);
    CHECK(z.function_norm_sq == 0.0);

    GridFunction spike(mu.atoms().size(), 0.0);
    spike[7] = 1.0;
    const PlancherelReport ps = plancherel(mu, g, spike, s.q);
    CHECK(ps.coef_energy <= ps.function_norm_sq * (1 + 1e-12));

    // measured frame constant over a decayed corpus, then the projection bound
    double cp = 0.0;
    for (int i = 0; i < 10; ++i) {
        Rng rng(100 + i);
        const GridFunction f = random_decayed_function(mu, g, rng);
        cp = std::max(cp, plancherel(mu, g, f, s.q).ratio);
    }
    CHECK(std::isfinite(cp));
    Rng rng(7);
    const GridFunction f = random_decayed_function(mu, g, rng);
    const Projection pr = project(mu, g, f, s.q, s.nres);
    // ||P f|| <= (1 + sqrt(C_P)) ||f|| is implied by the measured constant
    CHECK(std::sqrt(norm_sq(mu, pr.p)) <=
          (1.0 + std::sqrt(std::max(cp, 1.0))) * std::sqrt(norm_sq(mu, f)));
}

TEST_CASE("coefficient maps serialize sorted by scale then coordinates") {
    const Setup s = setup("uniform8-1d", 3);
    const GridFunction f = gen_function(s.fx.measure, "trig", 5);
    const CoefficientMap cm = analyze(s.fx.measure, s.fx.grids, f, s.universe);
    const std::string text = coefficients_to_json(cm, s.fx.grids.n);
    CHECK(text.find("\"cube\"") != std::string::npos);
    // scales appear in nondecreasing order
    int last_scale = -1000;
    std::size_t pos = 0;
    while ((pos = text.find(":s", pos)) != std::string::npos) {
        const int scale = std::atoi(text.c_str() + pos + 2);
        CHECK(scale >= last_scale);
        last_scale = scale;
        ++pos;
    }
}
