#pragma once

#include <map>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "nhsparse/measure.hpp"

namespace nhsparse {

// Values of a function at the atoms of a measure, index-aligned.
using GridFunction = std::vector<double>;

double inner(const AtomicMeasure& mu, const GridFunction& f, const GridFunction& g);
double norm_sq(const AtomicMeasure& mu, const GridFunction& f);
double l1_norm(const AtomicMeasure& mu, const GridFunction& f);

/// Adapted Haar function h_I = mu(I)^{1/2} (1_I/mu(I) - 1_Ihat/mu(Ihat)),
/// stored as two constants; identically zero when mu(I) = 0.
struct HaarFn {
    Cube cube;
    double value_on_cube = 0.0;  // on I
    double value_on_ring = 0.0;  // on Ihat \ I
    bool zero = true;

    double norm_sq = 0.0;  // 1 - mu(I)/mu(Ihat)
};

HaarFn haar(const AtomicMeasure& mu, const GridFamily& g, const Cube& I);
double haar_eval(const HaarFn& h, const GridFamily& g, const Point& x);
GridFunction haar_values(const AtomicMeasure& mu, const GridFamily& g, const HaarFn& h);

/// Modified wavelet h_I^{J,Q}: the value of h_I at c(J), spread as a constant
/// over Q; zero when mu(I) = 0 or c(J) misses Ihat.
struct ModifiedHaar {
    Cube cube;
    Box q;
    double value = 0.0;
    bool zero = true;
};

ModifiedHaar modified_haar(const AtomicMeasure& mu, const GridFamily& g, const Cube& I,
                           const Cube& J, const Box& Q);
GridFunction modified_haar_values(const AtomicMeasure& mu, const ModifiedHaar& h);

// <f, h_I> through the cube integrals: mu(I)^{1/2} (<f>_I - <f>_Ihat).
double haar_coefficient(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                        const Cube& I);

struct CoefficientMap {
    // sorted by (grid, scale, coords) for deterministic serialization
    std::map<std::tuple<int, int, std::array<std::int64_t, kMaxDim>>, double> entries;

    double at(const Cube& c) const {
        auto it = entries.find({c.grid, c.scale, c.j});
        return it == entries.end() ? 0.0 : it->second;
    }
};

CoefficientMap analyze(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                       const std::vector<Cube>& cubes);

// Atom-carrying cubes of D(Q) (parent contained in Q) down to `depth`
// relative scales, one entry per cube, sorted by (scale, coords).
std::vector<Cube> atom_cubes(const AtomicMeasure& mu, const GridFamily& g, const Cube& Q,
                             int depth);

// Smallest N such that every atom sits alone in its scale-(Q.scale+N) cube.
int resolving_depth(const AtomicMeasure& mu, const GridFamily& g, const Cube& Q,
                    int max_depth = 60);

struct Projection {
    GridFunction p;  // P_Q^N f
    GridFunction e;  // <f>_Q 1_Q
    GridFunction d;  // remainder
    double d_norm = 0.0;
};

Projection project(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                   const Cube& Q, int N);

struct TelescopePair {
    GridFunction lhs;
    GridFunction rhs;
};

TelescopePair telescope(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                        const Cube& R);
TelescopePair telescope_modified(const AtomicMeasure& mu, const GridFamily& g,
                                 const GridFunction& f, const Cube& R, const Cube& J,
                                 const Box& Q);

struct PlancherelReport {
    double coef_energy = 0.0;
    double function_norm_sq = 0.0;
    double ratio = 0.0;  // energy / norm^2, 0 when f = 0
};

PlancherelReport plancherel(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                            const Cube& Q, int depth = -1);

}  // namespace nhsparse
