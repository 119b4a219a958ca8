#pragma once

#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "nhsparse/geometry.hpp"

namespace nhsparse {

struct MeasureAtom {
    Point x{{0, 0, 0}};
    double w = 0.0;
};

/// Finite atomic measure with a power-growth certificate
/// mu(I) <= c_growth * side(I)^alpha for grid cubes down to cert_depth.
class AtomicMeasure {
public:
    AtomicMeasure() = default;
    AtomicMeasure(int n, double alpha, std::vector<MeasureAtom> atoms);

    // the mass cache and its lock stay private to each instance
    AtomicMeasure(const AtomicMeasure& o) { assign(o); }
    AtomicMeasure(AtomicMeasure&& o) noexcept { assign(o); }
    AtomicMeasure& operator=(const AtomicMeasure& o) {
        if (this != &o) assign(o);
        return *this;
    }
    AtomicMeasure& operator=(AtomicMeasure&& o) noexcept {
        if (this != &o) assign(o);
        return *this;
    }

    int dim() const { return n_; }
    double alpha() const { return alpha_; }
    double growth_constant() const { return c_growth_; }
    int cert_depth() const { return cert_depth_; }
    const std::vector<MeasureAtom>& atoms() const { return atoms_; }
    const Box& support_box() const { return support_; }
    double total() const { return total_; }

    // Exact atom sum over a box, fixed order, pairwise reduction.
    double mass(const Box& b) const;

    // Cube mass with memoization; asserts the growth certificate for cubes
    // at certified scales.
    double mass(const GridFamily& g, const Cube& c) const;

    // Fit c_growth as the max of mu(I)/side(I)^alpha over all atom-carrying
    // cubes of every grid in `g`, scales `top_scale..depth`, plus the
    // ancestors up to top_scale. Sets cert_depth.
    void certify_growth(const GridFamily& g, int depth);

    // Verify (without refitting) that the certificate holds.
    bool check_growth(const GridFamily& g, int depth, double tol = 1e-9) const;

    void set_growth(double c_growth, int cert_depth);
    void set_certificate_enforcement(bool on) { enforce_cert_ = on; }

private:
    void assign(const AtomicMeasure& o) {
        n_ = o.n_;
        alpha_ = o.alpha_;
        c_growth_ = o.c_growth_;
        cert_depth_ = o.cert_depth_;
        enforce_cert_ = o.enforce_cert_;
        total_ = o.total_;
        atoms_ = o.atoms_;
        support_ = o.support_;
        cache_.clear();
    }

    int n_ = 1;
    double alpha_ = 1.0;
    double c_growth_ = 0.0;
    int cert_depth_ = -1;
    bool enforce_cert_ = true;
    double total_ = 0.0;
    std::vector<MeasureAtom> atoms_;
    Box support_;

    mutable std::shared_mutex cache_mu_;
    mutable std::unordered_map<Cube, double, CubeHash> cache_;
};

/// Extension of mu beyond Q': agrees with mu inside Q', assigns
/// c * side(A)^alpha to dyadic cubes disjoint from Q', and fills ancestors
/// additively through the sibling decomposition of A \ Q'.
class ExtendedMeasure {
public:
    ExtendedMeasure(const AtomicMeasure& mu, const GridFamily& g, const Cube& q_prime, double c);

    double mass(const Cube& a) const;
    // Average of f (given on atoms) with respect to the extended measure.
    double average(const std::vector<double>& f, const Cube& a) const;

    const Cube& q_prime() const { return qp_; }
    double c() const { return c_; }

private:
    const AtomicMeasure* mu_;
    const GridFamily* g_;
    Cube qp_;
    double c_;
};

struct DensityReport {
    double sup_term = 0.0;
    double series_term = 0.0;
    double rho = 0.0;
    int truncation = 0;
    double tail_bound = 0.0;
    bool sup_is_estimate = true;
};

DensityReport density(const AtomicMeasure& mu, const Box& I, int M, int samples, double delta);

// A = base \ (union of removed pieces); the pieces are the atom-carrying
// subcubes at one scale, removed in lexicographic order until the mass
// drops into (a/2, a].
struct CarveResult {
    Box base;
    int scale = 0;              // absolute scale of the removal pieces
    std::vector<Box> removed;
    double mass = 0.0;
    bool feasible = false;      // a/2 < mass <= a achieved
    bool contains(const Point& x) const;
};

/// Greedy single-scale carving of a subset A of I with a/2 < mu(A) <= a.
/// Pieces are removed in lexicographic order; each removable piece has mass
/// at most a/2 whenever the growth certificate covers the piece scale.
CarveResult carve_subset(const AtomicMeasure& mu, const GridFamily& g, const Cube& I, double a);

/// Same construction on a translated copy of the subcube lattice of I.
CarveResult carve_subset_box(const AtomicMeasure& mu, const GridFamily& g, const Cube& I,
                             const Point& shift, double a);

// Every atom keeps distance > 2^{-(depth+4)} * base_side from every grid
// hyperplane down to `depth`; fixture construction re-seeds until this holds.
bool atom_grid_separation(const AtomicMeasure& mu, const GridFamily& g, int depth);

struct ShellSeries {
    double lhs = 0.0;
    double rhs = 0.0;
};

ShellSeries shell_series_check(const AtomicMeasure& mu, const GridFamily& g, const Box& I, int M,
                               int samples, double delta);

/// mu(C_r) for the shell C_r of open cubes J at scale 2^-r * side(Q) hugging
/// the inner boundaries of the cubes of D(Q) down to depth N0.
double boundary_shell_mass(const AtomicMeasure& mu, const GridFamily& g, const Cube& Q, int N0,
                           double theta, int r);

}  // namespace nhsparse
