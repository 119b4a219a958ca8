#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nhsparse/kernel.hpp"

namespace nhsparse {

struct StoppingConfig {
    double c_stop = 16.0;
    int q = 1;          // side(Q) = 2^q side(Q')
    int n_depth = 12;   // maximal selection generation / depth

    double tau(int k) const { return static_cast<double>(k) / (c_stop / 4.0 - 1.0); }
    void validate(int k, double alpha) const;
};

enum class Provenance : std::uint8_t { Root, Ancestor, FCondition, GCondition, Offspring1, Offspring2 };

struct SelectedCube {
    Cube cube;
    int level = 0;  // -1 for the ancestor chain
    Provenance provenance = Provenance::Root;
};

struct SparseFamily {
    std::vector<Cube> chain;                  // S^{-1}: Q' strictly up to Q
    std::vector<std::vector<SelectedCube>> levels;  // S^0, S^1, ...
    std::map<std::string, double> coefficients;     // a_S keyed by cube literal
    Cube q_prime;
    Cube q;

    std::vector<SelectedCube> all() const;
    std::size_t size() const;
};

SparseFamily build_family(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                          const GridFunction& gfun, const Cube& q_prime, const Cube& q,
                          const StoppingConfig& cfg);

struct PackingReport {
    double worst_ratio_levels = 0.0;   // over S^{>=0}, under mu
    double worst_ratio_chain = 0.0;    // over S^{-1}, under the extended measure
    std::optional<Cube> offender;
    bool sparse = true;                // every ratio < 1
};

PackingReport packing_check(const AtomicMeasure& mu, const GridFamily& g,
                            const SparseFamily& family);

// Lambda_S(f,g) = sum_S a_S <|f|>_S <|g|>_S mu(S).
double sparse_form(const AtomicMeasure& mu, const GridFamily& g, const SparseFamily& family,
                   const GridFunction& f, const GridFunction& gfun);
// Same form with the extended measure replacing mu on the ancestor chain.
double sparse_form_extended(const AtomicMeasure& mu, const GridFamily& g,
                            const SparseFamily& family, const GridFunction& f,
                            const GridFunction& gfun);

// U(S): cubes of D(S) in `universe` not inside any deeper selected cube.
std::vector<Cube> unselected(const GridFamily& g, const SparseFamily& family, const Cube& S,
                             const std::vector<Cube>& universe);

struct CZDecomposition {
    double lambda = 0.0;
    double a = 1.0;
    std::vector<Cube> stopping_cubes;
    GridFunction good;
    std::vector<GridFunction> bad_parts;  // aligned with stopping_cubes
    double exceptional_mass = 0.0;        // mu(union of 3P)
    double good_sup = 0.0;                // sup |good|, recorded only
};

CZDecomposition cz_decompose(const AtomicMeasure& mu, const GridFamily& g, const GridFunction& f,
                             double lambda, double a, const Cube& root);

enum class CoefficientPolicy : std::uint8_t { Unit, RhoWeighted };

struct DominationConfig {
    StoppingConfig stopping;
    CoefficientPolicy policy = CoefficientPolicy::Unit;
    int density_truncation = 64;
    int density_samples = 8;
};

struct DominationReport {
    double dual_pair_value = 0.0;
    double sparse_value = 0.0;
    double ratio = 0.0;
    bool ratio_infinite = false;  // Lambda = 0 with a nonzero pair
    std::size_t family_size = 0;
    double worst_packing_levels = 0.0;
    double worst_packing_chain = 0.0;
};

DominationReport domination_report(const OperatorHandle& op, const AtomicMeasure& mu,
                                   const GridFamily& g, const GridFunction& f,
                                   const GridFunction& gfun, const DominationConfig& cfg);

// Smallest grid-g cube of grid id `grid` whose central half contains the
// support of mu (plus every point of `extra`).
Cube enclosing_half_support_cube(const AtomicMeasure& mu, const GridFamily& g, int grid);

}  // namespace nhsparse
