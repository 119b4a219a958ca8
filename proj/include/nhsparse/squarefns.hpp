#pragma once

#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "nhsparse/sparse.hpp"

namespace nhsparse {

enum class SquareCoeffPolicy : std::uint8_t { Unit, FSup };

struct SquareParams {
    int e = 0;  // eccentricity exponent, non-negative inside the evaluators
    double theta = 0.5;
    double delta = 1.0;
    double alpha = 1.0;
    int m_max = 64;
    int e_max = 16;
    double epsilon = 0.0;  // 0 -> the computed default
    SquareCoeffPolicy coeff_policy = SquareCoeffPolicy::Unit;
    BumpParams bump;  // F factors under the FSup policy
};

// Translated companion set J'_I: either a whole box or a carved subset of it.
struct AuxSet {
    Box base;
    std::vector<Box> removed;
    double mass = 0.0;
    bool carved = false;
    bool flagged = false;  // construction fell outside the mass window
    bool contains(const Point& x) const {
        if (!base.contains(x)) return false;
        for (const auto& r : removed)
            if (r.contains(x)) return false;
        return true;
    }
};

/// Shared enumeration + caches for the square functions over one grid of one
/// measure, localized to Q. Families, auxiliary sets and densities are cached
/// so that sweeping a corpus of functions stays cheap.
class SquareContext {
public:
    SquareContext(const AtomicMeasure& mu, const GridFamily& g, int grid, const Cube& Q,
                  int depth = -1);

    const AtomicMeasure& measure() const { return *mu_; }
    const GridFamily& grids() const { return *g_; }
    const Cube& q() const { return q_; }
    int grid() const { return grid_; }
    int depth() const { return depth_; }
    const std::vector<Cube>& universe() const { return universe_; }
    double epsilon_default() const { return epsilon_; }
    double min_positive_mass() const { return min_positive_mass_; }

    const std::vector<Cube>& family(const Cube& J, int e, int m, std::optional<int> k_band,
                                    double theta) const;
    const AuxSet& aux_distant(const Cube& I, const Cube& J) const;
    const AuxSet& aux_nested(const Cube& I, const Cube& J) const;
    const AuxSet& companion(const Cube& I, int e) const;
    double rho(const Cube& J, int e, double delta) const;

    double f_total(const Cube& I, const Cube& J, const KernelSpec& k, const BumpParams& bp) const;

private:
    const AtomicMeasure* mu_;
    const GridFamily* g_;
    int grid_;
    Cube q_;
    int depth_;
    std::vector<Cube> universe_;
    double mu_q_ = 0.0;
    double epsilon_ = 0.0;
    double min_positive_mass_ = 0.0;

    mutable std::map<std::tuple<std::string, int, int, int>, std::vector<Cube>> family_cache_;
    mutable std::map<std::string, AuxSet> aux_cache_;
    mutable std::map<std::pair<std::string, int>, double> rho_cache_;

    AuxSet build_aux_distant(const Cube& I, const Cube& J) const;
    AuxSet build_aux_nested(const Cube& I, const Cube& J) const;
    AuxSet build_companion(const Cube& I, int e) const;
};

// S_{j}^{sign} f evaluated at every atom (j in {1,2,3}, sign in {+1,-1}).
GridFunction square_fn(const SquareContext& ctx, const GridFunction& f, int j, int sign,
                       const SquareParams& params, const KernelSpec* kernel = nullptr);

// B_i(f,g) = sum_e 2^{-|e| theta delta / 2} sum_j <S_j^{s_e} f, S_j^{-s_e} g>.
double square_bilinear(const SquareContext& ctx, const GridFunction& f, const GridFunction& g,
                       const SquareParams& params, const KernelSpec* kernel = nullptr);

// Paraproduct Pi_side(f,g) over the context grid, using the operator's
// truncation cube as the localization.
double paraproduct(const SquareContext& ctx, const OperatorHandle& op, const GridFunction& f,
                   const GridFunction& g, int side, const SquareParams& params);

enum class ProbeKind : std::uint8_t { L2, WeakL1 };

struct ProbeReport {
    double constant = 0.0;
    int witness = -1;  // corpus index achieving the constant
    double a_value = 1.0;
};

ProbeReport operator_norm_probe(const SquareContext& ctx, ProbeKind probe, int j, int sign,
                                const SquareParams& params,
                                const std::vector<GridFunction>& corpus,
                                const KernelSpec* kernel = nullptr);

// sup over the universe of (1+rho(2^e I))^2 (1+rho(I))^2 sup_J F(I,J),
// truncated to |e| <= e_cap and m <= m_max.
double weak_a_constant(const SquareContext& ctx, const SquareParams& params,
                       const KernelSpec& kernel, int e_cap = 3);

}  // namespace nhsparse
