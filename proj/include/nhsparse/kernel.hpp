#pragma once

#include <functional>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "nhsparse/haar.hpp"

namespace nhsparse {

enum class KernelFamily : std::uint8_t { SignedPower, CauchyReal, Custom };

using Modulator = std::function<double(double)>;

struct KernelSpec {
    KernelFamily family = KernelFamily::SignedPower;
    double alpha = 1.0;
    double delta = 1.0;
    // bounded modulating factors; empty means identically 1
    Modulator L, S, D;
    std::function<double(const Point&, const Point&, int)> custom;

    bool antisymmetric() const {
        return family == KernelFamily::SignedPower || family == KernelFamily::CauchyReal;
    }
};

// Smooth taper: 1 on |x|<1, cos^2(pi(|x|-1)/2) on [1,2], 0 beyond.
double taper(double x);

struct TruncationSpec {
    double gamma = 0.0625;
    int q_exponent = 2;  // Q = [-2^N, 2^N]^n
    double q_side(int) const { return std::ldexp(2.0, q_exponent); }
};

class OperatorHandle {
public:
    OperatorHandle(KernelSpec kernel, std::optional<TruncationSpec> trunc,
                   const AtomicMeasure& mu, const GridFamily& g, std::size_t cache_capacity = 1 << 18);

    const KernelSpec& kernel() const { return kernel_; }
    const std::optional<TruncationSpec>& truncation() const { return trunc_; }
    const AtomicMeasure& measure() const { return *mu_; }
    const GridFamily& grids() const { return *g_; }

    double raw_kernel(const Point& t, const Point& x) const;
    double eval_kernel(const Point& t, const Point& x) const;

    // <Tf, g> as the exact double atom sum; the transpose swaps kernel slots.
    double dual_pair(const GridFunction& f, const GridFunction& g, bool transpose = false) const;

    // Tf evaluated at every atom.
    GridFunction apply(const GridFunction& f, bool transpose = false) const;

    double wavelet_entry(const Cube& I, const Cube& J) const;
    // <T(h_I - h_I^{Jhat,Q}), h_J>, the nested-regime entry.
    double wavelet_entry_modified(const Cube& I, const Cube& J, const Box& Q) const;

    double testing_ratio(const Cube& I) const;

private:
    KernelSpec kernel_;
    std::optional<TruncationSpec> trunc_;
    const AtomicMeasure* mu_;
    const GridFamily* g_;

    // LRU cache for wavelet entries
    mutable std::mutex cache_mu_;
    mutable std::list<std::pair<std::string, double>> lru_;
    mutable std::unordered_map<std::string, std::list<std::pair<std::string, double>>::iterator>
        cache_;
    std::size_t cache_capacity_;

    std::optional<double> cache_get(const std::string& key) const;
    void cache_put(const std::string& key, double value) const;
};

enum class BumpKind : std::uint8_t { Separated = 1, Adjacent = 2, Nested = 3 };

struct BumpParams {
    double theta = 0.5;
    int dilate_terms = 16;  // truncation of the 2^k K dilate sums in F2, F3
};

// Which bump regime a pair (I, J) falls in, by the distance of the parents;
// nullopt for the attached range where no bump estimate applies.
std::optional<BumpKind> bump_regime(const GridFamily& g, const Cube& I, const Cube& J,
                                    double theta);

double bump_bound(const OperatorHandle& op, const Cube& I, const Cube& J, BumpKind kind,
                  const BumpParams& params);

// |K(t,x) - K(t',x')| divided by the smoothness majorant
// ((|t-t'|+|x-x'|)/|t-x|)^delta F(t,x)/|t-x|^alpha.
double smoothness_ratio(const KernelSpec& k, int n, const Point& t, const Point& tp,
                        const Point& x, const Point& xp);

}  // namespace nhsparse
