#include "nhsparse/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace nhsparse {

namespace {

double norm2(const Point& a, const Point& b, int n) {
    double s = 0.0;
    for (int d = 0; d < n; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return std::sqrt(s);
}

double norm(const Point& a, int n) {
    double s = 0.0;
    for (int d = 0; d < n; ++d) s += a[d] * a[d];
    return std::sqrt(s);
}

double modulate(const Modulator& m, double x) { return m ? m(x) : 1.0; }

Box unit_reference_box(int n) {
    Box b;
    b.n = n;
    b.open = Openness::Closed;
    for (int d = 0; d < n; ++d) {
        b.lo[d] = -0.5;
        b.hi[d] = 0.5;
    }
    return b;
}

double box_rdist(const Box& a, const Box& b) {
    return set_distance(a, b) / std::max(a.side(), b.side());
}

}  // namespace

double taper(double x) {
    const double a = std::abs(x);
    if (a < 1.0) return 1.0;
    if (a >= 2.0) return 0.0;
    const double c = std::cos(M_PI * (a - 1.0) / 2.0);
    return c * c;
}

OperatorHandle::OperatorHandle(KernelSpec kernel, std::optional<TruncationSpec> trunc,
                               const AtomicMeasure& mu, const GridFamily& g,
                               std::size_t cache_capacity)
    : kernel_(std::move(kernel)), trunc_(trunc), mu_(&mu), g_(&g),
      cache_capacity_(cache_capacity) {}

double OperatorHandle::raw_kernel(const Point& t, const Point& x) const {
    const int n = mu_->dim();
    const double r = norm2(t, x, n);
    switch (kernel_.family) {
        case KernelFamily::SignedPower: {
            double s = 0.0;
            for (int d = 0; d < n; ++d) s += x[d] - t[d];
            const double sgn = (s > 0.0) ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
            return sgn * std::pow(r, -kernel_.alpha);
        }
        case KernelFamily::CauchyReal: {
            // real part of 1/((x1-t1) + i(x2-t2))
            const double re = x[0] - t[0];
            return re / (r * r);
        }
        case KernelFamily::Custom:
            return kernel_.custom(t, x, n);
    }
    return 0.0;
}

double OperatorHandle::eval_kernel(const Point& t, const Point& x) const {
    const int n = mu_->dim();
    const double r = norm2(t, x, n);
    if (!trunc_) {
        if (r == 0.0) throw DomainError("eval_kernel: on-diagonal without truncation");
        return raw_kernel(t, x);
    }
    if (r < trunc_->gamma) return 0.0;  // 1 - taper = 0 there, without touching K
    const double cut = 1.0 - taper(r / trunc_->gamma);
    if (cut == 0.0) return 0.0;
    const double side = trunc_->q_side(n);
    return raw_kernel(t, x) * cut * taper(4.0 * norm(t, n) / side) *
           taper(4.0 * norm(x, n) / side);
}

double OperatorHandle::dual_pair(const GridFunction& f, const GridFunction& g,
                                 bool transpose) const {
    if (!trunc_ && !kernel_.antisymmetric())
        throw DomainError("dual_pair: untruncated principal value needs an antisymmetric kernel");
    const auto& atoms = mu_->atoms();
    const std::size_t n = atoms.size();
    std::vector<double> rows(n, 0.0);
    parallel_for(n, [&](std::size_t p) {
        if (f[p] == 0.0) return;
        std::vector<double> terms;
        terms.reserve(n);
        for (std::size_t q = 0; q < n; ++q) {
            if (g[q] == 0.0) continue;
            if (!trunc_) {
                if (p == q) continue;
                const double r = norm2(atoms[p].x, atoms[q].x, mu_->dim());
                if (r == 0.0) throw DomainError("dual_pair: coincident atoms on the diagonal");
            }
            const double k = transpose ? eval_kernel(atoms[q].x, atoms[p].x)
                                       : eval_kernel(atoms[p].x, atoms[q].x);
            if (k == 0.0) continue;
            terms.push_back(f[p] * g[q] * k * atoms[p].w * atoms[q].w);
        }
        rows[p] = pairwise_sum(terms);
    });
    return pairwise_sum(rows);
}

GridFunction OperatorHandle::apply(const GridFunction& f, bool transpose) const {
    if (!trunc_ && !kernel_.antisymmetric())
        throw DomainError("apply: untruncated principal value needs an antisymmetric kernel");
    const auto& atoms = mu_->atoms();
    const std::size_t n = atoms.size();
    GridFunction out(n, 0.0);
    parallel_for(n, [&](std::size_t q) {
        std::vector<double> terms;
        terms.reserve(n);
        for (std::size_t p = 0; p < n; ++p) {
            if (f[p] == 0.0) continue;
            if (!trunc_ && p == q) continue;
            const double k = transpose ? eval_kernel(atoms[q].x, atoms[p].x)
                                       : eval_kernel(atoms[p].x, atoms[q].x);
            if (k == 0.0) continue;
            terms.push_back(f[p] * k * atoms[p].w);
        }
        out[q] = pairwise_sum(terms);
    });
    return out;
}

std::optional<double> OperatorHandle::cache_get(const std::string& key) const {
    std::lock_guard lk(cache_mu_);
    auto it = cache_.find(key);
    if (it == cache_.end()) return std::nullopt;
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->second;
}

void OperatorHandle::cache_put(const std::string& key, double value) const {
    std::lock_guard lk(cache_mu_);
    if (cache_.count(key)) return;
    lru_.emplace_front(key, value);
    cache_[key] = lru_.begin();
    if (cache_.size() > cache_capacity_) {
        cache_.erase(lru_.back().first);
        lru_.pop_back();
    }
}

double OperatorHandle::wavelet_entry(const Cube& I, const Cube& J) const {
    const std::string key =
        cube_to_string(I, g_->n) + "|" + cube_to_string(J, g_->n);
    if (auto hit = cache_get(key)) return *hit;
    const HaarFn hi = haar(*mu_, *g_, I);
    const HaarFn hj = haar(*mu_, *g_, J);
    double v = 0.0;
    if (!hi.zero && !hj.zero)
        v = dual_pair(haar_values(*mu_, *g_, hi), haar_values(*mu_, *g_, hj));
    cache_put(key, v);
    return v;
}

double OperatorHandle::wavelet_entry_modified(const Cube& I, const Cube& J, const Box& Q) const {
    const HaarFn hi = haar(*mu_, *g_, I);
    const HaarFn hj = haar(*mu_, *g_, J);
    if (hi.zero || hj.zero) return 0.0;
    // the modified wavelet replaces the larger cube's factor
    if (cube_side(*g_, J) <= cube_side(*g_, I)) {
        GridFunction lhs = haar_values(*mu_, *g_, hi);
        const ModifiedHaar hm = modified_haar(*mu_, *g_, I, parent(J), Q);
        const GridFunction mv = modified_haar_values(*mu_, hm);
        for (std::size_t i = 0; i < lhs.size(); ++i) lhs[i] -= mv[i];
        return dual_pair(lhs, haar_values(*mu_, *g_, hj));
    }
    GridFunction rhs = haar_values(*mu_, *g_, hj);
    const ModifiedHaar hm = modified_haar(*mu_, *g_, J, parent(I), Q);
    const GridFunction mv = modified_haar_values(*mu_, hm);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= mv[i];
    return dual_pair(haar_values(*mu_, *g_, hi), rhs);
}

double OperatorHandle::testing_ratio(const Cube& I) const {
    const double mi = mu_->mass(*g_, I);
    if (mi <= 0.0) throw DomainError("testing_ratio: cube carries no mass");
    const Box bi = cube_box(*g_, I);
    const auto& atoms = mu_->atoms();
    GridFunction ind(atoms.size(), 0.0);
    for (std::size_t i = 0; i < atoms.size(); ++i)
        if (bi.contains(atoms[i].x)) ind[i] = 1.0;
    const GridFunction tf = apply(ind, false);
    const GridFunction ttf = apply(ind, true);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (ind[i] == 0.0) continue;
        a.push_back(tf[i] * tf[i] * atoms[i].w);
        b.push_back(ttf[i] * ttf[i] * atoms[i].w);
    }
    return (std::sqrt(pairwise_sum(a)) + std::sqrt(pairwise_sum(b))) / std::sqrt(mi);
}

std::optional<BumpKind> bump_regime(const GridFamily& g, const Cube& I, const Cube& J,
                                    double theta) {
    const double lmax = std::max(cube_side(g, I), cube_side(g, J));
    const double dhat = set_distance(cube_box(g, parent(I)), cube_box(g, parent(J)));
    if (dhat > 2.0 * lmax) return BumpKind::Separated;
    if (dhat > 0.0) return BumpKind::Adjacent;
    if (pair_metrics(g, I, J, theta).lambda > 1.0) return BumpKind::Nested;
    return std::nullopt;
}

namespace {

struct BumpFactors {
    double f1 = 0.0;
    double f2 = 0.0;
    double f3 = 0.0;
    double total() const { return f1 + f2 + f3; }
};

// F1 lives on pairs with separated parents; F2, F3 on pairs with touching
// parents and lambda > 1. Each is zero elsewhere.
BumpFactors bump_factors(const OperatorHandle& op, const Cube& I, const Cube& J,
                         const BumpParams& params) {
    const GridFamily& g = op.grids();
    const AtomicMeasure& mu = op.measure();
    const KernelSpec& k = op.kernel();
    BumpFactors f;
    const Box bpi = cube_box(g, parent(I));
    const Box bpj = cube_box(g, parent(J));
    const Box bref = unit_reference_box(g.n);
    const double dhat = set_distance(bpi, bpj);
    if (dhat > 0.0) {
        const Box& psmall = bpi.side() <= bpj.side() ? bpi : bpj;
        const Box enc = pair_metrics(g, parent(I), parent(J), params.theta).enclosing;
        f.f1 = modulate(k.L, dhat) * modulate(k.S, psmall.side()) *
               modulate(k.D, 1.0 + box_rdist(enc, bref));
        return f;
    }
    const CubePairMetrics m = pair_metrics(g, I, J, params.theta);
    if (!(m.lambda > 1.0)) return f;
    const Box bi = cube_box(g, I);
    const Box bj = cube_box(g, J);
    const Box& small_box = bj.side() <= bi.side() ? bj : bi;
    const double lmin = small_box.side();
    const Box kbox = dilate(small_box, 1.0 + m.inrdist_hat);
    for (int kk = 0; kk <= params.dilate_terms; ++kk) {
        const Box dil = dilate(kbox, std::ldexp(1.0, kk));
        const double decay = std::pow(2.0, -kk * k.delta);
        const double dfac = modulate(k.D, 1.0 + box_rdist(dil, bref));
        f.f2 += decay * mu.mass(dil) / std::pow(dil.side(), k.alpha) * dfac;
        f.f3 += decay * dfac;
    }
    const double ls = modulate(k.L, lmin) * modulate(k.S, lmin);
    f.f2 *= ls;
    f.f3 *= ls;
    return f;
}

}  // namespace

double bump_bound(const OperatorHandle& op, const Cube& I, const Cube& J, BumpKind kind,
                  const BumpParams& params) {
    const GridFamily& g = op.grids();
    const AtomicMeasure& mu = op.measure();
    const KernelSpec& k = op.kernel();
    const auto regime = bump_regime(g, I, J, params.theta);
    if (!regime || *regime != kind)
        throw DomainError("bump_bound: pair is not in the requested regime");

    const double mi = mu.mass(g, I);
    const double mj = mu.mass(g, J);
    if (mi <= 0.0 || mj <= 0.0) return 0.0;

    const CubePairMetrics m = pair_metrics(g, I, J, params.theta);
    const Box bi = cube_box(g, I);
    const Box bj = cube_box(g, J);
    const double lmin = std::min(bi.side(), bj.side());
    const double lmax = std::max(bi.side(), bj.side());
    const BumpFactors f = bump_factors(op, I, J, params);

    if (kind == BumpKind::Separated) {
        return std::pow(m.ec, k.delta) / std::pow(1.0 + m.rdist, k.alpha + k.delta) *
               std::sqrt(mi * mj) / std::pow(lmax, k.alpha) * f.total();
    }
    if (kind == BumpKind::Adjacent) {
        // the decay scale is the parents' inner relative distance (the band
        // index k), which also measures the gap between the supports
        return std::pow(1.0 + m.inrdist_hat, -(k.alpha + k.delta)) * std::sqrt(mi * mj) /
               std::pow(lmin, k.alpha) * f.total();
    }

    // the nested display carries the modified wavelet on the larger cube's
    // side; for the reversed orientation swap the roles
    const Cube& big = (bj.side() <= bi.side()) ? I : J;
    const Cube& small_cube = (bj.side() <= bi.side()) ? J : I;
    const Box big_box = cube_box(g, big);
    const Box small_box_c = cube_box(g, small_cube);
    double sum_r = 0.0;
    for (const Cube& R : {big, parent(big)}) {
        const double mr = mu.mass(g, R);
        if (mr <= 0.0) continue;
        const double mrj = mu.mass(intersect_box(cube_box(g, R), small_box_c));
        sum_r += std::sqrt(mrj / mr);
    }
    const Box bp_big = cube_box(g, parent(big));
    const Point cp_small = cube_box(g, parent(small_cube)).center();
    const double ring_ind = (bp_big.contains(cp_small) && !big_box.contains(cp_small)) ? 1.0 : 0.0;
    return std::pow(1.0 + m.inrdist_hat, -k.delta) * sum_r * f.f2 +
           std::pow(1.0 + m.inrdist_hat, -(k.alpha + k.delta)) * std::sqrt(mi * mj) /
               std::pow(lmin, k.alpha) * ring_ind * f.f3;
}

double smoothness_ratio(const KernelSpec& k, int n, const Point& t, const Point& tp,
                        const Point& x, const Point& xp) {
    const double move = norm2(t, tp, n) + norm2(x, xp, n);
    const double r = norm2(t, x, n);
    if (!(2.0 * move < r)) throw DomainError("smoothness_ratio: requires 2(|t-t'|+|x-x'|) < |t-x|");
    if (move == 0.0) return 0.0;

    auto eval = [&](const Point& a, const Point& b) {
        switch (k.family) {
            case KernelFamily::SignedPower: {
                double s = 0.0;
                for (int d = 0; d < n; ++d) s += b[d] - a[d];
                const double sgn = (s > 0.0) ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
                return sgn * std::pow(norm2(a, b, n), -k.alpha);
            }
            case KernelFamily::CauchyReal: {
                const double rr = norm2(a, b, n);
                return (b[0] - a[0]) / (rr * rr);
            }
            case KernelFamily::Custom:
                return k.custom(a, b, n);
        }
        return 0.0;
    };
    const double num = std::abs(eval(t, x) - eval(tp, xp));
    Point sum{{0, 0, 0}};
    for (int d = 0; d < n; ++d) sum[d] = t[d] + x[d];
    const double f = modulate(k.L, r) * modulate(k.S, r) * modulate(k.D, norm(sum, n));
    const double den = std::pow(move / r, k.delta) * f / std::pow(r, k.alpha);
    return den > 0.0 ? num / den : 0.0;
}

}  // namespace nhsparse
