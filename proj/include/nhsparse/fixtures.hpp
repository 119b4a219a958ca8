#pragma once

#include <string>

#include "nhsparse/squarefns.hpp"

namespace nhsparse {

struct Fixture {
    AtomicMeasure measure;
    GridFamily grids;
    std::string name;
};

// Named deterministic fixtures: "uniform8-1d", "uniform64-1d", "cantor6",
// "cantor4", "twocluster", "lebesgue1d".
Fixture make_fixture(const std::string& name, std::uint64_t grid_seed = 7, int cert_depth = 14);

// Measure spec serialization {type, alpha, n, atoms | depth, seed}.
std::string measure_to_json(const AtomicMeasure& mu);
AtomicMeasure measure_from_json(const std::string& text);

std::string kernel_to_json(const KernelSpec& k, const TruncationSpec& t);

// [{cube, coeff}] sorted by (scale, coords).
std::string coefficients_to_json(const CoefficientMap& cm, int n);
std::pair<KernelSpec, TruncationSpec> kernel_from_json(const std::string& text);

// Deterministic test functions on the atoms of a measure.
GridFunction gen_function(const AtomicMeasure& mu, const std::string& kind, std::uint64_t seed);

// Random nonnegative function mixes used by the verification harnesses:
// smooth profile + a few spikes, coefficient energy decaying with scale.
GridFunction random_positive_function(const AtomicMeasure& mu, Rng& rng);
// Strictly positive smooth profile without spikes; bounded oscillation.
GridFunction smooth_positive_function(const AtomicMeasure& mu, Rng& rng);
// Random signed function with per-scale spectral decay (bounded Haar tails).
GridFunction random_decayed_function(const AtomicMeasure& mu, const GridFamily& g, Rng& rng);

}  // namespace nhsparse
