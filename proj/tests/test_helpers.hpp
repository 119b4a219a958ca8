#pragma once

#include <cmath>
#include <vector>

#include "nhsparse/fixtures.hpp"

namespace nhtest {

using namespace nhsparse;

// Grid with offset 0, handy for hand-computed interval examples.
inline GridFamily plain_grid(int n = 1) {
    GridFamily g;
    g.n = n;
    g.k = 1;
    g.base_side = 1.0;
    g.offsets = {0.0};
    return g;
}

inline Cube mk_cube(int scale, std::int64_t j0, std::int64_t j1 = 0, std::int64_t j2 = 0) {
    Cube c;
    c.scale = scale;
    c.j = {j0, j1, j2};
    return c;
}

inline AtomicMeasure uniform_measure(int count, double lo = 0.0, double hi = 1.0) {
    std::vector<MeasureAtom> atoms;
    for (int i = 0; i < count; ++i)
        atoms.push_back({{lo + (hi - lo) * (i + 0.5) / count, 0, 0}, 1.0 / count});
    return AtomicMeasure(1, 1.0, std::move(atoms));
}

inline double rel_err(double a, double b) {
    const double s = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / s;
}

}  // namespace nhtest
