#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nhsparse/common.hpp"

namespace nhsparse {

enum class Openness : std::uint8_t { HalfOpen, Open, Closed };

// Axis-parallel cube of a shifted dyadic grid, addressed by exact integers.
// Side length is base_side * 2^-scale; real coordinates are derived on demand.
struct Cube {
    int grid = 0;
    int scale = 0;
    std::array<std::int64_t, kMaxDim> j{{0, 0, 0}};
    Openness open = Openness::HalfOpen;

    friend bool operator==(const Cube& a, const Cube& b) {
        return a.grid == b.grid && a.scale == b.scale && a.j == b.j;
    }
};

struct CubeHash {
    std::size_t operator()(const Cube& c) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ (std::uint64_t(c.grid) << 56);
        h ^= std::uint64_t(std::uint32_t(c.scale)) * 0xff51afd7ed558ccdULL;
        for (auto v : c.j) {
            h ^= std::uint64_t(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

// k shifted dyadic grids D_i = a_i + D_0 with a_i = lambda_i * (1,...,1).
struct GridFamily {
    int n = 1;
    int k = 1;
    double base_side = 1.0;
    std::vector<double> offsets;  // lambda_i, already scaled by base_side
    std::uint64_t seed = 0;
};

// Concrete box with per-query openness. Dilations, enclosing cubes and the
// truncation cube Q live here; grid cubes convert via cube_box().
struct Box {
    int n = 1;
    Point lo{{0, 0, 0}};
    Point hi{{0, 0, 0}};
    Openness open = Openness::Closed;

    double side() const { return hi[0] - lo[0]; }
    Point center() const {
        Point c{{0, 0, 0}};
        for (int d = 0; d < n; ++d) c[d] = 0.5 * (lo[d] + hi[d]);
        return c;
    }
    bool contains(const Point& x) const {
        for (int d = 0; d < n; ++d) {
            switch (open) {
                case Openness::HalfOpen:
                    if (!(lo[d] <= x[d] && x[d] < hi[d])) return false;
                    break;
                case Openness::Open:
                    if (!(lo[d] < x[d] && x[d] < hi[d])) return false;
                    break;
                case Openness::Closed:
                    if (!(lo[d] <= x[d] && x[d] <= hi[d])) return false;
                    break;
            }
        }
        return true;
    }
};

enum class PairClass : std::uint8_t { Distant, Close, Nested, Attached };

struct CubePairMetrics {
    double ec = 1.0;
    double dist = 0.0;
    double rdist = 0.0;
    double inrdist = 0.0;
    double inrdist_hat = 0.0;  // inrdist of the parents, feeds lambda
    double lambda = 1.0;       // ec^theta * (1 + inrdist_hat)
    Box enclosing;
    PairClass cls = PairClass::Attached;
};

// Number of grids required for dimension n and growth exponent alpha:
// k = n - floor(alpha) + [alpha integer].
int grid_count(int n, double alpha);

GridFamily make_grids(int n, double alpha, double base_side, std::uint64_t offset_seed,
                      int boundary_depth = 32);

double cube_side(const GridFamily& g, const Cube& c);
Box cube_box(const GridFamily& g, const Cube& c);
Box cube_box(const GridFamily& g, const Cube& c, Openness open);

Cube parent(const Cube& c);
std::vector<Cube> children(const GridFamily& g, const Cube& c);
std::vector<Cube> descendants(const GridFamily& g, const Cube& c, int depth);
std::vector<Cube> friends_of(const GridFamily& g, const Cube& c);

// Cube containing point x at the given scale of the given grid.
Cube cube_at(const GridFamily& g, int grid, int scale, const Point& x);

// Exact containment. Same grid goes through integer arithmetic; cross-grid
// falls back to box geometry (offsets are rationally independent, so
// boundary coincidences do not occur).
bool cube_contains(const GridFamily& g, const Cube& outer, const Cube& inner);
bool box_contains(const Box& outer, const Box& inner);

// r-fold dilation about the center, as a closed box.
Box dilate(const Box& b, double r);
Box dilate(const GridFamily& g, const Cube& c, double r);

double set_distance(const Box& a, const Box& b);

// Closed intersection; degenerates to a zero-volume box when disjoint.
Box intersect_box(const Box& a, const Box& b);

// Distance from box J to the inner boundary of R (the union of the
// boundaries of R's children).
double inner_boundary_distance(const Box& j, const Box& r);

CubePairMetrics pair_metrics(const GridFamily& g, const Cube& I, const Cube& J, double theta);

// The cubes I in `universe` with side 2^e * side(J) and
// m-1 <= rdist(parent(I),parent(J)) < m; with k_band set (m must be 1),
// additionally k-1 <= inrdist(parent(I),parent(J)) < k.
std::vector<Cube> cube_family(const GridFamily& g, const Cube& J, int e, int m,
                              std::optional<int> k_band, const std::vector<Cube>& universe,
                              double theta);

std::string cube_to_string(const Cube& c, int n);
Cube cube_from_string(const std::string& s);

double default_theta(double alpha, double delta);

}  // namespace nhsparse
