#include "nhsparse/fixtures.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace nhsparse {

using nlohmann::json;

namespace {

std::vector<MeasureAtom> cantor_atoms(int depth) {
    // left endpoints of the level-`depth` construction intervals
    std::vector<MeasureAtom> atoms;
    const int count = 1 << depth;
    const double w = 1.0 / static_cast<double>(count);
    for (int idx = 0; idx < count; ++idx) {
        double x = 0.0;
        double scale = 1.0 / 3.0;
        for (int b = depth - 1; b >= 0; --b) {
            if ((idx >> b) & 1) x += 2.0 * scale;
            scale /= 3.0;
        }
        atoms.push_back({{x, 0, 0}, w});
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const MeasureAtom& a, const MeasureAtom& b) { return a.x[0] < b.x[0]; });
    return atoms;
}

std::vector<MeasureAtom> uniform_atoms(int count) {
    std::vector<MeasureAtom> atoms;
    const double w = 1.0 / static_cast<double>(count);
    for (int i = 0; i < count; ++i) atoms.push_back({{(i + 0.5) / count, 0, 0}, w});
    return atoms;
}

std::vector<MeasureAtom> twocluster_atoms() {
    // separation a few multiples of the cluster size, so cross-cluster cube
    // pairs land in the low relative-distance bands while staying distant
    std::vector<MeasureAtom> atoms;
    const double w = 1.0 / 32.0;
    for (int i = 0; i < 16; ++i) {
        atoms.push_back({{0.14 + 0.0075 * i, 0, 0}, w});
        atoms.push_back({{0.74 + 0.0075 * i, 0, 0}, w});
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const MeasureAtom& a, const MeasureAtom& b) { return a.x[0] < b.x[0]; });
    return atoms;
}

std::vector<MeasureAtom> lebesgue_atoms(double length, int per_unit) {
    std::vector<MeasureAtom> atoms;
    const double h = 1.0 / per_unit;
    const int count = static_cast<int>(length * per_unit);
    for (int i = 0; i < count; ++i) atoms.push_back({{(i + 0.5) * h, 0, 0}, h});
    return atoms;
}

}  // namespace

Fixture make_fixture(const std::string& name, std::uint64_t grid_seed, int cert_depth) {
    Fixture fx;
    fx.name = name;
    double alpha = 1.0;
    double base_side = 1.0;
    std::vector<MeasureAtom> atoms;
    if (name == "uniform8-1d") {
        atoms = uniform_atoms(8);
    } else if (name == "uniform64-1d") {
        atoms = uniform_atoms(64);
    } else if (name == "cantor6") {
        alpha = std::log(2.0) / std::log(3.0);
        atoms = cantor_atoms(6);
    } else if (name == "cantor4") {
        alpha = std::log(2.0) / std::log(3.0);
        atoms = cantor_atoms(4);
    } else if (name == "twocluster") {
        atoms = twocluster_atoms();
    } else if (name == "lebesgue1d") {
        atoms = lebesgue_atoms(80.0, 32);
        base_side = 128.0;
    } else {
        throw ConfigError("make_fixture: unknown fixture '" + name + "'");
    }
    fx.measure = AtomicMeasure(1, alpha, std::move(atoms));
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        fx.grids = make_grids(1, alpha, base_side, grid_seed + attempt);
        if (atom_grid_separation(fx.measure, fx.grids, cert_depth)) break;
        if (attempt == 63)
            throw ConfigError("make_fixture: no grid offset separates the atoms at depth " +
                              std::to_string(cert_depth));
    }
    fx.measure.certify_growth(fx.grids, cert_depth);
    return fx;
}

std::string measure_to_json(const AtomicMeasure& mu) {
    json j;
    j["type"] = "atomic";
    j["n"] = mu.dim();
    j["alpha"] = mu.alpha();
    j["c_growth"] = mu.growth_constant();
    j["cert_depth"] = mu.cert_depth();
    json arr = json::array();
    for (const auto& a : mu.atoms()) {
        json pt = json::array();
        for (int d = 0; d < mu.dim(); ++d) pt.push_back(a.x[d]);
        arr.push_back(json{{"x", pt}, {"w", a.w}});
    }
    j["atoms"] = arr;
    return j.dump(2);
}

AtomicMeasure measure_from_json(const std::string& text) {
    json j = json::parse(text);
    const std::string type = j.value("type", "atomic");
    const double alpha = j.at("alpha").get<double>();
    const int n = j.value("n", 1);
    std::vector<MeasureAtom> atoms;
    if (type == "atomic") {
        for (const auto& item : j.at("atoms")) {
            MeasureAtom a;
            const auto& pt = item.at("x");
            for (int d = 0; d < n; ++d) a.x[d] = pt.at(d).get<double>();
            a.w = item.at("w").get<double>();
            atoms.push_back(a);
        }
    } else if (type == "cantor") {
        atoms = cantor_atoms(j.at("depth").get<int>());
    } else if (type == "uniform") {
        atoms = uniform_atoms(j.at("count").get<int>());
    } else {
        throw ConfigError("measure_from_json: unknown type '" + type + "'");
    }
    AtomicMeasure mu(n, alpha, std::move(atoms));
    if (j.contains("c_growth") && j.contains("cert_depth"))
        mu.set_growth(j["c_growth"].get<double>(), j["cert_depth"].get<int>());
    return mu;
}

std::string kernel_to_json(const KernelSpec& k, const TruncationSpec& t) {
    json j;
    j["family"] = k.family == KernelFamily::SignedPower ? "signed_power" : "cauchy_real";
    j["alpha"] = k.alpha;
    j["delta"] = k.delta;
    j["gamma"] = t.gamma;
    j["Q_exponent"] = t.q_exponent;
    return j.dump(2);
}

std::string coefficients_to_json(const CoefficientMap& cm, int n) {
    std::vector<std::tuple<int, std::array<std::int64_t, kMaxDim>, int, double>> rows;
    for (const auto& [key, coeff] : cm.entries) {
        const auto& [grid, scale, j] = key;
        rows.push_back({scale, j, grid, coeff});
    }
    std::sort(rows.begin(), rows.end());
    json arr = json::array();
    for (const auto& [scale, j, grid, coeff] : rows) {
        Cube c;
        c.grid = grid;
        c.scale = scale;
        c.j = j;
        arr.push_back(json{{"cube", cube_to_string(c, n)}, {"coeff", coeff}});
    }
    return arr.dump(2);
}

std::pair<KernelSpec, TruncationSpec> kernel_from_json(const std::string& text) {
    json j = json::parse(text);
    KernelSpec k;
    const std::string fam = j.value("family", "signed_power");
    if (fam == "signed_power")
        k.family = KernelFamily::SignedPower;
    else if (fam == "cauchy_real")
        k.family = KernelFamily::CauchyReal;
    else
        throw ConfigError("kernel_from_json: unknown family '" + fam + "'");
    k.alpha = j.at("alpha").get<double>();
    k.delta = j.at("delta").get<double>();
    TruncationSpec t;
    t.gamma = j.value("gamma", 0.0625);
    t.q_exponent = j.value("Q_exponent", 2);
    return {k, t};
}

GridFunction gen_function(const AtomicMeasure& mu, const std::string& kind, std::uint64_t seed) {
    const auto& atoms = mu.atoms();
    GridFunction f(atoms.size(), 0.0);
    Rng rng(seed);
    if (kind == "ones") {
        std::fill(f.begin(), f.end(), 1.0);
    } else if (kind == "poly") {
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            const double x = atoms[i].x[0];
            f[i] = 1.0 + x + 0.5 * x * x;
        }
    } else if (kind == "trig") {
        const double freq = 1.0 + static_cast<double>(seed % 5);
        for (std::size_t i = 0; i < atoms.size(); ++i)
            f[i] = 1.5 + std::sin(freq * M_PI * atoms[i].x[0]);
    } else if (kind == "spike") {
        const std::size_t at = rng.next_below(atoms.size());
        f[at] = 1.0;
    } else if (kind == "random") {
        for (auto& v : f) v = rng.next_double();
    } else {
        throw ConfigError("gen_function: unknown kind '" + kind + "'");
    }
    return f;
}

GridFunction smooth_positive_function(const AtomicMeasure& mu, Rng& rng) {
    // bounded, strictly positive, oscillation on unit scale only: suitable
    // for truncation sweeps, where variation below the smallest cutoff
    // would re-excite the near-diagonal pairs
    const auto& atoms = mu.atoms();
    GridFunction f(atoms.size(), 0.0);
    const double f1 = 0.5 + 2.5 * rng.next_double();
    const double f2 = 0.5 + 4.0 * rng.next_double();
    const double p1 = rng.next_double(), p2 = rng.next_double();
    const double base = 0.2 + rng.next_double();
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const double x = atoms[i].x[0];
        f[i] = base + 0.5 * (1.0 + std::sin(2.0 * M_PI * (f1 * x + p1))) +
               0.25 * (1.0 + std::cos(2.0 * M_PI * (f2 * x + p2)));
    }
    return f;
}

GridFunction random_positive_function(const AtomicMeasure& mu, Rng& rng) {
    const auto& atoms = mu.atoms();
    GridFunction f(atoms.size(), 0.0);
    const double freq = 1.0 + 4.0 * rng.next_double();
    const double phase = rng.next_double();
    for (std::size_t i = 0; i < atoms.size(); ++i)
        f[i] = 0.25 + 0.75 * (1.0 + std::sin(2.0 * M_PI * (freq * atoms[i].x[0] + phase))) * 0.5;
    const int spikes = 1 + static_cast<int>(rng.next_below(3));
    for (int s = 0; s < spikes; ++s)
        f[rng.next_below(atoms.size())] += 20.0 + 40.0 * rng.next_double();
    return f;
}

GridFunction random_decayed_function(const AtomicMeasure& mu, const GridFamily& g, Rng& rng) {
    // random Haar-style oscillation per scale with geometric decay, so the
    // coefficient energy is dominated by the coarse scales
    const auto& atoms = mu.atoms();
    GridFunction f(atoms.size(), 1.0 + rng.next_double());
    const int levels = 7;
    for (int r = 1; r <= levels; ++r) {
        const double amp = std::pow(0.45, r) * rng.uniform(0.5, 1.0);
        const double side = std::ldexp(g.base_side, -r);
        const double phase = rng.next_double();
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            const double cell = std::floor((atoms[i].x[0] - g.offsets[0]) / side + phase);
            const double sgn = (static_cast<long long>(cell) % 2 == 0) ? 1.0 : -1.0;
            f[i] += amp * sgn;
        }
    }
    return f;
}

}  // namespace nhsparse
