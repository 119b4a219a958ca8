// lab: config-driven experiment runner for the sparse domination library.
//
// Subcommands:
//   lab run --config exp.json          verification suites -> report.json
//   lab fixtures generate <name>       deterministic measure/function/kernel files
//   lab sparse build|check|dominate    stopping-time families and domination runs
//   lab probe                          square-function norm probes -> CSV

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nhsparse/suites.hpp"

using namespace nhsparse;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFixture = 3;
constexpr int kExitAssertion = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& text) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    // atomic publish: write a sibling temp file, then rename
    const fs::path tmp = p.parent_path() / (p.filename().string() + ".tmp");
    {
        std::ofstream out(tmp);
        out << text;
    }
    fs::rename(tmp, p);
}

GridFunction load_function(const AtomicMeasure& mu, const std::string& path) {
    json j = json::parse(read_file(path));
    if (j.contains("values")) {
        auto v = j["values"].get<std::vector<double>>();
        if (v.size() != mu.atoms().size())
            throw std::runtime_error("function length does not match the measure");
        return v;
    }
    return gen_function(mu, j.value("gen", "random"), j.value("seed", 1));
}

json family_to_json(const SparseFamily& fam, int n) {
    json j;
    j["q_prime"] = cube_to_string(fam.q_prime, n);
    j["q"] = cube_to_string(fam.q, n);
    json chain = json::array();
    for (const Cube& c : fam.chain) chain.push_back(cube_to_string(c, n));
    j["chain"] = chain;
    json levels = json::array();
    json prov = json::object();
    const char* names[] = {"root", "ancestor", "f-condition", "g-condition", "offspring1",
                           "offspring2"};
    for (const auto& lvl : fam.levels) {
        json jl = json::array();
        for (const auto& sc : lvl) {
            jl.push_back(cube_to_string(sc.cube, n));
            prov[cube_to_string(sc.cube, n)] = names[static_cast<int>(sc.provenance)];
        }
        levels.push_back(jl);
    }
    j["levels"] = levels;
    j["provenance"] = prov;
    j["coefficients"] = json(fam.coefficients);
    return j;
}

int cmd_run(const std::string& config_path) {
    ExperimentConfig cfg;
    try {
        cfg = config_from_json(read_file(config_path));
    } catch (const std::ios_base::failure& e) {
        std::cerr << "config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "config parse error: " << e.what() << "\n";
        return kExitConfig;
    }
    RunReport rep;
    try {
        rep = run_experiment(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "fixture error: " << e.what() << "\n";
        return kExitFixture;
    }
    write_file(cfg.output_path, rep.to_json(true));
    if (cfg.format == "csv") {
        std::string csv = "suite,check,pass,value,tolerance\n";
        for (const auto& s : rep.suites)
            for (const auto& c : s.checks)
                csv += s.name + "," + c.name + "," + (c.pass ? "1" : "0") + "," +
                       std::to_string(c.value) + "," + std::to_string(c.tolerance) + "\n";
        fs::path base = fs::path(cfg.output_path).parent_path();
        write_file((base / "tables" / "checks.csv").string(), csv);
    }
    for (const auto& s : rep.suites)
        std::cout << (s.pass ? "[PASS] " : "[FAIL] ") << s.name << " (" << s.checks.size()
                  << " checks)\n";
    std::cout << (rep.pass ? "all suites passed" : "suite failures present") << "\n";
    return rep.pass ? 0 : kExitAssertion;
}

int cmd_fixtures(const std::string& name, const std::string& out_dir) {
    Fixture fx;
    try {
        fx = make_fixture(name);
    } catch (const std::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitConfig;
    }
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_file((dir / (name + ".measure.json")).string(), measure_to_json(fx.measure));
    json f;
    f["gen"] = "trig";
    f["seed"] = 11;
    write_file((dir / (name + ".f.json")).string(), f.dump(2));
    json gj;
    gj["gen"] = "poly";
    gj["seed"] = 12;
    write_file((dir / (name + ".g.json")).string(), gj.dump(2));
    KernelSpec k;
    k.alpha = fx.measure.alpha();
    k.delta = 1.0;
    write_file((dir / (name + ".kernel.json")).string(), kernel_to_json(k, TruncationSpec{}));
    std::cout << "wrote " << name << " fixture files to " << dir.string() << "\n";
    return 0;
}

struct SparseArgs {
    std::string measure_path, kernel_path, f_path, g_path, family_path, out = "family.json";
    double c_stop = 16.0;
    int q = 1;
    double gamma = 0.01;
    std::string gamma_sweep;  // comma-separated overrides --gamma
    int depth = 0;            // 0: resolve automatically
    std::uint64_t grid_seed = 7;
};

Fixture fixture_from_measure_file(const std::string& path, std::uint64_t grid_seed) {
    Fixture fx;
    fx.name = path;
    fx.measure = measure_from_json(read_file(path));
    fx.grids = make_grids(fx.measure.dim(), fx.measure.alpha(), 1.0, grid_seed);
    if (fx.measure.cert_depth() < 0) fx.measure.certify_growth(fx.grids, 14);
    return fx;
}

int cmd_sparse_build(const SparseArgs& a) {
    try {
        Fixture fx = fixture_from_measure_file(a.measure_path, a.grid_seed);
        const AtomicMeasure& mu = fx.measure;
        GridFunction f =
            a.f_path.empty() ? gen_function(mu, "trig", 11) : load_function(mu, a.f_path);
        GridFunction g =
            a.g_path.empty() ? gen_function(mu, "poly", 12) : load_function(mu, a.g_path);
        const Cube qp = enclosing_half_support_cube(mu, fx.grids, 0);
        Cube q = qp;
        for (int i = 0; i < a.q; ++i) q = parent(q);
        StoppingConfig sc;
        sc.c_stop = a.c_stop;
        sc.q = a.q;
        sc.n_depth = resolving_depth(mu, fx.grids, qp) + 1;
        const SparseFamily fam = build_family(mu, fx.grids, f, g, qp, q, sc);
        write_file(a.out, family_to_json(fam, fx.grids.n).dump(2));
        std::cout << "family with " << fam.size() << " cubes -> " << a.out << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFixture;
    }
}

int cmd_sparse_check(const SparseArgs& a) {
    try {
        Fixture fx = fixture_from_measure_file(a.measure_path, a.grid_seed);
        json j = json::parse(read_file(a.family_path));
        SparseFamily fam;
        fam.q_prime = cube_from_string(j.at("q_prime").get<std::string>());
        fam.q = cube_from_string(j.at("q").get<std::string>());
        for (const auto& s : j.at("chain"))
            fam.chain.push_back(cube_from_string(s.get<std::string>()));
        int level = 0;
        for (const auto& lvl : j.at("levels")) {
            std::vector<SelectedCube> cubes;
            for (const auto& s : lvl)
                cubes.push_back({cube_from_string(s.get<std::string>()), level, Provenance::Root});
            fam.levels.push_back(cubes);
            ++level;
        }
        if (j.contains("coefficients"))
            fam.coefficients = j["coefficients"].get<std::map<std::string, double>>();
        const PackingReport rep = packing_check(fx.measure, fx.grids, fam);
        std::cout << "worst level packing ratio: " << rep.worst_ratio_levels << "\n"
                  << "worst chain packing ratio: " << rep.worst_ratio_chain << "\n"
                  << (rep.sparse ? "family is sparse" : "family is NOT sparse") << "\n";
        if (rep.offender)
            std::cout << "offending cube: " << cube_to_string(*rep.offender, fx.grids.n) << "\n";
        return rep.sparse ? 0 : kExitAssertion;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFixture;
    }
}

int cmd_sparse_dominate(const SparseArgs& a) {
    try {
        Fixture fx = fixture_from_measure_file(a.measure_path, a.grid_seed);
        const AtomicMeasure& mu = fx.measure;
        auto [k, tr] = kernel_from_json(read_file(a.kernel_path));
        GridFunction f =
            a.f_path.empty() ? gen_function(mu, "trig", 11) : load_function(mu, a.f_path);
        GridFunction g =
            a.g_path.empty() ? gen_function(mu, "poly", 12) : load_function(mu, a.g_path);
        DominationConfig dc;
        dc.stopping.c_stop = a.c_stop;
        dc.stopping.q = a.q;
        dc.stopping.n_depth =
            a.depth > 0
                ? a.depth
                : resolving_depth(mu, fx.grids, enclosing_half_support_cube(mu, fx.grids, 0)) + 1;

        std::vector<double> gammas;
        if (a.gamma_sweep.empty()) {
            gammas.push_back(a.gamma);
        } else {
            std::string item;
            std::istringstream in(a.gamma_sweep);
            while (std::getline(in, item, ',')) gammas.push_back(std::stod(item));
        }
        json cells = json::array();
        for (double gamma : gammas) {
            TruncationSpec t = tr;
            t.gamma = gamma;
            OperatorHandle op(k, t, mu, fx.grids);
            const DominationReport rep = domination_report(op, mu, fx.grids, f, g, dc);
            json out;
            out["gamma"] = gamma;
            out["dual_pair"] = rep.dual_pair_value;
            out["sparse_form"] = rep.sparse_value;
            if (rep.ratio_infinite)
                out["ratio"] = "inf";
            else
                out["ratio"] = rep.ratio;
            out["family_size"] = rep.family_size;
            out["packing_levels"] = rep.worst_packing_levels;
            out["packing_chain"] = rep.worst_packing_chain;
            cells.push_back(out);
        }
        std::cout << (cells.size() == 1 ? cells[0].dump(2) : cells.dump(2)) << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFixture;
    }
}

int cmd_probe(const std::string& measure_path, const std::string& out_path, std::uint64_t seed,
              std::uint64_t grid_seed) {
    try {
        Fixture fx = measure_path.empty() ? make_fixture("cantor6", grid_seed)
                                          : fixture_from_measure_file(measure_path, grid_seed);
        const AtomicMeasure& mu = fx.measure;
        const Cube q = enclosing_half_support_cube(mu, fx.grids, 0);
        const int depth = std::min(resolving_depth(mu, fx.grids, q), 8);
        SquareContext ctx(mu, fx.grids, 0, q, depth);
        SquareParams params;
        params.alpha = mu.alpha();
        params.delta = 1.0;
        params.theta = default_theta(params.alpha, params.delta);
        params.m_max = 16;
        std::vector<GridFunction> corpus;
        Rng rng(seed);
        for (int i = 0; i < 20; ++i) corpus.push_back(random_positive_function(mu, rng));

        std::string csv = "probe,j,sign,e,constant,witness_id,depth,seed\n";
        for (int e : {0, 1, 2}) {
            SquareParams p = params;
            p.e = e;
            for (int j = 1; j <= 3; ++j) {
                for (int sign : {+1, -1}) {
                    for (ProbeKind kind : {ProbeKind::L2, ProbeKind::WeakL1}) {
                        const ProbeReport rep = operator_norm_probe(ctx, kind, j, sign, p, corpus);
                        csv += std::string(kind == ProbeKind::L2 ? "L2" : "weakL1") + "," +
                               std::to_string(j) + "," + std::to_string(sign) + "," +
                               std::to_string(e) + "," + std::to_string(rep.constant) + "," +
                               std::to_string(rep.witness) + "," + std::to_string(depth) + "," +
                               std::to_string(seed) + "\n";
                    }
                }
            }
        }
        write_file(out_path, csv);
        std::cout << "probe table -> " << out_path << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFixture;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse domination laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run verification suites from a config file");
    run->add_option("--config", config_path, "experiment config (json)")->required();

    std::string fixture_name, fixture_out = "fixtures";
    auto* fixtures = app.add_subcommand("fixtures", "manage fixture files");
    auto* generate = fixtures->add_subcommand("generate", "write a named fixture");
    generate->add_option("name", fixture_name, "fixture name")->required();
    generate->add_option("--out", fixture_out, "output directory");

    SparseArgs sa;
    auto* sparse = app.add_subcommand("sparse", "stopping-time families");
    auto* sb = sparse->add_subcommand("build", "build a sparse family");
    sb->add_option("--measure", sa.measure_path)->required();
    sb->add_option("--f", sa.f_path);
    sb->add_option("--g", sa.g_path);
    sb->add_option("--c-stop", sa.c_stop);
    sb->add_option("--q", sa.q);
    sb->add_option("--grid-seed", sa.grid_seed);
    sb->add_option("--out", sa.out);
    auto* sc = sparse->add_subcommand("check", "packing-check a family file");
    sc->add_option("--measure", sa.measure_path)->required();
    sc->add_option("--family", sa.family_path)->required();
    sc->add_option("--grid-seed", sa.grid_seed);
    auto* sd = sparse->add_subcommand("dominate", "domination ratio for one cell");
    sd->add_option("--measure", sa.measure_path)->required();
    sd->add_option("--kernel", sa.kernel_path)->required();
    sd->add_option("--gamma", sa.gamma);
    sd->add_option("--gamma-sweep", sa.gamma_sweep, "comma-separated gamma list");
    sd->add_option("--depth", sa.depth, "selection depth cap (0 = resolve)");
    sd->add_option("--f", sa.f_path);
    sd->add_option("--g", sa.g_path);
    sd->add_option("--c-stop", sa.c_stop);
    sd->add_option("--q", sa.q);
    sd->add_option("--grid-seed", sa.grid_seed);

    std::string probe_measure, probe_out = "tables/probes.csv";
    std::uint64_t probe_seed = 1, probe_grid_seed = 7;
    auto* probe = app.add_subcommand("probe", "square function norm probes");
    probe->add_option("--measure", probe_measure);
    probe->add_option("--out", probe_out);
    probe->add_option("--seed", probe_seed);
    probe->add_option("--grid-seed", probe_grid_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    if (*run) return cmd_run(config_path);
    if (*generate) return cmd_fixtures(fixture_name, fixture_out);
    if (*sb) return cmd_sparse_build(sa);
    if (*sc) return cmd_sparse_check(sa);
    if (*sd) return cmd_sparse_dominate(sa);
    if (*probe) return cmd_probe(probe_measure, probe_out, probe_seed, probe_grid_seed);
    std::cerr << app.help();
    return kExitConfig;
}
