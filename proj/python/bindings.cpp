// Python bindings for the main operations: fixtures, mass/density queries,
// Haar analysis, dual pairs, stopping-time families, and domination runs.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nhsparse/suites.hpp"

namespace py = pybind11;
using namespace nhsparse;

namespace {

Box interval_box(int n, std::vector<double> lo, std::vector<double> hi, bool half_open) {
    Box b;
    b.n = n;
    b.open = half_open ? Openness::HalfOpen : Openness::Closed;
    for (int d = 0; d < n; ++d) {
        b.lo[d] = lo.at(static_cast<std::size_t>(d));
        b.hi[d] = hi.at(static_cast<std::size_t>(d));
    }
    return b;
}

// One fixture (measure + grids) with the operations bound as methods.
class Workspace {
public:
    explicit Workspace(const std::string& fixture_name, std::uint64_t grid_seed = 7)
        : fx_(make_fixture(fixture_name, grid_seed)) {}

    static Workspace from_measure_json(const std::string& text, std::uint64_t grid_seed) {
        Workspace w;
        w.fx_.name = "measure.json";
        w.fx_.measure = measure_from_json(text);
        w.fx_.grids =
            make_grids(w.fx_.measure.dim(), w.fx_.measure.alpha(), 1.0, grid_seed);
        if (w.fx_.measure.cert_depth() < 0) w.fx_.measure.certify_growth(w.fx_.grids, 14);
        return w;
    }

    std::string name() const { return fx_.name; }
    int dim() const { return fx_.measure.dim(); }
    double alpha() const { return fx_.measure.alpha(); }
    double growth_constant() const { return fx_.measure.growth_constant(); }
    std::size_t atom_count() const { return fx_.measure.atoms().size(); }
    double total_mass() const { return fx_.measure.total(); }

    std::vector<std::pair<std::vector<double>, double>> atoms() const {
        std::vector<std::pair<std::vector<double>, double>> out;
        for (const auto& a : fx_.measure.atoms()) {
            std::vector<double> x(a.x.begin(), a.x.begin() + fx_.measure.dim());
            out.push_back({x, a.w});
        }
        return out;
    }

    double mass(std::vector<double> lo, std::vector<double> hi, bool half_open) const {
        return fx_.measure.mass(interval_box(fx_.measure.dim(), lo, hi, half_open));
    }

    py::dict density_report(std::vector<double> lo, std::vector<double> hi, int truncation,
                            int samples, double delta) const {
        const DensityReport rep = density(
            fx_.measure, interval_box(fx_.measure.dim(), lo, hi, false), truncation, samples,
            delta);
        py::dict d;
        d["sup_term"] = rep.sup_term;
        d["series_term"] = rep.series_term;
        d["rho"] = rep.rho;
        d["tail_bound"] = rep.tail_bound;
        d["sup_is_estimate"] = rep.sup_is_estimate;
        return d;
    }

    std::string support_cube() const {
        return cube_to_string(enclosing_half_support_cube(fx_.measure, fx_.grids, 0),
                              fx_.grids.n);
    }

    int resolving_depth_of_support() const {
        return resolving_depth(fx_.measure, fx_.grids,
                               enclosing_half_support_cube(fx_.measure, fx_.grids, 0));
    }

    std::vector<std::pair<std::string, double>> haar_coefficients(
        const std::vector<double>& f, int depth) const {
        check_length(f);
        const Cube q = enclosing_half_support_cube(fx_.measure, fx_.grids, 0);
        std::vector<std::pair<std::string, double>> out;
        for (const Cube& c : atom_cubes(fx_.measure, fx_.grids, q, depth))
            out.push_back(
                {cube_to_string(c, fx_.grids.n), haar_coefficient(fx_.measure, fx_.grids, f, c)});
        return out;
    }

    py::dict plancherel_report(const std::vector<double>& f, int depth) const {
        check_length(f);
        const Cube q = enclosing_half_support_cube(fx_.measure, fx_.grids, 0);
        const PlancherelReport rep = plancherel(fx_.measure, fx_.grids, f, q, depth);
        py::dict d;
        d["coef_energy"] = rep.coef_energy;
        d["norm_sq"] = rep.function_norm_sq;
        d["ratio"] = rep.ratio;
        return d;
    }

    double dual_pair(const std::vector<double>& f, const std::vector<double>& g,
                     const std::string& kernel_family, double kernel_alpha, double delta,
                     double gamma, int q_exponent) const {
        check_length(f);
        check_length(g);
        OperatorHandle op(make_kernel(kernel_family, kernel_alpha, delta),
                          TruncationSpec{gamma, q_exponent}, fx_.measure, fx_.grids);
        return op.dual_pair(f, g);
    }

    double testing_ratio(const std::string& cube_literal, const std::string& kernel_family,
                         double kernel_alpha, double delta, double gamma,
                         int q_exponent) const {
        OperatorHandle op(make_kernel(kernel_family, kernel_alpha, delta),
                          TruncationSpec{gamma, q_exponent}, fx_.measure, fx_.grids);
        return op.testing_ratio(cube_from_string(cube_literal));
    }

    py::dict build_sparse_family(const std::vector<double>& f, const std::vector<double>& g,
                                 double c_stop, int q_levels) const {
        check_length(f);
        check_length(g);
        const Cube qp = enclosing_half_support_cube(fx_.measure, fx_.grids, 0);
        Cube q = qp;
        for (int i = 0; i < q_levels; ++i) q = parent(q);
        StoppingConfig cfg;
        cfg.c_stop = c_stop;
        cfg.q = q_levels;
        cfg.n_depth = resolving_depth(fx_.measure, fx_.grids, qp) + 1;
        const SparseFamily fam = build_family(fx_.measure, fx_.grids, f, g, qp, q, cfg);
        const PackingReport pr = packing_check(fx_.measure, fx_.grids, fam);
        py::dict d;
        d["size"] = fam.size();
        d["levels"] = fam.levels.size();
        d["chain"] = fam.chain.size();
        d["tau"] = cfg.tau(fx_.grids.k);
        d["worst_packing_levels"] = pr.worst_ratio_levels;
        d["worst_packing_chain"] = pr.worst_ratio_chain;
        d["sparse"] = pr.sparse;
        d["lambda_value"] = sparse_form(fx_.measure, fx_.grids, fam, f, g);
        py::list cubes;
        for (const auto& sc : fam.all()) cubes.append(cube_to_string(sc.cube, fx_.grids.n));
        d["cubes"] = cubes;
        return d;
    }

    py::dict dominate(const std::vector<double>& f, const std::vector<double>& g,
                      const std::string& kernel_family, double kernel_alpha, double delta,
                      double gamma, int q_exponent, double c_stop, int q_levels) const {
        check_length(f);
        check_length(g);
        OperatorHandle op(make_kernel(kernel_family, kernel_alpha, delta),
                          TruncationSpec{gamma, q_exponent}, fx_.measure, fx_.grids);
        DominationConfig dc;
        dc.stopping.c_stop = c_stop;
        dc.stopping.q = q_levels;
        dc.stopping.n_depth =
            resolving_depth(fx_.measure, fx_.grids,
                            enclosing_half_support_cube(fx_.measure, fx_.grids, 0)) +
            1;
        const DominationReport rep =
            domination_report(op, fx_.measure, fx_.grids, f, g, dc);
        py::dict d;
        d["dual_pair"] = rep.dual_pair_value;
        d["sparse_form"] = rep.sparse_value;
        d["ratio"] = rep.ratio;
        d["ratio_infinite"] = rep.ratio_infinite;
        d["family_size"] = rep.family_size;
        d["packing_levels"] = rep.worst_packing_levels;
        d["packing_chain"] = rep.worst_packing_chain;
        return d;
    }

    std::vector<double> square_function(const std::vector<double>& f, int j, int sign, int e,
                                        double delta, int depth) const {
        check_length(f);
        const Cube q = enclosing_half_support_cube(fx_.measure, fx_.grids, 0);
        const int d = depth > 0
                          ? depth
                          : std::min(8, resolving_depth(fx_.measure, fx_.grids, q));
        SquareContext ctx(fx_.measure, fx_.grids, 0, q, d);
        SquareParams p;
        p.alpha = fx_.measure.alpha();
        p.delta = delta;
        p.theta = default_theta(p.alpha, delta);
        p.e = e;
        return square_fn(ctx, f, j, sign, p);
    }

    std::vector<double> generate(const std::string& kind, std::uint64_t seed) const {
        return gen_function(fx_.measure, kind, seed);
    }

private:
    Workspace() = default;

    static KernelSpec make_kernel(const std::string& family, double alpha, double delta) {
        KernelSpec k;
        if (family == "signed_power")
            k.family = KernelFamily::SignedPower;
        else if (family == "cauchy_real")
            k.family = KernelFamily::CauchyReal;
        else
            throw DomainError("unknown kernel family '" + family + "'");
        k.alpha = alpha;
        k.delta = delta;
        return k;
    }

    void check_length(const std::vector<double>& f) const {
        if (f.size() != fx_.measure.atoms().size())
            throw DomainError("function length does not match the atom count");
    }

    Fixture fx_;
};

}  // namespace

PYBIND11_MODULE(_nhsparse, m) {
    m.doc() = "sparse domination experiments on atomic power-growth measures";

    py::class_<Workspace>(m, "Workspace")
        .def(py::init<const std::string&, std::uint64_t>(), py::arg("fixture"),
             py::arg("grid_seed") = 7)
        .def_static("from_measure_json", &Workspace::from_measure_json, py::arg("text"),
                    py::arg("grid_seed") = 7)
        .def_property_readonly("name", &Workspace::name)
        .def_property_readonly("dim", &Workspace::dim)
        .def_property_readonly("alpha", &Workspace::alpha)
        .def_property_readonly("growth_constant", &Workspace::growth_constant)
        .def_property_readonly("atom_count", &Workspace::atom_count)
        .def_property_readonly("total_mass", &Workspace::total_mass)
        .def("atoms", &Workspace::atoms)
        .def("mass", &Workspace::mass, py::arg("lo"), py::arg("hi"),
             py::arg("half_open") = false)
        .def("density", &Workspace::density_report, py::arg("lo"), py::arg("hi"),
             py::arg("truncation") = 64, py::arg("samples") = 8, py::arg("delta") = 1.0)
        .def("support_cube", &Workspace::support_cube)
        .def("resolving_depth", &Workspace::resolving_depth_of_support)
        .def("haar_coefficients", &Workspace::haar_coefficients, py::arg("f"),
             py::arg("depth") = 6)
        .def("plancherel", &Workspace::plancherel_report, py::arg("f"), py::arg("depth") = -1)
        .def("dual_pair", &Workspace::dual_pair, py::arg("f"), py::arg("g"),
             py::arg("kernel") = "signed_power", py::arg("alpha") = 1.0, py::arg("delta") = 1.0,
             py::arg("gamma") = 0.0625, py::arg("q_exponent") = 2)
        .def("testing_ratio", &Workspace::testing_ratio, py::arg("cube"),
             py::arg("kernel") = "signed_power", py::arg("alpha") = 1.0, py::arg("delta") = 1.0,
             py::arg("gamma") = 0.0625, py::arg("q_exponent") = 2)
        .def("build_sparse_family", &Workspace::build_sparse_family, py::arg("f"), py::arg("g"),
             py::arg("c_stop") = 16.0, py::arg("q") = 1)
        .def("dominate", &Workspace::dominate, py::arg("f"), py::arg("g"),
             py::arg("kernel") = "signed_power", py::arg("alpha") = 1.0, py::arg("delta") = 1.0,
             py::arg("gamma") = 0.0625, py::arg("q_exponent") = 2, py::arg("c_stop") = 16.0,
             py::arg("q") = 1)
        .def("square_function", &Workspace::square_function, py::arg("f"), py::arg("j"),
             py::arg("sign"), py::arg("e") = 1, py::arg("delta") = 1.0, py::arg("depth") = -1)
        .def("generate", &Workspace::generate, py::arg("kind"), py::arg("seed") = 1);

    m.def(
        "run_suites",
        [](const std::string& config_json) {
            const ExperimentConfig cfg = config_from_json(config_json);
            return run_experiment(cfg).to_json(false);
        },
        py::arg("config_json"),
        "run the verification suites for a config and return the report as json");

    m.attr("fixture_names") =
        py::make_tuple("uniform8-1d", "uniform64-1d", "cantor4", "cantor6", "twocluster",
                       "lebesgue1d");
}
