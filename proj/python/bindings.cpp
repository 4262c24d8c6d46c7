#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "robust_merton/errors.hpp"
#include "robust_merton/levy_metric.hpp"
#include "robust_merton/policy_engine.hpp"
#include "robust_merton/sim_engine.hpp"
#include "robust_merton/spec_io.hpp"

namespace py = pybind11;
using namespace robust_merton;

namespace {

using AtomList = std::vector<std::pair<Vector, double>>;

DiscreteLevyMeasure measure_from(const AtomList& atoms) {
    std::vector<JumpAtom> out;
    for (const auto& [z, w] : atoms) out.push_back({z, w});
    return DiscreteLevyMeasure(std::move(out));
}

LevyTriplet triplet_from(const Vector& drift, const Matrix& covariance, const AtomList& atoms) {
    return LevyTriplet(drift, covariance, measure_from(atoms));
}

UtilitySpec utility_from(const std::string& family, double parameter) {
    if (family == "crra-log") return UtilitySpec::crra_log();
    if (family == "crra-power") return UtilitySpec::crra_power(parameter);
    if (family == "cara") return UtilitySpec::cara(parameter);
    throw ParseError("unknown utility family '" + family + "'");
}

py::dict solution_dict(const MarketSpec& spec, const SaddleSolution& solution) {
    py::dict out;
    out["global_value"] = solution.global_value;
    out["value_function"] = solution.value_function;
    out["kernels"] = solution.kernels();
    out["investment"] = solution.skeleton.investment();
    out["weights"] = solution.skeleton.weights();
    out["control_nodes"] = solution.control_nodes;
    out["nodes"] = spec.grid.nodes();
    std::vector<double> certificates;
    for (const auto& c : solution.skeleton.cells) certificates.push_back(c.certificate);
    out["certificates"] = certificates;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Robust consumption-investment solver under CRRA and CARA utility";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<DegenerateSupport>(m, "DegenerateSupport", base.ptr());
    py::register_exception<LpFailure>(m, "LpFailure", base.ptr());
    py::register_exception<NoConvergence>(m, "NoConvergence", base.ptr());
    py::register_exception<StepRejection>(m, "StepRejection", base.ptr());
    py::register_exception<SaddleCertificateFailure>(m, "SaddleCertificateFailure", base.ptr());
    py::register_exception<RangeViolation>(m, "RangeViolation", base.ptr());
    py::register_exception<MismatchError>(m, "MismatchError", base.ptr());
    py::register_exception<BoundsViolation>(m, "BoundsViolation", base.ptr());
    py::register_exception<Bankruptcy>(m, "Bankruptcy", base.ptr());
    py::register_exception<EqualityViolation>(m, "EqualityViolation", base.ptr());
    py::register_exception<SaddleViolation>(m, "SaddleViolation", base.ptr());

    m.def(
        "normalize_spec", [](const std::string& text) { return market_spec_to_json(parse_market_spec(text)); },
        py::arg("text"), "Parse a JSON market spec and re-serialize it with bounds filled in.");

    m.def(
        "check_spec",
        [](const std::string& text) {
            const MarketSpec spec = parse_market_spec(text);
            py::list segments;
            for (std::size_t k = 0; k < spec.sets.size(); ++k) {
                const auto& set = spec.sets[k];
                py::dict row;
                row["bound"] = set.bound();
                const auto support = jump_support_union(set);
                if (!support.degenerate()) {
                    const auto report = check_nondegeneracy(support.locations);
                    row["kappa_nondegeneracy"] = report.kappa_nondegeneracy;
                    row["kappa_bound"] = report.kappa_bound;
                }
                if (spec.utility.is_crra()) {
                    if (spec.utility.p() < 0.0) {
                        const auto s = check_sharpe_crra(set, spec.utility.p());
                        row["sharpe_pass"] = s.pass;
                        row["sharpe_squared"] = s.worst_sharpe_squared;
                    }
                } else {
                    const auto s = check_sharpe_cara(set, spec.grid.breakpoints()[k], spec.grid.horizon());
                    row["sharpe_pass"] = s.pass;
                    row["sharpe_squared"] = s.worst_sharpe_squared;
                }
                segments.append(row);
            }
            return segments;
        },
        py::arg("text"), "Run the assumption checks per segment; raises on degenerate support.");

    m.def(
        "solve",
        [](const std::string& text, double certificate_tolerance) {
            const MarketSpec spec = parse_market_spec(text);
            SolverConfig cfg;
            cfg.certificate_tolerance = certificate_tolerance;
            std::optional<SaddleSolution> solution;
            {
                py::gil_scoped_release release;
                solution = solve(spec, cfg);
            }
            return solution_dict(spec, *solution);
        },
        py::arg("text"), py::arg("certificate_tolerance") = 1e-6);

    m.def(
        "estimate_objective",
        [](const std::string& text, std::size_t paths, std::uint64_t seed, double step) {
            const MarketSpec spec = parse_market_spec(text);
            std::optional<SaddleSolution> solution;
            std::optional<ObjectiveEstimate> est;
            {
                py::gil_scoped_release release;
                solution = solve(spec, SolverConfig{});
                const SimConfig sim{seed, paths, step, true};
                est = estimate_objective(optimal_policy(*solution), worst_case_path(*solution, spec), spec, sim);
            }
            py::dict out;
            out["mean"] = est->mean;
            out["standard_error"] = est->standard_error;
            out["paths"] = est->paths;
            out["target"] = solution->value_function;
            return out;
        },
        py::arg("text"), py::arg("paths") = 10000, py::arg("seed") = 1, py::arg("step") = 1e-3,
        "Monte-Carlo objective at the solved saddle, with the closed-form target.");

    m.def(
        "local_kernel_crra",
        [](const Vector& x, const Vector& drift, const Matrix& covariance, const AtomList& atoms, double p) {
            return local_kernel_crra(x, triplet_from(drift, covariance, atoms), p);
        },
        py::arg("x"), py::arg("drift"), py::arg("covariance"), py::arg("atoms") = AtomList{}, py::arg("p"));

    m.def(
        "local_kernel_cara",
        [](const Vector& x, const Vector& drift, const Matrix& covariance, const AtomList& atoms, double q,
           double a) { return local_kernel_cara(x, triplet_from(drift, covariance, atoms), q, a); },
        py::arg("x"), py::arg("drift"), py::arg("covariance"), py::arg("atoms") = AtomList{}, py::arg("q"),
        py::arg("a"));

    m.def(
        "kr_distance",
        [](const AtomList& mu, const AtomList& nu, double epsilon) {
            return kr_distance(measure_from(mu), measure_from(nu), MetricConfig{epsilon});
        },
        py::arg("mu"), py::arg("nu"), py::arg("epsilon") = 2.0,
        "Bounded-Hölder distance between two ε-weighted discrete Lévy measures.");

    m.def(
        "optimal_consumption",
        [](const std::vector<double>& breakpoints, double step, const std::vector<double>& kernels,
           const std::string& family, double parameter) {
            const TimeGrid grid(breakpoints, step);
            const UtilitySpec utility = utility_from(family, parameter);
            const ControlPath path = utility.is_crra() ? optimal_consumption_crra(kernels, utility, grid)
                                                       : optimal_excess_consumption_cara(kernels, grid);
            return control_at_nodes(path, grid);
        },
        py::arg("breakpoints"), py::arg("step"), py::arg("kernels"), py::arg("family"), py::arg("parameter") = 0.0,
        "c* (CRRA) or D* (CARA) at the grid nodes for a per-cell kernel path.");

    m.def(
        "global_value",
        [](const std::vector<double>& breakpoints, double step, const std::vector<double>& kernels,
           const std::string& family, double parameter) {
            return global_value(kernels, utility_from(family, parameter), TimeGrid(breakpoints, step));
        },
        py::arg("breakpoints"), py::arg("step"), py::arg("kernels"), py::arg("family"), py::arg("parameter") = 0.0);
}
