#include "robust_merton/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "robust_merton/errors.hpp"
#include "robust_merton/sim_engine.hpp"
#include "robust_merton/spec_io.hpp"

namespace robust_merton {

namespace {

namespace fs = std::filesystem;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string output_path(const RunConfig& cfg, const std::string& stem) {
    return (fs::path(cfg.out_dir) / (stem + "." + extension(cfg.format))).string();
}

// Locates a stored table in the requested format, falling back to the other one.
std::string find_table(const RunConfig& cfg, const std::string& stem) {
    for (const auto& ext : {extension(cfg.format), std::string("csv"), std::string("jsonl")}) {
        const auto path = fs::path(cfg.out_dir) / (stem + "." + ext);
        if (fs::exists(path)) return path.string();
    }
    throw ParseError("no " + stem + " table in '" + cfg.out_dir + "'; run solve first");
}

struct StoredSolution {
    std::vector<Vector> investment;
    std::vector<std::vector<double>> weights;
    std::vector<double> kernels;
    std::vector<double> control_nodes;
};

StoredSolution read_solution(const MarketSpec& spec, const Table& table) {
    if (table.row_count() != spec.grid.cell_count()) {
        throw ParseError("solution table has " + std::to_string(table.row_count()) + " rows, spec has " +
                         std::to_string(spec.grid.cell_count()) + " cells");
    }
    StoredSolution s;
    for (std::size_t i = 0; i < table.row_count(); ++i) {
        s.investment.push_back(to_eigen(table.numbers(i, "x")));
        s.weights.push_back(table.numbers(i, "weights"));
        s.kernels.push_back(table.number(i, "kernel"));
        s.control_nodes.push_back(table.number(i, "control_t0"));
        if (s.investment.back().size() != spec.dimension() ||
            s.weights.back().size() != spec.set_for_cell(i).size()) {
            throw ParseError("solution row " + std::to_string(i) + " does not match the spec");
        }
    }
    s.control_nodes.push_back(table.number(table.row_count() - 1, "control_t1"));
    return s;
}

SaddleSkeleton skeleton_from(const MarketSpec& spec, const StoredSolution& stored) {
    SaddleSkeleton skeleton;
    for (std::size_t i = 0; i < stored.kernels.size(); ++i) {
        const auto& set = spec.set_for_cell(i);
        skeleton.cells.push_back(SaddleCell{i, stored.investment[i], stored.weights[i],
                                            set.mixture(stored.weights[i]), stored.kernels[i], 0.0});
    }
    return skeleton;
}

SolverConfig solver_config(const RunConfig& cfg) {
    SolverConfig solver;
    solver.certificate_tolerance = cfg.tolerance;
    solver.seed = cfg.seed;
    return solver;
}

double max_abs_difference(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

void print_table(std::ostream& out, const Table& table) { out << table.to_string(OutputFormat::Csv); }

}  // namespace

int exit_code_for(const std::exception& error) {
    if (dynamic_cast<const ParseError*>(&error)) return 1;
    if (dynamic_cast<const ValidationError*>(&error) || dynamic_cast<const DegenerateSupport*>(&error) ||
        dynamic_cast<const DomainError*>(&error)) {
        return 2;
    }
    if (dynamic_cast<const LpFailure*>(&error) || dynamic_cast<const NoConvergence*>(&error) ||
        dynamic_cast<const StepRejection*>(&error) ||
        dynamic_cast<const SaddleCertificateFailure*>(&error)) {
        return 3;
    }
    if (dynamic_cast<const RangeViolation*>(&error) || dynamic_cast<const MismatchError*>(&error) ||
        dynamic_cast<const BoundsViolation*>(&error) || dynamic_cast<const Bankruptcy*>(&error) ||
        dynamic_cast<const EqualityViolation*>(&error) || dynamic_cast<const SaddleViolation*>(&error)) {
        return 4;
    }
    return 1;
}

Table check_table(const MarketSpec& spec, bool& pass) {
    Table table({"segment", "check", "status", "value", "limit", "detail"});
    pass = true;
    auto row = [&](std::size_t k, const std::string& check, bool ok, double value, double limit,
                   const std::string& detail, const std::string& status = "") {
        table.add_row({static_cast<double>(k), check, status.empty() ? (ok ? "pass" : "fail") : status,
                       value, limit, detail});
        pass = pass && ok;
    };
    const double nan = std::nan("");
    for (std::size_t k = 0; k < spec.sets.size(); ++k) {
        const auto& set = spec.sets[k];
        row(k, "bound", true, ConfidenceSet::minimal_bound(set.vertices(), spec.epsilon), set.bound(),
            "vertex norms and d_L(F,0) within kappa");
        const auto support = jump_support_union(set);
        if (support.degenerate()) {
            row(k, "nondegeneracy", true, nan, nan, "jump-free segment: no jump support to check",
                "jump-free");
        } else {
            try {
                const auto report = check_nondegeneracy(support.locations);
                row(k, "nondegeneracy", true, report.kappa_nondegeneracy, report.kappa_bound,
                    "value = kappa_nd (1/inscribed radius), limit = kappa_bound (max |z|)");
            } catch (const DegenerateSupport& e) {
                row(k, "nondegeneracy", false, nan, nan, e.what());
            }
        }
        SharpeCheck sharpe;
        std::string detail;
        if (spec.utility.is_crra()) {
            sharpe = check_sharpe_crra(set, spec.utility.p());
            detail = "squared Sharpe ratio vs 2(1-p)^2/(-p)";
        } else {
            // The bound increases with q, so the segment start is the binding time.
            sharpe = check_sharpe_cara(set, spec.grid.breakpoints()[k], spec.grid.horizon());
            detail = "squared Sharpe ratio vs 2q(1-log q) at the segment start";
        }
        if (spec.utility.is_crra() && spec.utility.p() >= 0.0) {
            row(k, "sharpe", true, nan, sharpe.bound_squared, "no Sharpe bound for p >= 0", "vacuous");
        } else {
            row(k, "sharpe", sharpe.pass, sharpe.worst_sharpe_squared, sharpe.bound_squared, detail);
        }
    }
    return table;
}

Table solution_table(const MarketSpec& spec, const SaddleSolution& solution) {
    Table table({"cell", "t0", "t1", "segment", "x", "weights", "kernel", "certificate", "control_t0",
                 "control_t1", "value_t0"});
    const bool has_value = spec.utility.family() != UtilityFamily::CrraLog;
    const auto values = has_value ? value_path(solution.control_nodes, spec.utility, spec.grid)
                                  : std::vector<double>(solution.control_nodes.size(), std::nan(""));
    for (const auto& c : solution.skeleton.cells) {
        const auto& cell = spec.grid.cells()[c.cell];
        table.add_row({static_cast<double>(c.cell), cell.start, cell.end, static_cast<double>(cell.segment),
                       to_std(c.x), c.weights, c.value, c.certificate,
                       solution.control.at(c.cell, cell.start), solution.control.at(c.cell, cell.end),
                       values[c.cell]});
    }
    return table;
}

Table summary_table(const MarketSpec& spec, const SaddleSolution& solution) {
    Table table({"key", "value"});
    const auto kernels = solution.kernels();
    const auto [kmin, kmax] = std::minmax_element(kernels.begin(), kernels.end());
    double max_certificate = 0.0;
    for (const auto& c : solution.skeleton.cells) max_certificate = std::max(max_certificate, c.certificate);
    table.add_row({"family", spec.utility.name()});
    if (spec.utility.family() == UtilityFamily::CrraPower) table.add_row({"p", spec.utility.p()});
    if (spec.utility.family() == UtilityFamily::Cara) table.add_row({"a", spec.utility.a()});
    table.add_row({"horizon", spec.grid.horizon()});
    table.add_row({"cells", static_cast<double>(spec.grid.cell_count())});
    table.add_row({"w0", spec.initial_wealth});
    table.add_row({"global_value", solution.global_value});
    table.add_row({"value_function", solution.value_function});
    table.add_row({"kernel_min", *kmin});
    table.add_row({"kernel_max", *kmax});
    table.add_row({"max_certificate", max_certificate});
    if (spec.utility.family() != UtilityFamily::CrraLog) {
        const auto bounds = hjb_bounds(*kmin, *kmax, spec.utility, spec.grid.horizon());
        table.add_row({"v_min", bounds.v_min});
        table.add_row({"v_max", bounds.v_max});
    }
    return table;
}

Table verify_table(const MarketSpec& spec, const Table& solution_rows, const RunConfig& cfg, bool& pass) {
    Table table({"check", "status", "value", "detail"});
    pass = true;
    const double nan = std::nan("");
    auto run = [&](const std::string& name, const std::function<std::pair<double, std::string>()>& body) {
        try {
            const auto [value, detail] = body();
            table.add_row({name, "pass", value, detail});
        } catch (const Error& e) {
            table.add_row({name, "fail", nan, e.what()});
            pass = false;
        }
    };
    auto skip = [&](const std::string& name, const std::string& why) {
        table.add_row({name, "skipped", nan, why});
    };

    const StoredSolution stored = read_solution(spec, solution_rows);
    const auto& grid = spec.grid;
    const auto nodes = grid.nodes();
    const SolverConfig solver = solver_config(cfg);

    run("kernel_consistency", [&] {
        const auto recomputed = kernel_path(stored.investment, TripletPath::from_weights(spec, stored.weights),
                                            grid, spec.utility);
        double worst = 0.0;
        for (std::size_t i = 0; i < recomputed.size(); ++i) {
            const double diff = std::abs(recomputed[i] - stored.kernels[i]);
            worst = std::max(worst, diff);
            if (diff > 1e-9 * std::max(1.0, std::abs(stored.kernels[i]))) {
                throw MismatchError("stored kernel differs from g(x*, theta*) in cell " + std::to_string(i));
            }
        }
        return std::make_pair(worst, std::string("max |g(x*, theta*) - stored kernel|"));
    });

    run("saddle_certificate", [&] {
        double worst = 0.0;
        std::map<std::string, double> seen;
        for (std::size_t i = 0; i < grid.cell_count(); ++i) {
            const auto& cell = grid.cells()[i];
            const double q = spec.utility.is_crra() ? 1.0 : q_schedule(cell.midpoint(), grid.horizon());
            // CRRA rows of one segment share (x*, θ*); certify each distinct row once.
            std::ostringstream key;
            key << cell.segment << ':' << q << ':' << stored.kernels[i];
            for (double v : to_std(stored.investment[i])) key << ':' << format_double(v);
            for (double w : stored.weights[i]) key << ':' << format_double(w);
            if (seen.count(key.str())) continue;
            const auto& set = spec.set_for_cell(i);
            const auto region = segment_region(spec, cell.segment, solver);
            const double trust = 4.0 * std::max(1.0, stored.investment[i].cwiseAbs().maxCoeff());
            const double cert = saddle_certificate(set, region, KernelContext{spec.utility, q},
                                                   stored.investment[i], stored.weights[i],
                                                   stored.kernels[i], trust, solver, i);
            seen[key.str()] = cert;
            worst = std::max(worst, cert);
            if (cert > cfg.tolerance) {
                std::ostringstream msg;
                msg << "cell " << i << ": sampled saddle violation " << cert << " exceeds " << cfg.tolerance;
                throw SaddleViolation(msg.str());
            }
        }
        return std::make_pair(worst, std::string("max sampled saddle-inequality violation"));
    });

    if (spec.utility.is_crra()) {
        run("consumption_range", [&] {
            consumption_range_check(stored.control_nodes, stored.kernels, spec.utility.p(), true, nodes);
            const double top = *std::max_element(stored.control_nodes.begin(), stored.control_nodes.end());
            return std::make_pair(top, std::string("max c*; bracket and c* <= 1 hold at every node"));
        });
    } else {
        run("excess_nonnegative", [&] {
            excess_consumption_check(stored.control_nodes, stored.kernels, nodes);
            const double low = *std::min_element(stored.control_nodes.begin(), stored.control_nodes.end());
            return std::make_pair(low, std::string("min D*; non-negative wherever the kernel path is"));
        });
    }

    const ControlPath closed = spec.utility.is_crra()
                                   ? optimal_consumption_crra(stored.kernels, spec.utility, grid)
                                   : optimal_excess_consumption_cara(stored.kernels, grid);
    const auto closed_nodes = control_at_nodes(closed, grid);
    run("control_closed_form", [&] {
        const double diff = max_abs_difference(closed_nodes, stored.control_nodes);
        if (diff > 1e-9) {
            throw MismatchError("stored control differs from the closed form by " + format_double(diff));
        }
        return std::make_pair(diff, std::string("max |stored control - closed form|"));
    });

    if (spec.utility.family() == UtilityFamily::CrraLog) {
        skip("ode_cross_check", "log utility: c* = q_t has no Riccati equation");
        skip("hjb_bounds", "log utility: bounds are stated for p != 0");
    } else {
        run("ode_cross_check", [&] {
            const double ode_step = 1e-3 * (grid.breakpoints()[1] - grid.breakpoints()[0]);
            const auto ode = spec.utility.is_crra()
                                 ? solve_riccati_crra(stored.kernels, spec.utility.p(), grid, ode_step)
                                 : solve_ode_cara(stored.kernels, grid, ode_step);
            const double diff = max_abs_difference(ode, closed_nodes);
            if (diff > 1e-6) throw MismatchError("ODE and closed form differ by " + format_double(diff));
            return std::make_pair(diff, std::string("sup |RK4 - closed form| over grid nodes"));
        });
        run("hjb_bounds", [&] {
            const auto [kmin, kmax] = std::minmax_element(stored.kernels.begin(), stored.kernels.end());
            const auto bounds = hjb_bounds(*kmin, *kmax, spec.utility, grid.horizon());
            const auto values = value_path(stored.control_nodes, spec.utility, grid);
            check_hjb_containment(values, bounds, spec.utility);
            std::ostringstream detail;
            detail << "V(0) within [" << format_double(bounds.v_min) << ", " << format_double(bounds.v_max) << "]";
            return std::make_pair(values.front(), detail.str());
        });
    }

    run("global_value", [&] {
        const double g = global_value(stored.kernels, spec.utility, grid);
        return std::make_pair(g, std::string("closed form equals direct evaluation"));
    });

    if (cfg.paths == 0) {
        skip("martingale_equality", "no Monte-Carlo paths requested");
        skip("objective_saddle", "no Monte-Carlo paths requested");
        return table;
    }
    SimConfig sim{cfg.seed, cfg.paths, cfg.step, true};
    std::optional<SaddleSolution> assembled;
    run("assemble", [&] {
        assembled = assemble_solution(spec, skeleton_from(spec, stored));
        return std::make_pair(assembled->value_function, std::string("value function u(w0)"));
    });
    if (!assembled) return table;
    run("martingale_equality", [&] {
        const auto report = verify_martingale_equality(*assembled, spec, sim);
        std::ostringstream detail;
        detail << "mean " << format_double(report.estimate.mean) << " se "
               << format_double(report.estimate.standard_error) << " target " << format_double(report.target);
        return std::make_pair(report.z_score, detail.str());
    });
    run("objective_saddle", [&] {
        const auto report = verify_objective_saddle(*assembled, spec, sim);
        double worst = -INFINITY;
        for (const auto& c : report.checks) {
            const double z = c.standard_error > 0 ? c.difference / c.standard_error : 0.0;
            worst = std::max(worst, c.name.rfind("policy", 0) == 0 ? z : -z);
        }
        return std::make_pair(worst, std::to_string(report.checks.size()) +
                                         " perturbations; value = largest adverse z-score");
    });
    return table;
}

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        const MarketSpec spec = load_market_spec(cfg.spec_path);
        if (cfg.command == "check" || cfg.command == "solve") {
            bool pass = false;
            const Table checks = check_table(spec, pass);
            if (cfg.command == "check") {
                print_table(out, checks);
                if (!cfg.out_dir.empty()) write_table(output_path(cfg, "check"), checks, cfg.format);
                if (!pass) {
                    for (std::size_t i = 0; i < checks.row_count(); ++i) {
                        if (checks.text(i, "status") == "fail" && checks.text(i, "check") == "nondegeneracy") {
                            err << "DegenerateSupport: " << checks.text(i, "detail") << '\n';
                        }
                    }
                }
                return pass ? 0 : 2;
            }
            if (!pass) {
                print_table(err, checks);
                err << "assumption checks failed; not solving\n";
                return 2;
            }
            const SaddleSolution solution = solve(spec, solver_config(cfg));
            write_table(output_path(cfg, "solution"), solution_table(spec, solution), cfg.format);
            const Table summary = summary_table(spec, solution);
            write_table(output_path(cfg, "summary"), summary, cfg.format);
            print_table(out, summary);
            return 0;
        }

        const Table rows = read_table(find_table(cfg, "solution"));
        if (cfg.command == "verify") {
            bool pass = false;
            const Table verdicts = verify_table(spec, rows, cfg, pass);
            write_table(output_path(cfg, "verify"), verdicts, cfg.format);
            print_table(out, verdicts);
            return pass ? 0 : 4;
        }

        const StoredSolution stored = read_solution(spec, rows);
        if (cfg.command == "evaluate") {
            const SaddleSolution solution = assemble_solution(spec, skeleton_from(spec, stored));
            const auto kernels = kernel_path(stored.investment, TripletPath::from_weights(spec, stored.weights),
                                             spec.grid, spec.utility);
            const double direct = global_kernel_from_path(kernels, solution.control, spec.grid, spec.utility);
            Table table({"key", "value"});
            table.add_row({"global_kernel_direct", direct});
            table.add_row({"global_value_closed_form", global_value_closed_form(kernels, spec.utility, spec.grid)});
            table.add_row({"value_function", solution.value_function});
            write_table(output_path(cfg, "evaluate"), table, cfg.format);
            print_table(out, table);
            return 0;
        }
        if (cfg.command == "simulate") {
            const SaddleSolution solution = assemble_solution(spec, skeleton_from(spec, stored));
            SimConfig sim{cfg.seed, cfg.paths, cfg.step, true};
            const auto estimate =
                estimate_objective(optimal_policy(solution), worst_case_path(solution, spec), spec, sim);
            Table table({"mean", "standard_error", "paths", "seed", "step", "target"});
            table.add_row({estimate.mean, estimate.standard_error, static_cast<double>(estimate.paths),
                           std::to_string(estimate.seed), estimate.step, solution.value_function});
            write_table(output_path(cfg, "simulate"), table, cfg.format);
            print_table(out, table);
            return 0;
        }
        if (cfg.command == "report") {
            const Table summary = read_table(find_table(cfg, "summary"));
            write_table(output_path(cfg, "report_solution"), rows, cfg.format);
            write_table(output_path(cfg, "report_summary"), summary, cfg.format);
            out << "summary\n";
            for (std::size_t i = 0; i < summary.row_count(); ++i) {
                out << "  " << summary.text(i, "key") << " = " << summary.text(i, "value") << '\n';
            }
            out << "cells: " << rows.row_count() << '\n';
            print_table(out, rows);
            return 0;
        }
        err << "unknown command '" << cfg.command << "'\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Robust consumption-investment solver and verifier"};
    app.require_subcommand(1, 1);
    RunConfig cfg;
    std::string format = "csv";
    const std::vector<std::pair<std::string, std::string>> commands{
        {"check", "validate the standing assumptions of a market spec"},
        {"solve", "compute saddle points, optimal controls and the value"},
        {"evaluate", "re-evaluate global kernels at a stored solution"},
        {"simulate", "Monte-Carlo estimate of the objective at a stored solution"},
        {"verify", "run ODE, HJB, certificate and Monte-Carlo checks on a stored solution"},
        {"report", "print and re-emit a stored solution"}};
    for (const auto& [name, description] : commands) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--spec", cfg.spec_path, "market spec file (JSON)")->required();
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--seed", cfg.seed, "random seed");
        sub->add_option("--paths", cfg.paths, "Monte-Carlo path count");
        sub->add_option("--step", cfg.step, "simulation step");
        sub->add_option("--tol", cfg.tolerance, "certificate tolerance");
        sub->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "jsonl"}));
        for (auto* option : sub->get_options()) option->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        sub->callback([&cfg, name = name] { cfg.command = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream cli_out;
        std::ostringstream cli_err;
        const int code = app.exit(e, cli_out, cli_err);
        out << cli_out.str();
        err << cli_err.str();
        return code == 0 ? 0 : 1;
    }
    cfg.format = parse_format(format);
    return run_command(cfg, out, err);
}

}  // namespace robust_merton
