#pragma once

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <string>

#include "robust_merton/policy_engine.hpp"
#include "robust_merton/report.hpp"

namespace robust_merton {

struct RunConfig {
    std::string command;
    std::string spec_path;
    std::string out_dir = "robust_merton_out";
    std::uint64_t seed = 1;
    std::size_t paths = 100000;
    double step = 1e-3;
    double tolerance = 1e-6;
    OutputFormat format = OutputFormat::Csv;
};

/// 0 success, 1 usage/parse, 2 validation, 3 solver, 4 verification.
int exit_code_for(const std::exception& error);

/// Per-segment assumption report; pass is false when any check fails.
Table check_table(const MarketSpec& spec, bool& pass);
Table solution_table(const MarketSpec& spec, const SaddleSolution& solution);
Table summary_table(const MarketSpec& spec, const SaddleSolution& solution);

/// Runs every verification against a stored solution table; pass is false on any failure.
Table verify_table(const MarketSpec& spec, const Table& solution, const RunConfig& cfg, bool& pass);

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace robust_merton
