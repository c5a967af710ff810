#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kktsolve/hykkt.hpp"
#include "kktsolve/lu.hpp"
#include "kktsolve/refine.hpp"
#include "kktsolve/sequence.hpp"

namespace kktsolve {

enum class StrategyKind { full_lu, refactor, refactor_ir_fgmres, refactor_ir_richardson, hykkt };

inline constexpr std::array<StrategyKind, 5> kAllStrategies = {
    StrategyKind::full_lu, StrategyKind::refactor, StrategyKind::refactor_ir_fgmres,
    StrategyKind::refactor_ir_richardson, StrategyKind::hykkt};

std::string_view to_string(StrategyKind k);
std::optional<StrategyKind> parse_strategy(std::string_view name);

struct StrategySpec {
  StrategyKind kind = StrategyKind::refactor_ir_fgmres;
  RefinementConfig refinement{};
  HykktConfig hykkt{};
  LuOptions lu{};
  /// Systems [0, refresh_after) get a fresh factorization.
  Index refresh_after = 1;
};

struct RunRow {
  Index index = 0;
  double nsr_before = 0.0;
  double nsr_after = 0.0;
  double nrbe = 0.0;
  /// ||r - K x||_2 / ||r||_2 of the final solution.
  double rr = 0.0;
  /// Refinement iterations, or CG iterations for hykkt.
  Index ir_iterations = 0;
  /// Triangular-solve units spent on this system.
  std::uint64_t triangular_solves = 0;
  double factorize_time_s = 0.0;
  double solve_time_s = 0.0;
  double refine_time_s = 0.0;
  bool converged = false;
  /// Empty unless the row failed with an exception.
  std::string error;
};

struct RunTotals {
  double wall_time_s = 0.0;
  Index total_steps = 0;
  std::uint64_t total_triangular_solves = 0;
  Index total_ir_iterations = 0;
  double factorize_time_s = 0.0;
  double solve_time_s = 0.0;
  double refine_time_s = 0.0;
};

struct RunReport {
  std::string sequence_name;
  std::string strategy;
  std::vector<RunRow> rows;
  RunTotals totals;
  /// hykkt only: one entry per row.
  std::vector<StageTimings> stage_timings;

  bool all_converged() const;
};

/// Runs one strategy over the sequence in order. Row failures are recorded
/// and the run continues. Timings exclude file I/O.
RunReport run_strategy(const MatrixSequence& seq, const StrategySpec& spec);

/// Recomputes totals as sums of the rows.
RunTotals sum_rows(const std::vector<RunRow>& rows);

inline constexpr std::string_view kReportColumns =
    "index,nsr_before,nsr_after,nrbe,rr,ir_iterations,triangular_solves,factorize_time_s,solve_time_s,"
    "refine_time_s,converged";

std::string report_csv(const RunReport& report);
/// Writes the CSV and a `<path>.meta.json` sidecar with names, totals and
/// stage timings.
void write_report(const std::filesystem::path& csv_path, const RunReport& report);
/// Reads a report written by write_report. Without a sidecar the strategy
/// label is the file stem and the sequence name is empty.
RunReport read_report(const std::filesystem::path& csv_path);

struct ComparisonRow {
  std::string strategy;
  Index systems = 0;
  Index converged_systems = 0;
  std::uint64_t total_triangular_solves = 0;
  Index total_ir_iterations = 0;
  /// Over rows with at least one refinement iteration.
  double avg_ir_iterations = 0.0;
  double max_nsr_after = 0.0;
  double mean_nsr_after = 0.0;
  double total_factorize_time_s = 0.0;
  double total_solve_time_s = 0.0;
  double total_refine_time_s = 0.0;
  double total_time_s = 0.0;
};

struct IrPair {
  Index index = 0;
  double fgmres_nsr = 0.0;
  std::uint64_t fgmres_triangular_solves = 0;
  double richardson_nsr = 0.0;
  std::uint64_t richardson_triangular_solves = 0;
};

struct Comparison {
  std::string sequence_name;
  std::vector<ComparisonRow> rows;
  /// Present when both IR strategies are among the inputs.
  std::vector<IrPair> ir_pairs;
};

/// One row per report, in input order. Throws ConfigError when the reports
/// name different sequences or have different row counts.
Comparison compare_reports(const std::vector<RunReport>& reports);

inline constexpr std::string_view kComparisonColumns =
    "strategy,systems,converged_systems,total_triangular_solves,total_ir_iterations,avg_ir_iterations,"
    "max_nsr_after,mean_nsr_after,total_factorize_time_s,total_solve_time_s,total_refine_time_s,total_time_s";

std::string comparison_csv(const Comparison& c);
std::string ir_pairs_csv(const Comparison& c);
/// Writes the summary CSV and, when available, `<stem>_ir_pairs.csv` beside it.
void write_comparison(const std::filesystem::path& csv_path, const Comparison& c);

}  // namespace kktsolve
