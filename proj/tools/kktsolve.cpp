// kktsolve: generate, solve and compare KKT matrix sequences.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "kktsolve/error.hpp"
#include "kktsolve/harness.hpp"
#include "kktsolve/seqgen.hpp"
#include "kktsolve/sequence.hpp"

namespace {

using namespace kktsolve;

struct SolveArgs {
  std::string manifest;
  std::string strategy;
  double delta_tol = 1e-10;
  Index restart = 10;
  Index max_iterations = 100;
  std::optional<double> gamma;
  double cg_tol = 1e-12;
  Index refresh_after = 1;
  std::string richardson_stop = "tolerance";
  std::string out;
};

struct GenerateArgs {
  Index n = 200;
  Index m = 50;
  double density = 0.02;
  std::uint64_t seed = 42;
  double mu_start = 1.0;
  double mu_factor = 0.1;
  int steps = 9;
  std::string out_dir;
  std::string name;
};

struct CompareArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int run_solve(const SolveArgs& a) {
  const MatrixSequence seq = load_sequence(a.manifest);
  StrategySpec spec;
  spec.kind = *parse_strategy(a.strategy);
  spec.refinement.delta_tol = a.delta_tol;
  spec.refinement.krylov.restart = a.restart;
  spec.refinement.krylov.max_iterations = a.max_iterations;
  spec.refinement.richardson_stop =
      a.richardson_stop == "nsr_ratio" ? RichardsonStop::nsr_ratio : RichardsonStop::tolerance;
  spec.hykkt.gamma = a.gamma;
  spec.hykkt.cg_tol = a.cg_tol;
  spec.refresh_after = a.refresh_after;

  const RunReport report = run_strategy(seq, spec);
  if (a.out.empty()) {
    std::cout << report_csv(report);
  } else {
    write_report(a.out, report);
  }
  Index failed = 0;
  for (const RunRow& r : report.rows) {
    if (!r.converged) ++failed;
    if (!r.error.empty()) std::cerr << "system " << r.index << ": " << r.error << '\n';
  }
  std::fprintf(stderr, "%s on %s: %zu systems, %td not converged, %llu triangular solves\n", report.strategy.c_str(),
               report.sequence_name.c_str(), report.rows.size(), failed,
               static_cast<unsigned long long>(report.totals.total_triangular_solves));
  return failed == 0 ? 0 : 1;
}

int run_generate(const GenerateArgs& a) {
  const QpModel qp = make_qp(a.n, a.m, a.density, a.seed);
  const BarrierTrace trace = barrier_sequence(qp, a.mu_start, a.mu_factor, a.steps);
  const std::string name = a.name.empty() ? "qp_n" + std::to_string(a.n) + "_m" + std::to_string(a.m) + "_s" +
                                                std::to_string(a.seed)
                                          : a.name;
  const auto manifest = export_trace(trace, a.out_dir, name);
  std::fprintf(stderr, "wrote %zu systems to %s%s\n", trace.systems.size(), manifest.string().c_str(),
               trace.truncated ? " (trace truncated: Newton step rejected)" : "");
  return trace.truncated ? 1 : 0;
}

int run_compare(const CompareArgs& a) {
  std::vector<RunReport> reports;
  for (const auto& p : a.inputs) reports.push_back(read_report(p));
  const Comparison c = compare_reports(reports);
  write_comparison(a.out, c);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse KKT sequence solver with refactorization, iterative refinement and HyKKT"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Run one strategy over a matrix sequence");
  solve->add_option("--manifest", sa.manifest, "Sequence manifest (JSON)")->required()->check(CLI::ExistingFile);
  std::vector<std::string> kinds;
  for (auto k : kAllStrategies) kinds.emplace_back(to_string(k));
  solve->add_option("--strategy", sa.strategy, "Solver strategy")->required()->check(CLI::IsMember(kinds));
  solve->add_option("--delta-tol", sa.delta_tol, "Refinement trigger and tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--restart", sa.restart, "FGMRES restart length")->check(CLI::PositiveNumber);
  solve->add_option("--max-iterations", sa.max_iterations, "FGMRES total iteration budget")
      ->check(CLI::PositiveNumber);
  solve->add_option("--gamma", sa.gamma, "HyKKT augmentation weight (default: automatic)")
      ->check(CLI::NonNegativeNumber);
  solve->add_option("--cg-tol", sa.cg_tol, "HyKKT CG relative tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--refresh-after", sa.refresh_after, "Fresh factorizations before refactoring")
      ->check(CLI::NonNegativeNumber);
  solve->add_option("--richardson-stop", sa.richardson_stop, "Richardson stopping rule")
      ->check(CLI::IsMember({"tolerance", "nsr_ratio"}));
  solve->add_option("--out", sa.out, "Report CSV (stdout when omitted)");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Generate a barrier-method KKT sequence");
  gen->add_option("--n", ga.n, "Primal variables")->check(CLI::PositiveNumber);
  gen->add_option("--m", ga.m, "Equality constraints")->check(CLI::PositiveNumber);
  gen->add_option("--density", ga.density, "Random fill density")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", ga.seed, "Random seed");
  gen->add_option("--mu-start", ga.mu_start, "Initial barrier parameter")->check(CLI::PositiveNumber);
  gen->add_option("--mu-factor", ga.mu_factor, "Barrier reduction factor")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--steps", ga.steps, "Number of barrier values")->check(CLI::PositiveNumber);
  gen->add_option("--out-dir", ga.out_dir, "Output directory")->required();
  gen->add_option("--name", ga.name, "Sequence name");

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare", "Summarize several report CSVs");
  cmp->add_option("--inputs", ca.inputs, "Report CSVs")->required()->check(CLI::ExistingFile);
  cmp->add_option("--out", ca.out, "Summary CSV")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return run_solve(sa);
    if (*gen) return run_generate(ga);
    if (*cmp) return run_compare(ca);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
