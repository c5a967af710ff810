#include "kktsolve/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <memory>
#include <sstream>

#include "kktsolve/error.hpp"

namespace kktsolve {

namespace {

using Clock = std::chrono::steady_clock;

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Splits a KKT matrix into H = K11 (symmetric-lower) and J = K21 on frozen patterns.
class KktSplitter {
 public:
  KktSplitter(const CsMatrix& k, Index n) : n_(n), m_(k.rows() - n) {
    const auto rp = k.row_ptr();
    const auto ci = k.col_idx();
    std::vector<Index> hrp(sz(n) + 1, 0), hci, jrp(sz(m_) + 1, 0), jci;
    for (Index i = 0; i < k.rows(); ++i) {
      for (Index p = rp[sz(i)]; p < rp[sz(i) + 1]; ++p) {
        const Index j = ci[sz(p)];
        if (j > i) continue;
        if (i < n) {
          hci.push_back(j);
          h_src_.push_back(p);
        } else if (j < n) {
          jci.push_back(j);
          j_src_.push_back(p);
        } else {
          c_src_.push_back(p);
        }
      }
      if (i < n) {
        hrp[sz(i) + 1] = static_cast<Index>(hci.size());
      } else {
        jrp[sz(i - n) + 1] = static_cast<Index>(jci.size());
      }
    }
    h_pattern_ = std::make_shared<const SparsityPattern>(n, n, std::move(hrp), std::move(hci));
    j_pattern_ = std::make_shared<const SparsityPattern>(m_, n, std::move(jrp), std::move(jci));
  }

  std::pair<CsMatrix, CsMatrix> split(const CsMatrix& k) const {
    const auto v = k.values();
    for (Index p : c_src_) {
      if (v[sz(p)] != 0.0) throw ConfigError("hykkt: the (2,2) block of K must be zero");
    }
    Vector hv(h_src_.size()), jv(j_src_.size());
    for (std::size_t e = 0; e < h_src_.size(); ++e) hv[e] = v[sz(h_src_[e])];
    for (std::size_t e = 0; e < j_src_.size(); ++e) jv[e] = v[sz(j_src_[e])];
    return {CsMatrix(h_pattern_, std::move(hv), Symmetry::symmetric_lower), CsMatrix(j_pattern_, std::move(jv))};
  }

 private:
  Index n_;
  Index m_;
  std::vector<Index> h_src_, j_src_, c_src_;
  PatternPtr h_pattern_, j_pattern_;
};

void finish_row(RunRow& row, const CsMatrix& k, std::span<const double> x, std::span<const double> r) {
  row.nsr_after = nsr(k, x, r);
  row.nrbe = nrbe(k, x, r);
  row.rr = relative_residual(k, x, r);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw ParseError("report: cannot parse number '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::filesystem::path meta_path(const std::filesystem::path& csv) { return std::filesystem::path(csv.string() + ".meta.json"); }

nlohmann::json totals_json(const RunTotals& t) {
  return {{"wall_time_s", t.wall_time_s},         {"total_steps", t.total_steps},
          {"total_triangular_solves", t.total_triangular_solves},
          {"total_ir_iterations", t.total_ir_iterations},
          {"factorize_time_s", t.factorize_time_s}, {"solve_time_s", t.solve_time_s},
          {"refine_time_s", t.refine_time_s}};
}

}  // namespace

std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::full_lu: return "full_lu";
    case StrategyKind::refactor: return "refactor";
    case StrategyKind::refactor_ir_fgmres: return "refactor_ir_fgmres";
    case StrategyKind::refactor_ir_richardson: return "refactor_ir_richardson";
    case StrategyKind::hykkt: return "hykkt";
  }
  return "unknown";
}

std::optional<StrategyKind> parse_strategy(std::string_view name) {
  for (StrategyKind k : kAllStrategies) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

bool RunReport::all_converged() const {
  return std::all_of(rows.begin(), rows.end(), [](const RunRow& r) { return r.converged; });
}

RunTotals sum_rows(const std::vector<RunRow>& rows) {
  RunTotals t;
  t.total_steps = static_cast<Index>(rows.size());
  for (const RunRow& r : rows) {
    t.total_triangular_solves += r.triangular_solves;
    t.total_ir_iterations += r.ir_iterations;
    t.factorize_time_s += r.factorize_time_s;
    t.solve_time_s += r.solve_time_s;
    t.refine_time_s += r.refine_time_s;
  }
  t.wall_time_s = t.factorize_time_s + t.solve_time_s + t.refine_time_s;
  return t;
}

RunReport run_strategy(const MatrixSequence& seq, const StrategySpec& spec) {
  if (seq.systems.empty()) throw ConfigError("run_strategy: sequence must contain at least one system");
  if (spec.refresh_after < 0) throw ConfigError("run_strategy: refresh_after must be nonnegative");
  RunReport report;
  report.sequence_name = seq.name;
  report.strategy = std::string(to_string(spec.kind));

  std::optional<LuFactors> lu;
  std::optional<KktSplitter> splitter;
  std::optional<HykktSolver> hykkt;

  for (std::size_t idx = 0; idx < seq.systems.size(); ++idx) {
    const CsMatrix& k = seq.systems[idx].K;
    const Vector& r = seq.systems[idx].rhs;
    RunRow row;
    row.index = static_cast<Index>(idx);
    try {
      if (spec.kind == StrategyKind::hykkt) {
        const Index n = seq.n_primal;
        auto t = Clock::now();
        if (!splitter) splitter.emplace(k, n);
        auto [h, j] = splitter->split(k);
        const Vector dx_zero(sz(n), 0.0);
        if (!hykkt) hykkt.emplace(HykktSolver::setup(h, j, dx_zero, spec.hykkt));
        const std::uint64_t c0 = hykkt->cholesky_solve_count();
        hykkt->factorize(h, j, dx_zero);
        row.factorize_time_s = seconds_since(t);
        t = Clock::now();
        const HykktSolution sol = hykkt->solve(std::span<const double>(r).first(sz(n)),
                                              std::span<const double>(r).subspan(sz(n)));
        row.solve_time_s = seconds_since(t);
        Vector x = sol.dx;
        x.insert(x.end(), sol.dlambda.begin(), sol.dlambda.end());
        row.ir_iterations = sol.cg_iterations;
        row.triangular_solves = hykkt->cholesky_solve_count() - c0;
        finish_row(row, k, x, r);
        row.nsr_before = row.nsr_after;
        row.converged = sol.converged && std::isfinite(row.nsr_after);
      } else {
        const bool fresh = spec.kind == StrategyKind::full_lu || !lu || static_cast<Index>(idx) < spec.refresh_after;
        auto t = Clock::now();
        if (fresh) {
          lu.reset();
          lu.emplace(lu_factorize(k, spec.lu).first);
        } else {
          lu_refactorize(*lu, k);
        }
        row.factorize_time_s = seconds_since(t);
        const std::uint64_t c0 = lu->triangular_solve_count();
        t = Clock::now();
        Vector x = lu_solve(*lu, r);
        row.solve_time_s = seconds_since(t);
        row.nsr_before = nsr(k, x, r);
        if (spec.kind == StrategyKind::refactor_ir_fgmres || spec.kind == StrategyKind::refactor_ir_richardson) {
          t = Clock::now();
          RefinementResult res = spec.kind == StrategyKind::refactor_ir_fgmres
                                     ? refine_fgmres(k, *lu, x, r, spec.refinement)
                                     : refine_richardson(k, *lu, x, r, spec.refinement);
          row.refine_time_s = seconds_since(t);
          x = std::move(res.x);
          row.ir_iterations = res.report.ir_iterations;
          row.converged = res.report.converged;
        } else {
          row.converged = true;
        }
        row.triangular_solves = lu->triangular_solve_count() - c0;
        finish_row(row, k, x, r);
        row.converged = row.converged && std::isfinite(row.nsr_after);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
      row.converged = false;
      row.nsr_before = row.nsr_after = row.nrbe = row.rr = kNaN;
      if (spec.kind != StrategyKind::hykkt) lu.reset();
    }
    if (spec.kind == StrategyKind::hykkt) {
      report.stage_timings.push_back(hykkt ? hykkt->take_stage_timings() : StageTimings{});
    }
    report.rows.push_back(std::move(row));
  }
  report.totals = sum_rows(report.rows);
  return report;
}

std::string report_csv(const RunReport& report) {
  std::string out(kReportColumns);
  out += '\n';
  for (const RunRow& r : report.rows) {
    out += std::to_string(r.index) + ',' + fmt(r.nsr_before) + ',' + fmt(r.nsr_after) + ',' + fmt(r.nrbe) + ',' +
           fmt(r.rr) + ',' + std::to_string(r.ir_iterations) + ',' + std::to_string(r.triangular_solves) + ',' +
           fmt(r.factorize_time_s) + ',' + fmt(r.solve_time_s) + ',' + fmt(r.refine_time_s) + ',' +
           (r.converged ? "1" : "0") + '\n';
  }
  return out;
}

void write_report(const std::filesystem::path& csv_path, const RunReport& report) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  {
    std::ofstream out(csv_path);
    if (!out) throw Error("write_report: cannot write " + csv_path.string());
    out << report_csv(report);
  }
  nlohmann::json meta;
  meta["sequence"] = report.sequence_name;
  meta["strategy"] = report.strategy;
  meta["totals"] = totals_json(report.totals);
  nlohmann::json errors = nlohmann::json::object();
  for (const RunRow& r : report.rows) {
    if (!r.error.empty()) errors[std::to_string(r.index)] = r.error;
  }
  meta["row_errors"] = std::move(errors);
  if (!report.stage_timings.empty()) {
    nlohmann::json stages = nlohmann::json::array();
    for (const StageTimings& st : report.stage_timings) {
      nlohmann::json row = nlohmann::json::object();
      for (auto name : kHykktStages) {
        const auto it = st.find(name);
        row[std::string(name)] = it == st.end() ? 0.0 : it->second;
      }
      stages.push_back(std::move(row));
    }
    meta["stage_timings"] = std::move(stages);
  }
  std::ofstream out(meta_path(csv_path));
  if (!out) throw Error("write_report: cannot write " + meta_path(csv_path).string());
  out << meta.dump(2) << '\n';
}

RunReport read_report(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error("read_report: cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(in, line) || line != kReportColumns) {
    throw ParseError("read_report: " + csv_path.string() + ": unexpected header");
  }
  RunReport report;
  report.strategy = csv_path.stem().string();
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 11) {
      throw ParseError("read_report: " + csv_path.string() + ":" + std::to_string(line_no) + ": expected 11 columns");
    }
    RunRow r;
    r.index = std::stoll(cells[0]);
    r.nsr_before = parse_double(cells[1]);
    r.nsr_after = parse_double(cells[2]);
    r.nrbe = parse_double(cells[3]);
    r.rr = parse_double(cells[4]);
    r.ir_iterations = std::stoll(cells[5]);
    r.triangular_solves = std::stoull(cells[6]);
    r.factorize_time_s = parse_double(cells[7]);
    r.solve_time_s = parse_double(cells[8]);
    r.refine_time_s = parse_double(cells[9]);
    r.converged = cells[10] == "1";
    report.rows.push_back(r);
  }
  const auto meta = meta_path(csv_path);
  if (std::filesystem::exists(meta)) {
    std::ifstream min(meta);
    const nlohmann::json doc = nlohmann::json::parse(min);
    report.sequence_name = doc.value("sequence", "");
    report.strategy = doc.value("strategy", report.strategy);
    if (doc.contains("row_errors")) {
      for (auto it = doc["row_errors"].begin(); it != doc["row_errors"].end(); ++it) {
        const auto i = static_cast<std::size_t>(std::stoll(it.key()));
        if (i < report.rows.size()) report.rows[i].error = it.value().get<std::string>();
      }
    }
    if (doc.contains("stage_timings")) {
      for (const auto& row : doc["stage_timings"]) {
        StageTimings st;
        for (auto it = row.begin(); it != row.end(); ++it) st[it.key()] = it.value().get<double>();
        report.stage_timings.push_back(std::move(st));
      }
    }
  }
  report.totals = sum_rows(report.rows);
  return report;
}

Comparison compare_reports(const std::vector<RunReport>& reports) {
  if (reports.empty()) throw ConfigError("compare_reports: no reports given");
  Comparison c;
  c.sequence_name = reports.front().sequence_name;
  const RunReport* fg = nullptr;
  const RunReport* rich = nullptr;
  for (const RunReport& rep : reports) {
    if (rep.sequence_name != c.sequence_name) {
      throw ConfigError("compare_reports: reports cover different sequences ('" + c.sequence_name + "' vs '" +
                        rep.sequence_name + "')");
    }
    if (rep.rows.size() != reports.front().rows.size()) {
      throw ConfigError("compare_reports: reports have different numbers of systems");
    }
    const RunTotals t = sum_rows(rep.rows);
    ComparisonRow row;
    row.strategy = rep.strategy;
    row.systems = t.total_steps;
    row.total_triangular_solves = t.total_triangular_solves;
    row.total_ir_iterations = t.total_ir_iterations;
    row.total_factorize_time_s = t.factorize_time_s;
    row.total_solve_time_s = t.solve_time_s;
    row.total_refine_time_s = t.refine_time_s;
    row.total_time_s = t.wall_time_s;
    Index refined = 0;
    double nsr_sum = 0.0;
    Index nsr_count = 0;
    for (const RunRow& r : rep.rows) {
      if (r.converged) ++row.converged_systems;
      if (r.ir_iterations > 0) ++refined;
      if (std::isfinite(r.nsr_after)) {
        row.max_nsr_after = std::max(row.max_nsr_after, r.nsr_after);
        nsr_sum += r.nsr_after;
        ++nsr_count;
      } else {
        row.max_nsr_after = std::numeric_limits<double>::infinity();
      }
    }
    row.avg_ir_iterations = refined > 0 ? static_cast<double>(row.total_ir_iterations) / static_cast<double>(refined) : 0.0;
    row.mean_nsr_after = nsr_count > 0 ? nsr_sum / static_cast<double>(nsr_count) : kNaN;
    c.rows.push_back(std::move(row));
    if (rep.strategy == to_string(StrategyKind::refactor_ir_fgmres) && !fg) fg = &rep;
    if (rep.strategy == to_string(StrategyKind::refactor_ir_richardson) && !rich) rich = &rep;
  }
  if (fg && rich) {
    for (std::size_t i = 0; i < fg->rows.size(); ++i) {
      c.ir_pairs.push_back({fg->rows[i].index, fg->rows[i].nsr_after, fg->rows[i].triangular_solves,
                            rich->rows[i].nsr_after, rich->rows[i].triangular_solves});
    }
  }
  return c;
}

std::string comparison_csv(const Comparison& c) {
  std::string out(kComparisonColumns);
  out += '\n';
  for (const ComparisonRow& r : c.rows) {
    out += r.strategy + ',' + std::to_string(r.systems) + ',' + std::to_string(r.converged_systems) + ',' +
           std::to_string(r.total_triangular_solves) + ',' + std::to_string(r.total_ir_iterations) + ',' +
           fmt(r.avg_ir_iterations) + ',' + fmt(r.max_nsr_after) + ',' + fmt(r.mean_nsr_after) + ',' +
           fmt(r.total_factorize_time_s) + ',' + fmt(r.total_solve_time_s) + ',' + fmt(r.total_refine_time_s) + ',' +
           fmt(r.total_time_s) + '\n';
  }
  return out;
}

std::string ir_pairs_csv(const Comparison& c) {
  std::string out = "index,fgmres_nsr_after,fgmres_triangular_solves,richardson_nsr_after,richardson_triangular_solves\n";
  for (const IrPair& p : c.ir_pairs) {
    out += std::to_string(p.index) + ',' + fmt(p.fgmres_nsr) + ',' + std::to_string(p.fgmres_triangular_solves) + ',' +
           fmt(p.richardson_nsr) + ',' + std::to_string(p.richardson_triangular_solves) + '\n';
  }
  return out;
}

void write_comparison(const std::filesystem::path& csv_path, const Comparison& c) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  {
    std::ofstream out(csv_path);
    if (!out) throw Error("write_comparison: cannot write " + csv_path.string());
    out << comparison_csv(c);
  }
  if (!c.ir_pairs.empty()) {
    auto pairs = csv_path;
    pairs.replace_filename(csv_path.stem().string() + "_ir_pairs.csv");
    std::ofstream out(pairs);
    if (!out) throw Error("write_comparison: cannot write " + pairs.string());
    out << ir_pairs_csv(c);
  }
}

}  // namespace kktsolve
