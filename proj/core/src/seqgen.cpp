#include "kktsolve/seqgen.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <random>

#include "kktsolve/error.hpp"
#include "kktsolve/lu.hpp"
#include "kktsolve/matrix_market.hpp"

namespace kktsolve {

namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : gen_(seed) {}
  double operator()() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double symmetric() { return 2.0 * (*this)() - 1.0; }

 private:
  std::mt19937_64 gen_;
};

double merit(const QpResiduals& r) {
  double s = 0.0;
  for (const Vector* v : {&r.r_tilde_x, &r.r_lambda, &r.r_z}) {
    const double nv = norm2(*v);
    s += nv * nv;
  }
  return std::sqrt(s);
}

// Largest alpha in (0, 1] keeping v - alpha * dv >= (1 - tau) v.
double max_step(std::span<const double> v, std::span<const double> dv, double tau) {
  double alpha = 1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (dv[i] > 0.0) alpha = std::min(alpha, tau * v[i] / dv[i]);
  }
  return alpha;
}

}  // namespace

QpModel make_qp(Index n, Index m, double density, std::uint64_t seed) {
  if (n < 1 || m < 1) throw ConfigError("make_qp: n and m must be positive");
  if (m >= n) throw ConfigError("make_qp: requires m < n");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("make_qp: density must lie in (0, 1]");
  Uniform u(seed);
  QpModel qp;
  qp.seed = seed;

  Triplets bt(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (u() < density) bt.add(i, j, u.symmetric());
    }
  }
  const CsMatrix b_mat = from_triplets(bt);
  const CsMatrix btb = spgemm(transpose(b_mat), b_mat);
  Triplets qt(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index p = btb.row_ptr()[sz(i)]; p < btb.row_ptr()[sz(i) + 1]; ++p) {
      const Index j = btb.col_idx()[sz(p)];
      if (j <= i) qt.add(i, j, btb.values()[sz(p)]);
    }
    qt.add(i, i, 1e-4);
  }
  qp.Q = from_triplets(qt, Symmetry::symmetric_lower);

  Triplets at(m, n);
  for (Index i = 0; i < m; ++i) {
    double offdiag = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (j == i || u() >= density) continue;
      const double v = u.symmetric();
      at.add(i, j, v);
      if (j < m) offdiag += std::abs(v);
    }
    at.add(i, i, 1.0 + offdiag + u());
  }
  qp.A = from_triplets(at);
  qp.b = spmv(qp.A, Vector(sz(n), 1.0));
  qp.c.resize(sz(n));
  for (auto& v : qp.c) v = u.symmetric();
  return qp;
}

QpResiduals qp_residuals(const QpModel& qp, std::span<const double> x, std::span<const double> lambda,
                         std::span<const double> z, double mu) {
  const Index n = qp.n();
  if (static_cast<Index>(x.size()) != n || static_cast<Index>(z.size()) != n ||
      static_cast<Index>(lambda.size()) != qp.m()) {
    throw DimensionError("qp_residuals: vector lengths do not conform");
  }
  QpResiduals r;
  r.r_tilde_x = spmv(qp.Q, x);
  const Vector at_l = spmv(qp.A, lambda, true);
  for (Index i = 0; i < n; ++i) r.r_tilde_x[sz(i)] += qp.c[sz(i)] + at_l[sz(i)] - z[sz(i)];
  r.r_lambda = spmv(qp.A, x);
  for (Index i = 0; i < qp.m(); ++i) r.r_lambda[sz(i)] -= qp.b[sz(i)];
  r.r_z.resize(sz(n));
  for (Index i = 0; i < n; ++i) r.r_z[sz(i)] = x[sz(i)] * z[sz(i)] - mu;
  return r;
}

double dense_condition_number(const CsMatrix& a) {
  const Index r = a.rows();
  const Index c = a.cols();
  const std::vector<double> dense = a.to_dense();
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(dense.data(), r, c);
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 0.0;
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

BarrierTrace barrier_sequence(const QpModel& qp, double mu_start, double mu_factor, int steps,
                              const BarrierOptions& options) {
  if (!(mu_start > 0.0)) throw ConfigError("barrier_sequence: mu_start must be positive");
  if (!(mu_factor > 0.0 && mu_factor < 1.0)) throw ConfigError("barrier_sequence: mu_factor must lie in (0, 1)");
  if (steps < 1) throw ConfigError("barrier_sequence: steps must be positive");
  if (!(options.tau > 0.0 && options.tau < 1.0)) throw ConfigError("barrier_sequence: tau must lie in (0, 1)");
  if (options.newton_steps_per_mu < 1) throw ConfigError("barrier_sequence: newton_steps_per_mu must be positive");

  const Index n = qp.n();
  const Index m = qp.m();
  const KktAssembler assembler(qp.Q, qp.A);
  BarrierTrace trace;
  trace.x.assign(sz(n), 1.0);
  trace.z.assign(sz(n), mu_start);
  trace.lambda.assign(sz(m), 0.0);

  double mu = mu_start;
  for (int k = 0; k < steps && !trace.truncated; ++k, mu *= mu_factor) {
    trace.mu_schedule.push_back(mu);
    for (int inner = 0; inner < options.newton_steps_per_mu; ++inner) {
      const QpResiduals res = qp_residuals(qp, trace.x, trace.lambda, trace.z, mu);
      KktBlocks blocks{qp.Q, qp.A, trace.x, trace.z, mu};
      KktSystem sys = assembler.assemble(blocks);
      KktRhs rhs = assemble_rhs(sys.blocks, res.r_tilde_x, res.r_lambda, res.r_z);

      const auto [factors, diag] = lu_factorize(sys.K);
      const Vector delta = lu_solve(factors, rhs.stacked());
      const std::span<const double> dx(delta.data(), sz(n));
      const std::span<const double> dl(delta.data() + n, sz(m));
      const Vector dz = recover_dz(sys.blocks, rhs.r_z, dx);

      if (inner == 0) {
        TraceSystem entry{std::move(sys), std::move(rhs), mu, std::nullopt};
        if (n + m <= options.condition_limit) entry.condition_estimate = dense_condition_number(entry.system.K);
        trace.systems.push_back(std::move(entry));
      }

      const double f0 = merit(res);
      double alpha = std::min(max_step(trace.x, dx, options.tau), max_step(trace.z, dz, options.tau));
      Vector x1(sz(n)), z1(sz(n)), l1(sz(m));
      int rejections = 0;
      for (;;) {
        for (Index i = 0; i < n; ++i) {
          x1[sz(i)] = trace.x[sz(i)] - alpha * dx[sz(i)];
          z1[sz(i)] = trace.z[sz(i)] - alpha * dz[sz(i)];
        }
        for (Index i = 0; i < m; ++i) l1[sz(i)] = trace.lambda[sz(i)] - alpha * dl[sz(i)];
        const double f1 = merit(qp_residuals(qp, x1, l1, z1, mu));
        if (std::isfinite(f1) && f1 <= (1.0 - 1e-4 * alpha) * f0) break;
        if (++rejections >= options.max_rejections) break;
        alpha *= 0.5;
      }
      if (rejections >= options.max_rejections) {
        trace.truncated = true;
        break;
      }
      trace.x = std::move(x1);
      trace.z = std::move(z1);
      trace.lambda = std::move(l1);
    }
  }
  return trace;
}

std::filesystem::path export_trace(const BarrierTrace& trace, const std::filesystem::path& dir,
                                   const std::string& name) {
  if (trace.systems.empty()) throw ConfigError("export_trace: trace has no systems");
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["name"] = name;
  manifest["n_primal"] = trace.systems.front().system.n();
  nlohmann::json systems = nlohmann::json::array();
  for (std::size_t k = 0; k < trace.systems.size(); ++k) {
    char mtx[32];
    char rhs[32];
    std::snprintf(mtx, sizeof mtx, "system_%03zu.mtx", k);
    std::snprintf(rhs, sizeof rhs, "rhs_%03zu.mtx", k);
    write_matrix_market(dir / mtx, trace.systems[k].system.K);
    write_vector_market(dir / rhs, trace.systems[k].rhs.stacked());
    nlohmann::json entry{{"matrix", mtx}, {"rhs", rhs}, {"mu", trace.systems[k].mu}};
    if (trace.systems[k].condition_estimate) entry["condition_estimate"] = *trace.systems[k].condition_estimate;
    systems.push_back(std::move(entry));
  }
  manifest["systems"] = std::move(systems);
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error("export_trace: cannot write " + path.string());
  out << manifest.dump(2) << '\n';
  return path;
}

}  // namespace kktsolve
