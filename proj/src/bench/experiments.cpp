#include "bench/experiments.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace aismlmc::bench {

double rmse(const std::vector<double>& estimates, double benchmark) {
  require(!estimates.empty(), "rmse: no estimates");
  double sum = 0.0;
  for (double e : estimates) sum += (e - benchmark) * (e - benchmark);
  return std::sqrt(sum / static_cast<double>(estimates.size()));
}

std::uint64_t replication_seed(std::uint64_t base, int L, int rep) {
  return base ^ splitmix64((static_cast<std::uint64_t>(static_cast<std::uint32_t>(L)) << 32) |
                           static_cast<std::uint32_t>(rep));
}

EstimatorReport run_estimate(const RunConfig& config, int L, std::uint64_t seed,
                             unsigned threads) {
  const auto model = config.make_model();
  const auto payoff = config.make_payoff();
  const LevelPlan plan = config.make_plan(L);
  if (config.method == Method::kStandard) {
    return mlmc_estimate(model, payoff, plan, seed, threads);
  }
  return ais_mlmc_estimate(model, payoff, plan, config.make_sa(), seed, threads);
}

SweepResult run_rmse_sweep(const RunConfig& config, const std::vector<int>& L_values,
                           unsigned threads) {
  require(!L_values.empty(), "run_rmse_sweep: no levels to sweep");
  SweepResult result;
  result.benchmark = config.benchmark_value();
  const auto reps = static_cast<std::size_t>(config.M);
  const std::int64_t I = config.method == Method::kStandard ? 0 : config.I;

  for (int L : L_values) {
    const LevelPlan plan = config.make_plan(L);
    std::vector<SweepRow> rows(reps);
    std::vector<char> degraded(reps, 0);
    parallel_for(reps, threads, [&](std::size_t j) {
      const int rep = static_cast<int>(j) + 1;
      const std::uint64_t seed = replication_seed(config.seed, L, rep);
      EstimatorReport report;
      try {
        report = run_estimate(config, L, seed, 1);
      } catch (const EstimationDegraded& e) {
        report = e.report();
        degraded[j] = 1;
      }
      SweepRow& row = rows[j];
      row.method = to_string(config.method);
      row.m = plan.m;
      row.L = L;
      row.n = plan.n;
      row.I = I;
      row.rep = rep;
      row.estimate = report.estimate;
      row.abs_error = std::abs(report.estimate - result.benchmark);
      for (const auto& level : report.per_level) row.theta_hat.push_back(level.theta_final);
      row.euler_steps = report.euler_steps_total;
      row.wall_seconds = report.wall_seconds;
      row.seed = seed;
    });

    SweepSummary s;
    s.method = to_string(config.method);
    s.m = plan.m;
    s.L = L;
    s.n = plan.n;
    s.M = config.M;
    std::vector<double> estimates;
    for (std::size_t j = 0; j < reps; ++j) {
      estimates.push_back(rows[j].estimate);
      s.wall_seconds += rows[j].wall_seconds;
      s.euler_steps += rows[j].euler_steps;
      if (degraded[j]) {
        ++s.degraded;
        result.degraded.push_back(result.rows.size() + j);
      }
    }
    s.rmse = rmse(estimates, result.benchmark);
    double sum = 0.0;
    for (double e : estimates) sum += e;
    s.mean = sum / static_cast<double>(reps);
    double ss = 0.0;
    for (double e : estimates) ss += (e - s.mean) * (e - s.mean);
    s.sd = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
    result.summaries.push_back(s);
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  }
  return result;
}

void write_summary_csv(const std::vector<SweepSummary>& summaries, std::ostream& out) {
  out << "method,m,L,n,M,rmse,mean,sd,wall_seconds,euler_steps,degraded\n";
  for (const auto& s : summaries) {
    out << s.method << ',' << s.m << ',' << s.L << ',' << s.n << ',' << s.M << ','
        << format_real(s.rmse) << ',' << format_real(s.mean) << ',' << format_real(s.sd) << ','
        << format_real(s.wall_seconds) << ',' << s.euler_steps << ',' << s.degraded << '\n';
  }
}

namespace {

std::vector<Vector<double>> box_grid(const RunConfig& config) {
  return uniform_theta_grid<double>(Vector<double>::Constant(1, -config.box),
                                    Vector<double>::Constant(1, config.box),
                                    config.oracle_spacing);
}

std::string join(const Vector<double>& v) {
  std::string out;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (j > 0) out += ':';
    out += format_real(v(j));
  }
  return out;
}

}  // namespace

CalibrationResult run_calibration(const RunConfig& config, int level, unsigned threads) {
  if (config.method == Method::kStandard) {
    throw ConfigError("method", 0, "calibrate needs an adaptive method (ais or ais-chen)");
  }
  require(level >= 0, "run_calibration: level must be >= 0");
  const auto model = config.make_model();
  const auto payoff = config.make_payoff();
  const SaConfig<double> sa = config.make_sa();

  CalibrationResult out;
  out.level = level;
  out.trajectory = adapt_level(model, payoff, config.m, level, sa, config.seed);
  const Vector<double>& tilt = out.trajectory.final_tilt(sa.averaging);
  out.theta_final = detail::to_std(tilt);

  out.surface = level_variance_surface(model, payoff, config.m, level, box_grid(config),
                                       config.oracle_samples, config.seed, threads);
  const auto best = grid_argmin(out.surface);
  out.oracle_theta = detail::to_std(best.theta_star);
  out.distance = (tilt - best.theta_star).norm();
  return out;
}

void write_trajectory_csv(const CalibrationResult& result, std::ostream& out) {
  out << "iter,theta,theta_avg\n";
  const auto& t = result.trajectory;
  for (std::size_t i = 0; i < t.theta.size(); ++i) {
    out << i << ',' << join(t.theta[i]) << ',' << join(t.theta_avg[i]) << '\n';
  }
}

std::vector<OracleRow> run_oracle(const RunConfig& config, unsigned threads) {
  const auto model = config.make_model();
  const auto payoff = config.make_payoff();
  const auto grid = box_grid(config);
  std::vector<OracleRow> rows;

  auto add_surface = [&](const char* kind, const VarianceSurface<double>& s) {
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      rows.push_back({kind, s.level, s.theta_grid[k](0), s.values[k], s.std_errors[k]});
    }
    const auto best = grid_argmin(s);
    rows.push_back({"argmin", s.level, best.theta_star(0), best.value, 0.0});
  };

  const std::function<Vector<double>(const Vector<double>&)> gradient =
      [&](const Vector<double>& x) { return payoff.gradient(x); };
  add_surface("limit", variance_surface(model, gradient, grid, config.oracle_samples,
                                        config.oracle_steps, config.seed, threads));
  for (int ell = 0; ell <= config.L; ++ell) {
    add_surface("level", level_variance_surface(model, payoff, config.m, ell, grid,
                                                config.oracle_samples, config.seed, threads));
  }

  const WeakErrorFit fit = weak_error_fit(model, payoff, config.benchmark_value(),
                                          config.weak_steps, config.weak_samples, config.seed,
                                          threads);
  for (std::size_t c = 0; c < fit.step_counts.size(); ++c) {
    rows.push_back({"weak", static_cast<int>(fit.step_counts[c]), 0.0, fit.biases[c],
                    fit.std_errors[c]});
  }
  rows.push_back({"weak-fit", 0, 0.0, fit.slope, fit.slope_std_error});
  rows.push_back({"weak-constant", 0, 0.0, fit.c_psi, 0.0});
  return rows;
}

void write_oracle_csv(const std::vector<OracleRow>& rows, std::ostream& out) {
  out << "kind,level,theta,value,std_error\n";
  for (const auto& r : rows) {
    out << r.kind << ',' << r.level << ',' << format_real(r.theta) << ',' << format_real(r.value)
        << ',' << format_real(r.std_error) << '\n';
  }
}

void print_plan(const RunConfig& config, std::ostream& out) {
  const LevelPlan plan = config.make_plan(config.L);
  const std::int64_t I = config.method == Method::kStandard ? 0 : config.I;
  const ComplexityModel cost = complexity_model(plan, I);
  out << "m = " << plan.m << ", L = " << plan.L << ", n = " << plan.n << ", alpha = " << plan.alpha
      << ", T = " << plan.T << "\n";
  out << std::setw(4) << "l" << std::setw(10) << "steps" << std::setw(14) << "N_l"
      << std::setw(10) << "a_l" << std::setw(12) << "cost/path" << std::setw(16) << "level cost"
      << "\n";
  for (int l = 0; l <= plan.L; ++l) {
    const auto N = plan.N[static_cast<std::size_t>(l)];
    out << std::setw(4) << l << std::setw(10) << plan.steps_at(l) << std::setw(14) << N
        << std::setw(10) << plan.a[static_cast<std::size_t>(l)] << std::setw(12)
        << plan.cost_per_sample(l) << std::setw(16) << N * plan.cost_per_sample(l) << "\n";
  }
  out << "euler steps, standard: " << cost.steps_standard << "\n";
  out << "euler steps, adaptive (I = " << I << "): " << cost.steps_ais << " (ratio "
      << std::setprecision(6) << cost.ratio << ")\n";
}

}  // namespace aismlmc::bench
