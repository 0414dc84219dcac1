#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "aismlmc/mlmc.hpp"
#include "aismlmc/oracle.hpp"
#include "bench/config.hpp"
#include "bench/csv.hpp"

namespace aismlmc::bench {

/// sqrt(mean (estimate - benchmark)^2).
double rmse(const std::vector<double>& estimates, double benchmark);

/// base ^ splitmix64((L << 32) | rep).
std::uint64_t replication_seed(std::uint64_t base, int L, int rep);

/// One run of the configured estimator with L levels. May throw EstimationDegraded.
EstimatorReport run_estimate(const RunConfig& config, int L, std::uint64_t seed,
                             unsigned threads = 1);

struct SweepSummary {
  std::string method;
  std::int64_t m = 0;
  int L = 0;
  std::int64_t n = 0;
  int M = 0;
  double rmse = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double wall_seconds = 0.0;
  std::int64_t euler_steps = 0;
  int degraded = 0;
};

struct SweepResult {
  double benchmark = 0.0;
  std::vector<SweepRow> rows;           // (L, rep) order
  std::vector<SweepSummary> summaries;  // one per L
  std::vector<std::size_t> degraded;    // indices into rows
};

/*
 * M replications of the configured estimator for every L. Replications run
 * on `threads` workers, each estimator single-threaded; the result does not
 * depend on `threads` except for wall_seconds.
 */
SweepResult run_rmse_sweep(const RunConfig& config, const std::vector<int>& L_values,
                           unsigned threads = 1);

void write_summary_csv(const std::vector<SweepSummary>& summaries, std::ostream& out);

struct CalibrationResult {
  int level = 0;
  ThetaTrajectory<double> trajectory;
  std::vector<double> theta_final;   // tilt the estimator would freeze
  std::vector<double> oracle_theta;  // grid minimizer of the level variance
  double distance = 0.0;             // Euclidean
  VarianceSurface<double> surface;
};

/// Standalone level recursion against the oracle grid minimizer over the box.
CalibrationResult run_calibration(const RunConfig& config, int level, unsigned threads = 1);

/// iter,theta,theta_avg (components ':'-joined).
void write_trajectory_csv(const CalibrationResult& result, std::ostream& out);

struct OracleRow {
  std::string kind;  // limit | level | argmin | weak | weak-fit
  int level = 0;     // -1 for the limit surface, n for weak rows
  double theta = 0.0;
  double value = 0.0;
  double std_error = 0.0;
};

/*
 * Variance surfaces of the limit error process and of levels 0..L over the
 * box, their grid minimizers, and the weak-error fit.
 */
std::vector<OracleRow> run_oracle(const RunConfig& config, unsigned threads = 1);

void write_oracle_csv(const std::vector<OracleRow>& rows, std::ostream& out);

/// Level table: l, steps, N_l, cost per sample, level cost, plus totals.
void print_plan(const RunConfig& config, std::ostream& out);

}  // namespace aismlmc::bench
