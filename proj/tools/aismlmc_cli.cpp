// aismlmc: command-line front end for the adaptive MLMC estimator.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bench/config.hpp"
#include "bench/csv.hpp"
#include "bench/experiments.hpp"

namespace {

using namespace aismlmc;
using namespace aismlmc::bench;

constexpr int kExitConfig = 2;
constexpr int kExitDegraded = 3;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
};

RunConfig load(const Globals& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.output = g.out;
  return c;
}

// Writes through `emit` to the configured output path, or stdout.
template <typename Emit>
void with_output(const RunConfig& c, Emit&& emit) {
  if (c.output.empty() || c.output == "-") {
    emit(std::cout);
    return;
  }
  auto file = open_output(c.output);
  emit(file);
  std::cerr << "wrote " << c.output << "\n";
}

void print_report(const RunConfig& c, const EstimatorReport& r, std::ostream& out) {
  const double benchmark = c.benchmark_value();
  out << std::setprecision(10);
  out << "method      " << to_string(c.method) << "\n";
  out << "seed        " << r.seed << "\n";
  out << "estimate    " << r.estimate << "\n";
  out << "benchmark   " << benchmark << "\n";
  out << "abs error   " << std::abs(r.estimate - benchmark) << "\n";
  out << "std error   " << std::sqrt(r.estimator_variance()) << "\n";
  out << "euler steps " << r.euler_steps_total << "\n";
  out << "wall        " << std::setprecision(4) << r.wall_seconds << " s\n";
  out << std::setprecision(6);
  out << std::setw(4) << "l" << std::setw(12) << "N_l" << std::setw(14) << "mean"
      << std::setw(14) << "variance" << std::setw(12) << "theta" << std::setw(10) << "overflow"
      << "\n";
  for (const auto& l : r.per_level) {
    out << std::setw(4) << l.level << std::setw(12) << l.samples << std::setw(14)
        << l.sample_mean << std::setw(14) << l.sample_variance << std::setw(12)
        << (l.theta_final.empty() ? 0.0 : l.theta_final[0]) << std::setw(10)
        << l.overflow_count << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive importance sampling multilevel Monte Carlo"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Config file (key = value lines)");
  app.add_option("--seed", g.seed, "Base seed, overrides the config");
  app.add_option("--out", g.out, "Output path, overrides the config; '-' for stdout");
  app.add_option("--threads", g.threads, "Worker threads, 0 for all cores")->default_val(1);

  auto* estimate = app.add_subcommand("estimate", "One estimator run at the configured L");
  auto* sweep = app.add_subcommand("sweep", "RMSE sweep over sweep_L with M replications");
  auto* calibrate = app.add_subcommand("calibrate", "Standalone theta recursion on one level");
  int level = -1;
  calibrate->add_option("--level", level, "Level (default: the config's level)");
  auto* oracle = app.add_subcommand("oracle", "Variance surfaces, minimizers and weak error");
  auto* plan = app.add_subcommand("plan", "Print the level plan and step counts");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig c = load(g);
    if (*estimate) {
      try {
        print_report(c, run_estimate(c, c.L, c.seed, g.threads), std::cout);
      } catch (const EstimationDegraded& e) {
        print_report(c, e.report(), std::cout);
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegraded;
      }
    } else if (*sweep) {
      const SweepResult result = run_rmse_sweep(c, c.sweep_L, g.threads);
      with_output(c, [&](std::ostream& out) { emit_csv(result.rows, out); });
      write_summary_csv(result.summaries, c.output.empty() || c.output == "-" ? std::cerr
                                                                               : std::cout);
      for (std::size_t i : result.degraded) {
        std::cerr << "warning: L = " << result.rows[i].L << " rep " << result.rows[i].rep
                  << " degraded\n";
      }
      if (!result.degraded.empty()) return kExitDegraded;
    } else if (*calibrate) {
      const CalibrationResult r = run_calibration(c, level >= 0 ? level : c.level, g.threads);
      with_output(c, [&](std::ostream& out) { write_trajectory_csv(r, out); });
      std::ostream& info = c.output.empty() || c.output == "-" ? std::cerr : std::cout;
      info << std::setprecision(6) << "level " << r.level << ": theta_final "
           << r.theta_final[0] << ", oracle " << r.oracle_theta[0] << ", distance "
           << r.distance << "\n";
    } else if (*oracle) {
      const auto rows = run_oracle(c, g.threads);
      with_output(c, [&](std::ostream& out) { write_oracle_csv(rows, out); });
    } else if (*plan) {
      print_plan(c, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const EstimationDegraded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegraded;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
