#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aismlmc/mlmc.hpp"
#include "aismlmc/oracle.hpp"
#include "aismlmc/payoff.hpp"
#include "aismlmc/sde.hpp"

namespace aismlmc::bench {

enum class Method { kStandard, kAis, kAisChen };

std::string to_string(Method method);

/// Error in a config file: names the offending key and line (0 if unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, int line, const std::string& message);

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

/*
 * Experiment description. Parsed from line-oriented "key = value" text with
 * '#' comments. Numbers may be written as log(x) or exp(x).
 */
struct RunConfig {
  Method method = Method::kAis;

  // model: black-scholes
  std::string model = "black-scholes";
  double s0 = 130.0;
  double rate = 0.09531017980432493;  // log(1.1)
  double sigma = 0.6;
  double T = 1.0;

  // payoff: discounted call
  std::string payoff = "call";
  double strike = 100.0;

  // level plan
  std::int64_t m = 4;
  int L = 4;
  double alpha = 1.0;
  double a0 = 1.0;

  // stochastic approximation
  double gamma0 = 1.0;
  double rho = 1.0;
  std::int64_t gain_offset = 1;
  std::int64_t I = 1000;
  double box = 10.0;  // half-width of K = [-box, box]
  double theta0 = 0.0;
  bool averaging = true;
  double chen_k0 = 1.0;
  bool chen_literal_reset = false;
  bool warm_start = false;

  // experiment
  int M = 50;
  std::uint64_t seed = 1;
  std::string output;
  std::optional<double> benchmark;
  std::vector<int> sweep_L = {2, 3, 4, 5};
  int level = 3;  // calibrate

  // oracle
  std::int64_t oracle_samples = 200000;
  std::int64_t oracle_steps = 256;
  double oracle_spacing = 0.05;
  std::int64_t weak_samples = 1000000;
  std::vector<std::int64_t> weak_steps = {4, 8, 16, 32};

  bool operator==(const RunConfig&) const = default;

  /// Configured benchmark, or the closed-form price.
  double benchmark_value() const;

  BsParams bs_params() const;
  BlackScholesModel<double> make_model() const;
  DiscountedCall<double> make_payoff() const;
  LevelPlan make_plan(int levels) const;
  SaConfig<double> make_sa() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Every key, one per line, reals at 17 significant digits.
std::string serialize_config(const RunConfig& config);

/// Shortest text that parses back to exactly `value` (17 significant digits).
std::string format_real(double value);

}  // namespace aismlmc::bench
