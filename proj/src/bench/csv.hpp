#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

namespace aismlmc::bench {

/// One estimator run of a sweep.
struct SweepRow {
  std::string method;
  std::int64_t m = 0;
  int L = 0;
  std::int64_t n = 0;
  std::int64_t I = 0;
  int rep = 0;
  double estimate = 0.0;
  double abs_error = 0.0;
  std::vector<std::vector<double>> theta_hat;  // per level, per noise component
  std::int64_t euler_steps = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const SweepRow&) const = default;
};

inline constexpr const char* kSweepHeader =
    "method,m,L,n,I,rep,estimate,abs_error,theta_hat,euler_steps,wall_seconds,seed";

/// Levels joined by ';', components of one level by ':'.
std::string format_theta_hat(const std::vector<std::vector<double>>& theta_hat);
std::vector<std::vector<double>> parse_theta_hat(const std::string& text);

void emit_csv(const std::vector<SweepRow>& rows, std::ostream& out);
void write_csv(const std::vector<SweepRow>& rows, const std::string& path);

std::vector<SweepRow> parse_csv(std::istream& in);
std::vector<SweepRow> read_csv(const std::string& path);

/// Opens `path` for writing or throws std::runtime_error naming it.
std::ofstream open_output(const std::string& path);

}  // namespace aismlmc::bench
