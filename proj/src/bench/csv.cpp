#include "bench/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "bench/config.hpp"

namespace aismlmc::bench {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& field, const char* column, int line) {
  T value{};
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": bad " + column + " '" +
                             field + "'");
  }
  return value;
}

}  // namespace

std::string format_theta_hat(const std::vector<std::vector<double>>& theta_hat) {
  std::string out;
  for (std::size_t l = 0; l < theta_hat.size(); ++l) {
    if (l > 0) out += ';';
    for (std::size_t j = 0; j < theta_hat[l].size(); ++j) {
      if (j > 0) out += ':';
      out += format_real(theta_hat[l][j]);
    }
  }
  return out;
}

std::vector<std::vector<double>> parse_theta_hat(const std::string& text) {
  std::vector<std::vector<double>> out;
  if (text.empty()) return out;
  for (const auto& level : split(text, ';')) {
    std::vector<double> components;
    for (const auto& c : split(level, ':')) {
      components.push_back(parse_number<double>(c, "theta_hat", 0));
    }
    out.push_back(std::move(components));
  }
  return out;
}

void emit_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << kSweepHeader << '\n';
  for (const auto& r : rows) {
    out << r.method << ',' << r.m << ',' << r.L << ',' << r.n << ',' << r.I << ',' << r.rep << ','
        << format_real(r.estimate) << ',' << format_real(r.abs_error) << ','
        << format_theta_hat(r.theta_hat) << ',' << r.euler_steps << ','
        << format_real(r.wall_seconds) << ',' << r.seed << '\n';
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  return out;
}

void write_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  auto out = open_output(path);
  emit_csv(rows, out);
  if (!out.flush()) {
    throw std::runtime_error("write to '" + path + "' failed");
  }
}

std::vector<SweepRow> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) {
    throw std::runtime_error("csv: missing or unexpected header");
  }
  std::vector<SweepRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 12) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected 12 fields, got " +
                               std::to_string(f.size()));
    }
    SweepRow r;
    r.method = f[0];
    r.m = parse_number<std::int64_t>(f[1], "m", line_no);
    r.L = parse_number<int>(f[2], "L", line_no);
    r.n = parse_number<std::int64_t>(f[3], "n", line_no);
    r.I = parse_number<std::int64_t>(f[4], "I", line_no);
    r.rep = parse_number<int>(f[5], "rep", line_no);
    r.estimate = parse_number<double>(f[6], "estimate", line_no);
    r.abs_error = parse_number<double>(f[7], "abs_error", line_no);
    r.theta_hat = parse_theta_hat(f[8]);
    r.euler_steps = parse_number<std::int64_t>(f[9], "euler_steps", line_no);
    r.wall_seconds = parse_number<double>(f[10], "wall_seconds", line_no);
    r.seed = parse_number<std::uint64_t>(f[11], "seed", line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SweepRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "' for reading");
  }
  return parse_csv(in);
}

}  // namespace aismlmc::bench
