#include "bench/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace aismlmc::bench {

std::string to_string(Method method) {
  switch (method) {
    case Method::kStandard:
      return "standard";
    case Method::kAis:
      return "ais";
    case Method::kAisChen:
      return "ais-chen";
  }
  return "unknown";
}

ConfigError::ConfigError(std::string key, int line, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                         (key.empty() ? std::string() : "key '" + key + "': ") + message),
      key_(std::move(key)),
      line_(line) {}

std::string format_real(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  if (ec != std::errc()) {
    throw std::runtime_error("format_real: conversion failed");
  }
  return std::string(buf, end);
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct Entry {
  std::string key;
  std::string value;
  int line;

  [[noreturn]] void fail(const std::string& message) const { throw ConfigError(key, line, message); }

  double real() const {
    std::string text = value;
    std::function<double(double)> wrap = [](double x) { return x; };
    for (const char* fn : {"log", "exp"}) {
      const std::string prefix = std::string(fn) + "(";
      if (text.rfind(prefix, 0) == 0) {
        if (text.back() != ')') fail("unbalanced parenthesis in '" + value + "'");
        text = trim(text.substr(prefix.size(), text.size() - prefix.size() - 1));
        wrap = fn[0] == 'l' ? [](double x) { return std::log(x); }
                            : [](double x) { return std::exp(x); };
        break;
      }
    }
    double x = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
    if (ec != std::errc() || end != text.data() + text.size()) {
      fail("expected a real number, got '" + value + "'");
    }
    const double out = wrap(x);
    if (!std::isfinite(out)) fail("value '" + value + "' is not finite");
    return out;
  }

  std::int64_t integer() const {
    std::int64_t x = 0;
    auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), x);
    if (ec != std::errc() || end != value.data() + value.size()) {
      fail("expected an integer, got '" + value + "'");
    }
    return x;
  }

  std::uint64_t unsigned_integer() const {
    std::uint64_t x = 0;
    auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), x);
    if (ec != std::errc() || end != value.data() + value.size()) {
      fail("expected a non-negative integer, got '" + value + "'");
    }
    return x;
  }

  bool boolean() const {
    if (value == "true" || value == "on" || value == "1") return true;
    if (value == "false" || value == "off" || value == "0") return false;
    fail("expected true/false, got '" + value + "'");
  }

  std::vector<std::int64_t> integers() const {
    std::vector<std::int64_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      Entry sub{key, trim(item), line};
      out.push_back(sub.integer());
    }
    if (out.empty()) fail("expected a comma-separated list of integers");
    return out;
  }
};

void check(bool ok, const Entry* entry, const std::string& key, const std::string& message) {
  if (!ok) {
    throw ConfigError(entry ? entry->key : key, entry ? entry->line : 0, message);
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", line_no, "expected 'key = value', got '" + line + "'");
    }
    Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) throw ConfigError("", line_no, "missing key");
    if (e.value.empty()) e.fail("missing value");
    if (entries.count(e.key)) e.fail("duplicate key (first set on line " +
                                     std::to_string(entries.at(e.key).line) + ")");
    entries.emplace(e.key, e);
  }

  using Setter = std::function<void(const Entry&)>;
  const std::map<std::string, Setter> setters = {
      {"method",
       [&](const Entry& e) {
         if (e.value == "standard") c.method = Method::kStandard;
         else if (e.value == "ais") c.method = Method::kAis;
         else if (e.value == "ais-chen") c.method = Method::kAisChen;
         else e.fail("expected standard | ais | ais-chen, got '" + e.value + "'");
       }},
      {"model",
       [&](const Entry& e) {
         if (e.value != "black-scholes") e.fail("only 'black-scholes' is supported");
         c.model = e.value;
       }},
      {"s0", [&](const Entry& e) { c.s0 = e.real(); }},
      {"r", [&](const Entry& e) { c.rate = e.real(); }},
      {"sigma", [&](const Entry& e) { c.sigma = e.real(); }},
      {"T", [&](const Entry& e) { c.T = e.real(); }},
      {"payoff",
       [&](const Entry& e) {
         if (e.value != "call") e.fail("only 'call' is supported");
         c.payoff = e.value;
       }},
      {"K", [&](const Entry& e) { c.strike = e.real(); }},
      {"m", [&](const Entry& e) { c.m = e.integer(); }},
      {"L", [&](const Entry& e) { c.L = static_cast<int>(e.integer()); }},
      {"alpha", [&](const Entry& e) { c.alpha = e.real(); }},
      {"a0", [&](const Entry& e) { c.a0 = e.real(); }},
      {"gamma0", [&](const Entry& e) { c.gamma0 = e.real(); }},
      {"rho", [&](const Entry& e) { c.rho = e.real(); }},
      {"gain_offset", [&](const Entry& e) { c.gain_offset = e.integer(); }},
      {"I", [&](const Entry& e) { c.I = e.integer(); }},
      {"box", [&](const Entry& e) { c.box = e.real(); }},
      {"theta0", [&](const Entry& e) { c.theta0 = e.real(); }},
      {"averaging", [&](const Entry& e) { c.averaging = e.boolean(); }},
      {"chen_k0", [&](const Entry& e) { c.chen_k0 = e.real(); }},
      {"chen_reset",
       [&](const Entry& e) {
         if (e.value == "expand") c.chen_literal_reset = false;
         else if (e.value == "literal") c.chen_literal_reset = true;
         else e.fail("expected expand | literal, got '" + e.value + "'");
       }},
      {"warm_start", [&](const Entry& e) { c.warm_start = e.boolean(); }},
      {"M", [&](const Entry& e) { c.M = static_cast<int>(e.integer()); }},
      {"seed", [&](const Entry& e) { c.seed = e.unsigned_integer(); }},
      {"output", [&](const Entry& e) { c.output = e.value; }},
      {"benchmark", [&](const Entry& e) { c.benchmark = e.real(); }},
      {"sweep_L",
       [&](const Entry& e) {
         c.sweep_L.clear();
         for (auto v : e.integers()) c.sweep_L.push_back(static_cast<int>(v));
       }},
      {"level", [&](const Entry& e) { c.level = static_cast<int>(e.integer()); }},
      {"oracle_samples", [&](const Entry& e) { c.oracle_samples = e.integer(); }},
      {"oracle_steps", [&](const Entry& e) { c.oracle_steps = e.integer(); }},
      {"oracle_spacing", [&](const Entry& e) { c.oracle_spacing = e.real(); }},
      {"weak_samples", [&](const Entry& e) { c.weak_samples = e.integer(); }},
      {"weak_steps", [&](const Entry& e) { c.weak_steps = e.integers(); }},
  };

  for (const auto& [key, entry] : entries) {
    const auto it = setters.find(key);
    if (it == setters.end()) entry.fail("unknown key");
    it->second(entry);
  }

  auto at = [&](const char* key) -> const Entry* {
    const auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };
  check(c.s0 > 0.0, at("s0"), "s0", "must be > 0");
  check(c.sigma > 0.0, at("sigma"), "sigma", "must be > 0");
  check(c.T > 0.0, at("T"), "T", "must be > 0");
  check(c.strike > 0.0, at("K"), "K", "must be > 0");
  check(c.m >= 2, at("m"), "m", "must be >= 2");
  check(c.L >= 1, at("L"), "L", "must be >= 1");
  check(c.alpha >= 0.5 && c.alpha <= 1.0, at("alpha"), "alpha", "must lie in [1/2, 1]");
  check(c.a0 > 0.0, at("a0"), "a0", "must be > 0");
  check(c.gamma0 > 0.0, at("gamma0"), "gamma0", "must be > 0");
  check(c.rho > 0.5 && c.rho <= 1.0, at("rho"), "rho", "must lie in (1/2, 1]");
  check(c.gain_offset >= 1, at("gain_offset"), "gain_offset", "must be >= 1");
  check(c.I >= 0, at("I"), "I", "must be >= 0");
  check(c.box > 0.0, at("box"), "box", "half-width must be > 0");
  check(std::abs(c.theta0) < c.box, at("theta0"), "theta0", "must lie in the interior of the box");
  check(c.chen_k0 > 0.0, at("chen_k0"), "chen_k0", "must be > 0");
  check(c.method != Method::kAisChen || std::abs(c.theta0) <= c.chen_k0, at("theta0"), "theta0",
        "must lie in K_0 = [-chen_k0, chen_k0]");
  check(c.M >= 1, at("M"), "M", "must be >= 1");
  check(!c.benchmark || std::isfinite(*c.benchmark), at("benchmark"), "benchmark",
        "must be finite");
  for (int l : c.sweep_L) check(l >= 1, at("sweep_L"), "sweep_L", "levels must be >= 1");
  check(c.level >= 0, at("level"), "level", "must be >= 0");
  check(c.oracle_samples >= 2, at("oracle_samples"), "oracle_samples", "must be >= 2");
  check(c.oracle_steps >= 1, at("oracle_steps"), "oracle_steps", "must be >= 1");
  check(c.oracle_spacing > 0.0, at("oracle_spacing"), "oracle_spacing", "must be > 0");
  check(c.weak_samples >= 2, at("weak_samples"), "weak_samples", "must be >= 2");
  check(c.weak_steps.size() >= 3, at("weak_steps"), "weak_steps", "need at least 3 step counts");
  for (auto n : c.weak_steps) check(n >= 1, at("weak_steps"), "weak_steps", "must be >= 1");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("", 0, "cannot read config file '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  auto list = [](const auto& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      s += (i ? "," : "") + std::to_string(values[i]);
    }
    return s;
  };
  out << "method = " << to_string(c.method) << "\n"
      << "model = " << c.model << "\n"
      << "s0 = " << format_real(c.s0) << "\n"
      << "r = " << format_real(c.rate) << "\n"
      << "sigma = " << format_real(c.sigma) << "\n"
      << "T = " << format_real(c.T) << "\n"
      << "payoff = " << c.payoff << "\n"
      << "K = " << format_real(c.strike) << "\n"
      << "m = " << c.m << "\n"
      << "L = " << c.L << "\n"
      << "alpha = " << format_real(c.alpha) << "\n"
      << "a0 = " << format_real(c.a0) << "\n"
      << "gamma0 = " << format_real(c.gamma0) << "\n"
      << "rho = " << format_real(c.rho) << "\n"
      << "gain_offset = " << c.gain_offset << "\n"
      << "I = " << c.I << "\n"
      << "box = " << format_real(c.box) << "\n"
      << "theta0 = " << format_real(c.theta0) << "\n"
      << "averaging = " << (c.averaging ? "true" : "false") << "\n"
      << "chen_k0 = " << format_real(c.chen_k0) << "\n"
      << "chen_reset = " << (c.chen_literal_reset ? "literal" : "expand") << "\n"
      << "warm_start = " << (c.warm_start ? "true" : "false") << "\n"
      << "M = " << c.M << "\n"
      << "seed = " << c.seed << "\n";
  if (!c.output.empty()) out << "output = " << c.output << "\n";
  if (c.benchmark) out << "benchmark = " << format_real(*c.benchmark) << "\n";
  out << "sweep_L = " << list(c.sweep_L) << "\n"
      << "level = " << c.level << "\n"
      << "oracle_samples = " << c.oracle_samples << "\n"
      << "oracle_steps = " << c.oracle_steps << "\n"
      << "oracle_spacing = " << format_real(c.oracle_spacing) << "\n"
      << "weak_samples = " << c.weak_samples << "\n"
      << "weak_steps = " << list(c.weak_steps) << "\n";
  return out.str();
}

double RunConfig::benchmark_value() const {
  return benchmark ? *benchmark : bs_exact_call(bs_params());
}

BsParams RunConfig::bs_params() const { return BsParams{s0, strike, rate, sigma, T}; }

BlackScholesModel<double> RunConfig::make_model() const {
  return BlackScholesModel<double>(s0, rate, sigma, T);
}

DiscountedCall<double> RunConfig::make_payoff() const {
  return DiscountedCall<double>(strike, rate, T);
}

LevelPlan RunConfig::make_plan(int levels) const {
  std::vector<double> a(static_cast<std::size_t>(levels) + 1, 1.0);
  a[0] = a0;
  return plan_levels(m, levels, alpha, T, a);
}

SaConfig<double> RunConfig::make_sa() const {
  SaConfig<double> sa = SaConfig<double>::defaults(1);
  sa.gain = GainSchedule<double>(gamma0, rho, gain_offset);
  sa.box = CompactBox<double>::symmetric(1, box);
  sa.theta0 = Vector<double>::Constant(1, theta0);
  sa.stop_iters = method == Method::kStandard ? 0 : I;
  sa.averaging = averaging;
  sa.algorithm = method == Method::kAisChen ? SaAlgorithm::kChen : SaAlgorithm::kProjected;
  sa.compacts = ExpandingCompacts<double>(chen_k0);
  sa.chen_reset = chen_literal_reset ? ChenReset::kLiteral : ChenReset::kExpand;
  sa.warm_start = warm_start;
  return sa;
}

}  // namespace aismlmc::bench
