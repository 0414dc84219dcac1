#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "aismlmc/oracle.hpp"
#include "aismlmc/payoff.hpp"
#include "aismlmc/random.hpp"
#include "aismlmc/sde.hpp"

using namespace aismlmc;
using Vec = Vector<double>;
using Mat = Matrix<double>;

namespace {

Vec scalar(double x) { return Vec::Constant(1, x); }
Vec zeros(Eigen::Index n) { return Vec(Vec::Zero(n)); }

const double kRate = std::log(1.1);
const BlackScholesModel<double> kBenchmark(130.0, kRate, 0.6, 1.0);
const DiscountedCall<double> kCall(100.0, kRate, 1.0);

// dX = -X dt + 0.5 dW: the diffusion does not depend on the state.
FunctionSdeModel<double> additive_model() {
  FunctionSdeModel<double> model([](const Vec& x) { return Vec(-x); },
                                 {[](const Vec&) { return scalar(0.5); }}, scalar(1.0), 1.0);
  model.with_jacobians([](const Vec&) { return Mat(Mat::Constant(1, 1, -1.0)); },
                       {[](const Vec&) { return Mat(Mat::Zero(1, 1)); }});
  return model;
}

std::vector<Vec> line_grid(double lo, double hi, double spacing) {
  return uniform_theta_grid<double>(scalar(lo), scalar(hi), spacing);
}

void check_convex(const VarianceSurface<double>& s) {
  for (std::size_t k = 1; k + 1 < s.values.size(); ++k) {
    CHECK(s.values[k - 1] + s.values[k + 1] - 2.0 * s.values[k] >= -1e-9 * s.values[k]);
  }
}

}  // namespace

TEST_SUITE("closed form") {
  TEST_CASE("benchmark call price") {
    const BsParams p{130.0, 100.0, kRate, 0.6, 1.0};
    CHECK(std::abs(bs_exact_call(p) - 49.8985742502) < 1e-9);
    CHECK(std::abs(bs_exact_call(p) - 49.898585) < 2e-5);
  }

  TEST_CASE("limits in sigma and strike") {
    const double r = 0.05;
    const double intrinsic = 130.0 - 100.0 * std::exp(-r);
    CHECK(bs_exact_call({130.0, 100.0, r, 1e-8, 1.0}) == doctest::Approx(intrinsic).epsilon(1e-12));
    CHECK(bs_exact_call({130.0, 1e-10, r, 0.3, 1.0}) == doctest::Approx(130.0).epsilon(1e-12));
  }

  TEST_CASE("put-call parity against a direct put") {
    const BsParams p{90.0, 100.0, 0.03, 0.25, 2.0};
    const double vol = p.sigma * std::sqrt(p.T);
    const double d1 = (std::log(p.s0 / p.strike) + (p.rate + 0.5 * p.sigma * p.sigma) * p.T) / vol;
    const double put = p.strike * std::exp(-p.rate * p.T) * normal_cdf(vol - d1) -
                       p.s0 * normal_cdf(-d1);
    CHECK(bs_exact_call(p) - put == doctest::Approx(p.s0 - p.strike * std::exp(-p.rate * p.T)));
  }

  TEST_CASE("invalid parameters") {
    CHECK_THROWS_AS(bs_exact_call({-1.0, 100.0, 0.0, 0.2, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(bs_exact_call({100.0, 0.0, 0.0, 0.2, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(bs_exact_call({100.0, 100.0, 0.0, 0.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(bs_exact_call({100.0, 100.0, 0.0, 0.2, 0.0}), InvalidArgument);
  }

  TEST_CASE("normal cdf") {
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-14));
    CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-14));
    CHECK(normal_cdf(-40.0) >= 0.0);
  }
}

TEST_SUITE("limit pair") {
  TEST_CASE("additive noise gives no error process") {
    const auto model = additive_model();
    for (std::uint64_t i = 0; i < 20; ++i) {
      RandomStream s(4, StreamKey{StreamDomain::kOracle, 0, i});
      const auto sample = simulate_limit_pair(model, 32, s);
      CHECK(sample.u_T(0) == 0.0);
    }
  }

  TEST_CASE("one Black-Scholes step by hand") {
    RandomStream s(7, StreamKey{StreamDomain::kOracle, 0, 1});
    const auto sample = simulate_limit_pair(kBenchmark, 1, s);
    RandomStream replay(7, StreamKey{StreamDomain::kOracle, 0, 1});
    const double dw = replay.normal();
    const double aux = replay.normal();
    const double sigma = 0.6, s0 = 130.0;
    CHECK(sample.u_T(0) == doctest::Approx(-sigma * sigma * s0 * aux / std::sqrt(2.0)));
    CHECK(sample.x_T(0) == doctest::Approx(s0 * (1.0 + kRate + sigma * dw)));
    CHECK(sample.w_T(0) == doctest::Approx(dw));
  }

  TEST_CASE("X matches the plain Euler scheme") {
    RandomStream s(8, StreamKey{StreamDomain::kOracle, 0, 3});
    const auto grid = generate_brownian_grid<double>(64, 1, 1.0, s);
    RandomStream aux(8, StreamKey{StreamDomain::kOracle, 1, 3});
    const auto sample = simulate_limit_pair(kBenchmark, grid, aux);
    CHECK(sample.x_T(0) == euler_terminal(kBenchmark, zeros(1), grid)(0));
    CHECK(sample.w_T(0) == grid.endpoint(0));
  }

  TEST_CASE("model without Jacobians is rejected") {
    FunctionSdeModel<double> model([](const Vec& x) { return x; },
                                   {[](const Vec& x) { return x; }}, scalar(1.0), 1.0);
    RandomStream s(1, StreamKey{});
    CHECK_THROWS_AS(simulate_limit_pair(model, 4, s), InvalidArgument);
  }

  TEST_CASE("Var(U_T) matches the second-moment recursion") {
    const std::int64_t n = 16;
    const double dt = 1.0 / n, sigma = 0.6, s0 = 130.0;
    const double g = std::pow(1.0 + kRate * dt, 2) + sigma * sigma * dt;
    double a = s0 * s0, c = 0.0;
    for (std::int64_t k = 0; k < n; ++k) {
      c = g * c + 0.5 * std::pow(sigma, 4) * dt * a;
      a *= g;
    }
    const int samples = 1000000;
    double m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < samples; ++i) {
      RandomStream s(11, StreamKey{StreamDomain::kOracle, 0, static_cast<std::uint64_t>(i)});
      const double u = simulate_limit_pair(kBenchmark, n, s).u_T(0);
      m2 += u * u;
      m4 += u * u * u * u;
    }
    m2 /= samples;
    m4 /= samples;
    const double se = std::sqrt((m4 - m2 * m2) / samples);
    MESSAGE("E U^2 = " << m2 << ", recursion " << c << ", se " << se);
    CHECK(std::abs(m2 - c) <= 3.0 * se);
  }
}

TEST_SUITE("theta grid") {
  TEST_CASE("count and order") {
    const auto g = line_grid(-3.0, 3.0, 0.05);
    CHECK(g.size() == 121);
    CHECK(g.front()(0) == -3.0);
    CHECK(g.back()(0) == doctest::Approx(3.0).epsilon(1e-12));
    Vec lo(2), hi(2);
    lo << -1.0, 0.0;
    hi << 1.0, 2.0;
    const auto g2 = uniform_theta_grid<double>(lo, hi, 1.0);
    REQUIRE(g2.size() == 9);
    for (std::size_t k = 1; k < g2.size(); ++k) CHECK(lex_less(g2[k - 1], g2[k]));
    CHECK(g2[1](0) == -1.0);
    CHECK(g2[1](1) == 1.0);
  }

  TEST_CASE("invalid grids") {
    CHECK_THROWS_AS(line_grid(1.0, 0.0, 0.1), InvalidArgument);
    CHECK_THROWS_AS(line_grid(0.0, 1.0, 0.0), InvalidArgument);
    const std::vector<Vec> unsorted{scalar(0.5), scalar(0.1)};
    CHECK_THROWS_AS(level_variance_surface(kBenchmark, kCall, 4, 1, unsorted, 10, 1),
                    InvalidArgument);
    const std::vector<Vec> wrong_dim{zeros(2)};
    CHECK_THROWS_AS(level_variance_surface(kBenchmark, kCall, 4, 1, wrong_dim, 10, 1),
                    InvalidArgument);
  }
}

TEST_SUITE("grid argmin") {
  VarianceSurface<double> surface(std::vector<Vec> grid, std::vector<double> values) {
    VarianceSurface<double> s;
    s.theta_grid = std::move(grid);
    s.values = std::move(values);
    s.std_errors.assign(s.values.size(), 0.0);
    return s;
  }

  TEST_CASE("singleton") {
    const auto m = grid_argmin(surface({scalar(0.3)}, {7.0}));
    CHECK(m.theta_star(0) == 0.3);
    CHECK(m.value == 7.0);
  }

  TEST_CASE("three points") {
    const auto m = grid_argmin(surface(line_grid(-1.0, 1.0, 1.0), {3.0, 1.0, 2.0}));
    CHECK(m.theta_star(0) == 0.0);
    CHECK(m.value == 1.0);
  }

  TEST_CASE("ties go to the smallest point") {
    const auto m = grid_argmin(surface(line_grid(-1.0, 1.0, 1.0), {2.0, 1.0, 1.0}));
    CHECK(m.theta_star(0) == 0.0);
    CHECK_THROWS_AS(grid_argmin(surface({}, {})), InvalidArgument);
  }
}

TEST_SUITE("variance surfaces") {
  TEST_CASE("zero gradient gives a zero surface") {
    const std::function<Vec(const Vec&)> grad = [](const Vec&) { return zeros(1); };
    const auto s = variance_surface<double>(kBenchmark, grad, line_grid(-1.0, 1.0, 0.5), 100, 8, 1);
    for (double v : s.values) CHECK(v == 0.0);
  }

  TEST_CASE("value at theta = 0 is the plain second moment") {
    const std::function<Vec(const Vec&)> grad = [](const Vec& x) { return kCall.gradient(x); };
    const std::int64_t samples = 2000;
    const auto s = variance_surface<double>(kBenchmark, grad, line_grid(-1.0, 1.0, 0.5), samples,
                                            8, 5);
    double m2 = 0.0;
    for (std::int64_t i = 0; i < samples; ++i) {
      RandomStream st(5, StreamKey{StreamDomain::kOracle, 0, static_cast<std::uint64_t>(i + 1)});
      const auto p = simulate_limit_pair(kBenchmark, 8, st);
      const double proj = kCall.gradient(p.x_T).dot(p.u_T);
      m2 += proj * proj;
    }
    CHECK(s.values[2] == doctest::Approx(m2 / samples).epsilon(1e-12));
    check_convex(s);
    CHECK(s.level == VarianceSurface<double>::kLimitLevel);
  }

  TEST_CASE("constant payoff has zero level variance") {
    const auto constant = [](const Vec&) { return 3.0; };
    for (int ell = 1; ell <= 3; ++ell) {
      const auto s = level_variance_surface(kBenchmark, constant, 2, ell, line_grid(-1, 1, 0.5),
                                            200, 3);
      for (double v : s.values) CHECK(v == 0.0);
    }
    const auto s0 = level_variance_surface(kBenchmark, constant, 2, 0, line_grid(0, 0, 1), 200, 3);
    CHECK(s0.values[0] == doctest::Approx(9.0));
  }

  TEST_CASE("level surfaces are convex in theta") {
    const auto grid = line_grid(-3.0, 3.0, 0.25);
    for (int ell = 0; ell <= 3; ++ell) {
      const auto s = level_variance_surface(kBenchmark, kCall, 4, ell, grid, 20000, 6);
      check_convex(s);
      CHECK(s.level == ell);
    }
  }

  TEST_CASE("level minimizers approach the limit minimizer") {
    const auto grid = line_grid(-3.0, 3.0, 0.05);
    const std::function<Vec(const Vec&)> grad = [](const Vec& x) { return kCall.gradient(x); };
    const double limit = grid_argmin(variance_surface<double>(kBenchmark, grad, grid, 200000, 256,
                                                              1))
                             .theta_star(0);
    const double coarse =
        grid_argmin(level_variance_surface(kBenchmark, kCall, 2, 1, grid, 200000, 1)).theta_star(0);
    const double fine =
        grid_argmin(level_variance_surface(kBenchmark, kCall, 2, 5, grid, 200000, 1)).theta_star(0);
    MESSAGE("limit " << limit << ", l=1 " << coarse << ", l=5 " << fine);
    CHECK(std::abs(fine - limit) <= std::abs(coarse - limit) + 1e-12);
    CHECK(std::abs(fine - limit) <= 0.1);
  }
}

TEST_SUITE("weak error") {
  TEST_CASE("deterministic growth has first-order bias") {
    FunctionSdeModel<double> model([](const Vec& x) { return x; },
                                   {[](const Vec&) { return scalar(0.0); }}, scalar(1.0), 1.0);
    const auto identity = [](const Vec& x) { return x(0); };
    const auto fit = weak_error_fit(model, identity, std::exp(1.0), {4, 8, 16, 32, 64}, 2, 1);
    CHECK(fit.slope == doctest::Approx(-1.0).epsilon(0.05));
    CHECK(fit.c_psi < 0.0);
    CHECK(fit.biases.back() == doctest::Approx(std::pow(1.0 + 1.0 / 64, 64) - std::exp(1.0)));
    for (double se : fit.std_errors) CHECK(se == 0.0);
  }

  TEST_CASE("Black-Scholes call converges at order one") {
    const double exact = bs_exact_call({130.0, 100.0, kRate, 0.6, 1.0});
    const auto fit = weak_error_fit(kBenchmark, kCall, exact, {2, 4, 8}, 1000000, 9);
    MESSAGE("slope " << fit.slope << " +- " << fit.slope_std_error << ", C " << fit.c_psi);
    CHECK(fit.slope >= -1.3);
    CHECK(fit.slope <= -0.7);
    CHECK(fit.alpha == -fit.slope);
  }

  TEST_CASE("unresolved bias is reported") {
    const auto constant = [](const Vec&) { return 2.0; };
    CHECK_THROWS_AS(weak_error_fit(kBenchmark, constant, 2.0, {2, 4, 8}, 100, 1),
                    InsufficientResolution);
    CHECK_THROWS_AS(weak_error_fit(kBenchmark, kCall, 50.0, {2, 4}, 100, 1), InvalidArgument);
  }

  TEST_CASE("line fit") {
    double slope, intercept, se;
    fit_line({0.0, 1.0, 2.0}, {1.0, 3.0, 5.0}, slope, intercept, se);
    CHECK(slope == doctest::Approx(2.0));
    CHECK(intercept == doctest::Approx(1.0));
    CHECK(se == doctest::Approx(0.0));
  }
}
