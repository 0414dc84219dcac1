#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "aismlmc/mlmc.hpp"
#include "aismlmc/oracle.hpp"
#include "aismlmc/payoff.hpp"

using namespace aismlmc;
using Vec = Vector<double>;

namespace {

Vec scalar(double x) { return Vec::Constant(1, x); }

const double kRate = std::log(1.1);
const BlackScholesModel<double> kBenchmark(130.0, kRate, 0.6, 1.0);
const DiscountedCall<double> kCall(100.0, kRate, 1.0);

struct ConstantPayoff {
  double c;
  double operator()(const Vec&) const { return c; }
};

SaConfig<double> tuned_sa(std::int64_t I) {
  auto sa = SaConfig<double>::defaults(1);
  sa.gain = GainSchedule<double>(1e-3, 1.0);
  sa.box = CompactBox<double>::symmetric(1, 3.0);
  sa.stop_iters = I;
  return sa;
}

bool same_report(const EstimatorReport& a, const EstimatorReport& b) {
  if (a.estimate != b.estimate || a.euler_steps_total != b.euler_steps_total ||
      a.per_level.size() != b.per_level.size()) {
    return false;
  }
  for (std::size_t l = 0; l < a.per_level.size(); ++l) {
    const auto& x = a.per_level[l];
    const auto& y = b.per_level[l];
    if (x.samples != y.samples || x.used != y.used || x.sample_mean != y.sample_mean ||
        x.sample_variance != y.sample_variance || x.theta_final != y.theta_final ||
        x.overflow_count != y.overflow_count || x.euler_steps != y.euler_steps) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("plan_levels") {
  TEST_CASE("m = 4, L = 2") {
    const auto plan = plan_levels(4, 2, 1.0, 1.0);
    CHECK(plan.n == 16);
    CHECK(plan.N == std::vector<std::int64_t>{1536, 384, 96});
  }

  TEST_CASE("m = 2, L = 1, alpha = 1/2") {
    const auto plan = plan_levels(2, 1, 0.5, 1.0);
    CHECK(plan.n == 2);
    CHECK(plan.N == std::vector<std::int64_t>{2, 1});
  }

  TEST_CASE("m = 4, L = 4") {
    const auto plan = plan_levels(4, 4, 1.0, 1.0);
    CHECK(plan.n == 256);
    CHECK(plan.N == std::vector<std::int64_t>{786432, 196608, 49152, 12288, 3072});
  }

  TEST_CASE("weights enter as written") {
    // n^2 (m-1) T sum_{l>=1} a_l / (m^l a_l) with a = (2, 1, 3): base = 16 * 1 * 4 = 64
    const auto plan = plan_levels(2, 2, 1.0, 1.0, {2.0, 1.0, 3.0});
    CHECK(plan.N == std::vector<std::int64_t>{32, 32, 6});
    // 4^2 * 3 * 0.5 * 1 = 24: N = 24, 6
    const auto half = plan_levels(4, 1, 1.0, 0.5, {1.0, 1.0});
    CHECK(half.N == std::vector<std::int64_t>{24, 6});
    const auto odd = plan_levels(3, 2, 0.75, 1.0);
    // 9^{1.5} * 2 * 2 = 108: N = 108, 36, 12
    CHECK(odd.N == std::vector<std::int64_t>{108, 36, 12});
    const auto frac = plan_levels(2, 2, 1.0, 0.3);
    // 16 * 0.3 * 2 = 9.6: N = ceil(9.6), ceil(4.8), ceil(2.4)
    CHECK(frac.N == std::vector<std::int64_t>{10, 5, 3});
  }

  TEST_CASE("sample sizes are non-increasing for a = 1") {
    for (std::int64_t m : {2, 3, 4, 5}) {
      for (int L = 1; L <= 5; ++L) {
        const auto plan = plan_levels(m, L, 1.0, 1.0);
        for (int l = 1; l <= L; ++l) CHECK(plan.N[l] <= plan.N[l - 1]);
      }
    }
  }

  TEST_CASE("preconditions") {
    CHECK_THROWS_AS(plan_levels(1, 2, 1.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(plan_levels(4, 0, 1.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(plan_levels(4, 2, 0.4, 1.0), InvalidArgument);
    CHECK_THROWS_AS(plan_levels(4, 2, 1.1, 1.0), InvalidArgument);
    CHECK_THROWS_AS(plan_levels(4, 2, 1.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(plan_levels(4, 2, 1.0, 1.0, {1.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(plan_levels(4, 2, 1.0, 1.0, {1.0, 0.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(plan_levels(10, 20, 1.0, 1.0), NumericalOverflow);
    CHECK_THROWS_AS(plan_levels(4, 16, 1.0, 1.0), NumericalOverflow);
    CHECK_NOTHROW(plan_levels(4, 12, 1.0, 1.0));
  }
}

TEST_SUITE("complexity model") {
  TEST_CASE("m = 4, L = 2, I = 0") {
    const auto c = complexity_model(plan_levels(4, 2, 1.0, 1.0), 0);
    CHECK(c.steps_standard == 5376);
    CHECK(c.steps_ais == 5376);
    CHECK(c.ratio == 1.0);
  }

  TEST_CASE("closed form with unit weights") {
    // N_0 = n^2 (m-1) L and N_l (m^l + m^{l-1}) = n^2 (m^2-1) L / m, so the
    // total is n^2 (m-1) L (m + L (m+1)) / m.
    for (std::int64_t m : {2, 3, 4}) {
      for (int L = 1; L <= 5; ++L) {
        const auto plan = plan_levels(m, L, 1.0, 1.0);
        const std::int64_t n = plan.n;
        const std::int64_t expected = n * n * (m - 1) * L * (m + L * (m + 1)) / m;
        CHECK(complexity_model(plan, 0).steps_standard == expected);
      }
    }
  }

  TEST_CASE("adaptation overhead") {
    const auto plan = plan_levels(4, 2, 1.0, 1.0);
    // min(I, N_l) extra untilted paths per level; N_2 = 96 < 100
    CHECK(complexity_model(plan, 100).steps_ais == 5376 + 100 * 1 + 100 * 5 + 96 * 20);
    CHECK(complexity_model(plan, 500).steps_ais == 5376 + 500 * 1 + 384 * 5 + 96 * 20);
    CHECK(complexity_model(plan, 100000).steps_ais == 2 * 5376);
    CHECK_THROWS_AS(complexity_model(plan, -1), InvalidArgument);
  }
}

TEST_SUITE("mlmc_estimate") {
  TEST_CASE("constant payoff is reproduced exactly") {
    const auto plan = plan_levels(4, 2, 1.0, 1.0);
    const auto r = mlmc_estimate(kBenchmark, ConstantPayoff{2.5}, plan, 1);
    CHECK(r.estimate == 2.5);
    for (int l = 1; l <= 2; ++l) CHECK(r.per_level[l].sample_mean == 0.0);
  }

  TEST_CASE("two-term sum by hand") {
    LevelPlan plan = plan_levels(2, 1, 1.0, 1.0);
    plan.N = {1, 1};
    const std::uint64_t seed = 99;
    RandomStream s0(seed, StreamKey{StreamDomain::kBrownian, 0, 1});
    RandomStream s1(seed, StreamKey{StreamDomain::kBrownian, 1, 1});
    const double sigma = 0.6, r = kRate;
    const double z0 = s0.normal();
    const double level0 = kCall(scalar(130.0 * (1.0 + r + sigma * z0)));
    const double dw1 = std::sqrt(0.5) * s1.normal();
    const double dw2 = std::sqrt(0.5) * s1.normal();
    double fine = 130.0;
    fine += r * fine * 0.5 + sigma * fine * dw1;
    fine += r * fine * 0.5 + sigma * fine * dw2;
    const double coarse = 130.0 * (1.0 + r + sigma * (dw1 + dw2));
    const double expected = level0 + (kCall(scalar(fine)) - kCall(scalar(coarse)));
    const auto report = mlmc_estimate(kBenchmark, kCall, plan, seed);
    CHECK(report.estimate == doctest::Approx(expected).epsilon(1e-13));
  }

  TEST_CASE("estimate is the sum of level means") {
    const auto plan = plan_levels(4, 3, 1.0, 1.0);
    const auto r = mlmc_estimate(kBenchmark, kCall, plan, 5);
    double sum = 0.0;
    for (const auto& l : r.per_level) sum += l.sample_mean;
    CHECK(r.estimate == sum);
    CHECK(r.seed == 5);
    CHECK(r.overflow_total() == 0);
    CHECK(r.sample_total() == 36864 + 9216 + 2304 + 576);
  }

  TEST_CASE("result does not depend on the thread count") {
    const auto plan = plan_levels(4, 3, 1.0, 1.0);
    const auto a = mlmc_estimate(kBenchmark, kCall, plan, 17, 1);
    const auto b = mlmc_estimate(kBenchmark, kCall, plan, 17, 3);
    CHECK(same_report(a, b));
    const auto c = ais_mlmc_estimate(kBenchmark, kCall, plan, tuned_sa(1000), 17, 1);
    const auto d = ais_mlmc_estimate(kBenchmark, kCall, plan, tuned_sa(1000), 17, 4);
    CHECK(same_report(c, d));
  }

  TEST_CASE("plan and model horizons must agree") {
    const auto plan = plan_levels(4, 2, 1.0, 2.0);
    CHECK_THROWS_AS(mlmc_estimate(kBenchmark, kCall, plan, 1), InvalidArgument);
  }

  TEST_CASE("overflowing samples are dropped and counted") {
    // payoff overflows far in the right tail: a few samples on levels >= 1
    const auto tail = [](const Vec& x) {
      return x(0) > 5.0 * 130.0 ? std::numeric_limits<double>::infinity() : kCall(x);
    };
    const auto plan = plan_levels(4, 3, 1.0, 1.0);
    const auto r = mlmc_estimate(kBenchmark, tail, plan, 3);
    CHECK(r.overflow_total() > 0);
    CHECK(r.overflow_total() * 1000 <= r.sample_total());
    for (const auto& l : r.per_level) CHECK(l.used + l.overflow_count == l.samples);
  }

  TEST_CASE("too many overflows degrade the estimate") {
    const FunctionSdeModel<double> explosive([](const Vec& x) { return Vec(x.cwiseProduct(x)); },
                                             {[](const Vec&) { return scalar(1.0); }},
                                             scalar(1e100), 64.0);
    const auto plan = plan_levels(2, 2, 1.0, 64.0);
    try {
      mlmc_estimate(explosive, ConstantPayoff{1.0}, plan, 1);
      FAIL("expected EstimationDegraded");
    } catch (const EstimationDegraded& e) {
      CHECK(e.report().overflow_total() > 0);
      CHECK(e.report().overflow_total() * 1000 > e.report().sample_total());
    }
  }
}

TEST_SUITE("ais_mlmc_estimate") {
  TEST_CASE("I = 0 and theta0 = 0 equal the standard estimator bitwise") {
    RandomStream pick(2024, StreamKey{});
    for (int k = 0; k < 10; ++k) {
      const std::int64_t m = 2 + static_cast<std::int64_t>(pick() % 3);
      const int L = 1 + static_cast<int>(pick() % (m == 2 ? 5 : 3));
      const std::uint64_t seed = pick();
      const double sigma = 0.2 + 0.6 * pick.uniform();
      const BlackScholesModel<double> model(100.0, 0.05, sigma, 1.0);
      const DiscountedCall<double> call(90.0 + 20.0 * pick.uniform(), 0.05, 1.0);
      const auto plan = plan_levels(m, L, 1.0, 1.0);
      auto sa = SaConfig<double>::defaults(1);
      sa.stop_iters = 0;
      const auto a = mlmc_estimate(model, call, plan, seed);
      const auto b = ais_mlmc_estimate(model, call, plan, sa, seed);
      CHECK(same_report(a, b));
    }
  }

  TEST_CASE("constant payoff") {
    const auto plan = plan_levels(4, 2, 1.0, 1.0);
    auto frozen = tuned_sa(0);
    CHECK(ais_mlmc_estimate(kBenchmark, ConstantPayoff{2.5}, plan, frozen, 4).estimate == 2.5);

    auto adaptive = SaConfig<double>::defaults(1);
    adaptive.stop_iters = 200;
    const auto r = ais_mlmc_estimate(kBenchmark, ConstantPayoff{2.5}, plan, adaptive, 4);
    CHECK(std::abs(r.estimate - 2.5) <= 4.0 * std::sqrt(r.estimator_variance()) + 1e-12);
    for (int l = 1; l <= 2; ++l) {
      CHECK(r.per_level[l].sample_mean == 0.0);
      CHECK(r.per_level[l].theta_final == std::vector<double>{0.0});
    }
  }

  TEST_CASE("euler step counter matches the cost model") {
    RandomStream pick(77, StreamKey{});
    for (int k = 0; k < 10; ++k) {
      const std::int64_t m = 2 + static_cast<std::int64_t>(pick() % 3);
      const int L = 1 + static_cast<int>(pick() % 3);
      const std::int64_t I = static_cast<std::int64_t>(pick() % 3000);
      const auto plan = plan_levels(m, L, 1.0, 1.0);
      const auto sa = tuned_sa(I);
      const auto cost = complexity_model(plan, I);
      CHECK(ais_mlmc_estimate(kBenchmark, kCall, plan, sa, k, 2).euler_steps_total ==
            cost.steps_ais);
      CHECK(mlmc_estimate(kBenchmark, kCall, plan, k, 2).euler_steps_total == cost.steps_standard);
    }
  }

  TEST_CASE("frozen tilt equals the standalone recursion") {
    const auto plan = plan_levels(4, 3, 1.0, 1.0);
    for (bool averaging : {true, false}) {
      auto sa = tuned_sa(400);
      sa.averaging = averaging;
      const auto r = ais_mlmc_estimate(kBenchmark, kCall, plan, sa, 8);
      for (int l = 0; l <= 3; ++l) {
        const auto t = adapt_level(kBenchmark, kCall, 4, l, sa, 8);
        CHECK(r.per_level[l].theta_final == detail::to_std(t.final_tilt(averaging)));
        CHECK(t.theta.size() == 401);
      }
    }
  }

  TEST_CASE("warm start chains levels") {
    const auto plan = plan_levels(4, 2, 1.0, 1.0);
    auto sa = tuned_sa(300);
    sa.warm_start = true;
    const auto r = ais_mlmc_estimate(kBenchmark, kCall, plan, sa, 12);
    auto next = sa;
    next.theta0 = scalar(r.per_level[0].theta_final[0]);
    const auto t = adapt_level(kBenchmark, kCall, 4, 1, next, 12);
    CHECK(r.per_level[1].theta_final == detail::to_std(t.final_tilt(true)));
  }

  TEST_CASE("Chen variant runs and stays unbiased") {
    const auto plan = plan_levels(4, 3, 1.0, 1.0);
    auto sa = tuned_sa(1000);
    sa.algorithm = SaAlgorithm::kChen;
    const auto r = ais_mlmc_estimate(kBenchmark, kCall, plan, sa, 21);
    const double exact = bs_exact_call(BsParams{130.0, 100.0, kRate, 0.6, 1.0});
    // Euler bias at n = 64 is about 0.08
    CHECK(std::abs(r.estimate - exact) <= 4.0 * std::sqrt(r.estimator_variance()) + 0.1);
  }

  TEST_CASE("invalid adaptation settings") {
    const auto plan = plan_levels(4, 2, 1.0, 1.0);
    auto sa = tuned_sa(10);
    sa.theta0 = scalar(3.0);
    CHECK_THROWS_AS(ais_mlmc_estimate(kBenchmark, kCall, plan, sa, 1), InvalidArgument);
    sa.theta0 = Vec::Zero(2);
    CHECK_THROWS_AS(ais_mlmc_estimate(kBenchmark, kCall, plan, sa, 1), InvalidArgument);
    auto chen = tuned_sa(10);
    chen.algorithm = SaAlgorithm::kChen;
    chen.theta0 = scalar(1.5);
    CHECK_THROWS_AS(ais_mlmc_estimate(kBenchmark, kCall, plan, chen, 1), InvalidArgument);
  }
}

TEST_SUITE("diagnostics") {
  TEST_CASE("adapt_level with I = 0 stays at theta0") {
    auto sa = tuned_sa(0);
    sa.theta0 = scalar(0.4);
    const auto t = adapt_level(kBenchmark, kCall, 4, 2, sa, 1);
    CHECK(t.theta.size() == 1);
    CHECK(t.final_tilt(true)(0) == 0.4);
  }

  TEST_CASE("adapt_level with a constant payoff on level >= 1 never moves") {
    auto sa = SaConfig<double>::defaults(1);
    sa.theta0 = scalar(0.25);
    sa.stop_iters = 100;
    const auto t = adapt_level(kBenchmark, ConstantPayoff{3.0}, 4, 2, sa, 1);
    for (const auto& th : t.theta) CHECK(th(0) == 0.25);
  }

  TEST_CASE("adapt_level is reproducible") {
    const auto sa = tuned_sa(500);
    const auto a = adapt_level(kBenchmark, kCall, 4, 2, sa, 6);
    const auto b = adapt_level(kBenchmark, kCall, 4, 2, sa, 6);
    CHECK(a.theta == b.theta);
    CHECK(a.theta_avg == b.theta_avg);
  }

  TEST_CASE("level statistics with a constant payoff") {
    const auto s = level_statistics(kBenchmark, ConstantPayoff{1.0}, scalar(0.3), 4, 2, 1000, 1);
    CHECK(s.mean == 0.0);
    CHECK(s.variance == 0.0);
    CHECK(s.second_moment == 0.0);
  }

  TEST_CASE("level statistics at theta = 0 match the oracle surface") {
    const std::vector<Vec> grid{scalar(0.0)};
    for (int ell : {0, 2}) {
      const auto s = level_statistics(kBenchmark, kCall, scalar(0.0), 4, ell, 200000, 3);
      const auto v = level_variance_surface(kBenchmark, kCall, 4, ell, grid, 200000, 3);
      const double se = std::hypot(s.second_moment_std_error, v.std_errors[0]);
      CHECK(std::abs(s.second_moment - v.values[0]) <= 3.0 * se);
    }
  }

  TEST_CASE("reweighted level mean matches the plain one") {
    const auto tilted = level_statistics(kBenchmark, kCall, scalar(0.5), 4, 2, 200000, 11);
    const auto plain = level_statistics(kBenchmark, kCall, scalar(0.0), 4, 2, 200000, 12);
    const double se = std::hypot(tilted.mean_std_error, plain.mean_std_error);
    CHECK(std::abs(tilted.mean - plain.mean) <= 3.0 * se);
  }

  TEST_CASE("scaled second moment stays bounded across levels") {
    std::vector<double> moments;
    for (int ell = 1; ell <= 6; ++ell) {
      moments.push_back(
          level_statistics(kBenchmark, kCall, scalar(0.0), 2, ell, 40000, 13).second_moment);
    }
    const double hi = *std::max_element(moments.begin(), moments.end());
    const double lo = *std::min_element(moments.begin(), moments.end());
    CHECK(hi / lo <= 3.0);
  }
}
