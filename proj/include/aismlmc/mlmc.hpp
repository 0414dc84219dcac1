#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aismlmc/errors.hpp"
#include "aismlmc/importance.hpp"
#include "aismlmc/parallel.hpp"
#include "aismlmc/random.hpp"
#include "aismlmc/sde.hpp"
#include "aismlmc/stochastic_approx.hpp"

namespace aismlmc {

/// Integer power with overflow detection.
inline std::int64_t checked_pow(std::int64_t base, int exponent) {
  std::int64_t result = 1;
  for (int i = 0; i < exponent; ++i) {
    if (result > std::numeric_limits<std::int64_t>::max() / base) {
      throw NumericalOverflow("checked_pow: " + std::to_string(base) + "^" +
                              std::to_string(exponent) + " overflows int64");
    }
    result *= base;
  }
  return result;
}

/*
 * Level structure of an MLMC run: n = m^L finest steps and sample sizes
 *
 *   N_l = ceil( n^{2 alpha} (m - 1) T / (m^l a_l) * sum_{l'=1..L} a_l' ),   l = 0..L.
 */
struct LevelPlan {
  std::int64_t m = 2;
  int L = 1;
  std::int64_t n = 2;
  double alpha = 1.0;
  double T = 1.0;
  std::vector<double> a;             // a_0..a_L
  std::vector<std::int64_t> N;       // N_0..N_L

  std::int64_t steps_at(int ell) const { return checked_pow(m, ell); }

  /// Euler steps of one level-l sample: 1 for l = 0, m^l + m^{l-1} otherwise.
  std::int64_t cost_per_sample(int ell) const {
    return ell == 0 ? 1 : steps_at(ell) + steps_at(ell - 1);
  }
};

inline LevelPlan plan_levels(std::int64_t m, int L, double alpha, double T,
                             const std::vector<double>& a) {
  require(m >= 2, "plan_levels: refinement m must be >= 2");
  require(L >= 1, "plan_levels: L must be >= 1");
  require(alpha >= 0.5 && alpha <= 1.0, "plan_levels: alpha must lie in [1/2, 1]");
  require(T > 0.0, "plan_levels: horizon must be > 0");
  require(a.size() == static_cast<std::size_t>(L) + 1,
          "plan_levels: need L + 1 weights a_0..a_L, got " + std::to_string(a.size()));
  for (double w : a) {
    require(w > 0.0 && std::isfinite(w), "plan_levels: weights must be positive and finite");
  }
  LevelPlan plan;
  plan.m = m;
  plan.L = L;
  plan.n = checked_pow(m, L);
  plan.alpha = alpha;
  plan.T = T;
  plan.a = a;

  long double weight_sum = 0.0L;
  for (int l = 1; l <= L; ++l) {
    weight_sum += a[static_cast<std::size_t>(l)];
  }
  const long double base = std::pow(static_cast<long double>(plan.n), 2.0L * alpha) *
                           static_cast<long double>(m - 1) * static_cast<long double>(T) *
                           weight_sum;
  plan.N.reserve(a.size());
  for (int l = 0; l <= L; ++l) {
    const long double raw = base / (static_cast<long double>(checked_pow(m, l)) *
                                    static_cast<long double>(a[static_cast<std::size_t>(l)]));
    if (!(raw < 9.0e18L)) {
      throw NumericalOverflow("plan_levels: N_" + std::to_string(l) + " exceeds int64");
    }
    // Products like 16^2 * 3 * 2 / 4 are integers mathematically; do not let
    // a trailing rounding error push the ceiling up by one.
    const long double nearest = std::nearbyint(raw);
    const long double size =
        std::fabs(raw - nearest) <= 1e-12L * std::max(1.0L, raw) ? nearest : std::ceil(raw);
    plan.N.push_back(std::max<std::int64_t>(1, static_cast<std::int64_t>(size)));
  }
  return plan;
}

/// a_l = 1 for every level (a_0 = 1 included).
inline LevelPlan plan_levels(std::int64_t m, int L, double alpha, double T) {
  return plan_levels(m, L, alpha, T, std::vector<double>(static_cast<std::size_t>(L) + 1, 1.0));
}

enum class SaAlgorithm { kProjected, kChen };

/// Stochastic-approximation settings for the adaptive estimator.
template <typename Scalar>
struct SaConfig {
  GainSchedule<Scalar> gain;
  CompactBox<Scalar> box;
  Vector<Scalar> theta0;
  std::int64_t stop_iters = 1000;  // I; 0 disables adaptation
  bool averaging = true;
  SaAlgorithm algorithm = SaAlgorithm::kProjected;
  ExpandingCompacts<Scalar> compacts;
  ChenReset chen_reset = ChenReset::kExpand;
  bool warm_start = false;

  /// gamma_i = 1/(i+1), K = [-10, 10]^q, theta0 = 0, I = 1000, averaging on.
  static SaConfig defaults(Eigen::Index q) {
    SaConfig c;
    c.gain = GainSchedule<Scalar>(Scalar(1), Scalar(1), 1);
    c.box = CompactBox<Scalar>::symmetric(q, Scalar(10));
    c.theta0 = Vector<Scalar>::Zero(q);
    return c;
  }

  void validate(Eigen::Index q) const {
    require(box.dim() == q, "SaConfig: box dimension differs from noise dimension");
    require(theta0.size() == q, "SaConfig: theta0 dimension differs from noise dimension");
    require((theta0.array() > box.lo().array()).all() &&
                (theta0.array() < box.hi().array()).all(),
            "SaConfig: theta0 must lie in the interior of the box");
    require(stop_iters >= 0, "SaConfig: stop_iters must be >= 0");
    if (algorithm == SaAlgorithm::kChen) {
      require(compacts.at(0, q).contains(theta0), "SaConfig: theta0 must lie in K_0");
    }
  }
};

struct LevelReport {
  int level = 0;
  std::int64_t samples = 0;         // N_l
  std::int64_t used = 0;            // samples entering the mean
  double sample_mean = 0.0;
  double sample_variance = 0.0;
  std::vector<double> theta_final;  // tilt used after adaptation stopped
  std::int64_t overflow_count = 0;  // dropped samples
  std::int64_t gradient_overflow_count = 0;  // skipped theta updates
  std::int64_t euler_steps = 0;
};

struct EstimatorReport {
  double estimate = 0.0;
  std::vector<LevelReport> per_level;
  std::int64_t euler_steps_total = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;

  std::int64_t overflow_total() const {
    std::int64_t total = 0;
    for (const auto& l : per_level) total += l.overflow_count;
    return total;
  }
  std::int64_t sample_total() const {
    std::int64_t total = 0;
    for (const auto& l : per_level) total += l.samples;
    return total;
  }
  /// Sum over levels of sample_variance / used: variance of the estimate.
  double estimator_variance() const {
    double v = 0.0;
    for (const auto& l : per_level) {
      if (l.used > 0) v += l.sample_variance / static_cast<double>(l.used);
    }
    return v;
  }
};

/// More than 0.1% of all samples were dropped on overflow.
class EstimationDegraded : public std::runtime_error {
 public:
  explicit EstimationDegraded(EstimatorReport report)
      : std::runtime_error("estimation degraded: " + std::to_string(report.overflow_total()) +
                           " of " + std::to_string(report.sample_total()) +
                           " samples overflowed"),
        report_(std::move(report)) {}

  const EstimatorReport& report() const { return report_; }

 private:
  EstimatorReport report_;
};

struct ComplexityModel {
  std::int64_t steps_standard = 0;
  std::int64_t steps_ais = 0;
  double ratio = 1.0;
};

/*
 * Euler-step counts: standard MLMC spends N_0 + sum_l N_l (m^l + m^{l-1});
 * the stopped adaptive estimator additionally simulates the untilted pair for
 * its first min(I, N_l) samples of each level.
 */
inline ComplexityModel complexity_model(const LevelPlan& plan, std::int64_t stop_iters) {
  require(stop_iters >= 0, "complexity_model: I must be >= 0");
  ComplexityModel c;
  for (int l = 0; l <= plan.L; ++l) {
    const std::int64_t per = plan.cost_per_sample(l);
    const std::int64_t n_l = plan.N[static_cast<std::size_t>(l)];
    c.steps_standard += n_l * per;
    c.steps_ais += (n_l + std::min(stop_iters, n_l)) * per;
  }
  c.ratio = static_cast<double>(c.steps_ais) / static_cast<double>(c.steps_standard);
  return c;
}

namespace detail {

inline constexpr std::int64_t kBlockSize = 1024;

/// Count, sum and centered second moment of one block of samples.
struct BlockMoments {
  std::int64_t count = 0;
  double sum = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  std::int64_t overflow = 0;
  std::int64_t steps = 0;

  void add(double v) {
    ++count;
    sum += v;
    const double delta = v - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (v - mean);
  }

  void merge(const BlockMoments& o) {
    if (o.count > 0) {
      const auto na = static_cast<double>(count);
      const auto nb = static_cast<double>(o.count);
      const double delta = o.mean - mean;
      const double n = na + nb;
      mean += delta * nb / n;
      m2 += o.m2 + delta * delta * na * nb / n;
      count += o.count;
      sum += o.sum;
    }
    overflow += o.overflow;
    steps += o.steps;
  }
};

template <typename Scalar>
std::vector<double> to_std(const Vector<Scalar>& v) {
  std::vector<double> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index j = 0; j < v.size(); ++j) out[static_cast<std::size_t>(j)] = double(v(j));
  return out;
}

/// Per-worker buffers for one level.
template <typename Scalar>
struct LevelScratch {
  BrownianGrid<Scalar> fine;
  BrownianGrid<Scalar> coarse;
  EulerWorkspace<Scalar> work;
};

/*
 * One sample of level `ell`: the untilted payoff (l = 0) or payoff
 * difference (l >= 1) on the fine grid drawn from stream (seed, ell, index).
 */
template <typename Scalar>
class LevelSampler {
 public:
  LevelSampler(const SdeModel<Scalar>& model, std::int64_t m, int ell, std::uint64_t seed)
      : model_(model), m_(m), ell_(ell), steps_(checked_pow(m, ell)), seed_(seed) {}

  int level() const { return ell_; }
  std::int64_t cost() const { return ell_ == 0 ? 1 : steps_ + steps_ / m_; }

  void draw(std::int64_t index, LevelScratch<Scalar>& s) const {
    RandomStream stream(seed_, StreamKey{StreamDomain::kBrownian,
                                         static_cast<std::uint32_t>(ell_),
                                         static_cast<std::uint64_t>(index)});
    fill_brownian_grid(s.fine, steps_, model_.noise_dim(), model_.horizon(), stream);
    if (ell_ >= 1) {
      coarsen_into(s.fine, m_, s.coarse);
    }
  }

  /// (psi(fine), psi(coarse)) under tilt theta; coarse is 0 at level 0.
  template <typename Payoff>
  std::pair<Scalar, Scalar> payoffs(const Payoff& payoff, const Vector<Scalar>& theta,
                                    LevelScratch<Scalar>& s) const {
    const Scalar fine = payoff(euler_terminal(model_, theta, s.fine, s.work));
    if (ell_ == 0) {
      return {fine, Scalar(0)};
    }
    return {fine, payoff(euler_terminal(model_, theta, s.coarse, s.work))};
  }

 private:
  const SdeModel<Scalar>& model_;
  std::int64_t m_;
  int ell_;
  std::int64_t steps_;
  std::uint64_t seed_;
};

/// Girsanov-weighted estimator term g(theta, fine) - g(theta, coarse).
template <typename Scalar>
double weighted_term(std::pair<Scalar, Scalar> psi, int ell, const Vector<Scalar>& theta,
                     const Vector<Scalar>& w_T, Scalar T) {
  const Scalar weight = girsanov_weight(theta, w_T, T);
  const Scalar value = ell == 0 ? psi.first * weight : psi.first * weight - psi.second * weight;
  if (!std::isfinite(double(value))) {
    throw NumericalOverflow("weighted_term: non-finite weighted payoff");
  }
  return double(value);
}

}  // namespace detail

/*
 * The theta recursion of one level: the gradient integrand is evaluated on
 * the untilted pair at the raw iterate; the tilt handed to the estimator is
 * the raw iterate or its Polyak-Ruppert mean.
 */
template <typename Scalar>
class LevelAdapter {
 public:
  LevelAdapter(const SaConfig<Scalar>& sa, std::int64_t m, int ell, Scalar T,
               const Vector<Scalar>& theta_start)
      : sa_(sa), ell_(ell), T_(T), state_(ThetaState<Scalar>::start(theta_start)) {
    if (ell >= 1) {
      scale_ = LevelScale<Scalar>::make(m, ell, T);
    }
  }

  /// Tilt for the next estimator sample.
  const Vector<Scalar>& tilt() const { return sa_.averaging ? state_.theta_avg : state_.theta; }

  const ThetaState<Scalar>& state() const { return state_; }

  /// Applies update i (1-based); returns false if the gradient overflowed.
  bool update(std::int64_t i, Scalar psi_fine, Scalar psi_coarse, const Vector<Scalar>& w_T) {
    Vector<Scalar> grad;
    try {
      grad = ell_ == 0 ? grad_H_zero(state_.theta, psi_fine, w_T, T_)
                       : grad_H_level(state_.theta, psi_fine, psi_coarse, w_T, scale_);
    } catch (const NumericalOverflow&) {
      return false;
    }
    const Scalar gain = sa_.gain(i);
    state_ = sa_.algorithm == SaAlgorithm::kChen
                 ? chen_step(state_, grad, gain, sa_.compacts, sa_.theta0, sa_.chen_reset)
                 : rm_step(state_, grad, gain, sa_.box);
    return true;
  }

 private:
  const SaConfig<Scalar>& sa_;
  int ell_;
  Scalar T_;
  LevelScale<Scalar> scale_;
  ThetaState<Scalar> state_;
};

namespace detail {

template <typename Scalar, typename Payoff>
LevelReport run_level(const SdeModel<Scalar>& model, const Payoff& payoff, const LevelPlan& plan,
                      int ell, const SaConfig<Scalar>* sa, const Vector<Scalar>& theta_start,
                      std::uint64_t seed, unsigned threads) {
  const LevelSampler<Scalar> sampler(model, plan.m, ell, seed);
  const std::int64_t n_samples = plan.N[static_cast<std::size_t>(ell)];
  const std::int64_t cost = sampler.cost();
  const Scalar T = model.horizon();
  const auto blocks = static_cast<std::size_t>((n_samples + kBlockSize - 1) / kBlockSize);
  std::vector<BlockMoments> acc(blocks);

  LevelReport report;
  report.level = ell;
  report.samples = n_samples;

  Vector<Scalar> frozen = sa ? theta_start : Vector<Scalar>::Zero(model.noise_dim());
  std::int64_t adapted = 0;
  if (sa != nullptr && sa->stop_iters > 0) {
    LevelAdapter<Scalar> adapter(*sa, plan.m, ell, T, theta_start);
    LevelScratch<Scalar> scratch;
    const Vector<Scalar> untilted = Vector<Scalar>::Zero(model.noise_dim());
    adapted = std::min(sa->stop_iters, n_samples);
    for (std::int64_t i = 1; i <= adapted; ++i) {
      BlockMoments& block = acc[static_cast<std::size_t>((i - 1) / kBlockSize)];
      sampler.draw(i, scratch);
      const Vector<Scalar> theta = adapter.tilt();
      block.steps += 2 * cost;
      try {
        block.add(weighted_term(sampler.payoffs(payoff, theta, scratch), ell, theta,
                                scratch.fine.endpoint, T));
      } catch (const NumericalOverflow&) {
        ++block.overflow;
      }
      try {
        const auto psi = sampler.payoffs(payoff, untilted, scratch);
        if (!adapter.update(i, psi.first, psi.second, scratch.fine.endpoint)) {
          ++report.gradient_overflow_count;
        }
      } catch (const NumericalOverflow&) {
        ++report.gradient_overflow_count;
      }
    }
    frozen = adapter.tilt();
  }

  const bool weighted = sa != nullptr;
  const std::size_t first_block = static_cast<std::size_t>(adapted / kBlockSize);
  parallel_for(blocks - std::min(blocks, first_block), threads, [&](std::size_t k) {
    const std::size_t b = first_block + k;
    BlockMoments& block = acc[b];
    LevelScratch<Scalar> scratch;
    const std::int64_t begin =
        std::max<std::int64_t>(adapted + 1, static_cast<std::int64_t>(b) * kBlockSize + 1);
    const std::int64_t end =
        std::min<std::int64_t>(n_samples, static_cast<std::int64_t>(b + 1) * kBlockSize);
    for (std::int64_t i = begin; i <= end; ++i) {
      sampler.draw(i, scratch);
      block.steps += cost;
      try {
        const auto psi = sampler.payoffs(payoff, frozen, scratch);
        if (weighted) {
          block.add(weighted_term(psi, ell, frozen, scratch.fine.endpoint, T));
        } else {
          const double value = ell == 0 ? double(psi.first) : double(psi.first - psi.second);
          if (!std::isfinite(value)) {
            throw NumericalOverflow("mlmc_estimate: non-finite payoff");
          }
          block.add(value);
        }
      } catch (const NumericalOverflow&) {
        ++block.overflow;
      }
    }
  });

  BlockMoments total;
  for (const auto& block : acc) {
    total.merge(block);
  }
  report.used = total.count;
  report.sample_mean = total.count > 0 ? total.sum / static_cast<double>(total.count) : 0.0;
  report.sample_variance = total.count > 1 ? total.m2 / static_cast<double>(total.count - 1) : 0.0;
  report.theta_final = to_std(frozen);
  report.overflow_count = total.overflow;
  report.euler_steps = total.steps;
  return report;
}

template <typename Scalar, typename Payoff>
EstimatorReport run_estimator(const SdeModel<Scalar>& model, const Payoff& payoff,
                              const LevelPlan& plan, const SaConfig<Scalar>* sa,
                              std::uint64_t seed, unsigned threads) {
  require(plan.N.size() == static_cast<std::size_t>(plan.L) + 1, "estimator: malformed plan");
  require(std::abs(plan.T - double(model.horizon())) <= 1e-12 * std::abs(plan.T),
          "estimator: plan horizon differs from model horizon");
  if (sa != nullptr) {
    sa->validate(model.noise_dim());
  }
  const auto start = std::chrono::steady_clock::now();
  EstimatorReport report;
  report.seed = seed;
  Vector<Scalar> theta_start = sa ? sa->theta0 : Vector<Scalar>::Zero(model.noise_dim());
  for (int ell = 0; ell <= plan.L; ++ell) {
    LevelReport level = run_level(model, payoff, plan, ell, sa, theta_start, seed, threads);
    if (sa != nullptr && sa->warm_start) {
      for (Eigen::Index j = 0; j < theta_start.size(); ++j) {
        theta_start(j) = Scalar(level.theta_final[static_cast<std::size_t>(j)]);
      }
      theta_start = project(sa->box, theta_start);
    }
    report.estimate += level.sample_mean;
    report.euler_steps_total += level.euler_steps;
    report.per_level.push_back(std::move(level));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (report.overflow_total() * 1000 > report.sample_total()) {
    throw EstimationDegraded(std::move(report));
  }
  return report;
}

}  // namespace detail

/*
 * Standard MLMC estimate
 *
 *   Q_n = mean_{N_0} psi(X^{m^0}) + sum_{l=1..L} mean_{N_l} (psi(X^{m^l}) - psi(X^{m^{l-1}}))
 *
 * Every sample draws its Brownian grid from stream (seed, level, index), so
 * the report does not depend on `threads`.
 */
template <typename Scalar, typename Payoff>
EstimatorReport mlmc_estimate(const SdeModel<Scalar>& model, const Payoff& payoff,
                              const LevelPlan& plan, std::uint64_t seed, unsigned threads = 1) {
  return detail::run_estimator<Scalar>(model, payoff, plan, nullptr, seed, threads);
}

/*
 * Adaptive importance-sampling MLMC. Per level, theta restarts at theta0 (or
 * the previous level's final tilt with warm_start); for i <= I each sample
 * yields the tilted estimator term and a theta update from the untilted pair
 * on the same grid; afterwards theta is frozen and only the tilted pair is
 * simulated.
 */
template <typename Scalar, typename Payoff>
EstimatorReport ais_mlmc_estimate(const SdeModel<Scalar>& model, const Payoff& payoff,
                                  const LevelPlan& plan, const SaConfig<Scalar>& sa,
                                  std::uint64_t seed, unsigned threads = 1) {
  return detail::run_estimator<Scalar>(model, payoff, plan, &sa, seed, threads);
}

struct LevelStatistics {
  double mean = 0.0;
  double variance = 0.0;
  double second_moment = 0.0;
  double mean_std_error = 0.0;
  double second_moment_std_error = 0.0;
  std::int64_t samples = 0;
  std::int64_t overflow_count = 0;
};

/*
 * Moments of r_l (psi(fine^theta) - psi(coarse^theta)) e^{-theta.W_T - |theta|^2 T/2}
 * (psi(X^{1,theta}) times the weight at l = 0). Streams use the diagnostic
 * domain, so they are independent of any estimator run with the same seed.
 */
template <typename Scalar, typename Payoff>
LevelStatistics level_statistics(const SdeModel<Scalar>& model, const Payoff& payoff,
                                 const Vector<Scalar>& theta, std::int64_t m, int ell,
                                 std::int64_t samples, std::uint64_t seed, unsigned threads = 1) {
  require(samples >= 2, "level_statistics: need at least 2 samples");
  require(ell >= 0, "level_statistics: level must be >= 0");
  require(m >= 2, "level_statistics: refinement must be >= 2");
  require(theta.size() == model.noise_dim(), "level_statistics: theta dimension mismatch");
  const Scalar T = model.horizon();
  const Scalar r = ell == 0 ? Scalar(1) : level_scale<Scalar>(m, ell, T);
  const std::int64_t steps = checked_pow(m, ell);
  const auto blocks =
      static_cast<std::size_t>((samples + detail::kBlockSize - 1) / detail::kBlockSize);
  std::vector<detail::BlockMoments> first(blocks);
  std::vector<detail::BlockMoments> second(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    detail::LevelScratch<Scalar> s;
    const std::int64_t begin = static_cast<std::int64_t>(b) * detail::kBlockSize + 1;
    const std::int64_t end =
        std::min<std::int64_t>(samples, static_cast<std::int64_t>(b + 1) * detail::kBlockSize);
    for (std::int64_t i = begin; i <= end; ++i) {
      RandomStream stream(seed, StreamKey{StreamDomain::kDiagnostic,
                                          static_cast<std::uint32_t>(ell),
                                          static_cast<std::uint64_t>(i)});
      fill_brownian_grid(s.fine, steps, model.noise_dim(), T, stream);
      try {
        Scalar diff = payoff(euler_terminal(model, theta, s.fine, s.work));
        if (ell >= 1) {
          coarsen_into(s.fine, m, s.coarse);
          diff -= payoff(euler_terminal(model, theta, s.coarse, s.work));
        }
        const double value = double(r * diff * girsanov_weight(theta, s.fine.endpoint, T));
        if (!std::isfinite(value) || !std::isfinite(value * value)) {
          throw NumericalOverflow("level_statistics: non-finite sample");
        }
        first[b].add(value);
        second[b].add(value * value);
      } catch (const NumericalOverflow&) {
        ++first[b].overflow;
      }
    }
  });
  detail::BlockMoments m1, m2;
  for (std::size_t b = 0; b < blocks; ++b) {
    m1.merge(first[b]);
    m2.merge(second[b]);
  }
  LevelStatistics out;
  out.samples = m1.count;
  out.overflow_count = m1.overflow;
  if (m1.count < 2) {
    throw NumericalOverflow("level_statistics: fewer than 2 finite samples");
  }
  const auto n = static_cast<double>(m1.count);
  out.mean = m1.sum / n;
  out.variance = m1.m2 / (n - 1.0);
  out.second_moment = m2.sum / n;
  out.mean_std_error = std::sqrt(out.variance / n);
  out.second_moment_std_error = std::sqrt(m2.m2 / (n - 1.0) / n);
  return out;
}

/// Iterates of a standalone level-l theta recursion.
template <typename Scalar>
struct ThetaTrajectory {
  std::vector<Vector<Scalar>> theta;      // theta_0..theta_I
  std::vector<Vector<Scalar>> theta_avg;  // Polyak means
  std::int64_t gradient_overflow_count = 0;
  ThetaState<Scalar> final_state;

  /// The tilt the estimator would freeze after the last update.
  const Vector<Scalar>& final_tilt(bool averaging) const {
    return averaging ? final_state.theta_avg : final_state.theta;
  }
};

/*
 * Runs the level-l recursion alone for sa.stop_iters updates on the same
 * streams as the adaptive estimator uses for that level and seed, so the
 * trajectory equals the estimator's adaptation phase (for I <= N_l).
 */
template <typename Scalar, typename Payoff>
ThetaTrajectory<Scalar> adapt_level(const SdeModel<Scalar>& model, const Payoff& payoff,
                                    std::int64_t m, int ell, const SaConfig<Scalar>& sa,
                                    std::uint64_t seed) {
  require(ell >= 0, "adapt_level: level must be >= 0");
  require(m >= 2, "adapt_level: refinement must be >= 2");
  sa.validate(model.noise_dim());
  const detail::LevelSampler<Scalar> sampler(model, m, ell, seed);
  LevelAdapter<Scalar> adapter(sa, m, ell, model.horizon(), sa.theta0);
  detail::LevelScratch<Scalar> scratch;
  const Vector<Scalar> untilted = Vector<Scalar>::Zero(model.noise_dim());
  ThetaTrajectory<Scalar> out;
  out.theta.reserve(static_cast<std::size_t>(sa.stop_iters) + 1);
  out.theta_avg.reserve(static_cast<std::size_t>(sa.stop_iters) + 1);
  out.theta.push_back(adapter.state().theta);
  out.theta_avg.push_back(adapter.state().theta_avg);
  for (std::int64_t i = 1; i <= sa.stop_iters; ++i) {
    sampler.draw(i, scratch);
    try {
      const auto psi = sampler.payoffs(payoff, untilted, scratch);
      if (!adapter.update(i, psi.first, psi.second, scratch.fine.endpoint)) {
        ++out.gradient_overflow_count;
      }
    } catch (const NumericalOverflow&) {
      ++out.gradient_overflow_count;
    }
    out.theta.push_back(adapter.state().theta);
    out.theta_avg.push_back(adapter.state().theta_avg);
  }
  out.final_state = adapter.state();
  return out;
}

}  // namespace aismlmc
