#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aismlmc/errors.hpp"
#include "aismlmc/importance.hpp"
#include "aismlmc/mlmc.hpp"
#include "aismlmc/parallel.hpp"
#include "aismlmc/random.hpp"
#include "aismlmc/sde.hpp"

namespace aismlmc {

struct BsParams {
  double s0 = 130.0;
  double strike = 100.0;
  double rate = 0.0;
  double sigma = 0.2;
  double T = 1.0;

  void validate() const {
    require(s0 > 0.0, "BsParams: s0 must be > 0");
    require(strike > 0.0, "BsParams: strike must be > 0");
    require(sigma > 0.0, "BsParams: sigma must be > 0");
    require(T > 0.0, "BsParams: T must be > 0");
  }
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Discounted European call e^{-rT} E (S_T - K)_+ under Black-Scholes.
inline double bs_exact_call(const BsParams& p) {
  p.validate();
  const double vol = p.sigma * std::sqrt(p.T);
  const double d1 = (std::log(p.s0 / p.strike) + (p.rate + 0.5 * p.sigma * p.sigma) * p.T) / vol;
  const double d2 = d1 - vol;
  return p.s0 * normal_cdf(d1) - p.strike * std::exp(-p.rate * p.T) * normal_cdf(d2);
}

/// Terminal values of the joint (X, U) scheme and the Brownian endpoint.
template <typename Scalar>
struct LimitSample {
  Vector<Scalar> x_T;
  Vector<Scalar> u_T;
  Vector<Scalar> w_T;
};

/*
 * Euler scheme for X together with the error process
 *
 *   dU = b'(X) U dt + sum_j s_j'(X) U dW^j - 2^{-1/2} sum_{j,l} s_j'(X) s_l(X) dW~^{lj},  U_0 = 0,
 *
 * driven by `grid` for W and fresh q^2-dimensional increments W~ drawn from
 * `aux`. X is advanced exactly as euler_terminal does with theta = 0.
 */
template <typename Scalar>
LimitSample<Scalar> simulate_limit_pair(const SdeModel<Scalar>& model,
                                        const BrownianGrid<Scalar>& grid, RandomStream& aux) {
  require(model.has_jacobians(), "simulate_limit_pair: model does not provide Jacobians");
  const Eigen::Index d = model.state_dim();
  const Eigen::Index q = model.noise_dim();
  require(grid.noise_dim() == q, "simulate_limit_pair: grid noise dimension mismatch");
  const Scalar dt = grid.dt;
  const Scalar aux_scale = std::sqrt(dt);
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));

  Vector<Scalar> x = model.x0();
  Vector<Scalar> u = Vector<Scalar>::Zero(d);
  Vector<Scalar> b(d), x_step(d), u_step(d);
  Matrix<Scalar> sigma(d, q), jac_b(d, d), jac_s(d, d);
  Vector<Scalar> aux_dw(q * q);
  for (std::int64_t k = 0; k < grid.steps; ++k) {
    for (Eigen::Index c = 0; c < q * q; ++c) {
      aux_dw(c) = aux_scale * static_cast<Scalar>(aux.normal());
    }
    model.drift(x, b);
    model.diffusion(x, sigma);
    model.drift_jacobian(x, jac_b);

    u_step.noalias() = (jac_b * u) * dt;
    for (Eigen::Index j = 0; j < q; ++j) {
      model.diffusion_jacobian(j, x, jac_s);
      u_step.noalias() += (jac_s * u) * grid.increments(k, j);
      for (Eigen::Index l = 0; l < q; ++l) {
        u_step.noalias() -= inv_sqrt2 * (jac_s * sigma.col(l)) * aux_dw(l * q + j);
      }
    }

    x_step = b * dt;
    for (Eigen::Index j = 0; j < q; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) {
        x_step(i) += sigma(i, j) * grid.increments(k, j);
      }
    }
    x += x_step;
    u += u_step;
    if (!x.allFinite() || !u.allFinite()) {
      throw NumericalOverflow(
          "simulate_limit_pair: non-finite state at step " + std::to_string(k + 1), k + 1);
    }
  }
  return LimitSample<Scalar>{x, u, grid.endpoint};
}

/// Draws the n-step W grid from `stream`, then the auxiliary increments.
template <typename Scalar>
LimitSample<Scalar> simulate_limit_pair(const SdeModel<Scalar>& model, std::int64_t n,
                                        RandomStream& stream) {
  require(n >= 1, "simulate_limit_pair: n must be >= 1");
  const auto grid = generate_brownian_grid(n, model.noise_dim(), model.horizon(), stream);
  return simulate_limit_pair(model, grid, stream);
}

/// Lexicographic strict order on equal-length points.
template <typename Scalar>
bool lex_less(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

/// Uniform product grid over a box, `spacing` apart, in lexicographic order.
template <typename Scalar>
std::vector<Vector<Scalar>> uniform_theta_grid(const Vector<Scalar>& lo, const Vector<Scalar>& hi,
                                               Scalar spacing) {
  require(lo.size() == hi.size() && lo.size() >= 1, "uniform_theta_grid: bounds mismatch");
  require(spacing > Scalar(0), "uniform_theta_grid: spacing must be > 0");
  std::vector<std::vector<Scalar>> axes(static_cast<std::size_t>(lo.size()));
  for (Eigen::Index j = 0; j < lo.size(); ++j) {
    require(lo(j) <= hi(j), "uniform_theta_grid: lo > hi");
    const auto count =
        static_cast<std::int64_t>(std::floor((hi(j) - lo(j)) / spacing + Scalar(1e-9))) + 1;
    for (std::int64_t k = 0; k < count; ++k) {
      axes[static_cast<std::size_t>(j)].push_back(lo(j) + static_cast<Scalar>(k) * spacing);
    }
  }
  std::vector<Vector<Scalar>> points{Vector<Scalar>(lo.size())};
  for (Eigen::Index j = 0; j < lo.size(); ++j) {
    std::vector<Vector<Scalar>> next;
    for (const auto& p : points) {
      for (Scalar v : axes[static_cast<std::size_t>(j)]) {
        Vector<Scalar> e = p;
        e(j) = v;
        next.push_back(std::move(e));
      }
    }
    points = std::move(next);
  }
  return points;
}

/// Estimated v(theta) (level = -1) or v_l(theta) on a grid of tilts.
template <typename Scalar>
struct VarianceSurface {
  static constexpr int kLimitLevel = -1;

  std::vector<Vector<Scalar>> theta_grid;
  std::vector<double> values;
  std::vector<double> std_errors;
  std::int64_t samples_per_point = 0;
  int level = kLimitLevel;
};

namespace detail {

template <typename Scalar>
void check_grid(const std::vector<Vector<Scalar>>& grid, Eigen::Index q, const char* who) {
  require(!grid.empty(), std::string(who) + ": theta grid is empty");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    require(grid[k].size() == q, std::string(who) + ": grid point dimension mismatch");
    if (k > 0) {
      require(lex_less(grid[k - 1], grid[k]),
              std::string(who) + ": grid points must be strictly increasing");
    }
  }
}

/*
 * For sampled pairs (a_i, w_i) and every grid theta, the mean and standard
 * error of a_i exp(-theta.w_i + |theta|^2 T / 2). The same samples serve
 * every grid point.
 */
template <typename Scalar>
VarianceSurface<Scalar> reweighted_surface(const std::vector<double>& amplitude,
                                           const std::vector<Vector<Scalar>>& endpoints,
                                           const std::vector<Vector<Scalar>>& grid, Scalar T,
                                           int level, unsigned threads) {
  VarianceSurface<Scalar> surface;
  surface.theta_grid = grid;
  surface.level = level;
  surface.samples_per_point = static_cast<std::int64_t>(amplitude.size());
  surface.values.assign(grid.size(), 0.0);
  surface.std_errors.assign(grid.size(), 0.0);
  const auto n = static_cast<double>(amplitude.size());
  parallel_for(grid.size(), threads, [&](std::size_t k) {
    const Vector<Scalar>& theta = grid[k];
    const Scalar half_norm = Scalar(0.5) * theta.squaredNorm() * T;
    BlockMoments moments;
    for (std::size_t i = 0; i < amplitude.size(); ++i) {
      moments.add(amplitude[i] * double(std::exp(-theta.dot(endpoints[i]) + half_norm)));
    }
    surface.values[k] = moments.sum / n;
    surface.std_errors[k] = n > 1 ? std::sqrt(moments.m2 / (n - 1.0) / n) : 0.0;
  });
  return surface;
}

}  // namespace detail

/*
 * Common-random-number estimate of v(theta) = E[(grad psi(X_T) . U_T)^2 e^{-theta.W_T + |theta|^2 T/2}]
 * with (X, U) discretized on n steps.
 */
template <typename Scalar>
VarianceSurface<Scalar> variance_surface(
    const SdeModel<Scalar>& model,
    const std::function<Vector<Scalar>(const Vector<Scalar>&)>& payoff_gradient,
    const std::vector<Vector<Scalar>>& grid, std::int64_t samples, std::int64_t n,
    std::uint64_t seed, unsigned threads = 1) {
  require(samples >= 2, "variance_surface: need at least 2 samples");
  require(n >= 1, "variance_surface: n must be >= 1");
  detail::check_grid(grid, model.noise_dim(), "variance_surface");
  std::vector<double> amplitude(static_cast<std::size_t>(samples));
  std::vector<Vector<Scalar>> endpoints(static_cast<std::size_t>(samples));
  parallel_for(static_cast<std::size_t>(samples), threads, [&](std::size_t i) {
    RandomStream stream(seed, StreamKey{StreamDomain::kOracle, 0, i + 1});
    const LimitSample<Scalar> s = simulate_limit_pair(model, n, stream);
    const Vector<Scalar> g = payoff_gradient(s.x_T);
    require(g.size() == model.state_dim(), "variance_surface: payoff gradient has wrong length");
    const double proj = double(g.dot(s.u_T));
    amplitude[i] = proj * proj;
    endpoints[i] = s.w_T;
  });
  return detail::reweighted_surface(amplitude, endpoints, grid, model.horizon(),
                                    VarianceSurface<Scalar>::kLimitLevel, threads);
}

/*
 * v_l(theta) = E[(r_l (psi(X^{m^l}) - psi(X^{m^{l-1}})))^2 e^{-theta.W_T + |theta|^2 T/2}]
 * from untilted coupled paths (psi(X^{m^0})^2 at l = 0).
 */
template <typename Scalar, typename Payoff>
VarianceSurface<Scalar> level_variance_surface(const SdeModel<Scalar>& model,
                                               const Payoff& payoff, std::int64_t m, int ell,
                                               const std::vector<Vector<Scalar>>& grid,
                                               std::int64_t samples, std::uint64_t seed,
                                               unsigned threads = 1) {
  require(samples >= 2, "level_variance_surface: need at least 2 samples");
  require(ell >= 0, "level_variance_surface: level must be >= 0");
  require(m >= 2, "level_variance_surface: refinement must be >= 2");
  detail::check_grid(grid, model.noise_dim(), "level_variance_surface");
  const Scalar T = model.horizon();
  const Scalar r = ell == 0 ? Scalar(1) : level_scale<Scalar>(m, ell, T);
  const std::int64_t steps = checked_pow(m, ell);
  const Vector<Scalar> untilted = Vector<Scalar>::Zero(model.noise_dim());
  std::vector<double> amplitude(static_cast<std::size_t>(samples));
  std::vector<Vector<Scalar>> endpoints(static_cast<std::size_t>(samples));
  const auto blocks =
      static_cast<std::size_t>((samples + detail::kBlockSize - 1) / detail::kBlockSize);
  parallel_for(blocks, threads, [&](std::size_t b) {
    detail::LevelScratch<Scalar> s;
    const auto begin = b * static_cast<std::size_t>(detail::kBlockSize);
    const auto end = std::min(static_cast<std::size_t>(samples),
                              (b + 1) * static_cast<std::size_t>(detail::kBlockSize));
    for (std::size_t i = begin; i < end; ++i) {
      RandomStream stream(seed, StreamKey{StreamDomain::kOracle,
                                          static_cast<std::uint32_t>(ell + 1), i + 1});
      fill_brownian_grid(s.fine, steps, model.noise_dim(), T, stream);
      Scalar diff = payoff(euler_terminal(model, untilted, s.fine, s.work));
      if (ell >= 1) {
        coarsen_into(s.fine, m, s.coarse);
        diff -= payoff(euler_terminal(model, untilted, s.coarse, s.work));
      }
      const double scaled = double(r * diff);
      amplitude[i] = scaled * scaled;
      endpoints[i] = s.fine.endpoint;
    }
  });
  return detail::reweighted_surface(amplitude, endpoints, grid, T, ell, threads);
}

template <typename Scalar>
struct GridMinimum {
  Vector<Scalar> theta_star;
  double value = 0.0;
};

/// Smallest value; ties go to the lexicographically smallest grid point.
template <typename Scalar>
GridMinimum<Scalar> grid_argmin(const VarianceSurface<Scalar>& surface) {
  require(!surface.values.empty() && surface.values.size() == surface.theta_grid.size(),
          "grid_argmin: empty or malformed surface");
  std::size_t best = 0;
  for (std::size_t k = 1; k < surface.values.size(); ++k) {
    const bool better = surface.values[k] < surface.values[best] ||
                        (surface.values[k] == surface.values[best] &&
                         lex_less(surface.theta_grid[k], surface.theta_grid[best]));
    if (better) {
      best = k;
    }
  }
  return GridMinimum<Scalar>{surface.theta_grid[best], surface.values[best]};
}

/// log|bias| = intercept + slope log n, fitted over >= 3 step counts.
struct WeakErrorFit {
  std::vector<std::int64_t> step_counts;
  std::vector<double> biases;
  std::vector<double> std_errors;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double alpha = 0.0;  // -slope
  double c_psi = 0.0;  // signed exp(intercept)
};

/// Ordinary least squares y = intercept + slope x, with the slope's standard error.
inline void fit_line(const std::vector<double>& x, const std::vector<double>& y, double& slope,
                     double& intercept, double& slope_se) {
  const auto k = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  slope = sxy / sxx;
  intercept = my - slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - intercept - slope * x[i];
    rss += e * e;
  }
  slope_se = x.size() > 2 ? std::sqrt(rss / (k - 2.0) / sxx) : 0.0;
}

/*
 * Weak-error rate of the Euler scheme: eps_n = mean psi(X^n_T) - exact_value
 * for every n in step_counts, then a log-log regression. Throws
 * InsufficientResolution when some |eps_n| <= 3 standard errors.
 */
template <typename Scalar, typename Payoff>
WeakErrorFit weak_error_fit(const SdeModel<Scalar>& model, const Payoff& payoff,
                            double exact_value, const std::vector<std::int64_t>& step_counts,
                            std::int64_t samples, std::uint64_t seed, unsigned threads = 1) {
  require(step_counts.size() >= 3, "weak_error_fit: need at least 3 step counts");
  require(samples >= 2, "weak_error_fit: need at least 2 samples");
  for (auto n : step_counts) require(n >= 1, "weak_error_fit: step counts must be >= 1");
  WeakErrorFit fit;
  fit.step_counts = step_counts;
  const Vector<Scalar> untilted = Vector<Scalar>::Zero(model.noise_dim());
  const auto blocks =
      static_cast<std::size_t>((samples + detail::kBlockSize - 1) / detail::kBlockSize);
  std::vector<double> log_n, log_bias;
  for (std::size_t c = 0; c < step_counts.size(); ++c) {
    const std::int64_t n = step_counts[c];
    std::vector<detail::BlockMoments> acc(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
      BrownianGrid<Scalar> grid;
      EulerWorkspace<Scalar> work;
      const std::int64_t begin = static_cast<std::int64_t>(b) * detail::kBlockSize + 1;
      const std::int64_t end =
          std::min<std::int64_t>(samples, static_cast<std::int64_t>(b + 1) * detail::kBlockSize);
      for (std::int64_t i = begin; i <= end; ++i) {
        RandomStream stream(seed, StreamKey{StreamDomain::kOracle,
                                            static_cast<std::uint32_t>(0x800000u + c),
                                            static_cast<std::uint64_t>(i)});
        fill_brownian_grid(grid, n, model.noise_dim(), model.horizon(), stream);
        acc[b].add(double(payoff(euler_terminal(model, untilted, grid, work))));
      }
    });
    detail::BlockMoments total;
    for (const auto& a : acc) total.merge(a);
    const auto count = static_cast<double>(total.count);
    const double bias = total.sum / count - exact_value;
    const double se = std::sqrt(total.m2 / (count - 1.0) / count);
    fit.biases.push_back(bias);
    fit.std_errors.push_back(se);
    if (!(std::abs(bias) > 3.0 * se)) {
      throw InsufficientResolution("weak_error_fit: bias " + std::to_string(bias) + " at n = " +
                                   std::to_string(n) + " is within 3 standard errors (" +
                                   std::to_string(se) + ")");
    }
    log_n.push_back(std::log(static_cast<double>(n)));
    log_bias.push_back(std::log(std::abs(bias)));
  }
  fit_line(log_n, log_bias, fit.slope, fit.intercept, fit.slope_std_error);
  fit.alpha = -fit.slope;
  fit.c_psi = std::copysign(std::exp(fit.intercept), fit.biases.back());
  return fit;
}

}  // namespace aismlmc
