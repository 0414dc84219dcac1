#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "aismlmc/errors.hpp"
#include "aismlmc/sde.hpp"

namespace aismlmc {

/*
 * Step sizes gamma_i = gamma0 / (i + offset)^rho for the i-th update, i >= 1.
 *
 * rho in (1/2, 1] gives sum gamma_i = inf and sum gamma_i^2 < inf. With
 * gamma0 = 1, rho = 1, offset = 1 this is gamma_i = 1 / (i + 1).
 */
template <typename Scalar>
class GainSchedule {
 public:
  GainSchedule() = default;

  GainSchedule(Scalar gamma0, Scalar rho, std::int64_t offset = 1)
      : gamma0_(gamma0), rho_(rho), offset_(offset) {
    require(gamma0 > Scalar(0), "GainSchedule: gamma0 must be > 0");
    require(rho > Scalar(0.5) && rho <= Scalar(1), "GainSchedule: rho must lie in (1/2, 1]");
    require(offset >= 1, "GainSchedule: offset must be >= 1");
  }

  Scalar operator()(std::int64_t i) const {
    require(i >= 1, "GainSchedule: iteration index starts at 1");
    return gamma0_ / std::pow(static_cast<Scalar>(i + offset_), rho_);
  }

  Scalar gamma0() const { return gamma0_; }
  Scalar rho() const { return rho_; }
  std::int64_t offset() const { return offset_; }

 private:
  Scalar gamma0_ = Scalar(1);
  Scalar rho_ = Scalar(1);
  std::int64_t offset_ = 1;
};

/// Product of intervals [lo_j, hi_j] with 0 strictly inside.
template <typename Scalar>
class CompactBox {
 public:
  CompactBox() = default;

  CompactBox(Vector<Scalar> lo, Vector<Scalar> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    require(lo_.size() == hi_.size() && lo_.size() >= 1, "CompactBox: bounds differ in length");
    for (Eigen::Index j = 0; j < lo_.size(); ++j) {
      require(lo_(j) < Scalar(0) && Scalar(0) < hi_(j),
              "CompactBox: 0 must lie in the interior of coordinate " + std::to_string(j));
    }
  }

  static CompactBox symmetric(Eigen::Index q, Scalar half_width) {
    return CompactBox(Vector<Scalar>::Constant(q, -half_width),
                      Vector<Scalar>::Constant(q, half_width));
  }

  Eigen::Index dim() const { return lo_.size(); }
  const Vector<Scalar>& lo() const { return lo_; }
  const Vector<Scalar>& hi() const { return hi_; }

  bool contains(const Vector<Scalar>& theta) const {
    return theta.size() == dim() && (theta.array() >= lo_.array()).all() &&
           (theta.array() <= hi_.array()).all();
  }

 private:
  Vector<Scalar> lo_;
  Vector<Scalar> hi_;
};

/// Euclidean projection onto a box: a componentwise clamp.
template <typename Scalar>
Vector<Scalar> project(const CompactBox<Scalar>& box, const Vector<Scalar>& theta) {
  require(theta.size() == box.dim(), "project: dimension mismatch");
  return theta.cwiseMax(box.lo()).cwiseMin(box.hi());
}

/// Robbins-Monro iterate with its running Polyak-Ruppert mean.
template <typename Scalar>
struct ThetaState {
  Vector<Scalar> theta;      // theta_i
  Vector<Scalar> theta_avg;  // (theta_0 + ... + theta_i) / (i + 1)
  Vector<Scalar> theta_sum;
  std::int64_t iter = 0;
  std::int64_t trunc_index = 0;

  static ThetaState start(const Vector<Scalar>& theta0) {
    return ThetaState{theta0, theta0, theta0, 0, 0};
  }

  void accept(Vector<Scalar> next) {
    theta = std::move(next);
    theta_sum += theta;
    ++iter;
    theta_avg = theta_sum / static_cast<Scalar>(iter + 1);
  }
};

namespace detail {

template <typename Scalar>
void check_step(const ThetaState<Scalar>& state, const Vector<Scalar>& grad, Scalar gain,
                const char* who) {
  require(gain > Scalar(0), std::string(who) + ": gain must be > 0");
  require(grad.size() == state.theta.size(), std::string(who) + ": gradient dimension mismatch");
  if (!grad.allFinite()) {
    throw NumericalOverflow(std::string(who) + ": non-finite gradient sample");
  }
}

}  // namespace detail

/// theta <- Pi_K(theta - gain * grad).
template <typename Scalar>
ThetaState<Scalar> rm_step(const ThetaState<Scalar>& state, const Vector<Scalar>& grad_sample,
                           Scalar gain, const CompactBox<Scalar>& box) {
  detail::check_step(state, grad_sample, gain, "rm_step");
  ThetaState<Scalar> next = state;
  const Vector<Scalar> candidate = state.theta - gain * grad_sample;
  next.accept(project(box, candidate));
  return next;
}

/// Increasing boxes K_i = [-k0 growth^i, k0 growth^i]^q.
template <typename Scalar>
struct ExpandingCompacts {
  Scalar k0 = Scalar(1);
  Scalar growth = Scalar(2);

  ExpandingCompacts() = default;
  ExpandingCompacts(Scalar k0_, Scalar growth_ = Scalar(2)) : k0(k0_), growth(growth_) {
    require(k0 > Scalar(0), "ExpandingCompacts: k0 must be > 0");
    require(growth > Scalar(1), "ExpandingCompacts: growth must be > 1");
  }

  CompactBox<Scalar> at(std::int64_t index, Eigen::Index q) const {
    return CompactBox<Scalar>::symmetric(q, k0 * std::pow(growth, static_cast<Scalar>(index)));
  }
};

/// What the reset branch of the truncation does to the compact index.
enum class ChenReset {
  kExpand,   // trunc_index + 1: the compacts grow after every escape
  kLiteral,  // trunc_index unchanged, as the recursion is printed
};

/*
 * Chen's expanding-truncation step. The candidate theta - gain * grad is
 * accepted if it lies in K_{trunc_index}; otherwise theta restarts at theta0.
 */
template <typename Scalar>
ThetaState<Scalar> chen_step(const ThetaState<Scalar>& state, const Vector<Scalar>& grad_sample,
                             Scalar gain, const ExpandingCompacts<Scalar>& compacts,
                             const Vector<Scalar>& theta0, ChenReset reset = ChenReset::kExpand) {
  detail::check_step(state, grad_sample, gain, "chen_step");
  const Eigen::Index q = state.theta.size();
  require(compacts.at(0, q).contains(theta0), "chen_step: theta0 must lie in K_0");
  Vector<Scalar> candidate = state.theta - gain * grad_sample;
  ThetaState<Scalar> next = state;
  if (compacts.at(state.trunc_index, q).contains(candidate)) {
    next.accept(std::move(candidate));
  } else {
    next.accept(theta0);
    if (reset == ChenReset::kExpand) {
      ++next.trunc_index;
    }
  }
  return next;
}

template <typename Scalar>
const Vector<Scalar>& polyak_average(const ThetaState<Scalar>& state) {
  return state.theta_avg;
}

}  // namespace aismlmc
