#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "aismlmc/errors.hpp"
#include "aismlmc/sde.hpp"

namespace aismlmc {

/// Exponent -theta.w - |theta|^2 T / 2 of the Girsanov weight.
template <typename Scalar>
Scalar log_girsanov_weight(const Vector<Scalar>& theta, const Vector<Scalar>& w_T, Scalar T) {
  return -theta.dot(w_T) - Scalar(0.5) * theta.squaredNorm() * T;
}

/// exp(-theta.w_T - |theta|^2 T / 2); exactly 1 at theta = 0. May be +inf.
template <typename Scalar>
Scalar girsanov_weight(const Vector<Scalar>& theta, const Vector<Scalar>& w_T, Scalar T) {
  require(theta.size() == w_T.size(), "girsanov_weight: theta and w_T differ in length");
  return std::exp(log_girsanov_weight(theta, w_T, T));
}

/// psi evaluated on a tilted path together with its Girsanov weight.
template <typename Scalar>
struct WeightedSample {
  Vector<Scalar> theta;
  Vector<Scalar> w_T;
  Scalar psi_value = Scalar(0);
  Scalar weight = Scalar(1);
  Scalar product = Scalar(0);

  static WeightedSample make(Vector<Scalar> theta, Vector<Scalar> w_T, Scalar psi_value,
                             Scalar T) {
    WeightedSample s;
    s.weight = girsanov_weight(theta, w_T, T);
    s.theta = std::move(theta);
    s.w_T = std::move(w_T);
    s.psi_value = psi_value;
    s.product = psi_value * s.weight;
    return s;
  }
};

/// r_l = sqrt(m^l / ((m - 1) T)).
template <typename Scalar>
Scalar level_scale(std::int64_t m, int ell, Scalar T) {
  require(m >= 2, "level_scale: refinement must be >= 2");
  require(ell >= 1, "level_scale: level must be >= 1");
  require(T > Scalar(0), "level_scale: horizon must be > 0");
  const Scalar ratio = std::pow(static_cast<Scalar>(m), ell) / (static_cast<Scalar>(m - 1) * T);
  return std::sqrt(ratio);
}

template <typename Scalar>
struct LevelScale {
  std::int64_t m = 2;
  int ell = 1;
  Scalar T = Scalar(1);
  Scalar r = Scalar(0);

  static LevelScale make(std::int64_t m, int ell, Scalar T) {
    return LevelScale{m, ell, T, level_scale<Scalar>(m, ell, T)};
  }
};

namespace detail {

// (theta T - w) * square * exp(-theta.w + |theta|^2 T / 2), computed in log space.
template <typename Scalar>
Vector<Scalar> gradient_integrand(const Vector<Scalar>& theta, const Vector<Scalar>& w_T,
                                  Scalar square, Scalar T, const char* who) {
  require(theta.size() == w_T.size(), std::string(who) + ": theta and w_T differ in length");
  if (square == Scalar(0)) {
    return Vector<Scalar>::Zero(theta.size());
  }
  Vector<Scalar> out = theta * T - w_T;
  const Scalar log_factor = -theta.dot(w_T) + Scalar(0.5) * theta.squaredNorm() * T;
  out *= square * std::exp(log_factor);
  if (!out.allFinite()) {
    throw NumericalOverflow(std::string(who) + ": non-finite gradient sample");
  }
  return out;
}

}  // namespace detail

/// H_l for l >= 1: (theta T - w_T) (r_l (psi_fine - psi_coarse))^2 e^{-theta.w_T + |theta|^2 T/2}.
template <typename Scalar>
Vector<Scalar> grad_H_level(const Vector<Scalar>& theta, Scalar psi_fine, Scalar psi_coarse,
                            const Vector<Scalar>& w_T, const LevelScale<Scalar>& scale) {
  require(scale.ell >= 1, "grad_H_level: level must be >= 1");
  const Scalar diff = scale.r * (psi_fine - psi_coarse);
  return detail::gradient_integrand(theta, w_T, diff * diff, scale.T, "grad_H_level");
}

/// H_0: (theta T - w_T) psi^2 e^{-theta.w_T + |theta|^2 T/2}.
template <typename Scalar>
Vector<Scalar> grad_H_zero(const Vector<Scalar>& theta, Scalar psi_value,
                           const Vector<Scalar>& w_T, Scalar T) {
  return detail::gradient_integrand(theta, w_T, psi_value * psi_value, T, "grad_H_zero");
}

}  // namespace aismlmc
