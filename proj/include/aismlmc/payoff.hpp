#pragma once

#include <algorithm>
#include <cmath>

#include "aismlmc/errors.hpp"
#include "aismlmc/sde.hpp"

namespace aismlmc {

/// psi(x) = e^{-rT} (x_0 - K)_+ on the first state coordinate.
template <typename Scalar>
struct DiscountedCall {
  Scalar strike = Scalar(100);
  Scalar discount = Scalar(1);

  DiscountedCall() = default;
  DiscountedCall(Scalar strike_, Scalar rate, Scalar T)
      : strike(strike_), discount(std::exp(-rate * T)) {
    require(strike > Scalar(0), "DiscountedCall: strike must be > 0");
  }

  Scalar operator()(const Vector<Scalar>& x) const {
    return discount * std::max(x(0) - strike, Scalar(0));
  }

  // Subgradient 1{x > K} e^{-rT}; the kink has probability zero under a density.
  Vector<Scalar> gradient(const Vector<Scalar>& x) const {
    Vector<Scalar> g = Vector<Scalar>::Zero(x.size());
    g(0) = x(0) > strike ? discount : Scalar(0);
    return g;
  }
};

}  // namespace aismlmc
