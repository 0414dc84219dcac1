#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aismlmc/errors.hpp"
#include "aismlmc/random.hpp"

namespace aismlmc {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/*
 * Brownian-driven SDE  dX = b(X) dt + sum_j sigma_j(X) dW^j,  X_0 = x0,  on [0, T].
 *
 * The diffusion is exposed as a d x q matrix whose column j is sigma_j(x).
 * Models that also provide the Jacobians of b and sigma_j can drive the
 * limit-process oracle; the estimators never need them.
 */
template <typename Scalar>
class SdeModel {
 public:
  using VectorType = Vector<Scalar>;
  using MatrixType = Matrix<Scalar>;

  SdeModel(Eigen::Index state_dim, Eigen::Index noise_dim, VectorType x0, Scalar horizon)
      : state_dim_(state_dim), noise_dim_(noise_dim), x0_(std::move(x0)), horizon_(horizon) {
    require(state_dim_ >= 1, "SdeModel: state dimension must be >= 1");
    require(noise_dim_ >= 1, "SdeModel: noise dimension must be >= 1");
    require(x0_.size() == state_dim_, "SdeModel: x0 has wrong length");
    require(horizon_ > Scalar(0), "SdeModel: horizon must be > 0");
  }

  virtual ~SdeModel() = default;

  Eigen::Index state_dim() const { return state_dim_; }
  Eigen::Index noise_dim() const { return noise_dim_; }
  const VectorType& x0() const { return x0_; }
  Scalar horizon() const { return horizon_; }

  /// `out` has length d.
  virtual void drift(const VectorType& x, VectorType& out) const = 0;

  /// `out` is d x q; column j receives sigma_j(x).
  virtual void diffusion(const VectorType& x, MatrixType& out) const = 0;

  virtual bool has_jacobians() const { return false; }

  /// d x d Jacobian of the drift.
  virtual void drift_jacobian(const VectorType&, MatrixType&) const {
    throw InvalidArgument("SdeModel: drift Jacobian not provided by this model");
  }

  /// d x d Jacobian of diffusion column j.
  virtual void diffusion_jacobian(Eigen::Index, const VectorType&, MatrixType&) const {
    throw InvalidArgument("SdeModel: diffusion Jacobian not provided by this model");
  }

 private:
  Eigen::Index state_dim_;
  Eigen::Index noise_dim_;
  VectorType x0_;
  Scalar horizon_;
};

/// Geometric Brownian motion dS = r S dt + sigma S dW (d = q = 1).
template <typename Scalar>
class BlackScholesModel final : public SdeModel<Scalar> {
 public:
  using typename SdeModel<Scalar>::VectorType;
  using typename SdeModel<Scalar>::MatrixType;

  BlackScholesModel(Scalar s0, Scalar rate, Scalar volatility, Scalar horizon)
      : SdeModel<Scalar>(1, 1, VectorType::Constant(1, s0), horizon),
        rate_(rate),
        volatility_(volatility) {
    require(s0 > Scalar(0), "BlackScholesModel: spot must be > 0");
    require(volatility >= Scalar(0), "BlackScholesModel: volatility must be >= 0");
  }

  Scalar rate() const { return rate_; }
  Scalar volatility() const { return volatility_; }

  void drift(const VectorType& x, VectorType& out) const override { out(0) = rate_ * x(0); }
  void diffusion(const VectorType& x, MatrixType& out) const override {
    out(0, 0) = volatility_ * x(0);
  }

  bool has_jacobians() const override { return true; }
  void drift_jacobian(const VectorType&, MatrixType& out) const override { out(0, 0) = rate_; }
  void diffusion_jacobian(Eigen::Index, const VectorType&, MatrixType& out) const override {
    out(0, 0) = volatility_;
  }

 private:
  Scalar rate_;
  Scalar volatility_;
};

/// Model assembled from callables: a drift and one function per diffusion column.
template <typename Scalar>
class FunctionSdeModel final : public SdeModel<Scalar> {
 public:
  using typename SdeModel<Scalar>::VectorType;
  using typename SdeModel<Scalar>::MatrixType;
  using VectorField = std::function<VectorType(const VectorType&)>;
  using JacobianField = std::function<MatrixType(const VectorType&)>;

  FunctionSdeModel(VectorField drift, std::vector<VectorField> diffusion_columns, VectorType x0,
                   Scalar horizon)
      : SdeModel<Scalar>(x0.size(), static_cast<Eigen::Index>(diffusion_columns.size()), x0,
                         horizon),
        drift_(std::move(drift)),
        columns_(std::move(diffusion_columns)) {}

  /// Attach Jacobians (one per diffusion column) for the oracle.
  FunctionSdeModel& with_jacobians(JacobianField drift_jacobian,
                                   std::vector<JacobianField> column_jacobians) {
    require(column_jacobians.size() == columns_.size(),
            "FunctionSdeModel: one Jacobian per diffusion column required");
    drift_jacobian_ = std::move(drift_jacobian);
    column_jacobians_ = std::move(column_jacobians);
    return *this;
  }

  void drift(const VectorType& x, VectorType& out) const override {
    out = checked(drift_(x), "drift");
  }

  void diffusion(const VectorType& x, MatrixType& out) const override {
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      out.col(static_cast<Eigen::Index>(j)) = checked(columns_[j](x), "diffusion column");
    }
  }

  bool has_jacobians() const override { return static_cast<bool>(drift_jacobian_); }

  void drift_jacobian(const VectorType& x, MatrixType& out) const override {
    require(has_jacobians(), "FunctionSdeModel: no Jacobians attached");
    out = drift_jacobian_(x);
  }

  void diffusion_jacobian(Eigen::Index j, const VectorType& x, MatrixType& out) const override {
    require(has_jacobians(), "FunctionSdeModel: no Jacobians attached");
    out = column_jacobians_.at(static_cast<std::size_t>(j))(x);
  }

 private:
  VectorType checked(VectorType v, const char* what) const {
    if (v.size() != this->state_dim()) {
      throw InvalidArgument(std::string("FunctionSdeModel: ") + what + " returned length " +
                            std::to_string(v.size()) + ", expected " +
                            std::to_string(this->state_dim()));
    }
    return v;
  }

  VectorField drift_;
  std::vector<VectorField> columns_;
  JacobianField drift_jacobian_;
  std::vector<JacobianField> column_jacobians_;
};

/// Brownian increments on a uniform grid of `steps` intervals over [0, T].
///
/// Row k of `increments` holds the q-dimensional increment over
/// [k dt, (k+1) dt].
template <typename Scalar>
struct BrownianGrid {
  std::int64_t steps = 0;
  Scalar horizon = Scalar(0);
  Scalar dt = Scalar(0);
  RowMatrix<Scalar> increments;
  Vector<Scalar> endpoint;  // W_T

  Eigen::Index noise_dim() const { return increments.cols(); }
};

/// Left-to-right componentwise sum of all increments.
template <typename Scalar>
Vector<Scalar> sum_increments(const RowMatrix<Scalar>& increments) {
  Vector<Scalar> total = Vector<Scalar>::Zero(increments.cols());
  for (Eigen::Index k = 0; k < increments.rows(); ++k) {
    for (Eigen::Index j = 0; j < increments.cols(); ++j) {
      total(j) += increments(k, j);
    }
  }
  return total;
}

/// Fills `grid` in place (storage reused when the shape matches).
template <typename Scalar>
void fill_brownian_grid(BrownianGrid<Scalar>& grid, std::int64_t steps, Eigen::Index noise_dim,
                        Scalar horizon, RandomStream& stream) {
  require(steps >= 1, "generate_brownian_grid: steps must be >= 1");
  require(noise_dim >= 1, "generate_brownian_grid: noise dimension must be >= 1");
  require(horizon > Scalar(0), "generate_brownian_grid: horizon must be > 0");
  grid.steps = steps;
  grid.horizon = horizon;
  grid.dt = horizon / static_cast<Scalar>(steps);
  grid.increments.resize(steps, noise_dim);
  grid.endpoint.setZero(noise_dim);
  const Scalar scale = std::sqrt(grid.dt);
  for (Eigen::Index k = 0; k < steps; ++k) {
    for (Eigen::Index j = 0; j < noise_dim; ++j) {
      const Scalar dw = scale * static_cast<Scalar>(stream.normal());
      grid.increments(k, j) = dw;
      grid.endpoint(j) += dw;
    }
  }
}

template <typename Scalar>
BrownianGrid<Scalar> generate_brownian_grid(std::int64_t steps, Eigen::Index noise_dim,
                                            Scalar horizon, RandomStream& stream) {
  BrownianGrid<Scalar> grid;
  fill_brownian_grid(grid, steps, noise_dim, horizon, stream);
  return grid;
}

/// Sums consecutive blocks of `factor` increments into `out`. The endpoint is
/// carried over from the fine grid: both grids describe the same path.
template <typename Scalar>
void coarsen_into(const BrownianGrid<Scalar>& fine, std::int64_t factor,
                  BrownianGrid<Scalar>& out) {
  require(factor >= 1, "coarsen: factor must be >= 1");
  require(fine.steps % factor == 0, "coarsen: steps " + std::to_string(fine.steps) +
                                        " not divisible by " + std::to_string(factor));
  const std::int64_t coarse_steps = fine.steps / factor;
  const Eigen::Index q = fine.noise_dim();
  out.steps = coarse_steps;
  out.horizon = fine.horizon;
  out.dt = fine.horizon / static_cast<Scalar>(coarse_steps);
  out.increments.resize(coarse_steps, q);
  out.endpoint = fine.endpoint;
  for (Eigen::Index k = 0; k < coarse_steps; ++k) {
    for (Eigen::Index j = 0; j < q; ++j) {
      Scalar block = fine.increments(k * factor, j);
      for (Eigen::Index i = 1; i < factor; ++i) {
        block += fine.increments(k * factor + i, j);
      }
      out.increments(k, j) = block;
    }
  }
}

template <typename Scalar>
BrownianGrid<Scalar> coarsen(const BrownianGrid<Scalar>& fine, std::int64_t factor) {
  BrownianGrid<Scalar> out;
  coarsen_into(fine, factor, out);
  return out;
}

/// Scratch buffers for the Euler recursion, reusable across paths.
template <typename Scalar>
struct EulerWorkspace {
  Vector<Scalar> state;
  Vector<Scalar> drift;
  Matrix<Scalar> diffusion;

  void resize(Eigen::Index d, Eigen::Index q) {
    state.resize(d);
    drift.resize(d);
    diffusion.resize(d, q);
  }
};

/*
 * Terminal value of the explicit Euler scheme
 *
 *   X_{k+1} = X_k + (b(X_k) + sum_j theta_j sigma_j(X_k)) dt + sum_j sigma_j(X_k) dW_k^j
 *
 * theta = 0 skips the tilt term entirely, so the untilted scheme is reproduced
 * bit for bit.
 */
template <typename Scalar>
Vector<Scalar> euler_terminal(const SdeModel<Scalar>& model, const Vector<Scalar>& theta,
                              const BrownianGrid<Scalar>& grid, EulerWorkspace<Scalar>& work) {
  const Eigen::Index d = model.state_dim();
  const Eigen::Index q = model.noise_dim();
  require(grid.noise_dim() == q, "euler_terminal: grid noise dimension " +
                                     std::to_string(grid.noise_dim()) + " != model " +
                                     std::to_string(q));
  require(theta.size() == q, "euler_terminal: theta has length " + std::to_string(theta.size()) +
                                 ", expected " + std::to_string(q));
  work.resize(d, q);
  const bool tilted = !theta.isZero(0);
  const Scalar dt = grid.dt;
  Vector<Scalar>& x = work.state;
  x = model.x0();
  for (std::int64_t k = 0; k < grid.steps; ++k) {
    model.drift(x, work.drift);
    model.diffusion(x, work.diffusion);
    // b dt + sum_j sigma_j (theta_j dt + dW^j), written into the drift buffer
    work.drift *= dt;
    for (Eigen::Index j = 0; j < q; ++j) {
      Scalar shift = grid.increments(k, j);
      if (tilted) {
        shift += theta(j) * dt;
      }
      for (Eigen::Index i = 0; i < d; ++i) {
        work.drift(i) += work.diffusion(i, j) * shift;
      }
    }
    x += work.drift;
    if (!x.allFinite()) {
      throw NumericalOverflow("euler_terminal: non-finite state at step " + std::to_string(k + 1),
                              k + 1);
    }
  }
  return x;
}

template <typename Scalar>
Vector<Scalar> euler_terminal(const SdeModel<Scalar>& model, const Vector<Scalar>& theta,
                              const BrownianGrid<Scalar>& grid) {
  EulerWorkspace<Scalar> work;
  return euler_terminal(model, theta, grid, work);
}

/// Fine (m^l steps) and coarse (m^{l-1} steps) terminal values on one path.
template <typename Scalar>
struct TerminalPair {
  Vector<Scalar> fine_value;
  Vector<Scalar> coarse_value;
  int level = 0;
  std::int64_t refinement = 0;
};

/// Level l such that steps == m^l, or -1.
inline int level_of(std::int64_t steps, std::int64_t m) {
  int level = 0;
  std::int64_t n = 1;
  while (n < steps) {
    n *= m;
    ++level;
  }
  return n == steps ? level : -1;
}

template <typename Scalar>
TerminalPair<Scalar> euler_pair(const SdeModel<Scalar>& model, const Vector<Scalar>& theta,
                                const BrownianGrid<Scalar>& fine_grid, std::int64_t m,
                                EulerWorkspace<Scalar>& work, BrownianGrid<Scalar>& coarse_buffer) {
  require(m >= 2, "euler_pair: refinement must be >= 2");
  const int level = level_of(fine_grid.steps, m);
  require(level >= 1, "euler_pair: fine grid steps " + std::to_string(fine_grid.steps) +
                          " is not m^l with l >= 1 for m = " + std::to_string(m));
  coarsen_into(fine_grid, m, coarse_buffer);
  TerminalPair<Scalar> pair;
  pair.fine_value = euler_terminal(model, theta, fine_grid, work);
  pair.coarse_value = euler_terminal(model, theta, coarse_buffer, work);
  pair.level = level;
  pair.refinement = m;
  return pair;
}

template <typename Scalar>
TerminalPair<Scalar> euler_pair(const SdeModel<Scalar>& model, const Vector<Scalar>& theta,
                                const BrownianGrid<Scalar>& fine_grid, std::int64_t m) {
  EulerWorkspace<Scalar> work;
  BrownianGrid<Scalar> coarse;
  return euler_pair(model, theta, fine_grid, m, work, coarse);
}

}  // namespace aismlmc
