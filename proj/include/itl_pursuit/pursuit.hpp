#pragma once

// Greedy pursuit driver. One loop covers the whole solver family: the
// sweep rule picks the next atom, the loss rule refits coefficients on
// the grown support, and the refit's residual feeds the next sweep.

#include "itl_pursuit/correlation.hpp"
#include "itl_pursuit/nok.hpp"

namespace itl_pursuit {

enum class LossRule { LeastSquares, Nok };

struct PursuitConfig {
  SweepRule sweep_rule = SweepRule::InnerProduct;
  LossRule loss_rule = LossRule::LeastSquares;
  NokConfig nok;           // consulted only under LossRule::Nok
  int sparsity = 10;       // target support size L
  double residual_eps = 0.0;
  int max_outer_iter = 0;  // 0 selects the min(m, N) safety bound

  void validate() const {
    if (sparsity < 1)
      throw InvalidParameterError("PursuitConfig: sparsity must be at least 1");
    if (residual_eps < 0.0)
      throw InvalidParameterError("PursuitConfig: residual_eps must be nonnegative");
    if (max_outer_iter < 0)
      throw InvalidParameterError("PursuitConfig: max_outer_iter must be nonnegative");
    if (loss_rule == LossRule::Nok) nok.validate();
  }

  // Inner-product sweep with plain least-squares refits.
  static PursuitConfig omp(int sparsity, double residual_eps = 0.0) {
    PursuitConfig cfg;
    cfg.sweep_rule = SweepRule::InnerProduct;
    cfg.loss_rule = LossRule::LeastSquares;
    cfg.sparsity = sparsity;
    cfg.residual_eps = residual_eps;
    return cfg;
  }

  // Inner-product sweep with the kernel loss pinned to p = 2.
  static PursuitConfig cmp(int sparsity, double residual_eps = 0.0) {
    PursuitConfig cfg = kns(sparsity, 2.0, residual_eps);
    return cfg;
  }

  // Inner-product sweep with the kernel loss at general p.
  static PursuitConfig kns(int sparsity, double p, double residual_eps = 0.0) {
    PursuitConfig cfg;
    cfg.sweep_rule = SweepRule::InnerProduct;
    cfg.loss_rule = LossRule::Nok;
    cfg.nok.p = p;
    cfg.sparsity = sparsity;
    cfg.residual_eps = residual_eps;
    return cfg;
  }

  // ITL-correlation sweep with the kernel loss at general p.
  static PursuitConfig inok(int sparsity, double p, double residual_eps = 0.0) {
    PursuitConfig cfg = kns(sparsity, p, residual_eps);
    cfg.sweep_rule = SweepRule::Itl;
    return cfg;
  }
};

struct SparseSolution {
  SupportSet support;            // atoms in selection order
  Eigen::VectorXd x;             // full-length coefficients, zero off support
  Eigen::VectorXd weights;       // final kernel weights; all ones under least squares
  double residual_norm = 0.0;    // norm of the residual the loop stopped on
  int outer_iterations = 0;
  std::vector<double> per_iteration_loss;
  bool converged = false;
};

inline SparseSolution pursuit_solve(const Signal& b, const Dictionary& dict,
                                    const PursuitConfig& cfg) {
  cfg.validate();
  validate_signal(b, "pursuit_solve");
  if (b.size() != dict.dim())
    throw ShapeError("pursuit_solve: signal length does not match dictionary");

  const Index m = dict.dim();
  const Index n = dict.size();
  const int max_outer = cfg.max_outer_iter > 0
                            ? cfg.max_outer_iter
                            : static_cast<int>(std::min(m, n));

  SparseSolution sol;
  sol.x = Eigen::VectorXd::Zero(n);
  sol.weights = Eigen::VectorXd::Ones(m);

  Signal r = b;
  Matrix selected(m, std::min<Index>(cfg.sparsity, n));

  for (;;) {
    if (r.norm() < cfg.residual_eps) {
      sol.converged = true;
      break;
    }
    if (sol.support.size() >= cfg.sparsity) {
      sol.converged = true;
      break;
    }
    if (sol.outer_iterations >= max_outer) break;

    const Index pick = sweep_select(r, dict, sol.support, cfg.sweep_rule);
    sol.support.insert(pick);
    const Index k = sol.support.size();
    selected.col(k - 1) = dict.atoms.col(pick);
    const auto cols = selected.leftCols(k);

    Eigen::VectorXd xs = ls_solve(cols, b);
    if (cfg.loss_rule == LossRule::Nok) {
      IrlsState st = irls_fit(b, cols, cfg.nok, xs);
      xs = st.coefficients;
      sol.weights = st.weights;
      r = st.weighted_residual;
      sol.per_iteration_loss.push_back(st.loss);
    } else {
      r = b - cols * xs;
      sol.per_iteration_loss.push_back(r.norm());
    }

    for (Index i = 0; i < k; ++i) sol.x[sol.support[i]] = xs[i];
    ++sol.outer_iterations;
  }

  // Final-support polish under the kernel loss: once selection is done, the
  // width may follow the trusted-coordinate residual (see WidthFeed),
  // letting the fit sharpen all the way onto a consistent subset when one
  // exists (e.g. zeroed-out coordinates over otherwise clean data). Running
  // this during support growth would instead treat still-unexplained signal
  // as corruption and starve the sweep, so it happens only here. Under
  // dense noise the trusted set collapses; that surfaces either as a
  // singular weighted system or as a fit resting on too few coordinates to
  // overdetermine the support, and both outcomes discard the polish in
  // favor of the stable estimate above.
  if (cfg.loss_rule == LossRule::Nok && sol.support.size() > 0) {
    const Index k = sol.support.size();
    const auto cols = selected.leftCols(k);
    Eigen::VectorXd xs(k);
    for (Index i = 0; i < k; ++i) xs[i] = sol.x[sol.support[i]];
    try {
      IrlsState st =
          irls_fit(b, cols, cfg.nok, xs, WidthFeed::WeightedResidual);
      const double wmax = st.weights.maxCoeff();
      const Index trusted =
          wmax > 0.0 ? Index((st.weights.array() > 1e-8 * wmax).count()) : 0;
      const Index needed = std::min<Index>(2 * k, k + (m - k) / 2);
      if (trusted >= std::max<Index>(needed, k + 1)) {
        sol.weights = st.weights;
        r = st.weighted_residual;
        sol.per_iteration_loss.push_back(st.loss);
        for (Index i = 0; i < k; ++i) sol.x[sol.support[i]] = st.coefficients[i];
      }
    } catch (const SingularSystemError&) {
      // keep the pre-polish solution
    }
  }

  sol.residual_norm = r.norm();
  return sol;
}

// Plain orthogonal matching pursuit; cfg must be an omp-style configuration.
inline SparseSolution omp_solve(const Signal& b, const Dictionary& dict,
                                const PursuitConfig& cfg) {
  if (cfg.sweep_rule != SweepRule::InnerProduct ||
      cfg.loss_rule != LossRule::LeastSquares)
    throw InvalidParameterError("omp_solve: configuration is not an omp preset");
  return pursuit_solve(b, dict, cfg);
}

}  // namespace itl_pursuit
