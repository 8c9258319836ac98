#pragma once

// Non-second-order kernel loss
//
//   J(e) = (1/m) sum_j (1 - exp(-e_j^2 / (2 sigma^2)))^(p/2),
//
// its M-estimation weights, and the iteratively reweighted least-squares
// loop that fits coefficients on a fixed support under that loss.

#include "itl_pursuit/core.hpp"

namespace itl_pursuit {

struct NokConfig {
  double p = 1.7;
  double irls_tol = 1e-6;
  int irls_max_iter = 100;
  double weight_cap = 1e8;
  double sigma_floor = kSigmaFloor;

  void validate() const {
    if (!(p > 0.0)) throw InvalidParameterError("NokConfig: p must be positive");
    if (!(irls_tol > 0.0))
      throw InvalidParameterError("NokConfig: irls_tol must be positive");
    if (irls_max_iter < 1)
      throw InvalidParameterError("NokConfig: irls_max_iter must be at least 1");
    if (!(weight_cap > 0.0))
      throw InvalidParameterError("NokConfig: weight_cap must be positive");
    if (!(sigma_floor > 0.0))
      throw InvalidParameterError("NokConfig: sigma_floor must be positive");
  }
};

struct IrlsState {
  Eigen::VectorXd weights;           // final capped weights gamma
  double sigma = 0.0;                // width used for the final weights
  Eigen::VectorXd coefficients;
  Signal weighted_residual;          // sqrt(gamma) .* (b - A x)
  double loss = 0.0;
  std::vector<double> loss_history;  // entry 0 is the loss of the initial fit
  int iterations = 0;
  bool converged = false;
};

inline double nok_loss(const Eigen::VectorXd& errors, double sigma, double p) {
  if (!(sigma > 0.0)) throw InvalidParameterError("nok_loss: sigma must be positive");
  if (!(p > 0.0)) throw InvalidParameterError("nok_loss: p must be positive");
  if (errors.size() < 1) throw ShapeError("nok_loss: empty error vector");
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  return (1.0 - (-errors.array().square() * inv2s2).exp())
      .pow(0.5 * p)
      .mean();
}

// Weight of each coordinate,
//
//   gamma_j = (p / (2 sigma^2)) (1 - k_j)^(p/2 - 1) k_j,
//   k_j     = exp(-e_j^2 / (2 sigma^2)),
//
// capped at weight_cap. For p < 2 the weight diverges as e_j -> 0; the
// IEEE pow(0, negative) = +inf makes the cap absorb that case without a
// branch, and pow(0, 0) = 1 keeps p = 2 exact.
inline Eigen::VectorXd nok_weights(const Eigen::VectorXd& errors, double sigma,
                                   double p, double weight_cap = 1e8) {
  if (!(sigma > 0.0)) throw InvalidParameterError("nok_weights: sigma must be positive");
  if (!(p > 0.0)) throw InvalidParameterError("nok_weights: p must be positive");
  if (!(weight_cap > 0.0))
    throw InvalidParameterError("nok_weights: weight_cap must be positive");
  if (errors.size() < 1) throw ShapeError("nok_weights: empty error vector");

  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double scale = p * inv2s2;
  Eigen::VectorXd w(errors.size());
  for (Index j = 0; j < errors.size(); ++j) {
    const double k = std::exp(-errors[j] * errors[j] * inv2s2);
    const double g = scale * std::pow(1.0 - k, 0.5 * p - 1.0) * k;
    w[j] = std::min(g, weight_cap);
  }
  return w;
}

// Width update from the unweighted residual of the current coefficients,
// sigma = sqrt(||b - selected x||^2 / (2 m)), floored.
inline double sigma_update(const Signal& b, const Matrix& selected,
                           const Eigen::VectorXd& x,
                           double sigma_floor = kSigmaFloor) {
  if (selected.rows() != b.size() || selected.cols() != x.size())
    throw ShapeError("sigma_update: inconsistent dimensions");
  if (!(sigma_floor > 0.0))
    throw InvalidParameterError("sigma_update: sigma_floor must be positive");
  const double rss = (b - selected * x).squaredNorm();
  const double m = static_cast<double>(b.size());
  return std::max(std::sqrt(rss / (2.0 * m)), sigma_floor);
}

// One weighted least-squares solve, x = argmin ||sqrt(diag(w)) (b - A x)||.
// Weights are rescaled to a unit maximum before the solve; the minimizer
// is unchanged and the system stays well scaled under large caps.
inline Eigen::VectorXd weighted_ls_step(const Signal& b, const Matrix& selected,
                                        const Eigen::VectorXd& weights) {
  if (selected.rows() != b.size())
    throw ShapeError("weighted_ls_step: column length does not match target");
  if (weights.size() != b.size())
    throw ShapeError("weighted_ls_step: weight length does not match target");
  if ((weights.array() < 0.0).any())
    throw InvalidParameterError("weighted_ls_step: negative weight");

  const double wmax = weights.maxCoeff();
  if (!(wmax > 0.0))
    throw SingularSystemError(std::numeric_limits<double>::infinity(),
                              "weighted_ls_step: all weights vanish");
  const Eigen::VectorXd s = (weights / wmax).cwiseSqrt();
  return ls_solve(s.asDiagonal() * selected, s.cwiseProduct(b));
}

// Selects which residual feeds the kernel-width update between IRLS
// iterations.
//
// Unweighted: the plain residual b - A x of the previous iterate. The
// width then tracks the full residual scale, which keeps the weights
// informative while the support is still incomplete and large residuals
// are unexplained signal rather than corruption.
//
// WeightedResidual: the residual reweighted by gamma rescaled to a unit
// maximum. The width then tracks only the coordinates the fit still
// trusts: corruption the weights have suppressed stops propping the width
// up, so a fit whose trusted coordinates are nearly consistent can sharpen
// all the way down to an exact fit on them. Under dense noise no such
// consistent subset exists and the trusted set can shrink until the
// weighted system loses rank; callers of this mode must be prepared to
// catch the singular-system error and fall back to a prior estimate.
// Appropriate only once the support is final.
enum class WidthFeed { Unweighted, WeightedResidual };

// Fits coefficients on a fixed support by IRLS: refresh sigma from the
// previous iterate's residual (selected by `feed`, first iteration always
// unweighted from init_x), form the kernel weights, solve the weighted
// system, and stop once the weight vector moves less than irls_tol between
// iterations. Reaching irls_max_iter flags the state not-converged instead
// of raising.
inline IrlsState irls_fit(const Signal& b, const Matrix& selected,
                          const NokConfig& cfg, const Eigen::VectorXd& init_x,
                          WidthFeed feed = WidthFeed::Unweighted) {
  cfg.validate();
  validate_signal(b, "irls_fit");
  if (selected.rows() != b.size())
    throw ShapeError("irls_fit: column length does not match signal");
  if (init_x.size() != selected.cols())
    throw ShapeError("irls_fit: init_x length does not match column count");

  const double m = static_cast<double>(b.size());
  const double bb = b.squaredNorm();

  IrlsState st;
  st.coefficients = init_x;
  st.weights = Eigen::VectorXd::Ones(b.size());
  st.sigma = cfg.sigma_floor;

  auto exact_fit = [&](const Eigen::VectorXd& resid) {
    // Below this threshold the width floor would turn rounding noise into
    // spurious loss, so the fit is reported at its exact-arithmetic limit.
    return resid.squaredNorm() < kExactFitEps * bb;
  };

  Eigen::VectorXd resid = b - selected * st.coefficients;
  if (exact_fit(resid)) {
    st.loss_history.push_back(0.0);
    st.loss = 0.0;
    st.weighted_residual = resid;
    st.converged = true;
    return st;
  }
  st.sigma = std::max(std::sqrt(resid.squaredNorm() / (2.0 * m)), cfg.sigma_floor);
  st.loss_history.push_back(nok_loss(resid, st.sigma, cfg.p));

  Eigen::VectorXd prev_w;
  for (int it = 1; it <= cfg.irls_max_iter; ++it) {
    resid = b - selected * st.coefficients;
    if (exact_fit(resid)) {
      st.converged = true;
      break;
    }
    const bool weighted_feed = feed == WidthFeed::WeightedResidual && it > 1;
    const double rss =
        weighted_feed ? ((st.weights / st.weights.maxCoeff()).array() *
                         resid.array().square())
                            .sum()
                      : resid.squaredNorm();
    const double sigma = std::max(std::sqrt(rss / (2.0 * m)), cfg.sigma_floor);
    Eigen::VectorXd w = nok_weights(resid, sigma, cfg.p, cfg.weight_cap);
    if (!(w.maxCoeff() > 0.0)) {
      // Every weight vanished (p > 2 at a numerically exact fit); the
      // current coefficients are already stationary.
      st.converged = true;
      break;
    }
    st.coefficients = weighted_ls_step(b, selected, w);
    st.sigma = sigma;
    st.weights = std::move(w);
    st.iterations = it;

    resid = b - selected * st.coefficients;
    st.loss_history.push_back(exact_fit(resid) ? 0.0
                                               : nok_loss(resid, sigma, cfg.p));

    if (prev_w.size() > 0 && (st.weights - prev_w).norm() < cfg.irls_tol) {
      st.converged = true;
      break;
    }
    prev_w = st.weights;
  }

  resid = b - selected * st.coefficients;
  st.weighted_residual = st.weights.cwiseSqrt().cwiseProduct(resid);
  st.loss = st.loss_history.back();
  return st;
}

}  // namespace itl_pursuit
