#pragma once

// ITL correlation between a signal and a scaled atom,
//
//   V(b, a) = (1/(sqrt(2 pi) sigma)) exp(-||b - beta a||^2 / (2 sigma^2)),
//
// with the contribution coefficient beta fit by least squares, an optional
// per-pair adaptive kernel width sigma^2 = ||b - beta a||^2 / (2 m), a
// normalized scale-invariant variant, and the atom sweep built on top.
// Values are carried in the log domain so large dimensions cannot
// overflow or underflow the exponential.

#include "itl_pursuit/core.hpp"

namespace itl_pursuit {

// Kernel width policy: one width shared across evaluations, or the
// adaptive width derived from each pair's own residual.
struct SigmaMode {
  static SigmaMode fixed(double sigma0) {
    if (!(sigma0 > 0.0))
      throw InvalidParameterError("SigmaMode: sigma0 must be positive");
    return SigmaMode{false, sigma0};
  }
  static SigmaMode adaptive() { return SigmaMode{true, 0.0}; }

  bool is_adaptive = true;
  double sigma0 = 0.0;
};

struct CorrelationResult {
  double beta = 0.0;       // fitted contribution coefficient
  double sigma = 0.0;      // kernel width actually used
  double log_value = 0.0;  // ln V; +inf marks an exact fit, -inf a zero signal
  bool exact_fit = false;
};

// Least-squares coefficient beta* = <a, b> / <a, a>.
inline double beta_star(const Signal& b, const Signal& a) {
  if (a.size() != b.size())
    throw ShapeError("beta_star: signal and atom dimensions differ");
  const double aa = a.squaredNorm();
  if (aa == 0.0) throw InvalidAtomError("beta_star: atom is the zero vector");
  return a.dot(b) / aa;
}

// Adaptive width sigma = sqrt(||b - beta a||^2 / (2 m)), floored.
inline double kernel_width(const Signal& b, const Signal& a, double beta,
                           double sigma_floor = kSigmaFloor) {
  if (a.size() != b.size())
    throw ShapeError("kernel_width: signal and atom dimensions differ");
  if (b.size() < 1) throw InvalidSignalError("kernel_width: empty signal");
  const double rss = (b - beta * a).squaredNorm();
  const double m = static_cast<double>(b.size());
  return std::max(std::sqrt(rss / (2.0 * m)), sigma_floor);
}

namespace detail {

inline double log_gauss_const(double sigma) {
  return -std::log(std::sqrt(2.0 * std::numbers::pi) * sigma);
}

inline CorrelationResult correlate(const Signal& b, const Signal& a,
                                   const SigmaMode& mode, bool normalized) {
  const double beta = beta_star(b, a);
  CorrelationResult out;
  out.beta = beta;

  const double bb = b.squaredNorm();
  if (bb == 0.0) {
    if (normalized)
      throw InvalidSignalError("itl_correlation_normalized: zero signal");
    // A zero signal carries no correlation with any atom; report the
    // vanishing-signal limit rather than evaluating the formula at beta = 0.
    out.sigma = mode.is_adaptive ? kSigmaFloor : mode.sigma0;
    out.log_value = -std::numeric_limits<double>::infinity();
    return out;
  }

  const double rss = (b - beta * a).squaredNorm();
  const double m = static_cast<double>(b.size());
  out.sigma = mode.is_adaptive
                  ? std::max(std::sqrt(rss / (2.0 * m)), kSigmaFloor)
                  : mode.sigma0;

  if (mode.is_adaptive && rss < kExactFitEps * bb) {
    // The adaptive width collapses with the residual, so the value grows
    // without bound as the fit becomes exact.
    out.exact_fit = true;
    out.log_value = std::numeric_limits<double>::infinity();
    return out;
  }

  const double scale = normalized ? bb : 1.0;
  out.log_value = log_gauss_const(out.sigma) -
                  rss / (2.0 * out.sigma * out.sigma * scale);
  return out;
}

}  // namespace detail

inline CorrelationResult itl_correlation(const Signal& b, const Signal& a,
                                         const SigmaMode& mode = SigmaMode::adaptive()) {
  return detail::correlate(b, a, mode, false);
}

// Scale-invariant variant: the exponent is divided by ||b||^2, which makes
// the value independent of rescalings of either argument.
inline CorrelationResult itl_correlation_normalized(
    const Signal& b, const Signal& a,
    const SigmaMode& mode = SigmaMode::adaptive()) {
  if (a.size() == b.size() && a.squaredNorm() == 0.0)
    throw InvalidAtomError("itl_correlation_normalized: zero atom");
  return detail::correlate(b, a, mode, true);
}

// True when the atom carries no component of b (beta* vanishes).
inline bool is_itl_orthogonal(const Signal& b, const Signal& a,
                              double tol = 1e-12) {
  if (tol < 0.0) throw InvalidParameterError("is_itl_orthogonal: negative tol");
  return std::abs(beta_star(b, a)) <= tol;
}

enum class SweepRule { InnerProduct, Itl };

// Picks the best non-excluded atom for the residual. The ITL rule ranks by
// adaptive-width log correlation, the inner-product rule by |<r, a_i>|.
// Ties resolve to the lowest index.
inline Index sweep_select(const Signal& residual, const Dictionary& dict,
                          const SupportSet& excluded, SweepRule rule) {
  if (residual.size() != dict.dim())
    throw ShapeError("sweep_select: residual length does not match dictionary");

  Index best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < dict.size(); ++j) {
    if (excluded.contains(j)) continue;
    double score;
    if (rule == SweepRule::Itl) {
      score = itl_correlation(residual, dict.atoms.col(j)).log_value;
    } else {
      score = std::abs(residual.dot(dict.atoms.col(j)));
    }
    if (best < 0 || score > best_score) {
      best = j;
      best_score = score;
    }
  }
  if (best < 0)
    throw EmptyCandidateError("sweep_select: every atom is excluded");
  return best;
}

}  // namespace itl_pursuit
