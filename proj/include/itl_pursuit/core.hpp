#pragma once

// Shared value types, error types, the Gaussian kernel, and the dense
// least-squares primitive the pursuit layers are built on.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace itl_pursuit {

using Signal = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Lower bound applied to every adaptive kernel width.
inline constexpr double kSigmaFloor = 1e-12;
// Relative squared-residual threshold below which a fit counts as exact.
inline constexpr double kExactFitEps = 1e-20;
// Residual orthogonality tolerance for accepted least-squares solves,
// relative to the target norm.
inline constexpr double kLsOrthoTol = 1e-8;

struct InvalidParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidAtomError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidSignalError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a sweep has no atom left to choose from.
struct EmptyCandidateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised for rank-deficient or numerically singular solves; carries a
// cheap condition estimate of the offending system.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(double condition_estimate, const std::string& what)
      : std::runtime_error(what + " (condition estimate " +
                           std::to_string(condition_estimate) + ")"),
        condition_estimate_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

// Column dictionary with optional per-atom class labels.
struct Dictionary {
  Matrix atoms;
  std::optional<std::vector<int>> class_labels;

  Dictionary() = default;

  explicit Dictionary(Matrix a, std::optional<std::vector<int>> labels = std::nullopt)
      : atoms(std::move(a)), class_labels(std::move(labels)) {
    if (atoms.rows() < 1 || atoms.cols() < 1)
      throw ShapeError("Dictionary: atom matrix must be nonempty");
    for (Index j = 0; j < atoms.cols(); ++j) {
      if (atoms.col(j).isZero(0.0))
        throw InvalidAtomError("Dictionary: atom " + std::to_string(j) +
                               " is the zero vector");
    }
    if (class_labels &&
        static_cast<Index>(class_labels->size()) != atoms.cols())
      throw ShapeError("Dictionary: class_labels length must equal atom count");
  }

  Index dim() const { return atoms.rows(); }
  Index size() const { return atoms.cols(); }
};

// Ordered set of selected atom indices; insertion order is selection order.
class SupportSet {
 public:
  void insert(Index i) {
    if (contains(i))
      throw InvalidParameterError("SupportSet: index " + std::to_string(i) +
                                  " already selected");
    indices_.push_back(i);
  }

  bool contains(Index i) const {
    return std::find(indices_.begin(), indices_.end(), i) != indices_.end();
  }

  Index size() const { return static_cast<Index>(indices_.size()); }
  bool empty() const { return indices_.empty(); }
  Index operator[](Index i) const { return indices_[static_cast<size_t>(i)]; }
  const std::vector<Index>& indices() const { return indices_; }

  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

 private:
  std::vector<Index> indices_;
};

inline void validate_signal(const Signal& b, const char* who) {
  if (b.size() < 1)
    throw InvalidSignalError(std::string(who) + ": signal must be nonempty");
  if (!b.allFinite())
    throw InvalidSignalError(std::string(who) + ": signal has non-finite entries");
}

// Gaussian kernel of an error value. The normalized form is
// (1/(sqrt(2 pi) sigma)) exp(-e^2 / (2 sigma^2)); the unnormalized form
// drops the front factor.
inline double gaussian_kernel(double e, double sigma, bool normalized) {
  if (!(sigma > 0.0))
    throw InvalidParameterError("gaussian_kernel: sigma must be positive");
  const double q = std::exp(-(e * e) / (2.0 * sigma * sigma));
  if (!normalized) return q;
  return q / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

// Minimizes ||columns x - target||_2 with column-pivoted Householder QR.
// A solve is accepted only when the residual is orthogonal to the column
// span to within kLsOrthoTol * ||target||; rank deficiency and failed
// orthogonality both raise SingularSystemError.
inline Eigen::VectorXd ls_solve(const Matrix& columns, const Signal& target) {
  if (columns.cols() < 1)
    throw InvalidParameterError("ls_solve: need at least one column");
  if (columns.rows() != target.size())
    throw ShapeError("ls_solve: column length " + std::to_string(columns.rows()) +
                     " does not match target length " + std::to_string(target.size()));

  Eigen::ColPivHouseholderQR<Matrix> qr(columns);
  const Index k = columns.cols();
  const Index d = std::min(columns.rows(), k);
  const auto& qrm = qr.matrixQR();
  const double rmax = std::abs(qrm(0, 0));
  const double rmin = std::abs(qrm(d - 1, d - 1));
  const double cond = rmin > 0.0 ? rmax / rmin
                                 : std::numeric_limits<double>::infinity();

  if (qr.rank() < k)
    throw SingularSystemError(cond, "ls_solve: rank-deficient system");

  Eigen::VectorXd x = qr.solve(target);
  const double gap =
      (columns.transpose() * (columns * x - target)).lpNorm<Eigen::Infinity>();
  if (gap > kLsOrthoTol * target.norm())
    throw SingularSystemError(cond, "ls_solve: residual orthogonality failure");
  return x;
}

}  // namespace itl_pursuit
