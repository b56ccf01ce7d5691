#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace mripp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class KernelFamily { MaternHalf };

/// Matern 1/2 kernel: k(x, x') = s * exp(-r), r the lengthscale-weighted
/// Euclidean distance.
struct Kernel {
  KernelFamily family = KernelFamily::MaternHalf;
  Vector lengthscale;
  double signal_variance = 1.0;

  Kernel() = default;
  Kernel(Vector ls, double variance);

  int dims() const { return static_cast<int>(lengthscale.size()); }
  double operator()(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const;
  /// Cross-covariance between the rows of a and the rows of b.
  Matrix gram(const Matrix& a, const Matrix& b) const;
};

struct Posterior {
  Vector mean;
  Matrix covariance;
};

struct PosteriorDiag {
  Vector mean;
  Vector variance;
};

/// Exact GP regression with a constant prior mean. Values are immutable:
/// condition() returns a new process. Inputs are stored one per row.
class GaussianProcess {
 public:
  GaussianProcess() = default;
  GaussianProcess(Kernel kernel, double noise_variance, double prior_mean, std::size_t max_points = 0);

  const Kernel& kernel() const { return kernel_; }
  double noise_variance() const { return noise_; }
  double prior_mean() const { return mean_; }
  std::size_t max_points() const { return cap_; }
  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
  const Matrix& inputs() const { return x_; }
  const Vector& targets() const { return y_; }
  /// Diagonal jitter currently added to the Gram matrix (0 unless rescued).
  double jitter() const { return jitter_; }

  /// Posterior over new_inputs appended to the data. When a point cap is set
  /// and exceeded, the oldest points are dropped.
  GaussianProcess condition(const Matrix& new_inputs, const Vector& new_targets) const;

  Posterior posterior(const Matrix& query) const;
  PosteriorDiag posterior_diag(const Matrix& query) const;
  /// Trace of the posterior covariance over query, without forming
  /// off-diagonal entries.
  double trace_of_posterior(const Matrix& query) const;

 private:
  void refactor();
  Matrix solve_lower(const Matrix& k_train_query) const;

  Kernel kernel_;
  double noise_ = 0.0;
  double mean_ = 0.0;
  std::size_t cap_ = 0;
  Matrix x_;
  Vector y_;
  Matrix chol_;  // lower factor of K + (noise + jitter) I
  Vector alpha_;
  double jitter_ = 0.0;
};

}  // namespace mripp
