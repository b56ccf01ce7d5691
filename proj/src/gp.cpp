#include "mripp/gp.hpp"

#include <cmath>
#include <sstream>

#include "mripp/errors.hpp"

namespace mripp {

Kernel::Kernel(Vector ls, double variance) : lengthscale(std::move(ls)), signal_variance(variance) {
  if (lengthscale.size() == 0 || (lengthscale.array() <= 0.0).any())
    throw PreconditionError("kernel lengthscales must be positive");
  if (!(signal_variance > 0.0)) throw PreconditionError("kernel signal_variance must be positive");
}

double Kernel::operator()(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const {
  const double r = ((a - b).array() / lengthscale.array()).matrix().norm();
  return signal_variance * std::exp(-r);
}

Matrix Kernel::gram(const Matrix& a, const Matrix& b) const {
  if (a.cols() != dims() || b.cols() != dims()) throw PreconditionError("kernel input dimension mismatch");
  const Eigen::ArrayXd inv = lengthscale.array().inverse();
  const Matrix as = a * inv.matrix().asDiagonal();
  const Matrix bs = b * inv.matrix().asDiagonal();
  Matrix k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      k(i, j) = signal_variance * std::exp(-(as.row(i) - bs.row(j)).norm());
  return k;
}

GaussianProcess::GaussianProcess(Kernel kernel, double noise_variance, double prior_mean, std::size_t max_points)
    : kernel_(std::move(kernel)), noise_(noise_variance), mean_(prior_mean), cap_(max_points) {
  if (noise_ < 0.0) throw PreconditionError("noise variance must be >= 0");
  x_.resize(0, kernel_.dims());
  y_.resize(0);
}

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-6;

}  // namespace

void GaussianProcess::refactor() {
  const Eigen::Index n = x_.rows();
  if (n == 0) {
    chol_.resize(0, 0);
    alpha_.resize(0);
    jitter_ = 0.0;
    return;
  }
  const Matrix k = kernel_.gram(x_, x_);
  double jitter = 0.0;
  while (true) {
    Matrix a = k;
    a.diagonal().array() += noise_ + jitter;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
      chol_ = llt.matrixL();
      jitter_ = jitter;
      break;
    }
    if (jitter >= kJitterMax) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
      std::ostringstream os;
      os << "Gram matrix not positive definite after jitter " << kJitterMax << " (n=" << n
         << ", min eigenvalue=" << eig.eigenvalues().minCoeff() << ", max eigenvalue=" << eig.eigenvalues().maxCoeff()
         << ")";
      throw NumericalError(os.str());
    }
    jitter = jitter == 0.0 ? kJitterStart : jitter * 10.0;
  }
  alpha_ = chol_.triangularView<Eigen::Lower>().solve((y_.array() - mean_).matrix());
  chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
}

GaussianProcess GaussianProcess::condition(const Matrix& new_inputs, const Vector& new_targets) const {
  if (new_inputs.rows() != new_targets.size()) throw PreconditionError("condition: inputs/targets length mismatch");
  if (new_inputs.rows() == 0) return *this;
  if (new_inputs.cols() != kernel_.dims()) throw PreconditionError("condition: input dimension mismatch");

  GaussianProcess out = *this;
  const Eigen::Index n = x_.rows();
  const Eigen::Index m = new_inputs.rows();
  out.x_.conservativeResize(n + m, Eigen::NoChange);
  out.x_.bottomRows(m) = new_inputs;
  out.y_.conservativeResize(n + m);
  out.y_.tail(m) = new_targets;

  if (cap_ > 0 && static_cast<std::size_t>(n + m) > cap_) {
    const Eigen::Index keep = static_cast<Eigen::Index>(cap_);
    out.x_ = Matrix(out.x_.bottomRows(keep));
    out.y_ = Vector(out.y_.tail(keep));
    out.refactor();
    return out;
  }

  if (n == 0 || jitter_ > 0.0) {
    out.refactor();
    return out;
  }

  // Block extension of the existing factor: [L 0; B^T C].
  const Matrix k12 = kernel_.gram(x_, new_inputs);
  Matrix k22 = kernel_.gram(new_inputs, new_inputs);
  k22.diagonal().array() += noise_;
  const Matrix b = chol_.triangularView<Eigen::Lower>().solve(k12);
  const Matrix schur = k22 - b.transpose() * b;
  Eigen::LLT<Matrix> llt(schur);
  if (llt.info() != Eigen::Success) {
    out.refactor();
    return out;
  }
  out.chol_ = Matrix::Zero(n + m, n + m);
  out.chol_.topLeftCorner(n, n) = chol_;
  out.chol_.bottomLeftCorner(m, n) = b.transpose();
  out.chol_.bottomRightCorner(m, m) = llt.matrixL();
  out.alpha_ = out.chol_.triangularView<Eigen::Lower>().solve((out.y_.array() - mean_).matrix());
  out.chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(out.alpha_);
  return out;
}

Matrix GaussianProcess::solve_lower(const Matrix& k_train_query) const {
  return chol_.triangularView<Eigen::Lower>().solve(k_train_query);
}

Posterior GaussianProcess::posterior(const Matrix& query) const {
  if (query.rows() == 0) throw PreconditionError("posterior: empty query set");
  if (query.cols() != kernel_.dims()) throw PreconditionError("posterior: query dimension mismatch");
  Posterior p;
  p.covariance = kernel_.gram(query, query);
  if (x_.rows() == 0) {
    p.mean = Vector::Constant(query.rows(), mean_);
    return p;
  }
  const Matrix ks = kernel_.gram(x_, query);
  p.mean = (ks.transpose() * alpha_).array() + mean_;
  const Matrix v = solve_lower(ks);
  p.covariance.noalias() -= v.transpose() * v;
  // Symmetrize and clamp round-off on the diagonal.
  p.covariance = 0.5 * (p.covariance + p.covariance.transpose()).eval();
  p.covariance.diagonal() = p.covariance.diagonal().cwiseMax(0.0);
  return p;
}

PosteriorDiag GaussianProcess::posterior_diag(const Matrix& query) const {
  if (query.rows() == 0) throw PreconditionError("posterior: empty query set");
  if (query.cols() != kernel_.dims()) throw PreconditionError("posterior: query dimension mismatch");
  PosteriorDiag p;
  p.variance = Vector::Constant(query.rows(), kernel_.signal_variance);
  if (x_.rows() == 0) {
    p.mean = Vector::Constant(query.rows(), mean_);
    return p;
  }
  const Matrix ks = kernel_.gram(x_, query);
  p.mean = (ks.transpose() * alpha_).array() + mean_;
  const Matrix v = solve_lower(ks);
  p.variance -= v.colwise().squaredNorm().transpose();
  p.variance = p.variance.cwiseMax(0.0);
  return p;
}

double GaussianProcess::trace_of_posterior(const Matrix& query) const { return posterior_diag(query).variance.sum(); }

}  // namespace mripp
