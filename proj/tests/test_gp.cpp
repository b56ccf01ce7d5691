#include <doctest.h>

#include <cmath>

#include "mripp/errors.hpp"
#include "mripp/gp.hpp"
#include "mripp/random.hpp"

using namespace mripp;

namespace {

Matrix random_points(Rng& rng, int n, int d) {
  Matrix x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.uniform();
  return x;
}

// Textbook posterior with an explicit inverse.
Posterior dense_posterior(const Kernel& k, double noise, double mu, const Matrix& x, const Vector& y, const Matrix& q) {
  const Matrix kxx = k.gram(x, x) + noise * Matrix::Identity(x.rows(), x.rows());
  const Matrix inv = kxx.inverse();
  const Matrix kqx = k.gram(q, x);
  Posterior p;
  p.mean = Vector::Constant(q.rows(), mu) + kqx * inv * (y - Vector::Constant(y.size(), mu));
  p.covariance = k.gram(q, q) - kqx * inv * kqx.transpose();
  return p;
}

}  // namespace

TEST_CASE("Matern one-half kernel values") {
  const Kernel k(Vector::Constant(2, 0.5), 2.0);
  Vector a(2), b(2);
  a << 0.0, 0.0;
  b << 0.3, 0.4;
  CHECK(k(a, a) == doctest::Approx(2.0));
  CHECK(k(a, b) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(k(a, b) == doctest::Approx(k(b, a)));
}

TEST_CASE("the prior is returned with no data") {
  const GaussianProcess gp(Kernel(Vector::Constant(3, 0.2), 1.5), 1e-4, 0.25);
  Rng rng(1);
  const Matrix q = random_points(rng, 5, 3);
  const Posterior p = gp.posterior(q);
  for (int i = 0; i < 5; ++i) {
    CHECK(p.mean[i] == doctest::Approx(0.25));
    CHECK(p.covariance(i, i) == doctest::Approx(1.5));
  }
  CHECK(gp.trace_of_posterior(q) == doctest::Approx(7.5));
}

TEST_CASE("posterior matches a dense explicit-inverse oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = trial % 2 == 0 ? 5 : 3;
    const Kernel k(Vector::Constant(d, rng.uniform(0.1, 0.5)), rng.uniform(0.5, 2.0));
    const double noise = 1e-3;
    const Matrix x = random_points(rng, 12, d);
    Vector y(12);
    for (int i = 0; i < 12; ++i) y[i] = rng.uniform(-1, 1);
    const Matrix q = random_points(rng, 7, d);
    GaussianProcess gp(k, noise, 0.1);
    // Condition in two batches to exercise the incremental update.
    gp = gp.condition(x.topRows(5), y.head(5)).condition(x.bottomRows(7), y.tail(7));
    const Posterior got = gp.posterior(q);
    const Posterior want = dense_posterior(k, noise, 0.1, x, y, q);
    CHECK((got.mean - want.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((got.covariance - want.covariance).cwiseAbs().maxCoeff() < 1e-8);
    const PosteriorDiag diag = gp.posterior_diag(q);
    CHECK((diag.variance - want.covariance.diagonal()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(gp.trace_of_posterior(q) == doctest::Approx(want.covariance.trace()).epsilon(1e-9));
  }
}

TEST_CASE("conditioning never increases posterior variance") {
  Rng rng(5);
  GaussianProcess gp(Kernel(Vector::Constant(3, 0.2), 1.0), 1e-4, 0.0);
  const Matrix q = random_points(rng, 20, 3);
  Vector last = gp.posterior_diag(q).variance;
  for (int step = 0; step < 15; ++step) {
    gp = gp.condition(random_points(rng, 1, 3), Vector::Constant(1, rng.uniform()));
    const Vector now = gp.posterior_diag(q).variance;
    CHECK((now.array() <= last.array() + 1e-12).all());
    CHECK((now.array() >= 0.0).all());
    last = now;
  }
}

TEST_CASE("condition leaves the original process untouched") {
  const GaussianProcess gp(Kernel(Vector::Constant(3, 0.2), 1.0), 1e-4, 0.0);
  const GaussianProcess next = gp.condition(Matrix::Zero(1, 3), Vector::Ones(1));
  CHECK(gp.size() == 0);
  CHECK(next.size() == 1);
}

TEST_CASE("a point cap keeps only the most recent inputs") {
  Rng rng(9);
  GaussianProcess gp(Kernel(Vector::Constant(3, 0.3), 1.0), 1e-3, 0.0, 4);
  Matrix all = random_points(rng, 7, 3);
  Vector y(7);
  for (int i = 0; i < 7; ++i) y[i] = i;
  for (int i = 0; i < 7; ++i) gp = gp.condition(all.row(i), y.segment(i, 1));
  CHECK(gp.size() == 4);
  CHECK(gp.inputs().isApprox(all.bottomRows(4)));
  const Matrix q = random_points(rng, 3, 3);
  const Posterior want = dense_posterior(gp.kernel(), 1e-3, 0.0, all.bottomRows(4), y.tail(4), q);
  CHECK((gp.posterior(q).mean - want.mean).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("repeated identical inputs stay numerically usable") {
  GaussianProcess gp(Kernel(Vector::Constant(3, 0.2), 1.0), 0.0, 0.0);
  const Matrix x = Matrix::Constant(30, 3, 0.5);
  gp = gp.condition(x, Vector::Ones(30));
  const PosteriorDiag p = gp.posterior_diag(Matrix::Constant(1, 3, 0.5));
  CHECK(std::isfinite(p.mean[0]));
  CHECK(p.mean[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(p.variance[0] >= 0.0);
}

TEST_CASE("bad shapes are precondition errors") {
  const GaussianProcess gp(Kernel(Vector::Constant(3, 0.2), 1.0), 1e-4, 0.0);
  CHECK_THROWS_AS(gp.condition(Matrix::Zero(2, 2), Vector::Zero(2)), PreconditionError);
  CHECK_THROWS_AS(gp.condition(Matrix::Zero(2, 3), Vector::Zero(3)), PreconditionError);
  CHECK_THROWS_AS(gp.posterior(Matrix::Zero(1, 5)), PreconditionError);
}

TEST_CASE("noise-free conditioning interpolates the observations") {
  Rng rng(21);
  GaussianProcess gp(Kernel(Vector::Constant(3, 0.3), 1.3), 0.0, 0.0);
  const Matrix x = random_points(rng, 3, 3);
  Vector y(3);
  y << 0.2, -0.7, 1.1;
  gp = gp.condition(x, y);
  const PosteriorDiag p = gp.posterior_diag(x);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(p.mean[i] - y[i]) < 1e-8);
    CHECK(std::abs(p.variance[i]) < 1e-8);
  }
  // A conditioned point drops out of the trace.
  const Matrix q = random_points(rng, 4, 3);
  Matrix with(5, 3);
  with << q, x.row(1);
  CHECK(gp.trace_of_posterior(with) == doctest::Approx(gp.trace_of_posterior(q)).epsilon(1e-9));
}

TEST_CASE("conditioning on nothing changes nothing") {
  Rng rng(22);
  GaussianProcess gp(Kernel(Vector::Constant(3, 0.3), 1.0), 1e-4, 0.0);
  gp = gp.condition(random_points(rng, 4, 3), Vector::Ones(4));
  const GaussianProcess same = gp.condition(Matrix(0, 3), Vector(0));
  const Matrix q = random_points(rng, 6, 3);
  CHECK((same.posterior(q).mean - gp.posterior(q).mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((same.posterior(q).covariance - gp.posterior(q).covariance).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one-at-a-time conditioning equals a batch") {
  Rng rng(23);
  const GaussianProcess prior(Kernel(Vector::Constant(4, 0.25), 0.8), 1e-3, 0.3);
  const Matrix x = random_points(rng, 5, 4);
  Vector y(5);
  for (int i = 0; i < 5; ++i) y[i] = rng.uniform(-1, 1);
  GaussianProcess seq = prior;
  for (int i = 0; i < 5; ++i) seq = seq.condition(x.row(i), y.segment(i, 1));
  const GaussianProcess batch = prior.condition(x, y);
  const Matrix q = random_points(rng, 6, 4);
  CHECK((seq.posterior(q).mean - batch.posterior(q).mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((seq.posterior(q).covariance - batch.posterior(q).covariance).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("a duplicate input with observation noise is well posed") {
  const Kernel k(Vector::Constant(3, 0.2), 1.0);
  GaussianProcess gp(k, 1e-2, 0.0);
  Matrix x(2, 3);
  x << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5;
  Vector y(2);
  y << 1.0, 0.0;
  gp = gp.condition(x, y);
  const Matrix q = Matrix::Constant(1, 3, 0.5);
  const Posterior want = dense_posterior(k, 1e-2, 0.0, x, y, q);
  CHECK(gp.posterior(q).mean[0] == doctest::Approx(want.mean[0]).epsilon(1e-10));
  CHECK(gp.posterior(q).covariance(0, 0) == doctest::Approx(want.covariance(0, 0)).epsilon(1e-10));
}
