#include <doctest.h>

#include <cmath>
#include <functional>

#include "mripp/autodiff.hpp"
#include "mripp/random.hpp"

using namespace mripp;
using namespace mripp::ad;

namespace {

Tensor random_tensor(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) t(i, j) = rng.uniform(lo, hi);
  return t;
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Scalar loss = sum(f(params) .* W) for a fixed random W.
double loss_value(ParameterSet& ps, const Builder& f, const Tensor& w, bool backward) {
  Tape tape;
  std::vector<Var> leaves;
  for (Parameter* p : ps.all()) leaves.push_back(tape.param(*p));
  const Var out = f(tape, leaves);
  const Var loss = sum(mul(out, tape.constant(w)));
  if (backward) tape.backward(loss);
  return loss.scalar();
}

// Central differences at eps = 1e-5, relative tolerance 1e-4 (absolute
// floor for tiny gradients).
void check_gradients(ParameterSet& ps, const Builder& f, Rng& rng) {
  Tensor w;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (Parameter* p : ps.all()) leaves.push_back(tape.param(*p));
    const Var out = f(tape, leaves);
    w = random_tensor(rng, out.rows(), out.cols());
  }
  ps.zero_grad();
  loss_value(ps, f, w, true);
  const double eps = 1e-5;
  for (Parameter* p : ps.all()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + eps;
      const double up = loss_value(ps, f, w, false);
      p->value.data()[i] = orig - eps;
      const double down = loss_value(ps, f, w, false);
      p->value.data()[i] = orig;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = p->grad.data()[i];
      const double err = std::abs(numeric - analytic) / std::max(1e-3, std::abs(numeric) + std::abs(analytic));
      CHECK_MESSAGE(err < 1e-4, p->name, "[", i, "] numeric ", numeric, " analytic ", analytic);
    }
  }
}

}  // namespace

TEST_CASE("matmul matches a naive triple loop") {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(6));
    const auto k = static_cast<Eigen::Index>(1 + rng.below(6));
    const auto m = static_cast<Eigen::Index>(1 + rng.below(6));
    const Tensor a = random_tensor(rng, n, k);
    const Tensor b = random_tensor(rng, k, m);
    Tape tape;
    const Tensor got = matmul(tape.constant(a), tape.constant(b)).value();
    const Tensor got_nt = matmul_nt(tape.constant(a), tape.constant(b.transpose())).value();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        double s = 0.0;
        for (Eigen::Index q = 0; q < k; ++q) s += a(i, q) * b(q, j);
        CHECK(got(i, j) == doctest::Approx(s).epsilon(1e-12));
        CHECK(got_nt(i, j) == doctest::Approx(s).epsilon(1e-12));
      }
  }
}

TEST_CASE("shape mismatches raise ShapeError") {
  Tape tape;
  const Var a = tape.constant(Tensor::Zero(2, 3));
  const Var b = tape.constant(Tensor::Zero(2, 3));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, tape.constant(Tensor::Zero(3, 2))), ShapeError);
  CHECK_THROWS_AS(add_bias(a, tape.constant(Tensor::Zero(1, 2))), ShapeError);
  CHECK_THROWS_AS(softmax_masked(a, Mask{1, 0}), ShapeError);
}

TEST_CASE("elementwise and reduction ops pass finite-difference checks") {
  Rng rng(7);
  ParameterSet ps;
  ps.add("a", 3, 4).value = random_tensor(rng, 3, 4);
  ps.add("b", 3, 4).value = random_tensor(rng, 3, 4);
  ps.add("bias", 1, 4).value = random_tensor(rng, 1, 4);
  const std::vector<std::pair<std::string, Builder>> cases = {
      {"add", [](Tape&, const std::vector<Var>& v) { return v[0] + v[1]; }},
      {"sub", [](Tape&, const std::vector<Var>& v) { return v[0] - v[1]; }},
      {"mul", [](Tape&, const std::vector<Var>& v) { return mul(v[0], v[1]); }},
      {"add_bias", [](Tape&, const std::vector<Var>& v) { return add_bias(v[0], v[2]); }},
      {"scale", [](Tape&, const std::vector<Var>& v) { return 2.5 * v[0] + add_scalar(v[1], 3.0); }},
      {"relu", [](Tape&, const std::vector<Var>& v) { return relu(v[0]); }},
      {"tanh", [](Tape&, const std::vector<Var>& v) { return tanh(v[0]); }},
      {"exp", [](Tape&, const std::vector<Var>& v) { return exp(v[1]); }},
      {"square", [](Tape&, const std::vector<Var>& v) { return square(v[0]); }},
      {"minimum", [](Tape&, const std::vector<Var>& v) { return minimum(v[0], v[1]); }},
      {"clamp", [](Tape&, const std::vector<Var>& v) { return clamp(v[0], -0.5, 0.5); }},
      {"sum", [](Tape&, const std::vector<Var>& v) { return sum(v[0]); }},
      {"mean", [](Tape&, const std::vector<Var>& v) { return mean(mul(v[0], v[1])); }},
      {"mean_rows", [](Tape&, const std::vector<Var>& v) { return mean_rows(v[0]); }},
      {"gather", [](Tape&, const std::vector<Var>& v) { return gather(v[0], 2, 1); }},
      {"slice", [](Tape&, const std::vector<Var>& v) { return slice_cols(v[0], 1, 2); }},
      {"concat_cols", [](Tape&, const std::vector<Var>& v) { return concat_cols({v[0], v[1]}); }},
      {"concat_rows", [](Tape&, const std::vector<Var>& v) { return concat_rows({v[0], v[2]}); }},
      {"reuse", [](Tape&, const std::vector<Var>& v) { return mul(v[0], v[0]) + tanh(v[0]); }},
  };
  for (const auto& [name, f] : cases) {
    CAPTURE(name);
    check_gradients(ps, f, rng);
  }
}

TEST_CASE("matrix, softmax and normalisation ops pass finite-difference checks") {
  Rng rng(13);
  ParameterSet ps;
  ps.add("x", 4, 5).value = random_tensor(rng, 4, 5);
  ps.add("w", 5, 3).value = random_tensor(rng, 5, 3);
  ps.add("g", 1, 5).value = random_tensor(rng, 1, 5, 0.5, 1.5);
  ps.add("b", 1, 5).value = random_tensor(rng, 1, 5);
  const Mask mask{1, 0, 1, 1, 0};
  const std::vector<std::pair<std::string, Builder>> cases = {
      {"matmul", [](Tape&, const std::vector<Var>& v) { return matmul(v[0], v[1]); }},
      {"matmul_nt", [](Tape&, const std::vector<Var>& v) { return matmul_nt(v[0], v[0]); }},
      {"softmax", [](Tape&, const std::vector<Var>& v) { return softmax_masked(v[0]); }},
      {"softmax_masked", [&](Tape&, const std::vector<Var>& v) { return softmax_masked(v[0], mask); }},
      {"log_softmax", [&](Tape&, const std::vector<Var>& v) { return log_softmax_masked(v[0], mask); }},
      {"layer_norm", [](Tape&, const std::vector<Var>& v) { return layer_norm(v[0], v[2], v[3]); }},
      {"mlp", [](Tape&, const std::vector<Var>& v) { return tanh(matmul(layer_norm(v[0], v[2], v[3]), v[1])); }},
  };
  for (const auto& [name, f] : cases) {
    CAPTURE(name);
    check_gradients(ps, f, rng);
  }
}

TEST_CASE("masked softmax gives masked entries zero probability and zero gradient") {
  ParameterSet ps;
  Parameter& x = ps.add("x", 2, 4);
  x.value << 1.0, 2.0, 3.0, 4.0, -1.0, 0.0, 5.0, 2.0;
  const Mask mask{1, 0, 1, 0};
  Tape tape;
  const Var p = softmax_masked(tape.param(x), mask);
  const Var lp = log_softmax_masked(tape.param(x), mask);
  for (Eigen::Index r = 0; r < 2; ++r) {
    CHECK(p.value()(r, 1) == 0.0);
    CHECK(p.value()(r, 3) == 0.0);
    CHECK(p.value().row(r).sum() == doctest::Approx(1.0));
    CHECK(lp.value()(r, 1) == 0.0);
    CHECK(std::exp(lp.value()(r, 0)) == doctest::Approx(p.value()(r, 0)));
  }
  ps.zero_grad();
  tape.backward(sum(mul(p, tape.constant(Tensor::Constant(2, 4, 3.0)))) + sum(lp));
  CHECK(x.grad(0, 1) == 0.0);
  CHECK(x.grad(0, 3) == 0.0);
  CHECK(x.grad(1, 1) == 0.0);
  CHECK(x.grad(1, 3) == 0.0);
}

TEST_CASE("softmax is stable for large logits") {
  Tape tape;
  Tensor t(1, 3);
  t << 1000.0, 1001.0, -1000.0;
  const Tensor p = softmax_masked(tape.constant(t)).value();
  CHECK(p.allFinite());
  CHECK(p(0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("backward through a loss with no parameters raises DetachedGraphError") {
  Tape tape;
  const Var c = tape.constant(Tensor::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(sum(c)), DetachedGraphError);
}

TEST_CASE("backward on a non-scalar is a shape error") {
  ParameterSet ps;
  Parameter& p = ps.add("p", 2, 2);
  Tape tape;
  CHECK_THROWS_AS(tape.backward(tape.param(p)), ShapeError);
}

TEST_CASE("each op's backward runs at most once") {
  ParameterSet ps;
  Parameter& p = ps.add("p", 3, 3);
  p.value.setConstant(0.3);
  Tape tape;
  const Var x = tape.param(p);
  Var y = x;
  for (int i = 0; i < 10; ++i) y = tanh(y) + x;
  tape.backward(sum(y));
  CHECK(tape.backward_visits() <= tape.size());
}

TEST_CASE("gradients accumulate across tapes until zeroed") {
  ParameterSet ps;
  Parameter& p = ps.add("p", 1, 2);
  p.value << 1.0, 2.0;
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(sum(square(tape.param(p))));
  }
  CHECK(p.grad(0, 0) == doctest::Approx(4.0));
  CHECK(p.grad(0, 1) == doctest::Approx(8.0));
  ps.zero_grad();
  CHECK(p.grad.isZero());
}

TEST_CASE("parameter sets round-trip through JSON and copy deeply") {
  Rng rng(3);
  ParameterSet ps;
  ps.add("a", 2, 3).value = random_tensor(rng, 2, 3);
  ps.add("b", 1, 4).value = random_tensor(rng, 1, 4);
  ParameterSet other;
  other.add("a", 2, 3);
  other.add("b", 1, 4);
  other.load_json(ps.to_json());
  CHECK(other.at("a").value == ps.at("a").value);
  CHECK(other.at("b").value == ps.at("b").value);
  CHECK(ps.scalar_count() == 10);
  ParameterSet copy = ps;
  copy.at("a").value.setZero();
  CHECK_FALSE(ps.at("a").value.isZero());
  ParameterSet wrong;
  wrong.add("a", 3, 2);
  CHECK_THROWS(wrong.load_json(ps.to_json()));
}
