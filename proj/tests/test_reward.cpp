#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "mripp/coordination.hpp"
#include "mripp/random.hpp"
#include "mripp/reward.hpp"

using namespace mripp;

namespace {

Action at(double x, double y, double z, int dir = 0) { return Action{Vec3(x, y, z), direction_from_index(dir)}; }

std::vector<Action> random_actions(Rng& rng, int n) {
  std::vector<Action> out;
  for (int i = 0; i < n; ++i) out.push_back(at(rng.uniform(), rng.uniform(), rng.uniform(), static_cast<int>(rng.below(4))));
  return out;
}

}  // namespace

TEST_CASE("zeta counts only targets never seen before") {
  TargetRegistry reg;
  SensorObservation a;
  a.visible_targets = {1, 2, 3};
  CHECK(zeta(a, reg, 0, 0) == 3);
  SensorObservation b;
  b.visible_targets = {2, 3, 4, 5};
  CHECK(zeta(b, reg, 1, 0) == 2);
  CHECK(zeta(b, reg, 2, 1) == 0);
  CHECK(reg.size() == 5);
  CHECK(reg.entries().at(4).robot == 1);
  CHECK(reg.entries().at(1).robot == 0);
}

TEST_CASE("zeta equals a set-difference oracle on random sequences") {
  Rng rng(12);
  TargetRegistry reg;
  std::vector<int> seen;
  for (int step = 0; step < 200; ++step) {
    SensorObservation o;
    const int k = static_cast<int>(rng.below(6));
    for (int i = 0; i < k; ++i) o.visible_targets.push_back(static_cast<int>(rng.below(40)));
    std::sort(o.visible_targets.begin(), o.visible_targets.end());
    o.visible_targets.erase(std::unique(o.visible_targets.begin(), o.visible_targets.end()), o.visible_targets.end());
    std::vector<int> fresh;
    std::set_difference(o.visible_targets.begin(), o.visible_targets.end(), seen.begin(), seen.end(),
                        std::back_inserter(fresh));
    CHECK(zeta(o, reg, 0, step) == static_cast<int>(fresh.size()));
    seen.insert(seen.end(), fresh.begin(), fresh.end());
    std::sort(seen.begin(), seen.end());
  }
}

TEST_CASE("exploration reward examples") {
  const GaussianProcess prior = make_utility_gp(GpParams{});
  const std::vector<Action> probe{at(0.5, 0.5, 0.5)};
  const Matrix q = utility_inputs(probe);
  SUBCASE("no new data gives zero") { CHECK(exploration_reward(prior, prior, q) == 0.0); }
  SUBCASE("observing the probe point itself removes nearly all variance") {
    const GaussianProcess post = prior.condition(q, Vector::Zero(1));
    CHECK(exploration_reward(prior, post, q) == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("far-away data changes nothing measurable") {
    const GaussianProcess post = prior.condition(utility_inputs(std::vector<Action>{at(50, 50, 50)}), Vector::Zero(1));
    CHECK(exploration_reward(prior, post, q) < 1e-12);
  }
  SUBCASE("single-point closed form") {
    // With prior variance s and one observation at kernel value k:
    // posterior variance s - k^2 / (s + noise).
    const Action obs = at(0.6, 0.5, 0.5);
    const GaussianProcess post = prior.condition(utility_inputs(std::vector<Action>{obs}), Vector::Zero(1));
    const double k = std::exp(-0.1 / 0.15);
    const double expected = (k * k / (1.0 + 1e-4)) / 1.0;
    CHECK(exploration_reward(prior, post, q) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("exploration reward stays in the unit interval") {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    GaussianProcess before = make_utility_gp(GpParams{});
    before = before.condition(utility_inputs(random_actions(rng, 5)), Vector::Zero(5));
    const GaussianProcess after = before.condition(utility_inputs(random_actions(rng, 2)), Vector::Zero(2));
    const double r = exploration_reward(before, after, utility_inputs(random_actions(rng, 10)));
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("reward composition is the weighted sum") {
  const RewardBreakdown r = RewardBreakdown::compose(0.5, 0.1, 0.25, RewardParams{});
  CHECK(r.total == doctest::Approx(20.0 * 0.5 + 0.02 * 0.1 + 1.0 * 0.25));
  RewardParams p;
  p.gamma = 0.0;
  CHECK(RewardBreakdown::compose(0.5, 0.1, 0.25, p).total == doctest::Approx(10.002));
}

TEST_CASE("step rewards do not depend on record order") {
  Rng rng(21);
  const GpParams gp;
  GaussianProcess global = make_utility_gp(gp).condition(utility_inputs(random_actions(rng, 6)), Vector::Zero(6));
  const GaussianProcess comm_before = make_comm_gp(gp);
  const GaussianProcess comm_after = comm_before.condition(Matrix::Constant(1, 3, 0.5), Vector::Ones(1));
  std::vector<RobotStepRecord> recs;
  for (int i = 0; i < 4; ++i) {
    RobotStepRecord r;
    r.robot = i;
    r.executed = random_actions(rng, 1)[0];
    r.probe = random_actions(rng, 8);
    r.new_targets = static_cast<int>(rng.below(4));
    r.comm_before = &comm_before;
    r.comm_after = &comm_after;
    recs.push_back(r);
  }
  const auto base = step_rewards(global, recs, RewardParams{});
  const GaussianProcess merged = merge_step(global, recs, RewardParams{});
  std::vector<std::size_t> perm{3, 1, 0, 2};
  std::vector<RobotStepRecord> shuffled;
  for (auto i : perm) shuffled.push_back(recs[i]);
  const auto again = step_rewards(global, shuffled, RewardParams{});
  for (std::size_t k = 0; k < perm.size(); ++k) {
    CHECK(again[k].total == doctest::Approx(base[perm[k]].total).epsilon(1e-12));
    CHECK(again[k].r_u == doctest::Approx(recs[perm[k]].new_targets / 50.0));
  }
  const GaussianProcess merged2 = merge_step(global, shuffled, RewardParams{});
  const Matrix q = utility_inputs(random_actions(rng, 10));
  CHECK(merged.trace_of_posterior(q) == doctest::Approx(merged2.trace_of_posterior(q)).epsilon(1e-9));
  CHECK((merged.posterior_diag(q).mean - merged2.posterior_diag(q).mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(merged.size() == global.size() + 4);
}

TEST_CASE("a robot without a probe set earns only the utility term") {
  RobotStepRecord r;
  r.new_targets = 5;
  const auto out = step_rewards(make_utility_gp(GpParams{}), std::vector<RobotStepRecord>{r}, RewardParams{});
  CHECK(out[0].r_e == 0.0);
  CHECK(out[0].r_c == 0.0);
  CHECK(out[0].total == doctest::Approx(0.02 * 0.1));
}
