#include <doctest.h>

#include <set>
#include <sstream>

#include "mripp/bench.hpp"
#include "mripp/config.hpp"

using namespace mripp;

namespace {

ExperimentConfig small() {
  ExperimentConfig c = profile_defaults("tiny");
  c.evaluation.environments = 2;
  c.evaluation.trials_per_environment = 2;
  c.evaluation.planners = {PlannerKind::Random, PlannerKind::Greedy};
  c.scale.robots = {4};
  c.scale.world_scales = {2.0};
  c.scale.trials = 2;
  return c;
}

int data_lines(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  int n = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++n;
  return n - 1;
}

}  // namespace

TEST_CASE("evaluation specs share worlds and seeds across planners") {
  const ExperimentConfig c = small();
  const auto specs = evaluation_specs(c);
  REQUIRE(specs.size() == 8);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(specs[i].planner == PlannerKind::Random);
    CHECK(specs[i + 4].planner == PlannerKind::Greedy);
    CHECK(specs[i].episode.world.seed == specs[i + 4].episode.world.seed);
    CHECK(specs[i].episode.seed == specs[i + 4].episode.seed);
    CHECK(specs[i].episode.world.placement == BuildingPlacement::Random);
  }
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 4; ++i) seeds.insert(specs[i].episode.seed);
  CHECK(seeds.size() == 4);
  CHECK(specs[0].episode.world.seed == specs[1].episode.world.seed);
  CHECK(specs[0].episode.world.seed != specs[2].episode.world.seed);
}

TEST_CASE("scale specs include the reference robot count and keep the per-robot budget") {
  const ExperimentConfig c = small();
  const auto specs = scale_specs(c, PlannerKind::Random);
  std::set<int> counts;
  for (const auto& s : specs) {
    counts.insert(s.episode.robots);
    CHECK(s.episode.total_budget / s.episode.robots == doctest::Approx(10.0 / 3.0));
    CHECK(s.episode.world.world_scale == 2.0);
  }
  CHECK(counts == std::set<int>{3, 4});
  CHECK(specs.size() == 4);
}

TEST_CASE("reports are deterministic and carry provenance") {
  const ExperimentConfig c = small();
  const std::string hash = config_hash(c);
  const auto a = run_trials(evaluation_specs(c), nullptr, 1);
  const auto b = run_trials(evaluation_specs(c), nullptr, 2);
  CHECK(results_csv(hash, a) == results_csv(hash, b));
  CHECK(summary_csv(hash, summarize(a)) == summary_csv(hash, summarize(b)));
  CHECK(curves_csv(hash, a) == curves_csv(hash, b));
  const std::string prov = provenance_line(hash);
  CHECK(prov.rfind("# config_hash=" + hash, 0) == 0);
  CHECK(prov.find(kCodeVersion) != std::string::npos);
  for (const std::string& csv : {results_csv(hash, a), summary_csv(hash, summarize(a)), curves_csv(hash, a),
                                 timing_csv(hash, a)})
    CHECK(csv.rfind(prov, 0) == 0);
  CHECK(data_lines(results_csv(hash, a)) == 8);
  const auto rows = summarize(a);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].planner == "random");
  CHECK(rows[0].trials == 4);
  CHECK(rows[1].trials == 4);
}

TEST_CASE("a trial that throws is reported with its index") {
  ExperimentConfig c = small();
  auto specs = evaluation_specs(c);
  specs[1].episode.robots = 0;
  CHECK_THROWS_WITH(run_trials(specs, nullptr, 1), doctest::Contains("job 1"));
}
