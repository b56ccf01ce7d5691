#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "mripp/bench.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("mripp_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + MRIPP_CLI_PATH + "\" " + args + " > \"" +
                          (scratch() / "stdout.txt").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const std::string& name, const std::string& body) {
  const fs::path p = scratch() / name;
  mripp::write_text_file(p.string(), body);
  return p.string();
}

std::string small_config() {
  return config("small.yaml", "profile: tiny\nevaluation:\n  environments: 2\n  trials_per_environment: 2\n"
                              "  planners: [random, greedy]\nscale:\n  robots: [4]\n  world_scales: [2]\n"
                              "  trials: 2\n");
}

std::string out(const std::string& name) { return (scratch() / name).string(); }

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run("--help") == 0);
  CHECK(run("evaluate --no-such-flag") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("evaluate --config " + config("bad.yaml", "profile: tiny\nworld:\n  colour: red\n")) == 2);
  CHECK(mripp::read_text_file(out("stdout.txt")).find("line 3") != std::string::npos);
  CHECK(run("evaluate --config /nonexistent.yaml") == 2);
  CHECK(run("evaluate --config " + small_config() + " --planner policy --out-dir " + out("p")) == 2);
  CHECK(run("evaluate --config " + small_config() + " --planner policy --checkpoint " + out("missing.json") +
            " --out-dir " + out("p")) == 1);
  CHECK(run("replay --trace " + out("missing.jsonl")) == 1);
}

TEST_CASE("generate writes a world document") {
  REQUIRE(run("generate --config " + small_config() + " --seed 5 --out " + out("world.json")) == 0);
  const std::string w = mripp::read_text_file(out("world.json"));
  CHECK(w.find("\"targets\"") != std::string::npos);
  REQUIRE(run("generate --config " + small_config() + " --seed 5 --out " + out("world2.json")) == 0);
  CHECK(mripp::read_text_file(out("world2.json")) == w);
}

TEST_CASE("evaluate and scale are byte-identical on rerun") {
  const std::string cfg = small_config();
  REQUIRE(run("evaluate --config " + cfg + " --out-dir " + out("e1") + " --parallel 1") == 0);
  REQUIRE(run("evaluate --config " + cfg + " --out-dir " + out("e2") + " --parallel 2") == 0);
  for (const char* f : {"results.csv", "summary.csv", "curves.csv"})
    CHECK(mripp::read_text_file(out("e1") + "/" + f) == mripp::read_text_file(out("e2") + "/" + f));
  REQUIRE(run("scale --config " + cfg + " --planner random --out-dir " + out("s1")) == 0);
  REQUIRE(run("scale --config " + cfg + " --planner random", "MRIPP_OUT_DIR=" + out("s2") + " MRIPP_PARALLEL=2") == 0);
  CHECK(fs::exists(out("s2") + "/scale_results.csv"));
  for (const char* f : {"scale_results.csv", "scale_summary.csv"})
    CHECK(mripp::read_text_file(out("s1") + "/" + f) == mripp::read_text_file(out("s2") + "/" + f));
}

TEST_CASE("traces replay identically") {
  const std::string cfg = small_config();
  REQUIRE(run("evaluate --config " + cfg + " --planner greedy --traces --out-dir " + out("t")) == 0);
  const fs::path trace = out("t") + "/traces/greedy_0_0.jsonl";
  REQUIRE(fs::exists(trace));
  CHECK(run("replay --trace " + trace.string()) == 0);
  std::string body = mripp::read_text_file(trace.string());
  const auto pos = body.find("\"zeta\":");
  REQUIRE(pos != std::string::npos);
  body.insert(pos + 7, "7");
  mripp::write_text_file(out("tampered.jsonl"), body);
  CHECK(run("replay --trace " + out("tampered.jsonl")) == 1);
}

TEST_CASE("train writes a log and resumable checkpoints") {
  const std::string cfg = config("train.yaml", "profile: tiny\nmodel:\n  embed_dim: 8\n  encoder_layers: 1\n"
                                               "  heads: 2\ntraining:\n  parallel_envs: 2\n  epochs: 1\n"
                                               "  total_interactions: 60\n  checkpoint_every: 1\n");
  REQUIRE(run("train --config " + cfg + " --out-dir " + out("tr")) == 0);
  CHECK(fs::exists(out("tr") + "/training.csv"));
  CHECK(fs::exists(out("tr") + "/checkpoint_final.json"));
  CHECK(fs::exists(out("tr") + "/checkpoint_1.json"));
  CHECK(run("train --config " + cfg + " --resume " + out("tr") + "/checkpoint_1.json --out-dir " + out("tr2")) == 0);
  CHECK(mripp::read_text_file(out("tr") + "/checkpoint_final.json") ==
        mripp::read_text_file(out("tr2") + "/checkpoint_final.json"));
  const std::string ev = config("ev.yaml", "profile: tiny\nmodel:\n  embed_dim: 8\n  encoder_layers: 1\n  heads: 2\n"
                                           "evaluation:\n  environments: 1\n  trials_per_environment: 1\n");
  CHECK(run("evaluate --config " + ev + " --planner policy --checkpoint " + out("tr") +
            "/checkpoint_final.json --out-dir " + out("pe")) == 0);
  // A model shape that does not match the checkpoint is a config error.
  CHECK(run("evaluate --config " + small_config() + " --planner policy --checkpoint " + out("tr") +
            "/checkpoint_final.json --out-dir " + out("pe")) == 2);
}
