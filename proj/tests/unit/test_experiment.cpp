#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fkpoisson/experiment.hpp"

using namespace fkp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  static std::mt19937_64 gen(std::random_device{}());
  fs::path p = fs::temp_directory_path() / ("fkp_test_" + tag + "_" + std::to_string(gen() % 1000000000));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

ExperimentConfig small_census(std::size_t samples, std::uint64_t seed) {
  ExperimentConfig c;
  c.sides = {6, 6};
  c.p = 0.55;
  c.q = 2.0;
  c.n = 2;
  c.burn_in = 20;
  c.samples = samples;
  c.seed = seed;
  return c;
}

Json census_of(const ExperimentConfig& c) {
  const fs::path dir = scratch("census");
  run_experiment(Command::kCensus, c, {dir, 1, 1});
  Json r = read_json(dir / "census.json");
  fs::remove_all(dir);
  return r;
}

}  // namespace

TEST_CASE("config parsing") {
  CHECK_THROWS_AS(parse_config(Json{{"sides", {4, 4}}, {"pp", 0.5}}), ConfigError);
  try {
    parse_config(Json{{"p", "high"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "p");
  }
  const ExperimentConfig c = parse_config(Json{{"sides", {3, 5}}, {"q", 2.5}, {"boundary", "wired"}});
  CHECK(c.dim() == 2);
  CHECK(c.q == 2.5);
  CHECK(parse_config(to_json(c)).sides == c.sides);
  CHECK_THROWS_AS(command_from_string("simulate"), ConfigError);
  for (Command cmd : {Command::kSample, Command::kCensus, Command::kChenStein, Command::kOracle,
                      Command::kSurgery, Command::kCoupling, Command::kWulff, Command::kDecay}) {
    CHECK(command_from_string(to_string(cmd)) == cmd);
  }
}

TEST_CASE("config hash ignores the seed") {
  ExperimentConfig a = small_census(10, 1), b = small_census(10, 99);
  CHECK(config_hash(a) == config_hash(b));
  b.p = 0.56;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("oracle subcommand on a single bond") {
  ExperimentConfig c;
  c.sides = {1, 2};
  c.p = 0.5;
  c.q = 2.0;
  const fs::path dir = scratch("oracle");
  const RunManifest m = run_experiment(Command::kOracle, c, {dir, 1, 1});
  const Json r = read_json(dir / "oracle.json");
  CHECK(r["bond_marginals"][0].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(m.hash_chain.size() == m.outputs.size() + 1);
  CHECK(m.hash_chain[0] == sha256_hex(m.config_hash));
  for (std::size_t i = 0; i < m.outputs.size(); ++i) {
    CHECK(sha256_hex(slurp(dir / m.outputs[i].name)) == m.outputs[i].sha256);
    CHECK(m.hash_chain[i + 1] == sha256_hex(m.hash_chain[i] + m.outputs[i].name + m.outputs[i].sha256));
  }
  fs::remove_all(dir);
}

TEST_CASE("artifacts are deterministic across thread counts") {
  const ExperimentConfig c = small_census(40, 7);
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_experiment(Command::kCensus, c, {a, 3, 1});
  run_experiment(Command::kCensus, c, {b, 3, 3});
  CHECK(slurp(a / "census.json") == slurp(b / "census.json"));
  CHECK(slurp(a / "census.jsonl") == slurp(b / "census.jsonl"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("failed validation writes nothing") {
  ExperimentConfig c = small_census(0, 1);
  const fs::path dir = scratch("zero");
  CHECK_THROWS_AS(run_experiment(Command::kCensus, c, {dir, 1, 1}), ConfigError);
  CHECK_FALSE(fs::exists(dir));
  c.samples = 10;
  CHECK_THROWS_AS(run_experiment(Command::kOracle, c, {dir, 2, 1}), ConfigError);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("merge") {
  CHECK_THROWS_AS(merge_reports({}), std::invalid_argument);
  const Json one = census_of(small_census(1, 3));
  const Json two = census_of(small_census(1, 4));
  const Json three = census_of(small_census(1, 5));

  SUBCASE("k single-sample reports pool like one k-sample accumulator") {
    const Json merged = merge_reports({one, two, three});
    CHECK(merged["counts"]["samples"] == 3);
    std::vector<std::uint64_t> seeds{replica_seed(3, 0), replica_seed(4, 0), replica_seed(5, 0)};
    std::sort(seeds.begin(), seeds.end());
    CHECK(merged["seeds"] == Json(seeds));
    CHECK(merged["config"]["seed"] == 3);
    const auto& h1 = one["counts"]["site_hits"];
    const auto& h2 = two["counts"]["site_hits"];
    const auto& h3 = three["counts"]["site_hits"];
    for (std::size_t s = 0; s < h1.size(); ++s) {
      CHECK(merged["counts"]["site_hits"][s].get<std::uint64_t>() ==
            h1[s].get<std::uint64_t>() + h2[s].get<std::uint64_t>() + h3[s].get<std::uint64_t>());
    }
    CHECK_FALSE(merged["estimates"].is_null());
  }
  SUBCASE("self merge doubles counts") {
    const Json big = census_of(small_census(30, 11));
    const Json twice = merge_reports({big, big});
    CHECK(twice["counts"]["samples"] == 60);
    CHECK(twice["counts"]["collisions"].get<std::uint64_t>() == 2 * big["counts"]["collisions"].get<std::uint64_t>());
    for (std::size_t s = 0; s < big["counts"]["site_hits"].size(); ++s) {
      CHECK(twice["counts"]["site_hits"][s].get<std::uint64_t>() == 2 * big["counts"]["site_hits"][s].get<std::uint64_t>());
    }
    CHECK(twice["estimates"]["px"].get<double>() == doctest::Approx(big["estimates"]["px"].get<double>()));
  }
  SUBCASE("commutative and associative") {
    const Json abc = merge_reports({one, two, three});
    CHECK(merge_reports({three, one, two}) == abc);
    CHECK(merge_reports({merge_reports({one, two}), three}) == abc);
    CHECK(merge_reports({one, merge_reports({two, three})}) == abc);
  }
  SUBCASE("mismatched configurations") {
    ExperimentConfig other = small_census(1, 3);
    other.p = 0.6;
    CHECK_THROWS_AS(merge_reports({one, census_of(other)}), std::invalid_argument);
    Json tampered = one;
    tampered["config_hash"] = std::string(64, '0');
    CHECK_THROWS_AS(merge_reports({tampered}), std::invalid_argument);
    CHECK_THROWS_AS(merge_reports({Json{{"kind", "oracle"}}}), std::invalid_argument);
  }
}
