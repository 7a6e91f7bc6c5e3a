#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fkpoisson/census.hpp"
#include "fkpoisson/fk.hpp"
#include "fkpoisson/lattice.hpp"

namespace fkp {

using Json = nlohmann::json;

/// Invalid configuration; `field` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Command { kSample, kCensus, kChenStein, kOracle, kSurgery, kCoupling, kWulff, kDecay };

std::string to_string(Command c);
/// Throws ConfigError for unknown names.
Command command_from_string(const std::string& s);
std::string to_string(PointVariant v);
PointVariant variant_from_string(const std::string& s);

/// Flat key set; see README "Configuration keys". Defaults are the values
/// below. Box coordinates run from 0 to side - 1 on every axis.
struct ExperimentConfig {
  // model
  std::vector<int> sides{16, 16};
  double p = 0.5;
  double q = 1.0;
  std::string boundary = "free";  ///< free | wired | partition
  std::vector<std::vector<std::vector<int>>> boundary_classes;

  // point process
  std::size_t n = 2;
  double K = 5.0;
  std::optional<int> fattening;
  double delta = 0.1;
  Finiteness finiteness = Finiteness::kAvoidsBoundary;
  PointVariant variant = PointVariant::kPlain;

  // sampling, per replica
  std::size_t burn_in = 0;
  std::size_t thinning = 1;
  std::size_t samples = 1000;
  std::uint64_t seed = 1;

  // chenstein
  std::optional<int> half_width;
  std::string b3_method = "auto";  ///< auto | exact | stratified | skip
  std::uint64_t min_occupancy = 100;
  std::size_t bootstrap = 1000;

  // coupling
  std::vector<int> gamma_sides{9, 7, 5, 3};
  std::string eta = "wired";
  std::string xi = "free";
  std::optional<std::size_t> event_bond;
  std::vector<int> separations{1, 2, 3, 4, 5};
  std::optional<std::vector<int>> mixing_first;

  // surgery
  std::size_t instances = 1000;
  std::size_t antecedent_instances = 20;
  std::vector<int> antecedent_sides{5, 5};
  std::size_t antecedent_n = 2;
  double antecedent_K = 1.0;
  double antecedent_generation_K = 3.0;
  Finiteness antecedent_finiteness = Finiteness::kAllFinite;
  std::uint64_t antecedent_cap = std::uint64_t{1} << 26;

  // wulff
  std::string shape = "ball";  ///< ball | file
  double shape_radius = 0.5;
  std::string shape_file;
  double raster = 1.0 / 16.0;
  std::optional<double> theta;
  std::optional<double> cluster_scale;

  // decay
  std::vector<std::size_t> decay_n{2, 4, 8, 16};
  std::vector<int> decay_sides{32, 32, 48, 64};
  double window_fraction = 0.5;

  int dim() const { return static_cast<int>(sides.size()); }
  LatticeBox box() const { return LatticeBox::with_sides(sides); }
  FKParams params() const;
  SamplingPlan plan() const;
};

/// Parses a flat JSON object. Unknown keys, wrong types and out-of-range
/// values raise ConfigError naming the key.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
Json to_json(const ExperimentConfig& c);

/// Checks the keys a subcommand relies on (sampling budget, box size caps).
void validate(const ExperimentConfig& c, Command cmd, std::size_t replicas);

std::string sha256_hex(const std::string& bytes);
/// SHA-256 of the canonical config JSON with the seed removed.
std::string config_hash(const ExperimentConfig& c);

struct OutputFile {
  std::string name;
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string version;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> replica_seeds;
  std::string started;
  std::string finished;
  std::vector<OutputFile> outputs;
  /// h_0 = sha(config_hash), h_i = sha(h_{i-1} + name_i + sha_i).
  std::vector<std::string> hash_chain;
};

Json to_json(const RunManifest& m);

struct RunOptions {
  std::filesystem::path out_dir = ".";
  std::size_t replicas = 1;
  std::size_t threads = 1;
};

/// Seed of replica r.
std::uint64_t replica_seed(std::uint64_t master, std::size_t replica);

/// Validates, runs the subcommand, writes its artifacts and manifest.json
/// into out_dir. Nothing is written when validation fails.
RunManifest run_experiment(Command cmd, const ExperimentConfig& config, const RunOptions& opts);

/// Pools census reports that share a config hash. Throws std::invalid_argument
/// for an empty list, a non-census report or mismatched hashes.
Json merge_reports(const std::vector<Json>& reports);

/// Census report from an accumulator; also used by merge.
Json census_report(const ExperimentConfig& config, const PointFieldAccumulator& acc,
                   const std::map<std::uint64_t, std::uint64_t>& size_histogram,
                   const std::vector<std::uint64_t>& seeds);

}  // namespace fkp
