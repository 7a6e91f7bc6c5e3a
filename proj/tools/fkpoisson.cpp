// Command-line front end: one subcommand per experiment kind plus merge.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fkpoisson/exact.hpp"
#include "fkpoisson/experiment.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitResource = 3;

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::size_t replicas = 1;
  std::size_t threads = 1;
};

int run(fkp::Command cmd, const RunArgs& args) {
  fkp::ExperimentConfig config = fkp::load_config(args.config);
  if (args.seed) config.seed = *args.seed;
  const fkp::RunManifest m =
      fkp::run_experiment(cmd, config, {args.out, args.replicas, args.threads});
  for (const fkp::OutputFile& f : m.outputs) {
    std::cout << (std::filesystem::path(args.out) / f.name).string() << '\n';
  }
  return 0;
}

int merge(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<fkp::Json> reports;
  for (const std::string& path : inputs) {
    std::ifstream in(path);
    if (!in) throw fkp::ConfigError("reports", "cannot open '" + path + "'");
    try {
      reports.push_back(fkp::Json::parse(in));
    } catch (const fkp::Json::parse_error& e) {
      throw fkp::ConfigError("reports", path + ": " + e.what());
    }
  }
  const fkp::Json merged = fkp::merge_reports(reports);
  std::ofstream os(out);
  os << merged.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write " + out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo and exact experiments for the random-cluster point process"};
  app.require_subcommand(1);

  RunArgs args;
  std::optional<fkp::Command> chosen;
  for (const char* name :
       {"sample", "census", "chenstein", "oracle", "surgery", "coupling", "wulff", "decay"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", args.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "master seed (overrides the config)");
    sub->add_option("--out", args.out, "output directory")->capture_default_str();
    sub->add_option("--replicas", args.replicas, "independent replicas")->capture_default_str();
    sub->add_option("--threads", args.threads, "worker threads")->capture_default_str();
    sub->callback([&chosen, name] { chosen = fkp::command_from_string(name); });
  }
  std::vector<std::string> inputs;
  std::string merged_out = "merged.json";
  CLI::App* merge_cmd = app.add_subcommand("merge", "pool census reports with a common config hash");
  merge_cmd->add_option("reports", inputs, "census.json files")->required();
  merge_cmd->add_option("--out", merged_out, "merged report path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (chosen) return run(*chosen, args);
    return merge(inputs, merged_out);
  } catch (const fkp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fkp::ResourceLimitError& e) {
    std::cerr << "resource limit: " << e.what() << '\n';
    return kExitResource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
