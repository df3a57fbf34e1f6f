// dml: train, evaluate, sweep and benchmark embedding losses on synthetic data.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dml/commands.hpp"
#include "dml/errors.hpp"

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dml::IoError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep metric learning losses on synthetic clusters"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "runs";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;

  const std::vector<std::pair<dml::Command, const char*>> commands{
      {dml::Command::train, "Train one model and write metrics.csv and a checkpoint"},
      {dml::Command::eval, "Evaluate eval.checkpoint and write report.csv"},
      {dml::Command::sweep, "Sweep one hyperparameter axis over several seeds"},
      {dml::Command::bench, "Convergence benchmark across bench.methods"},
      {dml::Command::gradcheck, "Finite-difference gradient check of every loss"},
  };
  for (const auto& [command, help] : commands) {
    CLI::App* sub = app.add_subcommand(std::string(dml::to_string(command)), help);
    sub->add_option("--config", config_path, "Key-value config file");
    sub->add_option("--out", out_dir, "Output root; the run directory is <out>/<tag>-seed<seed>")
        ->capture_default_str();
    sub->add_option("--seed", seed, "Overrides run.seed");
    sub->add_option("--set", sets, "key=value override, repeatable")->take_all();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const std::string text = config_path.empty() ? std::string() : read_text(config_path);
    if (seed) sets.push_back("run.seed=" + std::to_string(*seed));
    const dml::RunConfig config = dml::parse_config(text, sets);
    const dml::Command command = dml::parse_command(app.get_subcommands().front()->get_name());
    return dml::dispatch(command, config, out_dir, std::cout);
  } catch (const dml::Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
  }
  return 1;
}
