#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "dhnn/commands.hpp"

namespace {

constexpr int kExitConfig = 2;   // bad usage, config validation
constexpr int kExitMissing = 3;  // missing file or stage artifact
constexpr int kExitData = 4;     // malformed or inconsistent data
constexpr int kExitNumeric = 5;  // numeric abort (non-finite loss, solver failure)

dhnn::cli::RunConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
  std::ifstream in(path);
  if (!in) throw dhnn::MissingInputError("cannot open config file: " + path);
  auto kv = dhnn::cli::parse_config_kv(in, path);
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw dhnn::ConfigError("--set expects section.key=value, got '" + s + "'");
    }
    kv[dhnn::trim(s.substr(0, eq))] = dhnn::trim(s.substr(eq + 1));
  }
  return dhnn::cli::run_config_from_kv(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dhnn: dynamic-hypergraph forecasting pipeline\n"
      "Stages write artifacts into the configured output directory;\n"
      "later stages read them back, so run ingest -> build -> train -> evaluate.\n"
      "Exit codes: 0 ok, 2 config/usage, 3 missing input, 4 bad data, 5 numeric abort."};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "run configuration file")->required();
    cmd->add_option("--set", overrides, "override a config key, e.g. --set model.seed=7");
  };

  CLI::App* ingest = app.add_subcommand("ingest", "load, clean, normalize the dataset");
  add_config_opts(ingest);
  CLI::App* build = app.add_subcommand("build", "construct hypergraph snapshots per window");
  add_config_opts(build);
  CLI::App* train = app.add_subcommand("train", "train the model on built snapshots");
  add_config_opts(train);
  CLI::App* evaluate = app.add_subcommand("evaluate", "score the trained model on the test split");
  add_config_opts(evaluate);

  std::string inspect_file;
  int inspect_index = 0;
  CLI::App* inspect = app.add_subcommand("inspect", "print one snapshot from an archive");
  inspect->add_option("file", inspect_file, "snapshot archive")->required();
  inspect->add_option("index", inspect_index, "snapshot index (0-based)")->required();

  dhnn::cli::SyntheticSpec spec;
  std::string synth_csv = "synthetic.csv";
  std::string synth_labels = "synthetic_labels.txt";
  CLI::App* synth = app.add_subcommand("synth", "generate a community-structured dataset");
  synth->add_option("--communities", spec.n_communities, "number of planted communities");
  synth->add_option("--per-community", spec.series_per_community, "series per community");
  synth->add_option("--length", spec.length, "observations per series");
  synth->add_option("--noise", spec.noise, "idiosyncratic noise level");
  synth->add_option("--phi", spec.ar_coefficient, "AR(1) coefficient of the latent factors");
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--out", synth_csv, "output CSV path");
  synth->add_option("--labels", synth_labels, "planted label sidecar path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) dhnn::cli::cmd_ingest(load_config(config_path, overrides));
    if (build->parsed()) dhnn::cli::cmd_build(load_config(config_path, overrides));
    if (train->parsed()) dhnn::cli::cmd_train(load_config(config_path, overrides));
    if (evaluate->parsed()) dhnn::cli::cmd_evaluate(load_config(config_path, overrides));
    if (inspect->parsed()) dhnn::cli::cmd_inspect(inspect_file, inspect_index, std::cout);
    if (synth->parsed()) dhnn::cli::cmd_synth(spec, synth_csv, synth_labels);
  } catch (const dhnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dhnn::MissingInputError& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return kExitMissing;
  } catch (const dhnn::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const dhnn::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
