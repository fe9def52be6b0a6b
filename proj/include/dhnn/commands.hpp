#pragma once

#include <iosfwd>
#include <string>

#include "dhnn/config.hpp"
#include "dhnn/synthetic.hpp"

namespace dhnn::cli {

// Artifact locations inside a run's output directory.
struct PipelinePaths {
  std::string normalized_csv;
  std::string target_stats_csv;
  std::string ingest_meta;
  std::string snapshots;
  std::string generator_ckpt;
  std::string model_ckpt;
  std::string train_report;
  std::string metrics;
  std::string partitions_com;
  std::string partitions_att;
  std::string spectrum;
  std::string lock;
  std::string log;

  static PipelinePaths in(const std::string& output_dir);
};

// Each command reads its predecessors' artifacts from the output directory
// and overwrites its own deterministically. Failures throw; the CLI maps
// exception types to exit codes.
void cmd_ingest(const RunConfig& config);
void cmd_build(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_evaluate(const RunConfig& config);
void cmd_inspect(const std::string& snapshot_file, int index, std::ostream& out);
void cmd_synth(const SyntheticSpec& spec, const std::string& csv_path,
               const std::string& labels_path);

}  // namespace dhnn::cli
