#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "dhnn/ingest.hpp"
#include "dhnn/model.hpp"

namespace dhnn::cli {

enum class MetricsScale { kNormalized, kRaw };

// Everything a pipeline run needs, parsed from a sectioned key = value file.
struct RunConfig {
  // [data]
  std::string dataset_path;
  std::string target_column;
  char delimiter = ',';
  bool has_header = true;
  bool log_returns = false;
  int norm_window_w = 0;  // 0: use window_m
  // [model]
  model::ModelConfig model;
  // [run]
  std::string output_dir = "out";
  MetricsScale metrics_on = MetricsScale::kNormalized;
  bool dump_spectrum = false;

  int effective_norm_window() const { return norm_window_w > 0 ? norm_window_w : model.window_m; }
  void validate() const;
};

// Flat "section.key" -> value view of a config stream; overrides from the
// command line are merged into this map before materializing a RunConfig.
std::map<std::string, std::string> parse_config_kv(std::istream& in,
                                                   const std::string& origin = "<config>");
RunConfig run_config_from_kv(const std::map<std::string, std::string>& kv);

RunConfig parse_run_config(std::istream& in, const std::string& origin = "<config>");
RunConfig load_run_config(const std::string& path);
// Canonical rendering; parse(render(c)) == c.
std::string render_run_config(const RunConfig& config);

}  // namespace dhnn::cli
