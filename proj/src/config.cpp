#include "dhnn/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace dhnn::cli {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "' must be true or false, got '" + v + "'");
}

}  // namespace

void RunConfig::validate() const {
  if (dataset_path.empty()) throw ConfigError("data.path must be set");
  if (target_column.empty()) throw ConfigError("data.target_column must be set");
  if (output_dir.empty()) throw ConfigError("run.output_dir must be set");
  if (norm_window_w < 0) throw ConfigError("data.norm_window_w must be >= 0");
  if (norm_window_w > 0 && norm_window_w < 2) throw ConfigError("data.norm_window_w must be >= 2");
  model.validate();
}

std::map<std::string, std::string> parse_config_kv(std::istream& in, const std::string& origin) {
  std::map<std::string, std::string> kv;  // "section.key" -> value
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (section.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": key outside a section");
    kv[section + "." + key] = value;
  }
  return kv;
}

RunConfig run_config_from_kv(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  std::map<std::string, std::string> model_kv = cfg.model.to_kv();  // defaults
  for (const auto& [full_key, value] : kv) {
    auto dot = full_key.find('.');
    const std::string sec = full_key.substr(0, dot);
    const std::string key = full_key.substr(dot + 1);
    if (sec == "data") {
      if (key == "path") {
        cfg.dataset_path = value;
      } else if (key == "target_column") {
        cfg.target_column = value;
      } else if (key == "delimiter") {
        if (value.size() != 1) throw ConfigError("data.delimiter must be a single character");
        cfg.delimiter = value[0];
      } else if (key == "has_header") {
        cfg.has_header = parse_bool(value, full_key);
      } else if (key == "log_returns") {
        cfg.log_returns = parse_bool(value, full_key);
      } else if (key == "norm_window_w") {
        cfg.norm_window_w = static_cast<int>(parse_double(value));
      } else {
        throw ConfigError("unknown config key '" + full_key + "'");
      }
    } else if (sec == "model") {
      if (!model_kv.count(key)) throw ConfigError("unknown config key '" + full_key + "'");
      model_kv[key] = value;
    } else if (sec == "run") {
      if (key == "output_dir") {
        cfg.output_dir = value;
      } else if (key == "metrics_on") {
        if (value == "normalized") {
          cfg.metrics_on = MetricsScale::kNormalized;
        } else if (value == "raw") {
          cfg.metrics_on = MetricsScale::kRaw;
        } else {
          throw ConfigError("run.metrics_on must be 'normalized' or 'raw'");
        }
      } else if (key == "dump_spectrum") {
        cfg.dump_spectrum = parse_bool(value, full_key);
      } else {
        throw ConfigError("unknown config key '" + full_key + "'");
      }
    } else {
      throw ConfigError("unknown config section '" + sec + "'");
    }
  }
  cfg.model = model::ModelConfig::from_kv(model_kv);
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config(std::istream& in, const std::string& origin) {
  return run_config_from_kv(parse_config_kv(in, origin));
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open config file: " + path);
  return parse_run_config(in, path);
}

std::string render_run_config(const RunConfig& config) {
  std::ostringstream out;
  out << "[data]\n";
  out << "path = " << config.dataset_path << "\n";
  out << "target_column = " << config.target_column << "\n";
  out << "delimiter = " << config.delimiter << "\n";
  out << "has_header = " << (config.has_header ? "true" : "false") << "\n";
  out << "log_returns = " << (config.log_returns ? "true" : "false") << "\n";
  out << "norm_window_w = " << config.norm_window_w << "\n";
  out << "\n[model]\n";
  for (const auto& [k, v] : config.model.to_kv()) out << k << " = " << v << "\n";
  out << "\n[run]\n";
  out << "output_dir = " << config.output_dir << "\n";
  out << "metrics_on = " << (config.metrics_on == MetricsScale::kNormalized ? "normalized" : "raw")
      << "\n";
  out << "dump_spectrum = " << (config.dump_spectrum ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace dhnn::cli
