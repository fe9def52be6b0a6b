#include "dhnn/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dhnn/metrics.hpp"
#include "dhnn/spectral.hpp"

namespace dhnn::cli {

namespace fs = std::filesystem;

namespace {

// Exclusive-create lock; the holder removes it on scope exit.
class OutputLock {
 public:
  explicit OutputLock(const std::string& path) : path_(path) {
    std::FILE* f = std::fopen(path.c_str(), "wx");
    if (!f) {
      throw DataError("output directory is locked (remove stale " + path + " if no run is active)");
    }
    std::fclose(f);
  }
  ~OutputLock() { std::remove(path_.c_str()); }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
};

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw MissingInputError("missing artifact " + path + " (run the earlier stages first)");
  return in;
}

void append_log(const PipelinePaths& paths, const std::string& stage, double seconds) {
  std::ofstream log(paths.log, std::ios::app);
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  log << stage << " ok, " << format_double(seconds) << " s, epoch_ms="
      << std::chrono::duration_cast<std::chrono::milliseconds>(now).count() << "\n";
}

class StageTimer {
 public:
  StageTimer() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

std::string dataset_tag(const RunConfig& config) {
  return fs::path(config.dataset_path).stem().string();
}

void write_meta(const std::string& path, const std::map<std::string, std::string>& kv) {
  auto out = open_out(path);
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
}

std::map<std::string, std::string> read_meta(const std::string& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(path + ": malformed meta line: " + line);
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string meta_get(const std::map<std::string, std::string>& kv, const std::string& key,
                     const std::string& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError(path + ": missing meta key '" + key + "'");
  return it->second;
}

void write_table_csv(const std::string& path, const ingest::SeriesTable& table) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < table.names.size(); ++c) {
    out << (c ? "," : "") << table.names[c];
  }
  out << "\n";
  for (Eigen::Index r = 0; r < table.length(); ++r) {
    for (Eigen::Index c = 0; c < table.n_series(); ++c) {
      out << (c ? "," : "") << format_double(table.values(r, c));
    }
    out << "\n";
  }
}

ingest::SeriesTable read_normalized(const RunConfig& config, const PipelinePaths& paths) {
  auto in = open_in(paths.normalized_csv);
  ingest::CsvSchema schema;
  schema.target_column = config.target_column;
  schema.delimiter = ',';
  schema.has_header = true;
  return ingest::load_csv(in, schema, paths.normalized_csv);
}

struct LoadedPipeline {
  ingest::SeriesTable normalized;
  std::vector<ingest::WindowSample> samples;
  ingest::Split split;
  std::vector<hypergraph::HypergraphSnapshot> snapshots;
};

LoadedPipeline load_pipeline(const RunConfig& config, const PipelinePaths& paths,
                             bool with_snapshots) {
  LoadedPipeline p;
  p.normalized = read_normalized(config, paths);
  auto meta = read_meta(paths.ingest_meta);
  const int n_series = static_cast<int>(parse_double(meta_get(meta, "n_series", paths.ingest_meta)));
  if (n_series != p.normalized.n_series()) {
    throw DataError("ingest meta disagrees with normalized table on series count");
  }
  config.model.validate_for_series(n_series);
  p.samples = ingest::make_windows(p.normalized, config.model.window_m, config.model.horizon_q);
  p.split = ingest::chronological_split(p.samples);
  if (with_snapshots) {
    auto in = open_in(paths.snapshots);
    p.snapshots = hypergraph::read_snapshot_archive(in);
    if (p.snapshots.size() != p.samples.size()) {
      throw DataError("snapshot archive holds " + std::to_string(p.snapshots.size()) +
                      " snapshots but the windowed dataset has " + std::to_string(p.samples.size()));
    }
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
      if (p.snapshots[i].window_end != p.samples[i].window_end) {
        throw DataError("snapshot/sample window_end mismatch at index " + std::to_string(i));
      }
    }
  }
  return p;
}

void write_partitions(const std::string& path, const std::vector<hypergraph::HypergraphSnapshot>& snaps,
                      const std::vector<std::string>& names, hypergraph::EdgeSource source) {
  auto out = open_out(path);
  for (const auto& snap : snaps) {
    std::vector<int> label(static_cast<std::size_t>(snap.n_nodes), -1);
    int next = 0;
    for (const auto& edge : snap.hyperedges) {
      if (edge.source != source) continue;
      for (int v : edge.nodes) label[static_cast<std::size_t>(v)] = next;
      ++next;
    }
    for (int v = 0; v < snap.n_nodes; ++v) {
      out << snap.window_end << ", " << names[static_cast<std::size_t>(v)] << ", "
          << label[static_cast<std::size_t>(v)] << "\n";
    }
  }
}

std::vector<hypergraph::HypergraphSnapshot> slice(
    const std::vector<hypergraph::HypergraphSnapshot>& snaps, std::size_t start, std::size_t count) {
  return {snaps.begin() + static_cast<std::ptrdiff_t>(start),
          snaps.begin() + static_cast<std::ptrdiff_t>(start + count)};
}

struct TargetStats {
  std::vector<double> mean, stddev, pre_norm;
};

TargetStats read_target_stats(const std::string& path) {
  auto in = open_in(path);
  TargetStats stats;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (header) {  // "row,mean,stddev,pre_norm_value"
      header = false;
      continue;
    }
    auto cells = split(line, ',');
    if (cells.size() != 4) throw DataError(path + ": malformed stats row: " + line);
    stats.mean.push_back(parse_double(trim(cells[1])));
    stats.stddev.push_back(parse_double(trim(cells[2])));
    stats.pre_norm.push_back(parse_double(trim(cells[3])));
  }
  return stats;
}

}  // namespace

PipelinePaths PipelinePaths::in(const std::string& output_dir) {
  PipelinePaths p;
  auto join = [&](const char* name) { return (fs::path(output_dir) / name).string(); };
  p.normalized_csv = join("normalized.csv");
  p.target_stats_csv = join("target_stats.csv");
  p.ingest_meta = join("ingest_meta.txt");
  p.snapshots = join("snapshots.txt");
  p.generator_ckpt = join("generator.ckpt");
  p.model_ckpt = join("model.ckpt");
  p.train_report = join("train_report.txt");
  p.metrics = join("metrics.txt");
  p.partitions_com = join("partitions_com.txt");
  p.partitions_att = join("partitions_att.txt");
  p.spectrum = join("spectrum.txt");
  p.lock = join(".lock");
  p.log = join("run.log");
  return p;
}

void cmd_ingest(const RunConfig& config) {
  config.validate();
  StageTimer timer;
  const PipelinePaths paths = PipelinePaths::in(config.output_dir);
  fs::create_directories(config.output_dir);
  OutputLock lock(paths.lock);

  ingest::CsvSchema schema;
  schema.target_column = config.target_column;
  schema.delimiter = config.delimiter;
  schema.has_header = config.has_header;
  ingest::SeriesTable table = ingest::load_csv(config.dataset_path, schema);
  config.model.validate_for_series(static_cast<int>(table.n_series()));

  if (config.log_returns) table = ingest::log_returns(table);
  const int w = config.effective_norm_window();
  ingest::RollingStats stats = ingest::rolling_stats(table, table.target_index, w);
  ingest::SeriesTable normalized = ingest::rolling_normalize(table, w);

  write_table_csv(paths.normalized_csv, normalized);
  {
    auto out = open_out(paths.target_stats_csv);
    out << "row,mean,stddev,pre_norm_value\n";
    for (std::size_t r = 0; r < stats.mean.size(); ++r) {
      out << r << "," << format_double(stats.mean[r]) << "," << format_double(stats.stddev[r])
          << "," << format_double(stats.pre_norm_value[r]) << "\n";
    }
  }
  std::map<std::string, std::string> meta;
  meta["n_series"] = std::to_string(normalized.n_series());
  meta["n_rows"] = std::to_string(normalized.length());
  meta["target_column"] = config.target_column;
  meta["target_index"] = std::to_string(normalized.target_index);
  meta["log_returns"] = config.log_returns ? "true" : "false";
  meta["norm_window_w"] = std::to_string(w);
  write_meta(paths.ingest_meta, meta);
  append_log(paths, "ingest", timer.seconds());
}

void cmd_build(const RunConfig& config) {
  config.validate();
  StageTimer timer;
  const PipelinePaths paths = PipelinePaths::in(config.output_dir);
  fs::create_directories(config.output_dir);
  OutputLock lock(paths.lock);

  LoadedPipeline p = load_pipeline(config, paths, /*with_snapshots=*/false);
  model::DhnnModel net = model::DhnnModel::init(config.model, static_cast<int>(p.normalized.n_series()));
  auto snapshots = model::build_snapshots(p.samples, net);

  {
    auto out = open_out(paths.snapshots);
    hypergraph::write_snapshot_archive(out, snapshots);
  }
  {
    auto out = open_out(paths.generator_ckpt, std::ios::binary);
    neural::save_checkpoint(out, net.generator_params.items(),
                            "n_series = " + std::to_string(net.n_series) + "\n");
  }
  write_partitions(paths.partitions_com, snapshots, p.normalized.names, hypergraph::EdgeSource::kCom);
  write_partitions(paths.partitions_att, snapshots, p.normalized.names, hypergraph::EdgeSource::kAtt);

  if (config.dump_spectrum) {
    auto out = open_out(paths.spectrum);
    for (const auto& sample : p.samples) {
      auto corr = spectral::pearson_correlation(sample.features, sample.window_end);
      auto dec = spectral::rmt_decompose(corr, config.model.window_m);
      out << sample.window_end << ", ";
      for (std::size_t i = 0; i < dec.eigenvalues.size(); ++i) {
        out << (i ? " " : "") << format_double(dec.eigenvalues[i]);
      }
      out << ", " << format_double(dec.lambda_minus) << ", " << format_double(dec.lambda_plus)
          << ", " << format_double(dec.sigma2) << ", " << dec.top_multiplicity << "\n";
    }
  }
  append_log(paths, "build", timer.seconds());
}

void cmd_train(const RunConfig& config) {
  config.validate();
  StageTimer timer;
  const PipelinePaths paths = PipelinePaths::in(config.output_dir);
  fs::create_directories(config.output_dir);
  OutputLock lock(paths.lock);

  LoadedPipeline p = load_pipeline(config, paths, /*with_snapshots=*/true);
  model::DhnnModel net = model::DhnnModel::init(config.model, static_cast<int>(p.normalized.n_series()));
  {
    auto in = open_in(paths.generator_ckpt, std::ios::binary);
    neural::apply_checkpoint(neural::load_checkpoint(in), net.generator_params);
  }

  const std::size_t n_train = p.split.train.size();
  const std::size_t n_val = p.split.val.size();
  auto train_snaps = slice(p.snapshots, 0, n_train);
  auto val_snaps = slice(p.snapshots, n_train, n_val);
  model::TrainReport report = model::train_model(net, p.split.train, train_snaps, p.split.val, val_snaps);

  {
    auto out = open_out(paths.model_ckpt, std::ios::binary);
    model::save_model(out, net);
  }
  open_out(paths.train_report) << model::render_train_report(report);
  append_log(paths, "train (" + format_double(report.wall_seconds) + " s in loop)", timer.seconds());
}

void cmd_evaluate(const RunConfig& config) {
  config.validate();
  StageTimer timer;
  const PipelinePaths paths = PipelinePaths::in(config.output_dir);
  fs::create_directories(config.output_dir);
  OutputLock lock(paths.lock);

  LoadedPipeline p = load_pipeline(config, paths, /*with_snapshots=*/true);
  model::DhnnModel net = [&] {
    auto in = open_in(paths.model_ckpt, std::ios::binary);
    return model::load_model(in);
  }();
  if (net.n_series != p.normalized.n_series()) {
    throw DataError("checkpoint was trained on a different series count");
  }

  const std::size_t n_train = p.split.train.size();
  const std::size_t n_val = p.split.val.size();
  const auto& test = p.split.test;
  auto test_snaps = slice(p.snapshots, n_train + n_val, test.size());
  if (net.live_edge_weights()) {
    // Joint mode: ATT structure must reflect the trained generator, not the
    // archived build-time snapshot.
    model::refresh_att_edges(net, test, test_snaps);
  }

  std::vector<double> y, y_model, y_persist;
  auto persist = metrics::persistence_baseline(test, p.normalized.target_index);
  TargetStats stats;
  if (config.metrics_on == MetricsScale::kRaw) stats = read_target_stats(paths.target_stats_csv);

  for (std::size_t i = 0; i < test.size(); ++i) {
    Eigen::VectorXd pred = model::predict(net, test[i].features, test_snaps[i]);
    for (int k = 0; k < test[i].target.size(); ++k) {
      const long row = test[i].window_end + 1 + k;
      double truth = test[i].target(k);
      double hat_model = pred(k);
      double hat_persist = persist[i](k);
      if (config.metrics_on == MetricsScale::kRaw) {
        const auto r = static_cast<std::size_t>(row);
        if (r >= stats.mean.size()) throw DataError("target stats shorter than dataset");
        truth = stats.pre_norm[r];
        hat_model = hat_model * stats.stddev[r] + stats.mean[r];
        hat_persist = hat_persist * stats.stddev[r] + stats.mean[r];
      }
      y.push_back(truth);
      y_model.push_back(hat_model);
      y_persist.push_back(hat_persist);
    }
  }

  const std::string tag = dataset_tag(config);
  auto out = open_out(paths.metrics);
  out << metrics::render_metrics_line(metrics::compute_metrics(y, y_model, tag, "dhnn")) << "\n";
  out << metrics::render_metrics_line(metrics::compute_metrics(y, y_persist, tag, "persistence"))
      << "\n";
  append_log(paths, "evaluate", timer.seconds());
}

void cmd_inspect(const std::string& snapshot_file, int index, std::ostream& out) {
  auto in = open_in(snapshot_file);
  auto snaps = hypergraph::read_snapshot_archive(in);
  if (index < 0 || static_cast<std::size_t>(index) >= snaps.size()) {
    throw DataError("snapshot index " + std::to_string(index) + " out of range (archive holds " +
                    std::to_string(snaps.size()) + ")");
  }
  const auto& snap = snaps[static_cast<std::size_t>(index)];
  out << hypergraph::serialize_snapshot(snap);
  out << "# nodes = " << snap.n_nodes << ", hyperedges = " << snap.n_edges() << "\n";
  out << "# vertex degrees:";
  for (double d : snap.vertex_degrees) out << ' ' << format_double(d);
  out << "\n# edge degrees:";
  for (int d : snap.edge_degrees) out << ' ' << d;
  out << "\n";
}

void cmd_synth(const SyntheticSpec& spec, const std::string& csv_path,
               const std::string& labels_path) {
  SyntheticData data = generate_synthetic(spec);
  write_table_csv(csv_path, data.table);
  auto out = open_out(labels_path);
  for (std::size_t i = 0; i < data.planted_labels.size(); ++i) {
    out << data.table.names[i] << ", " << data.planted_labels[i] << "\n";
  }
}

}  // namespace dhnn::cli
