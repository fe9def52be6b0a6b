#include "dhnn/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dhnn/community.hpp"
#include "dhnn/spectral.hpp"

namespace dhnn::model {

using neural::Tensor;

namespace {

std::string kv_get(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

int kv_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  return static_cast<int>(parse_double(kv_get(kv, key)));
}

}  // namespace

void ModelConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(elu_alpha > 0.0)) throw ConfigError("elu_alpha must be > 0");
  if (n_temporal_layers < 1) throw ConfigError("n_temporal_layers must be >= 1");
  if (temporal_units < 1) throw ConfigError("temporal_units must be >= 1");
  if (hgnn_units < 1) throw ConfigError("hgnn_units must be >= 1");
  if (window_m < 2) throw ConfigError("window_m must be >= 2");
  if (n_heads < 1) throw ConfigError("n_heads must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (horizon_q < 1) throw ConfigError("horizon_q must be >= 1");
  if (gru_hidden < 1) throw ConfigError("gru_hidden must be >= 1");
  if (refresh_every < 0) throw ConfigError("refresh_every must be >= 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

void ModelConfig::validate_for_series(int n_series) const {
  validate();
  if (window_m <= n_series) {
    throw ConfigError("window_m = " + std::to_string(window_m) +
                      " must exceed the series count N_s = " + std::to_string(n_series) +
                      " (correlation filtering regime)");
  }
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["lr"] = format_double(lr);
  kv["elu_alpha"] = format_double(elu_alpha);
  kv["n_temporal_layers"] = std::to_string(n_temporal_layers);
  kv["temporal_units"] = std::to_string(temporal_units);
  kv["hgnn_units"] = std::to_string(hgnn_units);
  kv["window_m"] = std::to_string(window_m);
  kv["n_heads"] = std::to_string(n_heads);
  kv["batch_size"] = std::to_string(batch_size);
  kv["dropout"] = format_double(dropout);
  kv["horizon_q"] = std::to_string(horizon_q);
  kv["gru_hidden"] = std::to_string(gru_hidden);
  kv["seed"] = std::to_string(seed);
  kv["refresh_every"] = std::to_string(refresh_every);
  kv["attention_null_model"] =
      attention_null_model == AttentionNullModel::kConfiguration ? "configuration" : "none";
  kv["max_epochs"] = std::to_string(max_epochs);
  kv["patience"] = std::to_string(patience);
  return kv;
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  c.lr = parse_double(kv_get(kv, "lr"));
  c.elu_alpha = parse_double(kv_get(kv, "elu_alpha"));
  c.n_temporal_layers = kv_int(kv, "n_temporal_layers");
  c.temporal_units = kv_int(kv, "temporal_units");
  c.hgnn_units = kv_int(kv, "hgnn_units");
  c.window_m = kv_int(kv, "window_m");
  c.n_heads = kv_int(kv, "n_heads");
  c.batch_size = kv_int(kv, "batch_size");
  c.dropout = parse_double(kv_get(kv, "dropout"));
  c.horizon_q = kv_int(kv, "horizon_q");
  c.gru_hidden = kv_int(kv, "gru_hidden");
  c.seed = static_cast<std::uint64_t>(parse_double(kv_get(kv, "seed")));
  c.refresh_every = kv_int(kv, "refresh_every");
  const std::string null_model = kv_get(kv, "attention_null_model");
  if (null_model == "configuration") {
    c.attention_null_model = AttentionNullModel::kConfiguration;
  } else if (null_model == "none") {
    c.attention_null_model = AttentionNullModel::kNone;
  } else {
    throw ConfigError("attention_null_model must be 'configuration' or 'none'");
  }
  c.max_epochs = kv_int(kv, "max_epochs");
  c.patience = kv_int(kv, "patience");
  c.validate();
  return c;
}

DhnnModel DhnnModel::init(const ModelConfig& config, int n_series) {
  config.validate();
  if (n_series < 2) throw ConfigError("model needs at least 2 series");

  DhnnModel m;
  m.config = config;
  m.n_series = n_series;
  std::mt19937_64 rng(config.seed);

  const int tl = config.temporal_units;
  const int d = config.d();
  const int h = config.hgnn_units;
  const int win = config.window_m;

  m.gen_gru = neural::GruParams::init(n_series, config.gru_hidden, rng);
  m.gen_w_q = neural::init_weight(config.gru_hidden, n_series, rng);
  m.gen_w_k = neural::init_weight(config.gru_hidden, n_series, rng);

  for (int layer = 0; layer < config.n_temporal_layers; ++layer) {
    m.lstm_stack.push_back(neural::LstmParams::init(layer == 0 ? n_series : tl, tl, rng));
  }
  m.lstm_mid = neural::LstmParams::init(tl, d, rng);
  m.mha = neural::MhaParams::init(d, config.n_heads, rng);
  m.lstm_post = neural::LstmParams::init(d, d, rng);
  m.fc_w = neural::init_weight(d, n_series, rng);
  m.fc_b = neural::init_bias(n_series);

  m.theta1 = neural::init_weight(2 * win, h, rng);
  m.w1 = neural::init_weight(h + win, h, rng);
  m.theta2 = neural::init_weight(h, win, rng);

  m.head = neural::MlpParams::init({3 * win * n_series, h, config.horizon_q}, rng);

  m.gen_gru.collect(m.generator_params, "gen.gru.");
  m.generator_params.add("gen.w_q", m.gen_w_q);
  m.generator_params.add("gen.w_k", m.gen_w_k);
  for (std::size_t i = 0; i < m.lstm_stack.size(); ++i) {
    m.lstm_stack[i].collect(m.temporal_params, "temporal.lstm1." + std::to_string(i) + ".");
  }
  m.lstm_mid.collect(m.temporal_params, "temporal.lstm2.");
  m.mha.collect(m.temporal_params, "temporal.mha.");
  m.lstm_post.collect(m.temporal_params, "temporal.lstm3.");
  m.temporal_params.add("temporal.fc.w", m.fc_w);
  m.temporal_params.add("temporal.fc.b", m.fc_b);
  m.hypergraph_params.add("hg.theta1", m.theta1);
  m.hypergraph_params.add("hg.w1", m.w1);
  m.hypergraph_params.add("hg.theta2", m.theta2);
  m.head.collect(m.head_params, "head.");
  return m;
}

neural::ParameterSet DhnnModel::all_params() const {
  neural::ParameterSet all;
  all.merge(generator_params);
  all.merge(temporal_params);
  all.merge(hypergraph_params);
  all.merge(head_params);
  return all;
}

neural::ParameterSet DhnnModel::trainable_params() const {
  neural::ParameterSet set;
  if (live_edge_weights()) set.merge(generator_params);
  set.merge(temporal_params);
  set.merge(hypergraph_params);
  set.merge(head_params);
  return set;
}

neural::Tensor temporal_layer_forward(const DhnnModel& model, const Tensor& x,
                                      const ForwardOptions& opts) {
  if (x.cols() != model.n_series) {
    throw std::invalid_argument("temporal layer: expected " + std::to_string(model.n_series) +
                                " series, got " + std::to_string(x.cols()));
  }
  const bool drop = opts.training && model.config.dropout > 0.0;
  if (drop && opts.rng == nullptr) {
    throw std::invalid_argument("temporal layer: training with dropout needs an RNG");
  }
  Tensor h = x;
  for (const auto& block : model.lstm_stack) h = neural::lstm_forward(h, block);
  h = neural::lstm_forward(h, model.lstm_mid);
  if (drop) h = neural::dropout(h, model.config.dropout, *opts.rng);
  h = neural::multi_head_attention(h, model.mha);
  if (drop) h = neural::dropout(h, model.config.dropout, *opts.rng);
  h = neural::lstm_forward(h, model.lstm_post);
  return add_rows(matmul(h, model.fc_w), model.fc_b);
}

neural::Tensor hypergraph_layer_forward(const DhnnModel& model, const Tensor& x,
                                        const Tensor& xtm,
                                        const hypergraph::HypergraphSnapshot& snapshot,
                                        const Tensor& edge_weights) {
  if (snapshot.n_nodes != model.n_series) {
    throw std::invalid_argument("hypergraph layer: snapshot has " +
                                std::to_string(snapshot.n_nodes) + " nodes, model expects " +
                                std::to_string(model.n_series));
  }
  const double alpha = model.config.elu_alpha;
  auto act = [alpha](const Tensor& t) { return neural::elu(t, alpha); };

  // Series as nodes, window values as features.
  Tensor xn = transpose(x);
  Tensor xtm_n = transpose(xtm);
  Tensor z0 = neural::concat_cols({xn, xtm_n});
  Tensor z1 = neural::hypergraph_conv(z0, snapshot, model.theta1, act, edge_weights);
  Tensor z_cat = neural::concat_cols({z1, xtm_n});
  Tensor z_hat = matmul(z_cat, model.w1);
  Tensor out = neural::hypergraph_conv(z_hat, snapshot, model.theta2, act, edge_weights);
  return transpose(out);
}

neural::Tensor attention_tensor(const DhnnModel& model, const Tensor& x) {
  Tensor z = neural::gru_forward(x, model.gen_gru);
  return neural::latent_attention(z, model.gen_w_q, model.gen_w_k, model.n_series);
}

Eigen::MatrixXd attention_matrix(const DhnnModel& model, const Eigen::MatrixXd& window) {
  return attention_tensor(model, Tensor::constant(window)).value();
}

neural::Tensor differentiable_edge_weights(const Tensor& attention,
                                           const hypergraph::HypergraphSnapshot& snapshot) {
  const Eigen::Index n = attention.rows();
  Tensor abs_att = neural::abs(attention);
  std::vector<Tensor> weights;
  weights.reserve(snapshot.hyperedges.size());
  for (const auto& edge : snapshot.hyperedges) {
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, n);
    for (int u : edge.nodes) {
      for (int v : edge.nodes) {
        if (u != v) mask(u, v) = 1.0;
      }
    }
    weights.push_back(sum_all(cmul(Tensor::constant(std::move(mask)), abs_att)));
  }
  return clamp_min(concat_rows(weights), hypergraph::kWeightFloor);
}

neural::Tensor model_forward(const DhnnModel& model, const Eigen::MatrixXd& window,
                             const hypergraph::HypergraphSnapshot& snapshot,
                             const ForwardOptions& opts) {
  if (window.rows() != model.config.window_m || window.cols() != model.n_series) {
    throw std::invalid_argument("model forward: window must be " +
                                std::to_string(model.config.window_m) + "x" +
                                std::to_string(model.n_series) + ", got " +
                                std::to_string(window.rows()) + "x" +
                                std::to_string(window.cols()));
  }
  Tensor x = Tensor::constant(window);
  Tensor xtm = temporal_layer_forward(model, x, opts);
  Tensor edge_weights;
  if (opts.live_edge_weights) {
    edge_weights = differentiable_edge_weights(attention_tensor(model, x), snapshot);
  }
  Tensor xhg = hypergraph_layer_forward(model, x, xtm, snapshot, edge_weights);
  Tensor cat = neural::concat_cols({xtm, xhg, x});
  Tensor flat = reshape(cat, 1, cat.size());
  const double alpha = model.config.elu_alpha;
  auto act = [alpha](const Tensor& t) { return neural::elu(t, alpha); };
  return neural::mlp_forward(flat, model.head, act);
}

Eigen::VectorXd predict(const DhnnModel& model, const Eigen::MatrixXd& window,
                        const hypergraph::HypergraphSnapshot& snapshot) {
  ForwardOptions opts;
  opts.training = false;
  opts.live_edge_weights = model.live_edge_weights();
  Tensor out = model_forward(model, window, snapshot, opts);
  return out.value().row(0).transpose();
}

namespace {

std::vector<hypergraph::Hyperedge> detect_com_edges(const Eigen::MatrixXd& window,
                                                    long window_end, std::uint64_t seed) {
  auto corr = spectral::pearson_correlation(window, window_end);
  auto dec = spectral::rmt_decompose(corr, static_cast<int>(window.rows()));
  auto mod = community::build_modularity_filtered(dec.structural_part, corr.entries.sum());
  auto part = community::detect_communities(mod, seed);
  return hypergraph::hyperedges_from_partition(part, hypergraph::EdgeSource::kCom);
}

std::vector<hypergraph::Hyperedge> detect_att_edges(const Eigen::MatrixXd& attention,
                                                    AttentionNullModel null_model,
                                                    std::uint64_t seed) {
  Eigen::MatrixXd sym = community::symmetrize_attention(attention);
  community::ModularityMatrix mod;
  if (null_model == AttentionNullModel::kConfiguration) {
    mod = community::build_modularity_configuration(sym);
  } else {
    mod = community::build_modularity_raw(sym, sym.sum());
  }
  auto part = community::detect_communities(mod, seed);
  return hypergraph::hyperedges_from_partition(part, hypergraph::EdgeSource::kAtt);
}

}  // namespace

std::vector<hypergraph::HypergraphSnapshot> build_snapshots(
    const std::vector<ingest::WindowSample>& samples, const DhnnModel& model) {
  if (samples.empty()) throw DataError("no samples to build snapshots from");
  model.config.validate_for_series(model.n_series);

  std::vector<hypergraph::HypergraphSnapshot> out(samples.size());
  parallel_for(static_cast<int>(samples.size()), [&](int i) {
    const auto& sample = samples[static_cast<std::size_t>(i)];
    try {
      const std::uint64_t we = static_cast<std::uint64_t>(sample.window_end);
      auto com = detect_com_edges(sample.features, sample.window_end,
                                  mix_seed(model.config.seed, 2 * we));
      Eigen::MatrixXd att = attention_matrix(model, sample.features);
      auto att_edges = detect_att_edges(att, model.config.attention_null_model,
                                        mix_seed(model.config.seed, 2 * we + 1));
      out[static_cast<std::size_t>(i)] = hypergraph::assemble_snapshot(
          com, att_edges, att, model.n_series, sample.window_end);
    } catch (const std::exception& e) {
      throw DataError("snapshot construction failed at window " +
                      std::to_string(sample.window_end) + ": " + e.what());
    }
  });
  return out;
}

void refresh_att_edges(const DhnnModel& model, const std::vector<ingest::WindowSample>& samples,
                       std::vector<hypergraph::HypergraphSnapshot>& snapshots) {
  if (samples.size() != snapshots.size()) {
    throw DataError("refresh: sample/snapshot count mismatch");
  }
  parallel_for(static_cast<int>(samples.size()), [&](int i) {
    const auto& sample = samples[static_cast<std::size_t>(i)];
    auto& snap = snapshots[static_cast<std::size_t>(i)];
    std::vector<hypergraph::Hyperedge> com;
    for (const auto& e : snap.hyperedges) {
      if (e.source == hypergraph::EdgeSource::kCom) com.push_back(e);
    }
    const std::uint64_t we = static_cast<std::uint64_t>(sample.window_end);
    Eigen::MatrixXd att = attention_matrix(model, sample.features);
    auto att_edges = detect_att_edges(att, model.config.attention_null_model,
                                      mix_seed(model.config.seed, 2 * we + 1));
    snap = hypergraph::assemble_snapshot(com, att_edges, att, model.n_series,
                                         sample.window_end);
  });
}

std::string render_train_report(const TrainReport& report) {
  std::ostringstream out;
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    out << (e + 1) << ", " << format_double(report.train_loss[e]) << ", "
        << format_double(report.val_loss[e]) << "\n";
  }
  out << "best_epoch = " << report.best_epoch << "\n";
  out << "best_val_loss = " << format_double(report.best_val_loss) << "\n";
  out << "stop_reason = "
      << (report.stop_reason == StopReason::kEarlyStop ? "early_stop" : "max_epochs") << "\n";
  out << "seed = " << report.seed << "\n";
  return out.str();
}

TrainReport train_model(DhnnModel& model,
                        const std::vector<ingest::WindowSample>& train_samples,
                        std::vector<hypergraph::HypergraphSnapshot>& train_snapshots,
                        const std::vector<ingest::WindowSample>& val_samples,
                        std::vector<hypergraph::HypergraphSnapshot>& val_snapshots) {
  if (train_samples.empty() || val_samples.empty()) throw DataError("empty training or validation split");
  if (train_samples.size() != train_snapshots.size() || val_samples.size() != val_snapshots.size()) {
    throw DataError("samples and snapshots must pair 1:1");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig& cfg = model.config;

  neural::ParameterSet trainable = model.trainable_params();
  neural::AdamState adam;
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x7261696eULL));  // shuffle + dropout stream

  ForwardOptions train_opts;
  train_opts.training = true;
  train_opts.live_edge_weights = model.live_edge_weights();
  train_opts.rng = &rng;
  ForwardOptions eval_opts;
  eval_opts.live_edge_weights = model.live_edge_weights();

  auto target_tensor = [](const ingest::WindowSample& s) {
    return Tensor::constant(Eigen::MatrixXd(s.target.transpose()));
  };
  auto eval_loss = [&](const std::vector<ingest::WindowSample>& samples,
                       const std::vector<hypergraph::HypergraphSnapshot>& snaps) {
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Tensor pred = model_forward(model, samples[i].features, snaps[i], eval_opts);
      total += neural::mse_loss(pred, target_tensor(samples[i])).value()(0, 0);
    }
    return total / static_cast<double>(samples.size());
  };

  TrainReport report;
  report.seed = cfg.seed;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best_values;
  int epochs_since_best = 0;

  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.refresh_every > 0 && epoch > 1 && (epoch - 1) % cfg.refresh_every == 0) {
      refresh_att_edges(model, train_samples, train_snapshots);
      refresh_att_edges(model, val_samples, val_snapshots);
    }
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch_end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      Tensor batch_sum;
      for (std::size_t k = at; k < batch_end; ++k) {
        const auto& sample = train_samples[order[k]];
        Tensor pred = model_forward(model, sample.features, train_snapshots[order[k]], train_opts);
        Tensor loss = neural::mse_loss(pred, target_tensor(sample));
        batch_sum = batch_sum.defined() ? batch_sum + loss : loss;
      }
      const double batch_n = static_cast<double>(batch_end - at);
      Tensor batch_loss = scale(batch_sum, 1.0 / batch_n);
      const double loss_value = batch_loss.value()(0, 0);
      if (!std::isfinite(loss_value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           ", batch starting at sample " + std::to_string(at));
      }
      neural::backward(batch_loss);
      neural::adam_step(trainable, adam, cfg.lr);
      epoch_loss += loss_value * batch_n;
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(train_samples.size()));

    const double val = eval_loss(val_samples, val_snapshots);
    if (!std::isfinite(val)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    report.val_loss.push_back(val);

    if (val < best_val) {
      best_val = val;
      report.best_epoch = epoch;
      epochs_since_best = 0;
      best_values.clear();
      for (const auto& [name, t] : trainable.items()) best_values.push_back(t.value());
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.patience) {
        report.stop_reason = StopReason::kEarlyStop;
        break;
      }
    }
  }

  if (!best_values.empty()) {
    std::size_t k = 0;
    for (const auto& [name, t] : trainable.items()) t.set_value(best_values[k++]);
    if (model.live_edge_weights()) {
      // Snapshot structure must match the restored generator.
      refresh_att_edges(model, train_samples, train_snapshots);
      refresh_att_edges(model, val_samples, val_snapshots);
    }
  }
  report.best_val_loss = best_val;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void save_model(std::ostream& out, const DhnnModel& model) {
  std::ostringstream header;
  header << "n_series = " << model.n_series << "\n";
  for (const auto& [k, v] : model.config.to_kv()) header << k << " = " << v << "\n";
  neural::save_checkpoint(out, model.all_params().items(), header.str());
}

DhnnModel load_model(std::istream& in) {
  neural::Checkpoint ckpt = neural::load_checkpoint(in);
  std::map<std::string, std::string> kv;
  for (const auto& line : split(ckpt.header, '\n')) {
    if (trim(line).empty()) continue;
    auto parts = split(line, '=');
    if (parts.size() != 2) throw DataError("malformed checkpoint header line: " + line);
    kv[trim(parts[0])] = trim(parts[1]);
  }
  const int n_series = static_cast<int>(parse_double(kv_get(kv, "n_series")));
  kv.erase("n_series");
  ModelConfig config = ModelConfig::from_kv(kv);
  DhnnModel model = DhnnModel::init(config, n_series);
  neural::ParameterSet all = model.all_params();
  neural::apply_checkpoint(ckpt, all);
  return model;
}

}  // namespace dhnn::model
