#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dhnn/hypergraph.hpp"
#include "dhnn/ingest.hpp"
#include "dhnn/neural.hpp"

namespace dhnn::model {

enum class AttentionNullModel { kConfiguration, kNone };

struct ModelConfig {
  double lr = 1e-3;
  double elu_alpha = 0.3;
  int n_temporal_layers = 1;  // stacking depth of the first LSTM block
  int temporal_units = 16;    // hidden width of the temporal LSTMs (h1 = h2)
  int hgnn_units = 16;
  int window_m = 32;
  int n_heads = 2;
  int batch_size = 32;
  double dropout = 0.1;
  int horizon_q = 1;
  int gru_hidden = 16;
  std::uint64_t seed = 1;
  int refresh_every = 0;  // 0: snapshots built once, generator frozen
  AttentionNullModel attention_null_model = AttentionNullModel::kConfiguration;
  int max_epochs = 100;
  int patience = 10;

  int d() const { return temporal_units * n_heads; }
  void validate() const;
  void validate_for_series(int n_series) const;  // adds the m > N_s regime check

  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

// Full parameter collection: hyperedge generator, temporal layer, hypergraph
// layer and the prediction head, shaped for a fixed series count.
struct DhnnModel {
  ModelConfig config;
  int n_series = 0;

  neural::GruParams gen_gru;
  neural::Tensor gen_w_q, gen_w_k;

  std::vector<neural::LstmParams> lstm_stack;  // n_temporal_layers blocks, width #tl
  neural::LstmParams lstm_mid;                 // #tl -> d
  neural::MhaParams mha;                       // over d
  neural::LstmParams lstm_post;                // d -> d
  neural::Tensor fc_w, fc_b;                   // per-timestep d -> N_s

  neural::Tensor theta1;  // 2m -> #h
  neural::Tensor w1;      // (#h + m) -> #h
  neural::Tensor theta2;  // #h -> m

  neural::MlpParams head;  // 3*m*N_s -> #h -> q

  neural::ParameterSet generator_params;
  neural::ParameterSet temporal_params;
  neural::ParameterSet hypergraph_params;
  neural::ParameterSet head_params;

  static DhnnModel init(const ModelConfig& config, int n_series);
  neural::ParameterSet all_params() const;
  // Generator parameters join only when refresh_every > 0.
  neural::ParameterSet trainable_params() const;
  bool live_edge_weights() const { return config.refresh_every > 0; }
};

struct ForwardOptions {
  bool training = false;
  bool live_edge_weights = false;  // recompute w(e) from the generator
  std::mt19937_64* rng = nullptr;  // required when training with dropout > 0
};

// LSTM stack -> LSTM -> multi-head attention -> LSTM -> per-timestep affine.
neural::Tensor temporal_layer_forward(const DhnnModel& model, const neural::Tensor& x,
                                      const ForwardOptions& opts);

// Node-major convolution chain: [X || Xtm] -> conv -> concat -> linear -> conv,
// with series as nodes and window values as features.
neural::Tensor hypergraph_layer_forward(const DhnnModel& model, const neural::Tensor& x,
                                        const neural::Tensor& xtm,
                                        const hypergraph::HypergraphSnapshot& snapshot,
                                        const neural::Tensor& edge_weights = {});

// GRU + scaled dot-product attention over a window; rows sum to 1.
neural::Tensor attention_tensor(const DhnnModel& model, const neural::Tensor& x);
Eigen::MatrixXd attention_matrix(const DhnnModel& model, const Eigen::MatrixXd& window);

// w(e) as a differentiable function of the attention matrix.
neural::Tensor differentiable_edge_weights(const neural::Tensor& attention,
                                           const hypergraph::HypergraphSnapshot& snapshot);

neural::Tensor model_forward(const DhnnModel& model, const Eigen::MatrixXd& window,
                             const hypergraph::HypergraphSnapshot& snapshot,
                             const ForwardOptions& opts = {});

// Evaluation-mode forward (dropout off).
Eigen::VectorXd predict(const DhnnModel& model, const Eigen::MatrixXd& window,
                        const hypergraph::HypergraphSnapshot& snapshot);

// One snapshot per window: RMT-filtered correlation communities (COM) plus
// attention communities (ATT), weighted by the attention matrix.
std::vector<hypergraph::HypergraphSnapshot> build_snapshots(
    const std::vector<ingest::WindowSample>& samples, const DhnnModel& model);

// Re-detects ATT communities and recomputes all weights with the current
// generator parameters, keeping COM edges as built.
void refresh_att_edges(const DhnnModel& model, const std::vector<ingest::WindowSample>& samples,
                       std::vector<hypergraph::HypergraphSnapshot>& snapshots);

enum class StopReason { kEarlyStop, kMaxEpochs };

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;  // 1-based
  double best_val_loss = 0.0;
  StopReason stop_reason = StopReason::kMaxEpochs;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

std::string render_train_report(const TrainReport& report);

TrainReport train_model(DhnnModel& model,
                        const std::vector<ingest::WindowSample>& train_samples,
                        std::vector<hypergraph::HypergraphSnapshot>& train_snapshots,
                        const std::vector<ingest::WindowSample>& val_samples,
                        std::vector<hypergraph::HypergraphSnapshot>& val_snapshots);

void save_model(std::ostream& out, const DhnnModel& model);
DhnnModel load_model(std::istream& in);

}  // namespace dhnn::model
