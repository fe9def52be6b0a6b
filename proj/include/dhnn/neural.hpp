#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dhnn/hypergraph.hpp"
#include "dhnn/tensor.hpp"

namespace dhnn::neural {

using Activation = std::function<Tensor(const Tensor&)>;
inline Tensor identity_activation(const Tensor& t) { return t; }

// Named collection of trainable tensors; iteration follows insertion order,
// which is fixed by construction code and therefore stable across runs.
class ParameterSet {
 public:
  void add(const std::string& name, Tensor t);
  void merge(const ParameterSet& other);  // names must not collide
  bool contains(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  void zero_grads();

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::map<std::string, std::size_t> index_;
};

// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weight; fan_in = rows.
Tensor init_weight(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
Tensor init_bias(Eigen::Index cols);

struct GruParams {
  Tensor w_xr, w_zr, w_xu, w_zu, w_xz, w_zz;
  Tensor b_r, b_u, b_z;

  static GruParams init(int n_in, int hidden, std::mt19937_64& rng);
  void collect(ParameterSet& out, const std::string& prefix) const;
  void validate(Eigen::Index n_in) const;
  int hidden() const { return static_cast<int>(w_xr.cols()); }
};

// Runs the gated recurrence over the rows of x (m x n_in) and stacks the
// hidden states into an m x hidden output. z0 defaults to zeros.
Tensor gru_forward(const Tensor& x, const GruParams& params, const Tensor& z0 = {});

// A = row_softmax(Q^T K / sqrt(n_nodes)) with Q = z w_q, K = z w_k.
Tensor latent_attention(const Tensor& z, const Tensor& w_q, const Tensor& w_k, int n_nodes);

struct LstmParams {
  Tensor w_xi, w_hi, b_i;  // input gate
  Tensor w_xf, w_hf, b_f;  // forget gate
  Tensor w_xo, w_ho, b_o;  // output gate
  Tensor w_xg, w_hg, b_g;  // candidate

  static LstmParams init(int n_in, int hidden, std::mt19937_64& rng);
  void collect(ParameterSet& out, const std::string& prefix) const;
  void validate(Eigen::Index n_in) const;
  int hidden() const { return static_cast<int>(w_xi.cols()); }
};

Tensor lstm_forward(const Tensor& x, const LstmParams& params);

struct AttentionHeadParams {
  Tensor w_q, w_k, w_v;  // d x d_k each
};

struct MhaParams {
  std::vector<AttentionHeadParams> heads;
  Tensor w_out;  // d x d

  static MhaParams init(int d, int n_head, std::mt19937_64& rng);
  void collect(ParameterSet& out, const std::string& prefix) const;
};

// Scaled dot-product attention per head (scale 1/sqrt(d_k)), concatenated
// and projected by w_out.
Tensor multi_head_attention(const Tensor& h, const MhaParams& params);

struct MlpParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  // sizes = {in, hidden..., out}
  static MlpParams init(const std::vector<int>& sizes, std::mt19937_64& rng);
  void collect(ParameterSet& out, const std::string& prefix) const;
};

// Affine chain with `act` between hidden layers; the last layer is linear.
Tensor mlp_forward(const Tensor& x, const MlpParams& params, const Activation& act);

// sigma(Dv^-1/2 H W De^-1 H^T Dv^-1/2 X Theta). Structure comes from the
// snapshot; edge_weights (n_edges x 1) overrides the stored weights so
// gradients can flow into them — pass undefined to use the snapshot's.
Tensor hypergraph_conv(const Tensor& x, const hypergraph::HypergraphSnapshot& snapshot,
                       const Tensor& theta, const Activation& act,
                       const Tensor& edge_weights = {});

Tensor mse_loss(const Tensor& pred, const Tensor& target);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::map<std::string, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> moments;
};

// One Adam update over every parameter using the gradients currently stored
// on the tensors. Throws NumericError on a non-finite gradient.
void adam_step(ParameterSet& params, AdamState& state, double lr);

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
};

// Central finite differences (default step 1e-5) vs reverse-mode gradients
// of a scalar-valued closure over the given parameters.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParameterSet& params,
                           double step = 1e-5);

// Binary checkpoint: 4-byte magic "DHNN", version byte, length-prefixed
// header text, then named records of row-major 64-bit values.
void save_checkpoint(std::ostream& out,
                     const std::vector<std::pair<std::string, Tensor>>& named,
                     const std::string& header = "");
struct Checkpoint {
  std::string header;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
};
Checkpoint load_checkpoint(std::istream& in);
// Assigns checkpoint values into an existing set; names/shapes must match.
void apply_checkpoint(const Checkpoint& ckpt, ParameterSet& params);

}  // namespace dhnn::neural
