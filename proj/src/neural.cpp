#include "dhnn/neural.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace dhnn::neural {

namespace {

void require_shape(const Tensor& t, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (t.rows() != rows || t.cols() != cols) {
    throw std::invalid_argument(std::string(name) + ": expected " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + std::to_string(t.rows()) + "x" +
                                std::to_string(t.cols()));
  }
}

}  // namespace

void ParameterSet::add(const std::string& name, Tensor t) {
  if (!t.defined() || !t.requires_grad()) {
    throw std::invalid_argument("parameter '" + name + "' must be a defined trainable tensor");
  }
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(t));
}

void ParameterSet::merge(const ParameterSet& other) {
  for (const auto& [name, t] : other.items_) add(name, t);
}

bool ParameterSet::contains(const std::string& name) const { return index_.count(name) > 0; }

Tensor& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
  return items_[it->second].second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
  return items_[it->second].second;
}

void ParameterSet::zero_grads() {
  for (auto& [name, t] : items_) t.zero_grad();
}

Tensor init_weight(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(rows));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = dist(rng);
  }
  return Tensor::parameter(std::move(w));
}

Tensor init_bias(Eigen::Index cols) {
  return Tensor::parameter(Eigen::MatrixXd::Zero(1, cols));
}

GruParams GruParams::init(int n_in, int hidden, std::mt19937_64& rng) {
  GruParams p;
  p.w_xr = init_weight(n_in, hidden, rng);
  p.w_zr = init_weight(hidden, hidden, rng);
  p.w_xu = init_weight(n_in, hidden, rng);
  p.w_zu = init_weight(hidden, hidden, rng);
  p.w_xz = init_weight(n_in, hidden, rng);
  p.w_zz = init_weight(hidden, hidden, rng);
  p.b_r = init_bias(hidden);
  p.b_u = init_bias(hidden);
  p.b_z = init_bias(hidden);
  return p;
}

void GruParams::collect(ParameterSet& out, const std::string& prefix) const {
  out.add(prefix + "w_xr", w_xr);
  out.add(prefix + "w_zr", w_zr);
  out.add(prefix + "w_xu", w_xu);
  out.add(prefix + "w_zu", w_zu);
  out.add(prefix + "w_xz", w_xz);
  out.add(prefix + "w_zz", w_zz);
  out.add(prefix + "b_r", b_r);
  out.add(prefix + "b_u", b_u);
  out.add(prefix + "b_z", b_z);
}

void GruParams::validate(Eigen::Index n_in) const {
  const Eigen::Index h = w_xr.cols();
  require_shape(w_xr, n_in, h, "w_xr");
  require_shape(w_xu, n_in, h, "w_xu");
  require_shape(w_xz, n_in, h, "w_xz");
  require_shape(w_zr, h, h, "w_zr");
  require_shape(w_zu, h, h, "w_zu");
  require_shape(w_zz, h, h, "w_zz");
  require_shape(b_r, 1, h, "b_r");
  require_shape(b_u, 1, h, "b_u");
  require_shape(b_z, 1, h, "b_z");
}

Tensor gru_forward(const Tensor& x, const GruParams& params, const Tensor& z0) {
  params.validate(x.cols());
  const Eigen::Index m = x.rows();
  const int h = params.hidden();
  Tensor z = z0.defined() ? z0 : Tensor::zeros(1, h);
  require_shape(z, 1, h, "z0");

  Tensor ones = Tensor::constant(Eigen::MatrixXd::Ones(1, h));
  std::vector<Tensor> states;
  states.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index t = 0; t < m; ++t) {
    Tensor xt = slice_rows(x, t, 1);
    Tensor r = sigmoid(matmul(xt, params.w_xr) + matmul(z, params.w_zr) + params.b_r);
    Tensor u = sigmoid(matmul(xt, params.w_xu) + matmul(z, params.w_zu) + params.b_u);
    Tensor cand = tanh(matmul(xt, params.w_xz) + matmul(cmul(r, z), params.w_zz) + params.b_z);
    z = cmul(u, z) + cmul(ones - u, cand);
    states.push_back(z);
  }
  return concat_rows(states);
}

Tensor latent_attention(const Tensor& z, const Tensor& w_q, const Tensor& w_k, int n_nodes) {
  if (w_q.rows() != z.cols() || w_k.rows() != z.cols() || w_q.cols() != w_k.cols()) {
    throw std::invalid_argument("latent_attention: projection shapes inconsistent with input");
  }
  if (n_nodes < 1) throw std::invalid_argument("latent_attention: n_nodes must be >= 1");
  Tensor q = matmul(z, w_q);
  Tensor k = matmul(z, w_k);
  Tensor scores = scale(matmul(transpose(q), k), 1.0 / std::sqrt(static_cast<double>(n_nodes)));
  return softmax_rows(scores);
}

LstmParams LstmParams::init(int n_in, int hidden, std::mt19937_64& rng) {
  LstmParams p;
  p.w_xi = init_weight(n_in, hidden, rng);
  p.w_hi = init_weight(hidden, hidden, rng);
  p.b_i = init_bias(hidden);
  p.w_xf = init_weight(n_in, hidden, rng);
  p.w_hf = init_weight(hidden, hidden, rng);
  p.b_f = init_bias(hidden);
  p.w_xo = init_weight(n_in, hidden, rng);
  p.w_ho = init_weight(hidden, hidden, rng);
  p.b_o = init_bias(hidden);
  p.w_xg = init_weight(n_in, hidden, rng);
  p.w_hg = init_weight(hidden, hidden, rng);
  p.b_g = init_bias(hidden);
  return p;
}

void LstmParams::collect(ParameterSet& out, const std::string& prefix) const {
  out.add(prefix + "w_xi", w_xi);
  out.add(prefix + "w_hi", w_hi);
  out.add(prefix + "b_i", b_i);
  out.add(prefix + "w_xf", w_xf);
  out.add(prefix + "w_hf", w_hf);
  out.add(prefix + "b_f", b_f);
  out.add(prefix + "w_xo", w_xo);
  out.add(prefix + "w_ho", w_ho);
  out.add(prefix + "b_o", b_o);
  out.add(prefix + "w_xg", w_xg);
  out.add(prefix + "w_hg", w_hg);
  out.add(prefix + "b_g", b_g);
}

void LstmParams::validate(Eigen::Index n_in) const {
  const Eigen::Index h = w_xi.cols();
  require_shape(w_xi, n_in, h, "w_xi");
  require_shape(w_xf, n_in, h, "w_xf");
  require_shape(w_xo, n_in, h, "w_xo");
  require_shape(w_xg, n_in, h, "w_xg");
  require_shape(w_hi, h, h, "w_hi");
  require_shape(w_hf, h, h, "w_hf");
  require_shape(w_ho, h, h, "w_ho");
  require_shape(w_hg, h, h, "w_hg");
  require_shape(b_i, 1, h, "b_i");
  require_shape(b_f, 1, h, "b_f");
  require_shape(b_o, 1, h, "b_o");
  require_shape(b_g, 1, h, "b_g");
}

Tensor lstm_forward(const Tensor& x, const LstmParams& params) {
  params.validate(x.cols());
  const Eigen::Index m = x.rows();
  const int h = params.hidden();
  Tensor hidden = Tensor::zeros(1, h);
  Tensor cell = Tensor::zeros(1, h);

  std::vector<Tensor> states;
  states.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index t = 0; t < m; ++t) {
    Tensor xt = slice_rows(x, t, 1);
    Tensor i = sigmoid(matmul(xt, params.w_xi) + matmul(hidden, params.w_hi) + params.b_i);
    Tensor f = sigmoid(matmul(xt, params.w_xf) + matmul(hidden, params.w_hf) + params.b_f);
    Tensor o = sigmoid(matmul(xt, params.w_xo) + matmul(hidden, params.w_ho) + params.b_o);
    Tensor g = tanh(matmul(xt, params.w_xg) + matmul(hidden, params.w_hg) + params.b_g);
    cell = cmul(f, cell) + cmul(i, g);
    hidden = cmul(o, tanh(cell));
    states.push_back(hidden);
  }
  return concat_rows(states);
}

MhaParams MhaParams::init(int d, int n_head, std::mt19937_64& rng) {
  if (n_head < 1 || d % n_head != 0) {
    throw std::invalid_argument("multi-head attention: d = " + std::to_string(d) +
                                " not divisible by n_head = " + std::to_string(n_head));
  }
  const int dk = d / n_head;
  MhaParams p;
  for (int k = 0; k < n_head; ++k) {
    AttentionHeadParams head;
    head.w_q = init_weight(d, dk, rng);
    head.w_k = init_weight(d, dk, rng);
    head.w_v = init_weight(d, dk, rng);
    p.heads.push_back(std::move(head));
  }
  p.w_out = init_weight(d, d, rng);
  return p;
}

void MhaParams::collect(ParameterSet& out, const std::string& prefix) const {
  for (std::size_t k = 0; k < heads.size(); ++k) {
    const std::string hp = prefix + "h" + std::to_string(k) + ".";
    out.add(hp + "w_q", heads[k].w_q);
    out.add(hp + "w_k", heads[k].w_k);
    out.add(hp + "w_v", heads[k].w_v);
  }
  out.add(prefix + "w_out", w_out);
}

Tensor multi_head_attention(const Tensor& h, const MhaParams& params) {
  const Eigen::Index d = h.cols();
  if (params.heads.empty()) throw std::invalid_argument("multi-head attention: no heads");
  const Eigen::Index dk = params.heads.front().w_q.cols();
  if (dk * static_cast<Eigen::Index>(params.heads.size()) != d) {
    throw std::invalid_argument("multi-head attention: head dims do not tile d");
  }
  require_shape(params.w_out, d, d, "w_out");

  std::vector<Tensor> outputs;
  outputs.reserve(params.heads.size());
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));
  for (const auto& head : params.heads) {
    require_shape(head.w_q, d, dk, "w_q");
    require_shape(head.w_k, d, dk, "w_k");
    require_shape(head.w_v, d, dk, "w_v");
    Tensor q = matmul(h, head.w_q);
    Tensor k = matmul(h, head.w_k);
    Tensor v = matmul(h, head.w_v);
    Tensor alpha = softmax_rows(scale(matmul(q, transpose(k)), inv_scale));
    outputs.push_back(matmul(alpha, v));
  }
  return matmul(concat_cols(outputs), params.w_out);
}

MlpParams MlpParams::init(const std::vector<int>& sizes, std::mt19937_64& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("MLP needs at least input and output sizes");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    p.weights.push_back(init_weight(sizes[i], sizes[i + 1], rng));
    p.biases.push_back(init_bias(sizes[i + 1]));
  }
  return p;
}

void MlpParams::collect(ParameterSet& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.add(prefix + "l" + std::to_string(i) + ".w", weights[i]);
    out.add(prefix + "l" + std::to_string(i) + ".b", biases[i]);
  }
}

Tensor mlp_forward(const Tensor& x, const MlpParams& params, const Activation& act) {
  if (params.weights.empty() || params.weights.size() != params.biases.size()) {
    throw std::invalid_argument("MLP parameters empty or inconsistent");
  }
  Tensor h = x;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    h = add_rows(matmul(h, params.weights[i]), params.biases[i]);
    if (i + 1 < params.weights.size()) h = act(h);
  }
  return h;
}

Tensor hypergraph_conv(const Tensor& x, const hypergraph::HypergraphSnapshot& snapshot,
                       const Tensor& theta, const Activation& act, const Tensor& edge_weights) {
  if (x.rows() != snapshot.n_nodes) {
    throw std::invalid_argument("hypergraph_conv: feature rows " + std::to_string(x.rows()) +
                                " != node count " + std::to_string(snapshot.n_nodes));
  }
  if (theta.rows() != x.cols()) {
    throw std::invalid_argument("hypergraph_conv: theta rows " + std::to_string(theta.rows()) +
                                " != feature dim " + std::to_string(x.cols()));
  }
  const int ne = snapshot.n_edges();
  Tensor w;
  if (edge_weights.defined()) {
    require_shape(edge_weights, ne, 1, "edge_weights");
    w = edge_weights;
  } else {
    Eigen::MatrixXd wv(ne, 1);
    for (int e = 0; e < ne; ++e) wv(e, 0) = snapshot.weights[static_cast<std::size_t>(e)];
    w = Tensor::constant(std::move(wv));
  }

  Tensor incidence = Tensor::constant(snapshot.incidence_dense());
  Eigen::MatrixXd inv_edge_deg(ne, 1);
  for (int e = 0; e < ne; ++e) {
    inv_edge_deg(e, 0) = 1.0 / static_cast<double>(snapshot.edge_degrees[static_cast<std::size_t>(e)]);
  }

  // d(v) = sum_e w(e) h(v,e); rsqrt rejects zero degrees.
  Tensor dv = matmul(incidence, w);
  Tensor dv_inv_sqrt = rsqrt(dv);

  Tensor x_in = scale_rows(x, dv_inv_sqrt);                      // Dv^-1/2 X
  Tensor per_edge = matmul(transpose(incidence), x_in);          // H^T ...
  Tensor mixed = scale_rows(per_edge, cmul(w, Tensor::constant(inv_edge_deg)));  // W De^-1 ...
  Tensor back = matmul(incidence, mixed);                        // H ...
  Tensor propagated = scale_rows(back, dv_inv_sqrt);             // Dv^-1/2 ...
  return act(matmul(propagated, theta));
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("mse_loss: shape mismatch " + std::to_string(pred.rows()) + "x" +
                                std::to_string(pred.cols()) + " vs " + std::to_string(target.rows()) +
                                "x" + std::to_string(target.cols()));
  }
  Tensor diff = pred - target;
  return mean_all(cmul(diff, diff));
}

void adam_step(ParameterSet& params, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be > 0");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, t] : params.items()) {
    const Eigen::MatrixXd& g = t.grad();
    if (!g.allFinite()) throw NumericError("non-finite gradient for parameter '" + name + "'");
    auto [it, inserted] = state.moments.try_emplace(name);
    auto& [m, v] = it->second;
    if (inserted) {
      m.setZero(g.rows(), g.cols());
      v.setZero(g.rows(), g.cols());
    }
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    Eigen::MatrixXd m_hat = m / bc1;
    Eigen::MatrixXd v_hat = v / bc2;
    Eigen::MatrixXd update =
        lr * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + state.eps).matrix());
    t.set_value(t.value() - update);
  }
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParameterSet& params,
                           double step) {
  Tensor loss = loss_fn();
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("grad_check: loss closure must return a scalar");
  }
  backward(loss);

  GradCheckReport report;
  for (auto& [name, t] : params.items()) {
    Eigen::MatrixXd analytic = t.grad();
    Eigen::MatrixXd values = t.value();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      for (Eigen::Index j = 0; j < values.cols(); ++j) {
        Eigen::MatrixXd bumped = values;
        bumped(i, j) = values(i, j) + step;
        t.set_value(bumped);
        const double up = loss_fn().value()(0, 0);
        bumped(i, j) = values(i, j) - step;
        t.set_value(bumped);
        const double down = loss_fn().value()(0, 0);
        t.set_value(values);
        const double fd = (up - down) / (2.0 * step);
        const double ad = analytic(i, j);
        const double denom = std::max({std::abs(fd), std::abs(ad), 1.0});
        worst = std::max(worst, std::abs(fd - ad) / denom);
      }
    }
    report.entries.push_back({name, worst});
    report.max_rel_err = std::max(report.max_rel_err, worst);
  }
  return report;
}

namespace {

constexpr char kMagic[4] = {'D', 'H', 'N', 'N'};
constexpr std::uint8_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("checkpoint truncated");
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const std::vector<std::pair<std::string, Tensor>>& named,
                     const std::string& header) {
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  write_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.rows()));
    write_u32(out, static_cast<std::uint32_t>(t.cols()));
    const Eigen::MatrixXd& v = t.value();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const double x = v(i, j);
        out.write(reinterpret_cast<const char*>(&x), sizeof(x));
      }
    }
  }
  if (!out) throw DataError("checkpoint write failed");
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DataError("bad checkpoint magic");
  const int version = in.get();
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint32_t header_len = read_u32(in);
  ckpt.header.resize(header_len);
  in.read(ckpt.header.data(), header_len);
  if (!in) throw DataError("checkpoint truncated");
  const std::uint32_t count = read_u32(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    Eigen::MatrixXd v(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) {
        double x = 0.0;
        in.read(reinterpret_cast<char*>(&x), sizeof(x));
        v(i, j) = x;
      }
    }
    if (!in) throw DataError("checkpoint truncated in record '" + name + "'");
    ckpt.tensors.emplace_back(std::move(name), std::move(v));
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, ParameterSet& params) {
  if (ckpt.tensors.size() != params.size()) {
    throw DataError("checkpoint has " + std::to_string(ckpt.tensors.size()) +
                    " tensors, expected " + std::to_string(params.size()));
  }
  for (const auto& [name, value] : ckpt.tensors) {
    if (!params.contains(name)) throw DataError("checkpoint names unknown parameter '" + name + "'");
    Tensor& t = params.at(name);
    if (t.rows() != value.rows() || t.cols() != value.cols()) {
      throw DataError("checkpoint shape mismatch for '" + name + "'");
    }
    t.set_value(value);
  }
}

}  // namespace dhnn::neural
