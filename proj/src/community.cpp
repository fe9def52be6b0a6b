#include "dhnn/community.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dhnn::community {

namespace {

constexpr double kGainTolerance = 1e-12;
constexpr int kMaxAggregationPasses = 100;

std::vector<int> compact_labels(const std::vector<int>& raw, int* n_out) {
  std::vector<int> remap(raw.size(), -1);
  std::vector<int> out(raw.size());
  int next = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    int r = raw[i];
    if (remap[static_cast<std::size_t>(r)] < 0) remap[static_cast<std::size_t>(r)] = next++;
    out[i] = remap[static_cast<std::size_t>(r)];
  }
  if (n_out) *n_out = next;
  return out;
}

// One round of seeded local moves on an explicit B matrix. A node may move
// to any community with maximal positive gain, including a currently empty
// one (escape move for negatively attached nodes). Returns true if any node
// changed community.
bool local_moves(const Eigen::MatrixXd& b, std::vector<int>& labels, std::mt19937_64& rng) {
  const int n = static_cast<int>(b.rows());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<int> size(static_cast<std::size_t>(n), 0);
  for (int label : labels) ++size[static_cast<std::size_t>(label)];

  bool any_move = false;
  bool improved = true;
  std::vector<double> strength(static_cast<std::size_t>(n), 0.0);
  while (improved) {
    improved = false;
    for (int node : order) {
      const int current = labels[static_cast<std::size_t>(node)];
      std::fill(strength.begin(), strength.end(), 0.0);
      for (int j = 0; j < n; ++j) {
        if (j == node) continue;
        strength[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += b(node, j);
      }
      const double here = strength[static_cast<std::size_t>(current)];
      int best = current;
      double best_gain = 0.0;
      for (int c = 0; c < n; ++c) {
        if (c == current || size[static_cast<std::size_t>(c)] == 0) continue;
        const double gain = strength[static_cast<std::size_t>(c)] - here;
        if (gain > best_gain + kGainTolerance) {
          best_gain = gain;
          best = c;
        }
      }
      if (size[static_cast<std::size_t>(current)] > 1 && -here > best_gain + kGainTolerance) {
        for (int c = 0; c < n; ++c) {
          if (size[static_cast<std::size_t>(c)] == 0) {
            best = c;
            best_gain = -here;
            break;
          }
        }
      }
      if (best != current && best_gain > kGainTolerance) {
        labels[static_cast<std::size_t>(node)] = best;
        --size[static_cast<std::size_t>(current)];
        ++size[static_cast<std::size_t>(best)];
        improved = true;
        any_move = true;
      }
    }
  }
  return any_move;
}

Eigen::MatrixXd aggregate(const Eigen::MatrixXd& b, const std::vector<int>& labels, int n_comms) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_comms, n_comms);
  const int n = static_cast<int>(b.rows());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out(labels[static_cast<std::size_t>(i)], labels[static_cast<std::size_t>(j)]) += b(i, j);
    }
  }
  return out;
}

}  // namespace

void ModularityMatrix::validate() const {
  const Eigen::Index n = b_matrix.rows();
  if (n < 1 || b_matrix.cols() != n) throw DataError("modularity matrix must be square");
  if (!b_matrix.isApprox(b_matrix.transpose(), 1e-10)) {
    throw DataError("modularity matrix must be symmetric");
  }
  if (norm == 0.0) throw DataError("modularity normalizer is zero");
}

ModularityMatrix build_modularity_configuration(const Eigen::MatrixXd& adjacency) {
  const Eigen::Index n = adjacency.rows();
  if (n < 1 || adjacency.cols() != n) throw DataError("adjacency must be square");
  if (!adjacency.isApprox(adjacency.transpose(), 1e-10)) throw DataError("adjacency must be symmetric");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) throw DataError("adjacency diagonal must be zero");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (adjacency(i, j) < 0.0) throw DataError("adjacency must be nonnegative");
    }
  }
  const double two_l = adjacency.sum();
  if (two_l <= 0.0) throw DataError("adjacency has no edges");

  Eigen::VectorXd degree = adjacency.rowwise().sum();
  ModularityMatrix mod;
  mod.kind = ModularityKind::kConfiguration;
  mod.norm = two_l;
  mod.b_matrix = adjacency - (degree * degree.transpose()) / two_l;
  return mod;
}

ModularityMatrix build_modularity_filtered(const Eigen::MatrixXd& structural, double c_norm) {
  const Eigen::Index n = structural.rows();
  if (n < 1 || structural.cols() != n) throw DataError("structural matrix must be square");
  if (!structural.isApprox(structural.transpose(), 1e-10)) {
    throw DataError("structural matrix must be symmetric");
  }
  if (c_norm == 0.0) throw DataError("correlation normalizer C_norm is zero");
  ModularityMatrix mod;
  mod.kind = ModularityKind::kRmtFiltered;
  mod.norm = c_norm;
  mod.b_matrix = structural;
  mod.b_matrix.diagonal().setZero();
  return mod;
}

ModularityMatrix build_modularity_raw(const Eigen::MatrixXd& matrix, double norm) {
  ModularityMatrix mod = build_modularity_filtered(matrix, norm);
  return mod;
}

double modularity_of(const ModularityMatrix& mod, const std::vector<int>& assignment) {
  const Eigen::Index n = mod.size();
  if (static_cast<Eigen::Index>(assignment.size()) != n) {
    throw DataError("assignment length does not match matrix size");
  }
  double q = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (assignment[static_cast<std::size_t>(i)] == assignment[static_cast<std::size_t>(j)]) {
        q += mod.b_matrix(i, j);
      }
    }
  }
  return q / mod.norm;
}

namespace {

// One seeded greedy run: node-level sweeps alternating with hierarchical
// aggregation sweeps until neither finds an improving move. The node-level
// sweep doubles as a refinement pass, letting single nodes cross community
// boundaries that aggregation would otherwise freeze.
std::vector<int> louvain_once(const Eigen::MatrixXd& b, std::mt19937_64& rng) {
  const int n = static_cast<int>(b.rows());
  std::vector<int> node_labels(static_cast<std::size_t>(n));
  std::iota(node_labels.begin(), node_labels.end(), 0);

  for (int outer = 0; outer < kMaxAggregationPasses; ++outer) {
    const bool node_changed = local_moves(b, node_labels, rng);

    int k = 0;
    node_labels = compact_labels(node_labels, &k);
    bool agg_changed = false;
    if (k > 1) {
      Eigen::MatrixXd level = aggregate(b, node_labels, k);
      std::vector<int> map(static_cast<std::size_t>(k));
      std::iota(map.begin(), map.end(), 0);
      for (int pass = 0; pass < kMaxAggregationPasses && level.rows() > 1; ++pass) {
        std::vector<int> labels(static_cast<std::size_t>(level.rows()));
        std::iota(labels.begin(), labels.end(), 0);
        if (!local_moves(level, labels, rng)) break;
        int kk = 0;
        labels = compact_labels(labels, &kk);
        for (auto& m : map) m = labels[static_cast<std::size_t>(m)];
        agg_changed = true;
        if (kk == static_cast<int>(level.rows())) break;
        level = aggregate(level, labels, kk);
      }
      if (agg_changed) {
        for (auto& lab : node_labels) lab = map[static_cast<std::size_t>(lab)];
      }
    }
    if (!node_changed && !agg_changed) break;
  }
  return node_labels;
}

constexpr int kRestarts = 4;

}  // namespace

Partition detect_communities(const ModularityMatrix& mod, std::uint64_t seed) {
  mod.validate();

  // Maximizing Q is maximizing sum(B_ij within communities) for norm > 0;
  // flip the working matrix when the normalizer is negative.
  const Eigen::MatrixXd working = mod.norm > 0.0 ? mod.b_matrix : Eigen::MatrixXd(-mod.b_matrix);

  // Restarts rerun the greedy under different seeded visit orders; the best
  // scoring partition wins, first hit on ties.
  Partition best;
  for (int restart = 0; restart < kRestarts; ++restart) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(restart)));
    Partition part;
    part.assignment = compact_labels(louvain_once(working, rng), &part.n_communities);
    part.modularity = modularity_of(mod, part.assignment);
    if (restart == 0 || part.modularity > best.modularity + kGainTolerance) {
      best = std::move(part);
    }
  }
  return best;
}

Eigen::MatrixXd symmetrize_attention(const Eigen::MatrixXd& attention) {
  const Eigen::Index n = attention.rows();
  if (attention.cols() != n) throw DataError("attention matrix must be square");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (attention(i, j) < -1e-12 || attention(i, j) > 1.0 + 1e-12) {
        throw DataError("attention entries must lie in [0, 1]");
      }
    }
  }
  Eigen::MatrixXd sym = 0.5 * (attention + attention.transpose());
  sym.diagonal().setZero();
  return sym;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty()) throw DataError("ARI needs two equal-length labelings");
  const int ka = 1 + *std::max_element(a.begin(), a.end());
  const int kb = 1 + *std::max_element(b.begin(), b.end());
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ka, kb);
  for (std::size_t i = 0; i < a.size(); ++i) table(a[i], b[i]) += 1.0;

  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  for (int i = 0; i < ka; ++i) {
    for (int j = 0; j < kb; ++j) index += choose2(table(i, j));
  }
  double sum_a = 0.0;
  for (int i = 0; i < ka; ++i) sum_a += choose2(table.row(i).sum());
  double sum_b = 0.0;
  for (int j = 0; j < kb; ++j) sum_b += choose2(table.col(j).sum());
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (index - expected) / (max_index - expected);
}

}  // namespace dhnn::community
