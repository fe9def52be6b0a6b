#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dhnn/common.hpp"

namespace dhnn::community {

struct Partition {
  std::vector<int> assignment;  // community label per node, 0..n_communities-1
  int n_communities = 0;
  double modularity = 0.0;
};

enum class ModularityKind { kConfiguration, kRmtFiltered };

// Explicit modularity matrix: Q(eta) = (1/norm) * sum_ij B_ij [eta_i == eta_j].
struct ModularityMatrix {
  Eigen::MatrixXd b_matrix;
  double norm = 0.0;
  ModularityKind kind = ModularityKind::kConfiguration;

  Eigen::Index size() const { return b_matrix.rows(); }
  void validate() const;
};

// Configuration-model form: B_ij = A_ij - k_i k_j / (2l), norm = 2l.
ModularityMatrix build_modularity_configuration(const Eigen::MatrixXd& adjacency);

// RMT-filtered form: B = structural part with zeroed diagonal, norm = sum of
// all entries of the unfiltered correlation matrix.
ModularityMatrix build_modularity_filtered(const Eigen::MatrixXd& structural,
                                           double c_norm);

// Null-model-free form: B as given (diagonal zeroed), norm as given.
ModularityMatrix build_modularity_raw(const Eigen::MatrixXd& matrix, double norm);

double modularity_of(const ModularityMatrix& mod, const std::vector<int>& assignment);

// Greedy agglomerative optimization over the explicit B matrix: seeded local
// moves from singletons, aggregation, repeat until no move gains more than
// 1e-12. Labels are compacted by first appearance.
Partition detect_communities(const ModularityMatrix& mod, std::uint64_t seed);

// (A + A^T) / 2 with zeroed diagonal.
Eigen::MatrixXd symmetrize_attention(const Eigen::MatrixXd& attention);

// Similarity of two labelings in [-1, 1]; 1 for identical partitions.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace dhnn::community
