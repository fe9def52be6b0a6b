#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "dhnn/common.hpp"
#include "dhnn/community.hpp"

namespace dhnn::hypergraph {

enum class EdgeSource { kCom, kAtt };

struct Hyperedge {
  std::vector<int> nodes;  // sorted ascending, unique
  EdgeSource source = EdgeSource::kCom;
};

// One static hypergraph: tagged hyperedges over n_nodes vertices plus the
// diagonal weight/degree data the convolution consumes. Immutable after
// assembly; the incidence matrix is materialized on demand.
struct HypergraphSnapshot {
  int n_nodes = 0;
  std::vector<Hyperedge> hyperedges;
  std::vector<double> weights;        // diagonal of W, all > 0
  std::vector<double> vertex_degrees; // d(v) = sum_e w(e) h(v,e)
  std::vector<int> edge_degrees;      // delta(e) = |e|
  long window_end = 0;

  int n_edges() const { return static_cast<int>(hyperedges.size()); }
  Eigen::MatrixXd incidence_dense() const;  // n_nodes x n_edges, 0/1
  void validate() const;
};

std::vector<Hyperedge> hyperedges_from_partition(const community::Partition& partition,
                                                 EdgeSource tag);

// w(e) = sum over ordered pairs (u, v) in e, u != v, of |a(u, v)|, floored
// at kWeightFloor (singletons and zero-attention edges land on the floor).
inline constexpr double kWeightFloor = 1e-6;
double hyperedge_weight(const std::vector<int>& edge, const Eigen::MatrixXd& attention);

// COM edges followed by ATT edges; duplicated node sets are kept distinct.
HypergraphSnapshot assemble_snapshot(const std::vector<Hyperedge>& com_edges,
                                     const std::vector<Hyperedge>& att_edges,
                                     const Eigen::MatrixXd& attention,
                                     int n_nodes, long window_end);

// Line-oriented text format:
//   SNAPSHOT window_end=<t> nodes=<N>
//   <COM|ATT> <weight> <node indices...>
std::string serialize_snapshot(const HypergraphSnapshot& snapshot);
HypergraphSnapshot deserialize_snapshot(const std::string& text);

void write_snapshot_archive(std::ostream& out, const std::vector<HypergraphSnapshot>& snapshots);
std::vector<HypergraphSnapshot> read_snapshot_archive(std::istream& in);

}  // namespace dhnn::hypergraph
