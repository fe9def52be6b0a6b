#include "dhnn/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace dhnn::hypergraph {

namespace {

const char* tag_name(EdgeSource s) { return s == EdgeSource::kCom ? "COM" : "ATT"; }

EdgeSource parse_tag(const std::string& s, int line_no) {
  if (s == "COM") return EdgeSource::kCom;
  if (s == "ATT") return EdgeSource::kAtt;
  throw DataError("snapshot line " + std::to_string(line_no) + ": unknown edge tag '" + s + "'");
}

}  // namespace

Eigen::MatrixXd HypergraphSnapshot::incidence_dense() const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_nodes, n_edges());
  for (int e = 0; e < n_edges(); ++e) {
    for (int v : hyperedges[static_cast<std::size_t>(e)].nodes) h(v, e) = 1.0;
  }
  return h;
}

void HypergraphSnapshot::validate() const {
  if (n_nodes < 1) throw DataError("snapshot has no nodes");
  if (hyperedges.empty()) throw DataError("snapshot has no hyperedges");
  if (weights.size() != hyperedges.size() || edge_degrees.size() != hyperedges.size() ||
      vertex_degrees.size() != static_cast<std::size_t>(n_nodes)) {
    throw DataError("snapshot field sizes inconsistent");
  }
  std::vector<char> covered(static_cast<std::size_t>(n_nodes), 0);
  for (std::size_t e = 0; e < hyperedges.size(); ++e) {
    const auto& nodes = hyperedges[e].nodes;
    if (nodes.empty()) throw DataError("snapshot hyperedge " + std::to_string(e) + " is empty");
    if (weights[e] <= 0.0) throw DataError("snapshot hyperedge " + std::to_string(e) + " weight must be > 0");
    if (edge_degrees[e] != static_cast<int>(nodes.size())) {
      throw DataError("snapshot hyperedge " + std::to_string(e) + " degree mismatch");
    }
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k] < 0 || nodes[k] >= n_nodes) {
        throw DataError("snapshot hyperedge " + std::to_string(e) + " node index out of range");
      }
      if (k > 0 && nodes[k] <= nodes[k - 1]) {
        throw DataError("snapshot hyperedge " + std::to_string(e) + " nodes must be strictly ascending");
      }
      covered[static_cast<std::size_t>(nodes[k])] = 1;
    }
  }
  for (int v = 0; v < n_nodes; ++v) {
    if (!covered[static_cast<std::size_t>(v)]) {
      throw DataError("node " + std::to_string(v) + " belongs to no hyperedge");
    }
    double d = 0.0;
    for (std::size_t e = 0; e < hyperedges.size(); ++e) {
      if (std::binary_search(hyperedges[e].nodes.begin(), hyperedges[e].nodes.end(), v)) {
        d += weights[e];
      }
    }
    if (std::abs(d - vertex_degrees[static_cast<std::size_t>(v)]) > 1e-10) {
      throw DataError("vertex degree mismatch at node " + std::to_string(v));
    }
  }
}

std::vector<Hyperedge> hyperedges_from_partition(const community::Partition& partition,
                                                 EdgeSource tag) {
  std::vector<Hyperedge> edges(static_cast<std::size_t>(partition.n_communities));
  for (auto& e : edges) e.source = tag;
  for (std::size_t v = 0; v < partition.assignment.size(); ++v) {
    edges[static_cast<std::size_t>(partition.assignment[v])].nodes.push_back(static_cast<int>(v));
  }
  return edges;
}

double hyperedge_weight(const std::vector<int>& edge, const Eigen::MatrixXd& attention) {
  if (edge.empty()) throw DataError("hyperedge weight of an empty edge");
  double w = 0.0;
  for (int u : edge) {
    if (u < 0 || u >= attention.rows()) throw DataError("hyperedge node index out of range");
    for (int v : edge) {
      if (u == v) continue;
      w += std::abs(attention(u, v));
    }
  }
  return w < kWeightFloor ? kWeightFloor : w;
}

HypergraphSnapshot assemble_snapshot(const std::vector<Hyperedge>& com_edges,
                                     const std::vector<Hyperedge>& att_edges,
                                     const Eigen::MatrixXd& attention,
                                     int n_nodes, long window_end) {
  if (com_edges.empty() && att_edges.empty()) throw DataError("snapshot needs at least one hyperedge");
  if (attention.rows() != n_nodes || attention.cols() != n_nodes) {
    throw DataError("attention matrix size does not match node count");
  }
  HypergraphSnapshot snap;
  snap.n_nodes = n_nodes;
  snap.window_end = window_end;
  snap.hyperedges = com_edges;
  snap.hyperedges.insert(snap.hyperedges.end(), att_edges.begin(), att_edges.end());
  for (auto& e : snap.hyperedges) std::sort(e.nodes.begin(), e.nodes.end());

  snap.weights.reserve(snap.hyperedges.size());
  snap.edge_degrees.reserve(snap.hyperedges.size());
  for (const auto& e : snap.hyperedges) {
    snap.weights.push_back(hyperedge_weight(e.nodes, attention));
    snap.edge_degrees.push_back(static_cast<int>(e.nodes.size()));
  }
  snap.vertex_degrees.assign(static_cast<std::size_t>(n_nodes), 0.0);
  for (std::size_t e = 0; e < snap.hyperedges.size(); ++e) {
    for (int v : snap.hyperedges[e].nodes) {
      snap.vertex_degrees[static_cast<std::size_t>(v)] += snap.weights[e];
    }
  }
  snap.validate();
  return snap;
}

std::string serialize_snapshot(const HypergraphSnapshot& snapshot) {
  std::ostringstream out;
  out << "SNAPSHOT window_end=" << snapshot.window_end << " nodes=" << snapshot.n_nodes << "\n";
  for (std::size_t e = 0; e < snapshot.hyperedges.size(); ++e) {
    out << tag_name(snapshot.hyperedges[e].source) << ' ' << format_double(snapshot.weights[e]);
    for (int v : snapshot.hyperedges[e].nodes) out << ' ' << v;
    out << '\n';
  }
  return out.str();
}

HypergraphSnapshot deserialize_snapshot(const std::string& text) {
  std::istringstream in(text);
  auto snaps = read_snapshot_archive(in);
  if (snaps.size() != 1) throw DataError("expected exactly one snapshot record");
  return std::move(snaps.front());
}

void write_snapshot_archive(std::ostream& out, const std::vector<HypergraphSnapshot>& snapshots) {
  for (const auto& s : snapshots) out << serialize_snapshot(s);
}

std::vector<HypergraphSnapshot> read_snapshot_archive(std::istream& in) {
  std::vector<HypergraphSnapshot> out;
  HypergraphSnapshot current;
  bool open = false;
  std::string line;
  int line_no = 0;

  auto finish = [&]() {
    if (!open) return;
    if (current.hyperedges.empty()) {
      throw DataError("snapshot record for window_end=" + std::to_string(current.window_end) +
                      " has no hyperedges");
    }
    current.vertex_degrees.assign(static_cast<std::size_t>(current.n_nodes), 0.0);
    for (std::size_t e = 0; e < current.hyperedges.size(); ++e) {
      current.edge_degrees.push_back(static_cast<int>(current.hyperedges[e].nodes.size()));
      for (int v : current.hyperedges[e].nodes) {
        if (v < 0 || v >= current.n_nodes) {
          throw DataError("snapshot record for window_end=" + std::to_string(current.window_end) +
                          ": node index out of range");
        }
        current.vertex_degrees[static_cast<std::size_t>(v)] += current.weights[e];
      }
    }
    current.validate();
    out.push_back(std::move(current));
    current = HypergraphSnapshot{};
    open = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, ' ');
    if (fields.front() == "SNAPSHOT") {
      finish();
      if (fields.size() != 3) throw DataError("line " + std::to_string(line_no) + ": malformed SNAPSHOT header");
      auto we = split(fields[1], '=');
      auto nn = split(fields[2], '=');
      if (we.size() != 2 || we[0] != "window_end" || nn.size() != 2 || nn[0] != "nodes") {
        throw DataError("line " + std::to_string(line_no) + ": malformed SNAPSHOT header");
      }
      current.window_end = static_cast<long>(parse_double(we[1]));
      current.n_nodes = static_cast<int>(parse_double(nn[1]));
      if (current.n_nodes < 1) throw DataError("line " + std::to_string(line_no) + ": node count must be >= 1");
      open = true;
      continue;
    }
    if (!open) throw DataError("line " + std::to_string(line_no) + ": edge record before SNAPSHOT header");
    if (fields.size() < 3) {
      throw DataError("line " + std::to_string(line_no) + ": edge record needs tag, weight and at least one node");
    }
    Hyperedge edge;
    edge.source = parse_tag(fields[0], line_no);
    double w;
    try {
      w = parse_double(fields[1]);
    } catch (const DataError&) {
      throw DataError("line " + std::to_string(line_no) + ": bad weight field '" + fields[1] + "'");
    }
    if (!(w > 0.0)) throw DataError("line " + std::to_string(line_no) + ": weight must be > 0");
    for (std::size_t k = 2; k < fields.size(); ++k) {
      double v;
      try {
        v = parse_double(fields[k]);
      } catch (const DataError&) {
        throw DataError("line " + std::to_string(line_no) + ": bad node index '" + fields[k] + "'");
      }
      edge.nodes.push_back(static_cast<int>(v));
    }
    current.hyperedges.push_back(std::move(edge));
    current.weights.push_back(w);
  }
  finish();
  return out;
}

}  // namespace dhnn::hypergraph
