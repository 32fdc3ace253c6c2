#pragma once

#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>

#include "pcr/common.hpp"

namespace pcr {

enum class NodeKind { sum, product, leaf };

inline std::string_view kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::sum: return "sum";
    case NodeKind::product: return "prod";
    case NodeKind::leaf: return "leaf";
  }
  return "?";
}

struct Node {
  NodeKind kind = NodeKind::leaf;
  std::vector<NodeId> children;
  std::vector<double> weights;  // sum nodes only, aligned with children
  int var = -1;                 // leaf only
  std::vector<double> probs;    // leaf only, one entry per domain value
};

/// Whether sum weights and leaf tables are required to be normalized.
///
/// Grammar-compiled circuits and raw circuit products carry arbitrary
/// non-negative parameters; everything else is a proper distribution.
enum class Normalization { normalized, unnormalized };

/// Rooted DAG of sum, product and categorical leaf nodes.
///
/// Immutable once built. Ids are dense, and every node is reachable from the
/// root. A topological order (children first) is cached at construction.
class Circuit {
 public:
  Circuit() = default;

  Circuit(std::vector<Node> nodes, NodeId root, std::vector<int> domains,
          Normalization norm = Normalization::normalized)
      : nodes_(std::move(nodes)), root_(root), domains_(std::move(domains)), norm_(norm) {
    check();
  }

  NodeId root() const { return root_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int num_vars() const { return static_cast<int>(domains_.size()); }
  const std::vector<int>& domains() const { return domains_; }
  int domain(int var) const { return domains_.at(var); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<Node>& nodes() const { return nodes_; }
  Normalization normalization() const { return norm_; }
  bool is_normalized() const { return norm_ == Normalization::normalized; }

  /// Children before parents.
  const std::vector<NodeId>& topological_order() const { return topo_; }

  /// Variables each node depends on.
  const std::vector<Scope>& scopes() const { return scopes_; }
  const Scope& scope(NodeId id) const { return scopes_.at(id); }

  /// Number of edges.
  std::size_t edge_count() const {
    std::size_t e = 0;
    for (const Node& n : nodes_) e += n.children.size();
    return e;
  }

 private:
  void check() {
    const int n = size();
    if (n == 0) throw Error(Stage::structure, "circuit has no nodes");
    if (root_ < 0 || root_ >= n) throw Error(Stage::structure, "root id " + std::to_string(root_) + " out of range");
    for (int d : domains_)
      if (d < 1) throw Error(Stage::structure, "variable domain must be positive");
    const bool strict = is_normalized();
    for (NodeId id = 0; id < n; ++id) {
      const Node& nd = nodes_[id];
      const std::string where = "node " + std::to_string(id);
      switch (nd.kind) {
        case NodeKind::leaf: {
          if (!nd.children.empty()) throw Error(Stage::structure, where + ": leaf with children");
          if (nd.var < 0 || nd.var >= num_vars())
            throw Error(Stage::structure, where + ": leaf variable out of range");
          if (static_cast<int>(nd.probs.size()) != domains_[nd.var])
            throw Error(Stage::structure, where + ": leaf table length does not match the variable domain");
          double total = 0.0;
          for (double p : nd.probs) {
            if (!(p >= 0.0) || !std::isfinite(p)) throw Error(Stage::structure, where + ": negative leaf entry");
            if (strict && p > 1.0 + kWeightTolerance) throw Error(Stage::structure, where + ": leaf entry above 1");
            total += p;
          }
          if (strict && std::abs(total - 1.0) > kWeightTolerance)
            throw Error(Stage::structure, where + ": leaf table not normalized");
          break;
        }
        case NodeKind::sum: {
          if (nd.children.empty()) throw Error(Stage::structure, where + ": sum without children");
          if (nd.weights.size() != nd.children.size())
            throw Error(Stage::structure, where + ": weight vector length mismatch");
          double total = 0.0;
          for (double w : nd.weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw Error(Stage::structure, where + ": negative weight");
            total += w;
          }
          if (strict && std::abs(total - 1.0) > kWeightTolerance)
            throw Error(Stage::structure, where + ": weights not normalized");
          break;
        }
        case NodeKind::product:
          if (nd.children.empty()) throw Error(Stage::structure, where + ": product without children");
          if (!nd.weights.empty()) throw Error(Stage::structure, where + ": weighted product");
          break;
      }
      for (NodeId c : nd.children)
        if (c < 0 || c >= n) throw Error(Stage::structure, where + ": child id out of range");
    }

    // Iterative DFS from the root: detects cycles and unreachable nodes.
    std::vector<char> state(n, 0);  // 0 new, 1 on stack, 2 done
    std::vector<std::pair<NodeId, std::size_t>> stack{{root_, 0}};
    state[root_] = 1;
    topo_.reserve(n);
    while (!stack.empty()) {
      auto& [id, next] = stack.back();
      const Node& nd = nodes_[id];
      if (next < nd.children.size()) {
        NodeId c = nd.children[next++];
        if (state[c] == 1) throw Error(Stage::structure, "cyclic reference through node " + std::to_string(c));
        if (state[c] == 0) {
          state[c] = 1;
          stack.emplace_back(c, 0);
        }
      } else {
        state[id] = 2;
        topo_.push_back(id);
        stack.pop_back();
      }
    }
    for (NodeId id = 0; id < n; ++id)
      if (state[id] != 2) throw Error(Stage::structure, "node " + std::to_string(id) + " is unreachable from the root");

    scopes_.assign(n, {});
    for (NodeId id : topo_) {
      const Node& nd = nodes_[id];
      if (nd.kind == NodeKind::leaf) {
        scopes_[id] = {nd.var};
      } else {
        Scope s;
        for (NodeId c : nd.children) s = scope::unite(s, scopes_[c]);
        scopes_[id] = std::move(s);
      }
    }
  }

  std::vector<Node> nodes_;
  NodeId root_ = 0;
  std::vector<int> domains_;
  Normalization norm_ = Normalization::normalized;
  std::vector<NodeId> topo_;
  std::vector<Scope> scopes_;
};

/// Accumulates nodes for a new circuit; build() drops unreachable nodes and
/// renumbers the rest so that children precede parents.
class CircuitBuilder {
 public:
  explicit CircuitBuilder(std::vector<int> domains) : domains_(std::move(domains)) {}

  NodeId add_leaf(int var, std::vector<double> probs) {
    Node n;
    n.kind = NodeKind::leaf;
    n.var = var;
    n.probs = std::move(probs);
    return push(std::move(n));
  }

  NodeId add_sum(std::vector<NodeId> children, std::vector<double> weights) {
    Node n;
    n.kind = NodeKind::sum;
    n.children = std::move(children);
    n.weights = std::move(weights);
    return push(std::move(n));
  }

  NodeId add_product(std::vector<NodeId> children) {
    Node n;
    n.kind = NodeKind::product;
    n.children = std::move(children);
    return push(std::move(n));
  }

  const Node& node(NodeId id) const { return nodes_.at(id); }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<int>& domains() const { return domains_; }

  Circuit build(NodeId root, Normalization norm = Normalization::normalized) const {
    const int n = size();
    std::vector<int> order;
    std::vector<char> state(n, 0);
    std::vector<std::pair<NodeId, std::size_t>> stack{{root, 0}};
    state.at(root) = 1;
    while (!stack.empty()) {
      auto& [id, next] = stack.back();
      const Node& nd = nodes_[id];
      if (next < nd.children.size()) {
        NodeId c = nd.children[next++];
        if (state.at(c) == 1) throw Error(Stage::assembly, "builder produced a cycle");
        if (state[c] == 0) {
          state[c] = 1;
          stack.emplace_back(c, 0);
        }
      } else {
        state[id] = 2;
        order.push_back(id);
        stack.pop_back();
      }
    }
    std::vector<NodeId> remap(n, -1);
    for (std::size_t i = 0; i < order.size(); ++i) remap[order[i]] = static_cast<NodeId>(i);
    std::vector<Node> out;
    out.reserve(order.size());
    for (NodeId old : order) {
      Node nd = nodes_[old];
      for (NodeId& c : nd.children) c = remap[c];
      out.push_back(std::move(nd));
    }
    return Circuit(std::move(out), remap[root], domains_, norm);
  }

 private:
  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
  }

  std::vector<int> domains_;
  std::vector<Node> nodes_;
};

/// Value of every node under a (possibly partial) assignment. Leaves of
/// unobserved variables evaluate to the sum of their table, which is the
/// standard marginalization pass on smooth decomposable circuits.
inline std::vector<double> evaluate_nodes(const Circuit& c, const Assignment& x) {
  if (static_cast<int>(x.size()) != c.num_vars())
    throw Error(Stage::usage, "assignment has " + std::to_string(x.size()) + " entries, circuit has " +
                                  std::to_string(c.num_vars()) + " variables");
  for (int v = 0; v < c.num_vars(); ++v)
    if (x[v] != kMissing && (x[v] < 0 || x[v] >= c.domain(v)))
      throw Error(Stage::usage, "value of variable " + std::to_string(v) + " outside its domain");
  std::vector<double> val(c.size(), 0.0);
  for (NodeId id : c.topological_order()) {
    const Node& nd = c.node(id);
    switch (nd.kind) {
      case NodeKind::leaf:
        val[id] = x[nd.var] == kMissing ? std::accumulate(nd.probs.begin(), nd.probs.end(), 0.0) : nd.probs[x[nd.var]];
        break;
      case NodeKind::product: {
        double p = 1.0;
        for (NodeId ch : nd.children) p *= val[ch];
        val[id] = p;
        break;
      }
      case NodeKind::sum: {
        double s = 0.0;
        for (std::size_t i = 0; i < nd.children.size(); ++i) s += nd.weights[i] * val[nd.children[i]];
        val[id] = s;
        break;
      }
    }
  }
  return val;
}

/// p_root(x) for a full assignment.
inline double evaluate(const Circuit& c, const Assignment& x) {
  for (int v : x)
    if (v == kMissing) throw Error(Stage::usage, "evaluate needs a full assignment");
  return evaluate_nodes(c, x)[c.root()];
}

struct CircuitStats {
  std::size_t size = 0;  // edges
  int depth = 0;         // nodes on the longest root-to-leaf path
  int num_sum = 0;
  int num_product = 0;
  int num_leaf = 0;
};

inline CircuitStats stats(const Circuit& c) {
  CircuitStats s;
  s.size = c.edge_count();
  std::vector<int> height(c.size(), 0);
  for (NodeId id : c.topological_order()) {
    const Node& nd = c.node(id);
    int h = 0;
    for (NodeId ch : nd.children) h = std::max(h, height[ch]);
    height[id] = h + 1;
    switch (nd.kind) {
      case NodeKind::sum: ++s.num_sum; break;
      case NodeKind::product: ++s.num_product; break;
      case NodeKind::leaf: ++s.num_leaf; break;
    }
  }
  s.depth = height[c.root()];
  return s;
}

}  // namespace pcr
