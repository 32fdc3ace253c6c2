#pragma once

#include <cstdint>

#include "pcr/circuit.hpp"
#include "pcr/properties.hpp"

namespace pcr {

enum class LogicKind { conj, disj, literal };

struct LogicNode {
  LogicKind kind = LogicKind::literal;
  std::vector<int> children;
  int var = -1;         // literal only
  bool positive = true;  // literal only
};

/// Negation normal form circuit over binary variables. Children always have
/// smaller ids than their parents.
class LogicalCircuit {
 public:
  explicit LogicalCircuit(int num_vars) : num_vars_(num_vars) {}

  int literal(int var, bool positive) {
    if (var < 0 || var >= num_vars_) throw Error(Stage::structure, "literal variable out of range");
    return push({LogicKind::literal, {}, var, positive});
  }
  int conj(std::vector<int> children) { return push({LogicKind::conj, std::move(children)}); }
  int disj(std::vector<int> children) { return push({LogicKind::disj, std::move(children)}); }

  int num_vars() const { return num_vars_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const LogicNode& node(int id) const { return nodes_.at(id); }
  int root() const {
    if (nodes_.empty()) throw Error(Stage::structure, "empty logical circuit");
    return size() - 1;
  }

  std::vector<Scope> scopes() const {
    std::vector<Scope> s(nodes_.size());
    for (int id = 0; id < size(); ++id) {
      const auto& nd = nodes_[id];
      if (nd.kind == LogicKind::literal) s[id] = {nd.var};
      else
        for (int c : nd.children) s[id] = scope::unite(s[id], s[c]);
    }
    return s;
  }

  bool evaluate(const Assignment& x) const {
    std::vector<char> val(nodes_.size(), 0);
    for (int id = 0; id < size(); ++id) {
      const auto& nd = nodes_[id];
      switch (nd.kind) {
        case LogicKind::literal: val[id] = (x.at(nd.var) == 1) == nd.positive; break;
        case LogicKind::conj:
          val[id] = 1;
          for (int c : nd.children) val[id] &= val[c];
          break;
        case LogicKind::disj:
          val[id] = 0;
          for (int c : nd.children) val[id] |= val[c];
          break;
      }
    }
    return val[root()];
  }

  /// Number of satisfying assignments by enumeration.
  std::uint64_t brute_force_count() const {
    std::uint64_t count = 0;
    for_each_assignment(std::vector<int>(num_vars_, 2), [&](const Assignment& x) { count += evaluate(x); });
    return count;
  }

 private:
  int push(LogicNode n) {
    for (int c : n.children)
      if (c < 0 || c >= size()) throw Error(Stage::structure, "logical child must precede its parent");
    if (n.kind != LogicKind::literal && n.children.empty()) throw Error(Stage::structure, "gate without inputs");
    nodes_.push_back(std::move(n));
    return size() - 1;
  }

  int num_vars_;
  std::vector<LogicNode> nodes_;
};

/// Replaces ∨ by sums with uniform weights, ∧ by products and literals by
/// 0/1 leaves. Variables missing below a disjunct or at the root are padded
/// with uniform leaves so the result is smooth; the support is unchanged.
inline Circuit from_logical(const LogicalCircuit& l) {
  const auto sc = l.scopes();
  for (int id = 0; id < l.size(); ++id) {
    const auto& nd = l.node(id);
    if (nd.kind != LogicKind::conj) continue;
    std::size_t total = 0;
    for (int c : nd.children) total += sc[c].size();
    if (total != sc[id].size()) throw Error(Stage::structure, "conjunction " + std::to_string(id) + " is not decomposable");
  }
  CircuitBuilder out(std::vector<int>(l.num_vars(), 2));
  std::vector<NodeId> map(l.size(), -1);
  auto pad = [&](NodeId base, const Scope& have, const Scope& want) {
    Scope missing = scope::subtract(want, have);
    if (missing.empty()) return base;
    std::vector<NodeId> ch{base};
    for (int v : missing) ch.push_back(out.add_leaf(v, {0.5, 0.5}));
    return out.add_product(std::move(ch));
  };
  for (int id = 0; id < l.size(); ++id) {
    const auto& nd = l.node(id);
    switch (nd.kind) {
      case LogicKind::literal:
        map[id] = out.add_leaf(nd.var, nd.positive ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0});
        break;
      case LogicKind::conj: {
        std::vector<NodeId> ch;
        for (int c : nd.children) ch.push_back(map[c]);
        map[id] = out.add_product(std::move(ch));
        break;
      }
      case LogicKind::disj: {
        std::vector<NodeId> ch;
        for (int c : nd.children) ch.push_back(pad(map[c], sc[c], sc[id]));
        map[id] = out.add_sum(std::move(ch), std::vector<double>(ch.size(), 1.0 / static_cast<double>(nd.children.size())));
        break;
      }
    }
  }
  NodeId root = pad(map[l.root()], sc[l.root()], Vtree::canonical_order(l.num_vars()));
  return out.build(root, Normalization::normalized);
}

/// Drops weights: sums become ∨, products ∧, leaves their 0/1 support.
inline LogicalCircuit to_logical(const Circuit& c) {
  LogicalCircuit l(c.num_vars());
  std::vector<int> map(c.size(), -1);
  for (NodeId id : c.topological_order()) {
    const Node& nd = c.node(id);
    switch (nd.kind) {
      case NodeKind::leaf: {
        if (c.domain(nd.var) != 2) throw Error(Stage::structure, "logical circuits need binary variables");
        const bool neg = nd.probs[0] > 0.0, pos = nd.probs[1] > 0.0;
        if (pos && neg) map[id] = l.disj({l.literal(nd.var, true), l.literal(nd.var, false)});
        else if (pos) map[id] = l.literal(nd.var, true);
        else if (neg) map[id] = l.literal(nd.var, false);
        else throw Error(Stage::structure, "leaf " + std::to_string(id) + " has empty support");
        break;
      }
      case NodeKind::product: {
        std::vector<int> ch;
        for (NodeId x : nd.children) ch.push_back(map[x]);
        map[id] = l.conj(std::move(ch));
        break;
      }
      case NodeKind::sum: {
        std::vector<int> ch;
        for (std::size_t i = 0; i < nd.children.size(); ++i)
          if (nd.weights[i] > 0.0) ch.push_back(map[nd.children[i]]);
        map[id] = l.disj(std::move(ch));
        break;
      }
    }
  }
  // The root must be the last node; re-emit it if an earlier id was reused.
  if (map[c.root()] != l.size() - 1) l.disj({map[c.root()]});
  return l;
}

/// Same graph with unit sum weights and 0/1 leaves; marginalizing it counts
/// models when the circuit is deterministic.
inline Circuit unweighted_copy(const Circuit& c) {
  std::vector<Node> nodes = c.nodes();
  for (Node& nd : nodes) {
    for (double& w : nd.weights) w = w > 0.0 ? 1.0 : 0.0;
    for (double& p : nd.probs) p = p > 0.0 ? 1.0 : 0.0;
  }
  return Circuit(std::move(nodes), c.root(), c.domains(), Normalization::unnormalized);
}

/// Exact model count of a deterministic circuit through unweighted
/// marginalization. Exact while the count stays below 2^53.
inline std::uint64_t model_count(const Circuit& c) {
  const double z = partition_function(unweighted_copy(c));
  return static_cast<std::uint64_t>(std::llround(z));
}

}  // namespace pcr
