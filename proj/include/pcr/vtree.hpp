#pragma once

#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <utility>

#include "pcr/common.hpp"

namespace pcr {

/// Rooted full binary tree whose leaves biject with variables 0..n-1.
///
/// Node ids are assigned in pre-order (root = 0, left subtree before right),
/// so two vtrees with the same shape and leaf variables have identical ids.
/// Latent variables of the derived Bayesian network reuse these ids.
class Vtree {
 public:
  struct Node {
    int left = -1;
    int right = -1;
    int parent = -1;
    int var = -1;
    bool is_leaf() const { return var >= 0; }
  };

  class Builder {
   public:
    int add_leaf(int var) {
      nodes_.push_back(Node{-1, -1, -1, var});
      return static_cast<int>(nodes_.size()) - 1;
    }
    int add_inner(int left, int right) {
      nodes_.push_back(Node{left, right, -1, -1});
      return static_cast<int>(nodes_.size()) - 1;
    }
    Vtree build(int root) const { return Vtree(nodes_, root); }

   private:
    std::vector<Node> nodes_;
  };

  Vtree() = default;

  static Vtree right_linear(const std::vector<int>& order) {
    require_nonempty(order);
    Builder b;
    int cur = b.add_leaf(order.back());
    for (int i = static_cast<int>(order.size()) - 2; i >= 0; --i) cur = b.add_inner(b.add_leaf(order[i]), cur);
    return b.build(cur);
  }

  static Vtree left_linear(const std::vector<int>& order) {
    require_nonempty(order);
    Builder b;
    int cur = b.add_leaf(order.front());
    for (std::size_t i = 1; i < order.size(); ++i) cur = b.add_inner(cur, b.add_leaf(order[i]));
    return b.build(cur);
  }

  /// Complete-as-possible split of the given order (left half gets the floor).
  static Vtree balanced(const std::vector<int>& order) {
    require_nonempty(order);
    Builder b;
    std::function<int(std::size_t, std::size_t)> rec = [&](std::size_t lo, std::size_t hi) -> int {
      if (hi - lo == 1) return b.add_leaf(order[lo]);
      std::size_t mid = lo + (hi - lo) / 2;
      return b.add_inner(rec(lo, mid), rec(mid, hi));
    };
    return b.build(rec(0, order.size()));
  }

  static std::vector<int> canonical_order(int n) {
    std::vector<int> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
  }

  int root() const { return 0; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int num_vars() const { return static_cast<int>(leaf_of_var_.size()); }
  const Node& node(int id) const { return nodes_.at(id); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Scope& scope(int id) const { return scopes_.at(id); }
  int leaf_of(int var) const { return leaf_of_var_.at(var); }
  bool is_leaf(int id) const { return nodes_.at(id).is_leaf(); }

  /// Node whose variable set equals s, or -1.
  int find(const Scope& s) const {
    auto it = by_scope_.find(s);
    return it == by_scope_.end() ? -1 : it->second;
  }

  std::vector<int> inner_nodes() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (!is_leaf(i)) out.push_back(i);
    return out;
  }

  /// Children before parents.
  std::vector<int> post_order() const {
    std::vector<int> out(nodes_.size());
    std::iota(out.begin(), out.end(), 0);
    std::reverse(out.begin(), out.end());
    return out;
  }

  int depth_of(int id) const {
    int d = 0;
    while (nodes_[id].parent >= 0) {
      id = nodes_[id].parent;
      ++d;
    }
    return d;
  }

  /// Longest root-to-leaf path, counted in edges.
  int depth() const {
    int best = 0;
    for (int i = 0; i < size(); ++i)
      if (is_leaf(i)) best = std::max(best, depth_of(i));
    return best;
  }

  bool is_contiguous() const {
    return std::all_of(scopes_.begin(), scopes_.end(), [](const Scope& s) { return scope::is_interval(s); });
  }

  /// Every inner node's left child is a leaf and its scope is {X_k..X_n-1}.
  bool is_right_linear() const {
    for (int i = 0; i < size(); ++i) {
      if (is_leaf(i)) continue;
      const Node& nd = nodes_[i];
      if (!is_leaf(nd.left) || !scope::is_interval(scopes_[i]) || nd_var(nd.left) != scopes_[i].front() ||
          scopes_[i].back() != num_vars() - 1)
        return false;
    }
    return true;
  }

  /// Every inner node's right child is a leaf and its scope is {X_0..X_k}.
  bool is_left_linear() const {
    for (int i = 0; i < size(); ++i) {
      if (is_leaf(i)) continue;
      const Node& nd = nodes_[i];
      if (!is_leaf(nd.right) || !scope::is_interval(scopes_[i]) || nd_var(nd.right) != scopes_[i].back() ||
          scopes_[i].front() != 0)
        return false;
    }
    return true;
  }

  /// Same set of variable splits, ignoring child order.
  bool same_structure(const Vtree& other) const { return split_set() == other.split_set(); }

  bool operator==(const Vtree& other) const {
    if (size() != other.size()) return false;
    for (int i = 0; i < size(); ++i) {
      const Node& a = nodes_[i];
      const Node& b = other.nodes_[i];
      if (a.left != b.left || a.right != b.right || a.var != b.var) return false;
    }
    return true;
  }

 private:
  Vtree(const std::vector<Node>& raw, int root) {
    if (root < 0 || root >= static_cast<int>(raw.size())) throw Error(Stage::structure, "vtree root out of range");
    // Renumber in pre-order.
    std::vector<char> seen(raw.size(), 0);
    std::function<int(int, int)> emit = [&](int old, int parent) -> int {
      if (old < 0 || old >= static_cast<int>(raw.size())) throw Error(Stage::structure, "vtree child out of range");
      if (seen[old]++) throw Error(Stage::structure, "vtree node shared or cyclic");
      int id = static_cast<int>(nodes_.size());
      nodes_.push_back(Node{-1, -1, parent, raw[old].var});
      if (raw[old].var < 0) {
        int l = emit(raw[old].left, id);
        int r = emit(raw[old].right, id);
        nodes_[id].left = l;
        nodes_[id].right = r;
      }
      return id;
    };
    emit(root, -1);

    scopes_.assign(nodes_.size(), {});
    int max_var = -1;
    for (const Node& nd : nodes_) max_var = std::max(max_var, nd.var);
    leaf_of_var_.assign(max_var + 1, -1);
    for (int i = size() - 1; i >= 0; --i) {
      const Node& nd = nodes_[i];
      if (nd.is_leaf()) {
        if (leaf_of_var_[nd.var] >= 0) throw Error(Stage::structure, "vtree variable " + std::to_string(nd.var) + " appears twice");
        leaf_of_var_[nd.var] = i;
        scopes_[i] = {nd.var};
      } else {
        scopes_[i] = scope::unite(scopes_[nd.left], scopes_[nd.right]);
      }
    }
    for (int v = 0; v <= max_var; ++v)
      if (leaf_of_var_[v] < 0) throw Error(Stage::structure, "vtree is missing variable " + std::to_string(v));
    for (int i = 0; i < size(); ++i) by_scope_.emplace(scopes_[i], i);
  }

  int nd_var(int id) const { return nodes_[id].var; }

  std::set<std::pair<Scope, Scope>> split_set() const {
    std::set<std::pair<Scope, Scope>> out;
    for (int i = 0; i < size(); ++i) {
      if (is_leaf(i)) continue;
      auto a = scopes_[nodes_[i].left];
      auto b = scopes_[nodes_[i].right];
      if (b < a) std::swap(a, b);
      out.emplace(std::move(a), std::move(b));
    }
    return out;
  }

  static void require_nonempty(const std::vector<int>& order) {
    if (order.empty()) throw Error(Stage::structure, "vtree needs at least one variable");
  }

  std::vector<Node> nodes_;
  std::vector<Scope> scopes_;
  std::vector<int> leaf_of_var_;
  std::map<Scope, int> by_scope_;
};

/// Target vtree together with one latent set per node, indexed by node id.
/// Latent ids refer to inner nodes of the source vtree.
struct LabelledVtree {
  Vtree vtree;
  std::vector<Scope> labels;
};

}  // namespace pcr
