#pragma once

#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "pcr/circuit.hpp"
#include "pcr/properties.hpp"
#include "pcr/vtree.hpp"

namespace pcr {

/// Product nodes of each inner vtree node, ordered by circuit id; the
/// position of a product in its list is its latent state.
struct AugmentedIndex {
  std::vector<std::vector<NodeId>> products;  // empty for vtree leaves
  std::vector<int> state_of;                  // per circuit node, -1 unless product

  int hidden_state_size() const {
    std::size_t h = 0;
    for (const auto& p : products) h = std::max(h, p.size());
    return static_cast<int>(h);
  }
};

inline AugmentedIndex augment_index(const Circuit& c, const Vtree& v) {
  if (v.num_vars() != c.num_vars()) throw Error(Stage::structure, "circuit and vtree cover different variables");
  AugmentedIndex idx;
  idx.products.assign(v.size(), {});
  idx.state_of.assign(c.size(), -1);
  for (NodeId id = 0; id < c.size(); ++id) {
    if (c.node(id).kind != NodeKind::product) continue;
    int node = v.find(c.scope(id));
    if (node < 0 || v.is_leaf(node))
      throw Error(Stage::structure, "product node " + std::to_string(id) + " matches no inner vtree node");
    idx.state_of[id] = static_cast<int>(idx.products[node].size());
    idx.products[node].push_back(id);
  }
  for (int u : v.inner_nodes())
    if (idx.products[u].empty())
      throw Error(Stage::structure, "vtree node " + std::to_string(u) + " has no product nodes; normalize the circuit first");
  return idx;
}

/// Tree-shaped Bayesian network sharing node ids with its vtree: inner
/// nodes are latents, leaves are the observed variables.
///
/// cpt[v] is laid out as cpt[v][parent_state * card[v] + state]; the root
/// table is just cpt[root][state].
struct TreeBayesNet {
  Vtree vtree;
  std::vector<int> card;
  std::vector<std::vector<double>> cpt;

  int size() const { return vtree.size(); }
  int root() const { return vtree.root(); }
  int parent(int v) const { return vtree.node(v).parent; }
  bool is_latent(int v) const { return !vtree.is_leaf(v); }
  int node_of_var(int var) const { return vtree.leaf_of(var); }

  std::vector<int> neighbours(int v) const {
    std::vector<int> out;
    const auto& nd = vtree.node(v);
    if (nd.parent >= 0) out.push_back(nd.parent);
    if (!nd.is_leaf()) {
      out.push_back(nd.left);
      out.push_back(nd.right);
    }
    return out;
  }

  double prob(int v, int parent_state, int state) const {
    if (parent(v) < 0) return cpt[v][state];
    return cpt[v][parent_state * card[v] + state];
  }

  std::vector<int> latents() const {
    std::vector<int> out;
    for (int v = 0; v < size(); ++v)
      if (is_latent(v)) out.push_back(v);
    return out;
  }
};

inline TreeBayesNet pc_to_bn(const Circuit& c, const Vtree& v) {
  if (!c.is_normalized()) throw Error(Stage::structure, "Bayesian network conversion needs a normalized circuit");
  TreeBayesNet bn;
  bn.vtree = v;
  bn.card.assign(v.size(), 0);
  bn.cpt.assign(v.size(), {});
  for (int u = 0; u < v.size(); ++u)
    if (v.is_leaf(u)) bn.card[u] = c.domain(v.node(u).var);

  if (v.size() == 1) {
    const Node& leaf = c.node(c.root());
    if (leaf.kind != NodeKind::leaf) throw Error(Stage::structure, "single-variable circuit must be a leaf; normalize it first");
    bn.cpt[0] = leaf.probs;
    return bn;
  }

  const AugmentedIndex idx = augment_index(c, v);
  for (int u : v.inner_nodes()) bn.card[u] = static_cast<int>(idx.products[u].size());
  for (int u = 0; u < v.size(); ++u) {
    const int parent = v.node(u).parent;
    bn.cpt[u].assign(static_cast<std::size_t>(parent < 0 ? 1 : bn.card[parent]) * bn.card[u], 0.0);
  }
  std::vector<std::vector<char>> filled(v.size());
  for (int u = 0; u < v.size(); ++u) filled[u].assign(bn.cpt[u].size(), 0);
  auto put = [&](int u, std::size_t slot, double value, NodeId via) {
    if (filled[u][slot]++)
      throw Error(Stage::structure, "two paths reach the same product through node " + std::to_string(via) +
                                        "; normalize the circuit first");
    bn.cpt[u][slot] = value;
  };

  // Root prior from the root sum.
  const Node& root = c.node(c.root());
  if (root.kind != NodeKind::sum || c.scope(c.root()).size() != static_cast<std::size_t>(c.num_vars()))
    throw Error(Stage::structure, "root must be a sum over all variables; normalize the circuit first");
  for (std::size_t i = 0; i < root.children.size(); ++i) {
    NodeId ch = root.children[i];
    if (c.node(ch).kind != NodeKind::product || v.find(c.scope(ch)) != v.root())
      throw Error(Stage::structure, "root sum children must be products of the root scope");
    put(v.root(), idx.state_of[ch], root.weights[i], c.root());
  }

  for (int u : v.inner_nodes()) {
    const auto& vn = v.node(u);
    for (NodeId t : idx.products[u]) {
      const Node& prod = c.node(t);
      if (prod.children.size() != 2) throw Error(Stage::structure, "product " + std::to_string(t) + " is not binary");
      const int parent_state = idx.state_of[t];
      for (int side : {vn.left, vn.right}) {
        NodeId ch = -1;
        for (NodeId x : prod.children)
          if (c.scope(x) == v.scope(side)) ch = x;
        if (ch < 0) throw Error(Stage::structure, "product " + std::to_string(t) + " does not follow the vtree split");
        const Node& cn = c.node(ch);
        const std::size_t base = static_cast<std::size_t>(parent_state) * bn.card[side];
        if (v.is_leaf(side)) {
          if (cn.kind != NodeKind::leaf) throw Error(Stage::structure, "node " + std::to_string(ch) + " should be a leaf; normalize the circuit first");
          for (int k = 0; k < bn.card[side]; ++k) put(side, base + k, cn.probs[k], t);
        } else {
          if (cn.kind != NodeKind::sum) throw Error(Stage::structure, "node " + std::to_string(ch) + " should be a sum; normalize the circuit first");
          for (std::size_t i = 0; i < cn.children.size(); ++i) {
            NodeId gc = cn.children[i];
            if (c.node(gc).kind != NodeKind::product || v.find(c.scope(gc)) != side)
              throw Error(Stage::structure, "sum " + std::to_string(ch) + " must mix products of one scope");
            put(side, base + idx.state_of[gc], cn.weights[i], ch);
          }
        }
      }
    }
  }
  return bn;
}

/// Whether every tree path from a node of `from` to a node of `to` meets
/// `blockers`; endpoints lying in `blockers` count as blocked.
inline bool paths_blocked(const Vtree& tree, const Scope& from, const Scope& to, const Scope& blockers) {
  std::vector<char> block(tree.size(), 0), target(tree.size(), 0), seen(tree.size(), 0);
  for (int z : blockers) block.at(z) = 1;
  for (int t : to) target.at(t) = 1;
  std::deque<int> queue;
  for (int s : from) {
    if (block.at(s) || seen[s]) continue;
    seen[s] = 1;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    if (target[u]) return false;
    const auto& nd = tree.node(u);
    for (int w : {nd.parent, nd.left, nd.right}) {
      if (w < 0 || seen[w] || block[w]) continue;
      seen[w] = 1;
      queue.push_back(w);
    }
  }
  return true;
}

/// Vtree leaf ids of a set of variables.
inline Scope leaf_nodes(const Vtree& v, const Scope& vars) {
  Scope out;
  for (int x : vars) out.push_back(v.leaf_of(x));
  return scope::make(std::move(out));
}

/// True when `blockers` separates vars from all remaining observed variables.
inline bool covers(const Vtree& v, const Scope& blockers, const Scope& vars) {
  Scope rest = scope::subtract(Vtree::canonical_order(v.num_vars()), vars);
  return paths_blocked(v, leaf_nodes(v, vars), leaf_nodes(v, rest), blockers);
}

/// Sparse probability table over BN nodes. Values are p(scope) for a joint
/// and p(scope \ given | given) for a conditional; zero entries are absent.
struct SparseTable {
  Scope scope;
  Scope given;
  std::map<std::vector<int>, double> entries;

  double at(const std::vector<int>& x) const {
    auto it = entries.find(x);
    return it == entries.end() ? 0.0 : it->second;
  }

  /// Positions of `sub` inside `scope`.
  std::vector<int> positions(const Scope& sub) const {
    std::vector<int> pos;
    for (int s : sub) {
      auto it = std::lower_bound(scope.begin(), scope.end(), s);
      if (it == scope.end() || *it != s) throw Error(Stage::table, "variable " + std::to_string(s) + " not in table scope");
      pos.push_back(static_cast<int>(it - scope.begin()));
    }
    return pos;
  }
};

inline std::vector<int> project(const std::vector<int>& x, const std::vector<int>& pos) {
  std::vector<int> out;
  out.reserve(pos.size());
  for (int p : pos) out.push_back(x[p]);
  return out;
}

/// Exact marginal p(U) by sum-product on the subtree spanning the root and U.
inline SparseTable bn_joint(const TreeBayesNet& bn, const Scope& U, std::size_t budget = kDefaultTableBudget) {
  const Vtree& t = bn.vtree;
  std::vector<int> pos(t.size(), -1);
  for (std::size_t i = 0; i < U.size(); ++i) {
    if (U[i] < 0 || U[i] >= t.size()) throw Error(Stage::table, "unknown network node " + std::to_string(U[i]));
    pos[U[i]] = static_cast<int>(i);
  }
  std::vector<char> steiner(t.size(), 0);
  for (int u : U)
    for (int w = u; w >= 0 && !steiner[w]; w = t.node(w).parent) steiner[w] = 1;
  steiner[t.root()] = 1;

  using Msg = std::map<std::vector<int>, double>;
  auto check_budget = [&](std::size_t n) {
    if (n > budget) throw BudgetExceeded("table over " + std::to_string(U.size()) + " variables exceeds the budget of " + std::to_string(budget) + " entries");
  };

  // f[v][s] = p(U within subtree(v) | v = s), stored with kMissing elsewhere.
  std::function<std::vector<Msg>(int)> up = [&](int v) -> std::vector<Msg> {
    const int k = bn.card[v];
    std::vector<Msg> f(k);
    for (int s = 0; s < k; ++s) {
      std::vector<int> key(U.size(), kMissing);
      if (pos[v] >= 0) key[pos[v]] = s;
      f[s].emplace(std::move(key), 1.0);
    }
    if (t.is_leaf(v)) return f;
    for (int ch : {t.node(v).left, t.node(v).right}) {
      if (!steiner[ch]) continue;
      const auto fc = up(ch);
      const int kc = bn.card[ch];
      for (int s = 0; s < k; ++s) {
        Msg g;
        for (int sc = 0; sc < kc; ++sc) {
          const double p = bn.prob(ch, s, sc);
          if (p <= 0.0) continue;
          for (const auto& [key, val] : fc[sc]) g[key] += p * val;
        }
        Msg merged;
        for (const auto& [ka, va] : f[s])
          for (const auto& [kb, vb] : g) {
            std::vector<int> key = ka;
            for (std::size_t i = 0; i < key.size(); ++i)
              if (kb[i] != kMissing) key[i] = kb[i];
            merged[std::move(key)] += va * vb;
          }
        check_budget(merged.size());
        f[s] = std::move(merged);
      }
    }
    return f;
  };

  const auto f = up(t.root());
  SparseTable out;
  out.scope = U;
  for (int s = 0; s < bn.card[t.root()]; ++s) {
    const double p = bn.prob(t.root(), -1, s);
    if (p <= 0.0) continue;
    for (const auto& [key, val] : f[s]) out.entries[key] += p * val;
  }
  for (auto it = out.entries.begin(); it != out.entries.end();) {
    if (it->second > 0.0) ++it;
    else it = out.entries.erase(it);
  }
  check_budget(out.entries.size());
  return out;
}

/// Marginalizes a joint onto `sub`.
inline SparseTable marginal(const SparseTable& joint, const Scope& sub) {
  SparseTable out;
  out.scope = sub;
  const auto pos = joint.positions(sub);
  for (const auto& [key, val] : joint.entries) out.entries[project(key, pos)] += val;
  return out;
}

/// p(targets | given) over targets ∪ given; events with zero prior are absent.
inline SparseTable bn_conditional_table(const TreeBayesNet& bn, const Scope& targets, const Scope& given,
                                        std::size_t budget = kDefaultTableBudget) {
  SparseTable joint = bn_joint(bn, scope::unite(targets, given), budget);
  const SparseTable norm = marginal(joint, given);
  const auto pos = joint.positions(given);
  joint.given = given;
  for (auto& [key, val] : joint.entries) val /= norm.at(project(key, pos));
  return joint;
}

/// p(X_var | given); given must cover the variable.
inline SparseTable bn_leaf_conditional(const TreeBayesNet& bn, int var, const Scope& given,
                                       std::size_t budget = kDefaultTableBudget) {
  if (!covers(bn.vtree, given, {var}))
    throw Error(Stage::labelling, "latent set does not cover variable " + std::to_string(var));
  return bn_conditional_table(bn, {bn.node_of_var(var)}, given, budget);
}

/// Human-readable dump of graph edges and tables (debug aid, unstable format).
inline std::string dump_bn(const TreeBayesNet& bn) {
  std::ostringstream out;
  for (int v = 0; v < bn.size(); ++v) {
    out << (bn.is_latent(v) ? "Z" : "X") << (bn.is_latent(v) ? v : bn.vtree.node(v).var) << " card=" << bn.card[v];
    if (bn.parent(v) >= 0) out << " parent=Z" << bn.parent(v);
    out << " cpt=[";
    for (std::size_t i = 0; i < bn.cpt[v].size(); ++i) out << (i ? ", " : "") << bn.cpt[v][i];
    out << "]\n";
  }
  return out.str();
}

}  // namespace pcr
