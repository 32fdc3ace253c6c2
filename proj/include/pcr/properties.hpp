#pragma once

#include <map>
#include <optional>
#include <unordered_map>

#include "pcr/circuit.hpp"
#include "pcr/vtree.hpp"

namespace pcr {

enum class Verdict { yes, no, unchecked };

inline std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::yes: return "true";
    case Verdict::no: return "false";
    case Verdict::unchecked: return "unchecked";
  }
  return "?";
}

struct PropertyReport {
  bool smooth = false;
  bool decomposable = false;
  bool structured = false;
  std::optional<Vtree> vtree;  // set iff structured
  Verdict deterministic = Verdict::unchecked;
  bool alternating = false;
  bool binary_products = false;
  bool contiguous = false;

  std::vector<NodeId> non_smooth_sums;
  std::vector<NodeId> non_decomposable_products;
  std::vector<NodeId> non_deterministic_sums;
};

/// Largest joint state space the semantic determinism check enumerates.
inline constexpr double kDeterminismEnumerationLimit = 1 << 20;

namespace detail {

inline bool smooth_and_decomposable(const Circuit& c) {
  for (NodeId id = 0; id < c.size(); ++id) {
    const Node& nd = c.node(id);
    if (nd.kind == NodeKind::sum) {
      for (NodeId ch : nd.children)
        if (c.scope(ch) != c.scope(id)) return false;
    } else if (nd.kind == NodeKind::product) {
      std::size_t total = 0;
      for (NodeId ch : nd.children) total += c.scope(ch).size();
      if (total != c.scope(id).size()) return false;
    }
  }
  return true;
}

/// Builds the unique vtree consistent with every product split, if any.
inline std::optional<Vtree> infer_vtree(const Circuit& c) {
  const Scope& all = c.scope(c.root());
  if (static_cast<int>(all.size()) != c.num_vars()) return std::nullopt;
  std::map<Scope, std::pair<Scope, Scope>> splits;
  auto add_split = [&](const Scope& s, Scope a, Scope b) {
    if (b < a) std::swap(a, b);
    auto [it, inserted] = splits.emplace(s, std::make_pair(a, b));
    return inserted || it->second == std::make_pair(a, b);
  };
  for (NodeId id = 0; id < c.size(); ++id) {
    const Node& nd = c.node(id);
    if (nd.kind != NodeKind::product || nd.children.size() < 2) continue;
    Scope acc = c.scope(nd.children[0]);
    for (std::size_t i = 1; i < nd.children.size(); ++i) {
      const Scope& next = c.scope(nd.children[i]);
      Scope joined = scope::unite(acc, next);
      if (!add_split(joined, acc, next)) return std::nullopt;
      acc = std::move(joined);
    }
  }

  Vtree::Builder b;
  bool ok = true;
  std::function<int(const Scope&)> build = [&](const Scope& s) -> int {
    if (!ok) return -1;
    if (s.size() == 1) return b.add_leaf(s[0]);
    if (auto it = splits.find(s); it != splits.end()) {
      int l = build(it->second.first);
      int r = build(it->second.second);
      return b.add_inner(l, r);
    }
    // Unconstrained scope: group maximal constrained sub-scopes, then singletons.
    std::vector<Scope> units;
    for (const auto& [key, _] : splits) {
      if (key.size() >= s.size() || !scope::is_subset(key, s)) continue;
      bool maximal = true;
      for (const auto& [other, __] : splits)
        if (other != key && other.size() < s.size() && scope::is_subset(other, s) && scope::is_subset(key, other)) {
          maximal = false;
          break;
        }
      if (maximal) units.push_back(key);
    }
    Scope covered;
    for (const Scope& u : units) {
      if (!scope::disjoint(covered, u)) {
        ok = false;
        return -1;
      }
      covered = scope::unite(covered, u);
    }
    for (int v : scope::subtract(s, covered)) units.push_back({v});
    std::sort(units.begin(), units.end());
    int acc = build(units[0]);
    for (std::size_t i = 1; i < units.size(); ++i) acc = b.add_inner(acc, build(units[i]));
    return acc;
  };
  int root = build(all);
  if (!ok) return std::nullopt;
  Vtree v = b.build(root);
  for (const auto& [s, lr] : splits) {
    int node = v.find(s);
    if (node < 0 || v.is_leaf(node)) return std::nullopt;
    auto a = v.scope(v.node(node).left);
    auto bb = v.scope(v.node(node).right);
    if (bb < a) std::swap(a, bb);
    if (std::make_pair(a, bb) != lr) return std::nullopt;
  }
  return v;
}

/// Values of `var` on which the node can be non-zero.
class SupportOracle {
 public:
  explicit SupportOracle(const Circuit& c) : c_(c) {}

  const std::vector<char>& support(NodeId id, int var) {
    auto key = std::make_pair(id, var);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const Node& nd = c_.node(id);
    std::vector<char> out(c_.domain(var), 0);
    switch (nd.kind) {
      case NodeKind::leaf:
        for (int k = 0; k < c_.domain(var); ++k) out[k] = nd.probs[k] > 0.0;
        break;
      case NodeKind::product:
        for (NodeId ch : nd.children)
          if (scope::contains(c_.scope(ch), var)) out = support(ch, var);
        break;
      case NodeKind::sum:
        for (std::size_t i = 0; i < nd.children.size(); ++i) {
          if (nd.weights[i] <= 0.0) continue;
          const auto& s = support(nd.children[i], var);
          for (int k = 0; k < c_.domain(var); ++k) out[k] |= s[k];
        }
        break;
    }
    return memo_.emplace(key, std::move(out)).first->second;
  }

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<int, int>& p) const { return std::hash<long long>()((static_cast<long long>(p.first) << 32) ^ p.second); }
  };
  const Circuit& c_;
  std::unordered_map<std::pair<int, int>, std::vector<char>, PairHash> memo_;
};

}  // namespace detail

/// Semantic determinism by exhaustive enumeration. Returns offending sums.
inline std::vector<NodeId> non_deterministic_sums(const Circuit& c) {
  std::vector<char> bad(c.size(), 0);
  for_each_assignment(c.domains(), [&](const Assignment& x) {
    auto val = evaluate_nodes(c, x);
    for (NodeId id = 0; id < c.size(); ++id) {
      const Node& nd = c.node(id);
      if (nd.kind != NodeKind::sum || bad[id]) continue;
      int nonzero = 0;
      for (NodeId ch : nd.children) nonzero += val[ch] > 0.0;
      if (nonzero > 1) bad[id] = 1;
    }
  });
  std::vector<NodeId> out;
  for (NodeId id = 0; id < c.size(); ++id)
    if (bad[id]) out.push_back(id);
  return out;
}

inline PropertyReport validate(const Circuit& c) {
  PropertyReport r;
  r.smooth = true;
  r.decomposable = true;
  r.alternating = true;
  r.binary_products = true;
  bool intervals = true;
  for (NodeId id = 0; id < c.size(); ++id) {
    const Node& nd = c.node(id);
    if (!scope::is_interval(c.scope(id))) intervals = false;
    if (nd.kind == NodeKind::sum) {
      for (NodeId ch : nd.children) {
        if (c.scope(ch) != c.scope(id)) {
          r.smooth = false;
          r.non_smooth_sums.push_back(id);
          break;
        }
      }
      for (NodeId ch : nd.children)
        if (c.node(ch).kind != NodeKind::product) r.alternating = false;
    } else if (nd.kind == NodeKind::product) {
      std::size_t total = 0;
      for (NodeId ch : nd.children) total += c.scope(ch).size();
      if (total != c.scope(id).size()) {
        r.decomposable = false;
        r.non_decomposable_products.push_back(id);
      }
      if (nd.children.size() != 2) r.binary_products = false;
      for (NodeId ch : nd.children)
        if (c.node(ch).kind == NodeKind::product) r.alternating = false;
    }
  }
  r.contiguous = r.smooth && r.decomposable && intervals;
  if (r.decomposable) {
    r.vtree = detail::infer_vtree(c);
    r.structured = r.vtree.has_value();
  }

  if (state_space_size(c.domains()) <= kDeterminismEnumerationLimit) {
    r.non_deterministic_sums = non_deterministic_sums(c);
    r.deterministic = r.non_deterministic_sums.empty() ? Verdict::yes : Verdict::no;
  } else {
    // Sufficient syntactic check: some variable separates the branches of every sum.
    detail::SupportOracle oracle(c);
    bool all = true;
    for (NodeId id = 0; id < c.size() && all; ++id) {
      const Node& nd = c.node(id);
      if (nd.kind != NodeKind::sum || nd.children.size() < 2) continue;
      bool found = false;
      for (int var : c.scope(id)) {
        std::vector<int> hits(c.domain(var), 0);
        bool disjoint = true;
        for (NodeId ch : nd.children) {
          const auto& s = oracle.support(ch, var);
          for (int k = 0; k < c.domain(var); ++k)
            if (s[k] && hits[k]++) disjoint = false;
        }
        if (disjoint) {
          found = true;
          break;
        }
      }
      all = found;
    }
    r.deterministic = all ? Verdict::yes : Verdict::unchecked;
  }
  return r;
}

/// Probability of a partial assignment (kMissing entries summed out).
inline double marginalize_evaluate(const Circuit& c, const Assignment& partial) {
  if (!detail::smooth_and_decomposable(c))
    throw Error(Stage::structure, "marginalization needs a smooth and decomposable circuit");
  return evaluate_nodes(c, partial)[c.root()];
}

/// Total mass sum_x p(x).
inline double partition_function(const Circuit& c) {
  return marginalize_evaluate(c, Assignment(c.num_vars(), kMissing));
}

/// Rewrites a smooth decomposable circuit into alternating sum/product layers
/// with binary products. n-ary products are left-folded in child order,
/// chains of sums are collapsed and leaf mixtures are merged into one leaf.
inline Circuit normalize(const Circuit& c) {
  if (!detail::smooth_and_decomposable(c))
    throw Error(Stage::structure, "normalize needs a smooth and decomposable circuit");

  struct Term {
    double weight;
    NodeId node;  // product or leaf in the output
  };
  CircuitBuilder out(c.domains());
  std::vector<std::optional<std::vector<Term>>> mixture(c.size());
  std::vector<NodeId> as_child(c.size(), -1);

  auto mixed_leaf = [&](const std::vector<Term>& terms) {
    const int var = out.node(terms.front().node).var;
    std::vector<double> table(c.domain(var), 0.0);
    for (const Term& t : terms) {
      const Node& leaf = out.node(t.node);
      for (int k = 0; k < c.domain(var); ++k) table[k] += t.weight * leaf.probs[k];
    }
    return out.add_leaf(var, std::move(table));
  };

  std::function<const std::vector<Term>&(NodeId)> mix;
  std::function<NodeId(NodeId)> child_node;

  // Node usable under a product: a leaf for singleton scopes, a sum otherwise.
  child_node = [&](NodeId id) -> NodeId {
    if (as_child[id] >= 0) return as_child[id];
    const auto& terms = mix(id);
    NodeId made;
    if (c.scope(id).size() == 1) {
      if (terms.size() == 1 && terms[0].weight == 1.0) made = terms[0].node;
      else made = mixed_leaf(terms);
    } else {
      std::vector<NodeId> ch;
      std::vector<double> w;
      for (const Term& t : terms) {
        ch.push_back(t.node);
        w.push_back(t.weight);
      }
      made = out.add_sum(std::move(ch), std::move(w));
    }
    return as_child[id] = made;
  };

  mix = [&](NodeId id) -> const std::vector<Term>& {
    if (mixture[id]) return *mixture[id];
    const Node& nd = c.node(id);
    std::vector<Term> terms;
    switch (nd.kind) {
      case NodeKind::leaf:
        terms.push_back({1.0, out.add_leaf(nd.var, nd.probs)});
        break;
      case NodeKind::sum: {
        std::map<NodeId, std::size_t> pos;
        for (std::size_t i = 0; i < nd.children.size(); ++i) {
          if (nd.weights[i] <= 0.0) continue;
          for (const Term& t : mix(nd.children[i])) {
            double w = nd.weights[i] * t.weight;
            if (w <= 0.0) continue;
            auto [it, fresh] = pos.emplace(t.node, terms.size());
            if (fresh) terms.push_back({w, t.node});
            else terms[it->second].weight += w;
          }
        }
        break;
      }
      case NodeKind::product: {
        std::vector<NodeId> factors;
        std::function<void(NodeId)> flatten = [&](NodeId f) {
          const Node& fn = c.node(f);
          if (fn.kind == NodeKind::product) {
            for (NodeId g : fn.children) flatten(g);
          } else {
            factors.push_back(f);
          }
        };
        for (NodeId ch : nd.children) flatten(ch);
        if (factors.size() == 1) {
          terms = mix(factors[0]);
          break;
        }
        NodeId acc = child_node(factors[0]);
        NodeId prod = -1;
        for (std::size_t i = 1; i < factors.size(); ++i) {
          prod = out.add_product({acc, child_node(factors[i])});
          if (i + 1 < factors.size()) acc = out.add_sum({prod}, {1.0});
        }
        terms.push_back({1.0, prod});
        break;
      }
    }
    if (terms.empty()) throw Error(Stage::structure, "node " + std::to_string(id) + " has no positive-weight branch");
    mixture[id] = std::move(terms);
    return *mixture[id];
  };

  NodeId root;
  if (c.scope(c.root()).size() == 1) {
    root = child_node(c.root());
  } else {
    const auto& terms = mix(c.root());
    std::vector<NodeId> ch;
    std::vector<double> w;
    for (const Term& t : terms) {
      ch.push_back(t.node);
      w.push_back(t.weight);
    }
    root = out.add_sum(std::move(ch), std::move(w));
  }
  return out.build(root, c.normalization());
}

/// Turns a smooth decomposable circuit with arbitrary non-negative parameters
/// into a normalized one; returns it together with the partition constant.
inline std::pair<Circuit, double> renormalize(const Circuit& c) {
  if (!detail::smooth_and_decomposable(c))
    throw Error(Stage::structure, "renormalize needs a smooth and decomposable circuit");
  auto mass = evaluate_nodes(c, Assignment(c.num_vars(), kMissing));
  const double z = mass[c.root()];
  if (!(z > 0.0)) throw Error(Stage::assembly, "circuit has zero total mass");

  CircuitBuilder out(c.domains());
  std::vector<NodeId> map(c.size(), -1);
  for (NodeId id : c.topological_order()) {
    if (!(mass[id] > 0.0)) continue;
    const Node& nd = c.node(id);
    switch (nd.kind) {
      case NodeKind::leaf: {
        std::vector<double> p(nd.probs.size());
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = nd.probs[k] / mass[id];
        map[id] = out.add_leaf(nd.var, std::move(p));
        break;
      }
      case NodeKind::product: {
        std::vector<NodeId> ch;
        for (NodeId x : nd.children) ch.push_back(map[x]);
        map[id] = out.add_product(std::move(ch));
        break;
      }
      case NodeKind::sum: {
        std::vector<NodeId> ch;
        std::vector<double> w;
        for (std::size_t i = 0; i < nd.children.size(); ++i) {
          NodeId x = nd.children[i];
          double wi = nd.weights[i] * mass[x] / mass[id];
          if (!(wi > 0.0)) continue;
          ch.push_back(map[x]);
          w.push_back(wi);
        }
        double total = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& wi : w) wi /= total;
        map[id] = out.add_sum(std::move(ch), std::move(w));
        break;
      }
    }
  }
  return {out.build(map[c.root()], Normalization::normalized), z};
}

/// Largest number of product nodes sharing the scope of one inner vtree node.
inline int hidden_state_size(const Circuit& c, const Vtree& v) {
  std::vector<int> count(v.size(), 0);
  for (NodeId id = 0; id < c.size(); ++id) {
    if (c.node(id).kind != NodeKind::product) continue;
    int node = v.find(c.scope(id));
    if (node < 0 || v.is_leaf(node))
      throw Error(Stage::structure, "product node " + std::to_string(id) + " does not match any inner vtree node");
    ++count[node];
  }
  return *std::max_element(count.begin(), count.end());
}

/// Same variables, same splits: every product decomposes along a node of v.
inline bool respects(const Circuit& c, const Vtree& v) {
  if (v.num_vars() != c.num_vars()) return false;
  for (NodeId id = 0; id < c.size(); ++id) {
    const Node& nd = c.node(id);
    if (nd.kind != NodeKind::product) continue;
    if (nd.children.size() != 2) return false;
    int node = v.find(c.scope(id));
    if (node < 0 || v.is_leaf(node)) return false;
    const Scope& l = v.scope(v.node(node).left);
    const Scope& r = v.scope(v.node(node).right);
    const Scope& a = c.scope(nd.children[0]);
    const Scope& b = c.scope(nd.children[1]);
    if (!((a == l && b == r) || (a == r && b == l))) return false;
  }
  return true;
}

}  // namespace pcr
