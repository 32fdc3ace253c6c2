#pragma once

#include <map>
#include <tuple>

#include "pcr/bayes_net.hpp"
#include "pcr/labelling.hpp"
#include "pcr/properties.hpp"
#include "pcr/restructure.hpp"

namespace pcr {

struct ProductResult {
  Circuit circuit;        // normalized product distribution
  double partition = 0;   // sum_x p_a(x) p_b(x)
  CircuitStats raw;       // unnormalized product before renormalization
  std::optional<RestructureResult> restructured;  // a after restructuring, when applicable
};

namespace detail {

inline ProductResult finish_product(CircuitBuilder& out, NodeId root) {
  Circuit raw = out.build(root, Normalization::unnormalized);
  ProductResult res;
  res.raw = stats(raw);
  auto [norm, z] = renormalize(raw);
  res.circuit = std::move(norm);
  res.partition = z;
  return res;
}

}  // namespace detail

/// Unnormalized pointwise product of two circuits over the same variables,
/// memoized on node pairs. Both must be smooth and decomposable, and every
/// pair of product nodes that meets must split their scope the same way.
inline Circuit multiply_unnormalized(const Circuit& a, const Circuit& b) {
  if (a.domains() != b.domains()) throw Error(Stage::structure, "circuits have different variables or domains");
  CircuitBuilder out(a.domains());
  std::map<std::pair<NodeId, NodeId>, NodeId> memo;
  std::function<NodeId(NodeId, NodeId)> mul = [&](NodeId x, NodeId y) -> NodeId {
    if (auto it = memo.find({x, y}); it != memo.end()) return it->second;
    const Node& nx = a.node(x);
    const Node& ny = b.node(y);
    if (a.scope(x) != b.scope(y))
      throw Error(Stage::structure, "nodes " + std::to_string(x) + " and " + std::to_string(y) + " have different scopes");
    NodeId made;
    if (nx.kind == NodeKind::leaf && ny.kind == NodeKind::leaf) {
      std::vector<double> t(nx.probs.size());
      for (std::size_t k = 0; k < t.size(); ++k) t[k] = nx.probs[k] * ny.probs[k];
      made = out.add_leaf(nx.var, std::move(t));
    } else if (nx.kind == NodeKind::sum || ny.kind == NodeKind::sum) {
      std::vector<NodeId> ch;
      std::vector<double> w;
      auto xs = nx.kind == NodeKind::sum ? nx.children : std::vector<NodeId>{x};
      auto xw = nx.kind == NodeKind::sum ? nx.weights : std::vector<double>{1.0};
      auto ys = ny.kind == NodeKind::sum ? ny.children : std::vector<NodeId>{y};
      auto yw = ny.kind == NodeKind::sum ? ny.weights : std::vector<double>{1.0};
      for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j) {
          const double wij = xw[i] * yw[j];
          if (wij <= 0.0) continue;
          ch.push_back(mul(xs[i], ys[j]));
          w.push_back(wij);
        }
      if (ch.empty()) throw Error(Stage::assembly, "product of two nodes has no positive-weight branch");
      made = out.add_sum(std::move(ch), std::move(w));
    } else if (nx.kind == NodeKind::product && ny.kind == NodeKind::product) {
      if (nx.children.size() != ny.children.size())
        throw Error(Stage::structure, "products " + std::to_string(x) + " and " + std::to_string(y) + " split differently");
      std::vector<NodeId> ch;
      for (NodeId cx : nx.children) {
        NodeId match = -1;
        for (NodeId cy : ny.children)
          if (b.scope(cy) == a.scope(cx)) match = cy;
        if (match < 0)
          throw Error(Stage::structure, "products " + std::to_string(x) + " and " + std::to_string(y) + " split differently");
        ch.push_back(mul(cx, match));
      }
      made = out.add_product(std::move(ch));
    } else {
      throw Error(Stage::structure, "cannot pair a leaf with a product over the same scope");
    }
    return memo[{x, y}] = made;
  };
  NodeId root = mul(a.root(), b.root());
  return out.build(root, Normalization::unnormalized);
}

/// Product of two circuits structured by the same vtree.
inline ProductResult multiply_same_vtree(const Circuit& a, const Circuit& b, const Vtree& v) {
  if (!respects(a, v) || !respects(b, v)) throw Error(Stage::structure, "circuits do not both respect the given vtree");
  Circuit raw = multiply_unnormalized(a, b);
  ProductResult res;
  res.raw = stats(raw);
  auto [norm, z] = renormalize(raw);
  res.circuit = std::move(norm);
  res.partition = z;
  return res;
}

/// Restructures a onto b's vtree with a contiguous labelling, then
/// multiplies on the shared vtree.
inline ProductResult multiply(const Circuit& a, const Vtree& va, const Circuit& b, const Vtree& vb,
                              const RestructureOptions& opts = {}) {
  if (!va.is_contiguous() || !vb.is_contiguous()) throw Error(Stage::structure, "both vtrees must be contiguous");
  if (va == vb) return multiply_same_vtree(a, b, vb);
  const TreeBayesNet bn = pc_to_bn(a, va);
  RestructureResult ra = restructure(a, va, contiguous_labelling(bn, vb), opts);
  ProductResult res = multiply_same_vtree(ra.circuit, b, vb);
  res.restructured = std::move(ra);
  return res;
}

/// Product of a linear-structured circuit with a contiguous circuit that
/// need not be structured. Each node of b over X_{s:e} is paired with every
/// state of the two-latent cover of the segment in a, and the product is
/// assembled bottom-up without restructuring a first.
inline ProductResult multiply_onthefly(const Circuit& a, const Vtree& va, const Circuit& b_in,
                                       std::size_t budget = kDefaultTableBudget) {
  if (va.num_vars() > 1 && !va.is_right_linear() && !va.is_left_linear())
    throw Error(Stage::structure, "first circuit must follow a linear vtree");
  if (a.domains() != b_in.domains()) throw Error(Stage::structure, "circuits have different variables or domains");
  const Circuit b = normalize(b_in);
  for (NodeId id = 0; id < b.size(); ++id)
    if (!scope::is_interval(b.scope(id))) throw Error(Stage::structure, "second circuit is not contiguous");
  const TreeBayesNet bn = pc_to_bn(a, va);

  auto label = [&](const Scope& s) { return linear_segment_label(va, s.front(), s.back()); };

  // Conditional tables keyed by the (parent, left, right) segments of a split.
  struct Move {
    std::vector<int> left, right;
    double p;
  };
  std::map<std::tuple<int, int, int>, std::map<std::vector<int>, std::vector<Move>>> split_cache;
  auto split_table = [&](int s, int m, int e) -> const std::map<std::vector<int>, std::vector<Move>>& {
    auto key = std::make_tuple(s, m, e);
    if (auto it = split_cache.find(key); it != split_cache.end()) return it->second;
    Scope cw = label(Scope{s, e});
    Scope cl = label(Scope{s, m});
    Scope cr = label(Scope{m + 1, e});
    const SparseTable cond = bn_conditional_table(bn, scope::unite(cl, cr), cw, budget);
    const auto lp = cond.positions(cl), rp = cond.positions(cr), wp = cond.positions(cw);
    std::map<std::vector<int>, std::vector<Move>> t;
    for (const auto& [k, p] : cond.entries) t[project(k, wp)].push_back({project(k, lp), project(k, rp), p});
    return split_cache.emplace(key, std::move(t)).first->second;
  };
  std::map<int, SparseTable> leaf_cache;

  CircuitBuilder out(a.domains());
  std::map<std::pair<NodeId, std::vector<int>>, NodeId> memo;
  std::map<std::pair<NodeId, NodeId>, NodeId> products;
  std::size_t entries = 0;

  // Node computing p_q(X_{s:e}) * p_a(X_{s:e} | label = state), or -1 if zero.
  std::function<NodeId(NodeId, const std::vector<int>&)> build = [&](NodeId q, const std::vector<int>& state) -> NodeId {
    auto mkey = std::make_pair(q, state);
    if (auto it = memo.find(mkey); it != memo.end()) return it->second;
    const Node& nq = b.node(q);
    const Scope& sq = b.scope(q);
    NodeId made = -1;
    if (nq.kind == NodeKind::leaf) {
      const int var = nq.var;
      auto it = leaf_cache.find(var);
      if (it == leaf_cache.end())
        it = leaf_cache.emplace(var, bn_conditional_table(bn, {bn.node_of_var(var)}, label(sq), budget)).first;
      const SparseTable& cond = it->second;
      const auto gp = cond.positions(label(sq));
      const auto xp = cond.positions({bn.node_of_var(var)});
      std::vector<double> t(b.domain(var), 0.0);
      for (const auto& [k, p] : cond.entries)
        if (project(k, gp) == state) t[k[xp[0]]] = p * nq.probs[k[xp[0]]];
      if (std::any_of(t.begin(), t.end(), [](double x) { return x > 0.0; })) made = out.add_leaf(var, std::move(t));
    } else if (nq.kind == NodeKind::sum) {
      std::map<NodeId, std::size_t> slot;
      std::vector<NodeId> ch;
      std::vector<double> w;
      for (std::size_t i = 0; i < nq.children.size(); ++i) {
        const NodeId r = nq.children[i];
        const Node& nr = b.node(r);
        if (nq.weights[i] <= 0.0) continue;
        if (nr.kind != NodeKind::product || nr.children.size() != 2)
          throw Error(Stage::structure, "second circuit must alternate sums and binary products");
        NodeId r1 = nr.children[0], r2 = nr.children[1];
        if (b.scope(r1).front() > b.scope(r2).front()) std::swap(r1, r2);
        const int m = b.scope(r1).back();
        const auto& table = split_table(sq.front(), m, sq.back());
        auto moves = table.find(state);
        if (moves == table.end()) continue;
        for (const Move& mv : moves->second) {
          NodeId x = build(r1, mv.left);
          if (x < 0) continue;
          NodeId y = build(r2, mv.right);
          if (y < 0) continue;
          auto [pit, fresh] = products.emplace(std::make_pair(x, y), -1);
          if (fresh) pit->second = out.add_product({x, y});
          const double wt = nq.weights[i] * mv.p;
          auto [sit, new_child] = slot.emplace(pit->second, ch.size());
          if (new_child) {
            ch.push_back(pit->second);
            w.push_back(wt);
          } else {
            w[sit->second] += wt;
          }
        }
      }
      if (!ch.empty()) {
        entries += ch.size();
        made = out.add_sum(std::move(ch), std::move(w));
      }
    } else {
      throw Error(Stage::structure, "second circuit must alternate sums and binary products");
    }
    if (entries > budget) throw BudgetExceeded("on-the-fly product exceeds the budget of " + std::to_string(budget) + " entries");
    return memo[mkey] = made;
  };
  NodeId root = build(b.root(), {});
  if (root < 0) throw Error(Stage::assembly, "product of the two circuits is identically zero");
  return detail::finish_product(out, root);
}

}  // namespace pcr
