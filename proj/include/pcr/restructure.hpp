#pragma once

#include <cmath>
#include <map>

#include "pcr/bayes_net.hpp"
#include "pcr/circuit.hpp"
#include "pcr/labelling.hpp"

namespace pcr {

struct RestructureOptions {
  std::size_t budget = kDefaultTableBudget;
  /// Emit every product and sum edge, including zero-probability ones.
  bool dense = false;
  /// Run the full labelling validity check before building.
  bool check_labelling = true;
};

/// Sizes of the two layers built for one target vtree node.
struct LayerStats {
  int node = 0;  // target vtree node
  int label_size = 0;
  int m = 0;        // |C_l ∪ C_r|
  int m_prime = 0;  // |C_l ∪ C_r ∪ C_w|
  int products = 0;
  int sums = 0;
  std::size_t sum_edges = 0;
  std::size_t leaves = 0;
};

struct RestructureResult {
  Circuit circuit;
  LabelledVtree labelled;
  std::vector<LayerStats> layers;
  int M = 0;
  int M_prime = 0;
  int source_hidden_states = 0;
};

namespace detail {

inline std::vector<int> assignment_on(const std::vector<int>& key, const SparseTable& t, const Scope& sub) {
  return project(key, t.positions(sub));
}

/// All joint values of `vars` (cardinalities from the network).
inline std::vector<std::vector<int>> all_values(const TreeBayesNet& bn, const Scope& vars) {
  std::vector<int> dom;
  for (int z : vars) dom.push_back(bn.card[z]);
  std::vector<std::vector<int>> out;
  for_each_assignment(dom, [&](const Assignment& a) { out.push_back(a); });
  if (vars.empty()) out.assign(1, {});
  return out;
}

}  // namespace detail

/// Builds a circuit over the labelled target vtree computing the same
/// distribution as the source circuit.
inline RestructureResult restructure(const Circuit& c, const Vtree& source, const LabelledVtree& lw,
                                     const RestructureOptions& opts = {}) {
  const TreeBayesNet bn = pc_to_bn(c, source);
  if (opts.check_labelling) {
    auto rep = validate_labelling(bn, lw);
    if (!rep.valid) throw Error(Stage::labelling, "invalid labelling: " + rep.problems.front());
  }
  const Vtree& W = lw.vtree;
  CircuitBuilder out(c.domains());
  // Per target node: value of its label -> node computing p(X_w | C_w = value).
  std::vector<std::map<std::vector<int>, NodeId>> layer(W.size());
  RestructureResult res;
  res.labelled = lw;
  res.source_hidden_states = source.size() > 1 ? augment_index(c, source).hidden_state_size() : 1;
  std::size_t entries = 0;
  auto charge = [&](std::size_t n) {
    entries += n;
    if (entries > opts.budget) throw BudgetExceeded("restructured circuit exceeds the budget of " + std::to_string(opts.budget) + " entries");
  };

  for (int w : W.post_order()) {
    const Scope& cw = lw.labels[w];
    LayerStats st;
    st.node = w;
    st.label_size = static_cast<int>(cw.size());
    if (W.is_leaf(w)) {
      const int var = W.node(w).var;
      const int xnode = bn.node_of_var(var);
      const SparseTable cond = bn_leaf_conditional(bn, var, cw, opts.budget);
      const auto xpos = cond.positions({xnode});
      const auto gpos = cond.positions(cw);
      std::map<std::vector<int>, std::vector<double>> tables;
      for (const auto& [key, p] : cond.entries) {
        auto& t = tables[project(key, gpos)];
        t.resize(c.domain(var), 0.0);
        t[key[xpos[0]]] = p;
      }
      for (auto& [g, t] : tables) {
        double total = std::accumulate(t.begin(), t.end(), 0.0);
        if (std::abs(total - 1.0) > 1e-12)
          for (double& x : t) x /= total;
        layer[w][g] = out.add_leaf(var, std::move(t));
      }
      st.leaves = tables.size();
      charge(st.leaves * c.domain(var));
      res.layers.push_back(st);
      continue;
    }

    const int l = W.node(w).left, r = W.node(w).right;
    const Scope& cl = lw.labels[l];
    const Scope& cr = lw.labels[r];
    const Scope lr = scope::unite(cl, cr);
    const Scope all = scope::unite(lr, cw);
    st.m = static_cast<int>(lr.size());
    st.m_prime = static_cast<int>(all.size());
    const SparseTable joint = bn_joint(bn, all, opts.budget);
    const SparseTable prior = marginal(joint, cw);
    const auto lpos = joint.positions(cl), rpos = joint.positions(cr), wpos = joint.positions(cw);

    std::map<std::pair<NodeId, NodeId>, NodeId> products;
    auto product_of = [&](NodeId a, NodeId b) {
      auto [it, fresh] = products.emplace(std::make_pair(a, b), -1);
      if (fresh) it->second = out.add_product({a, b});
      return it->second;
    };
    std::map<std::vector<int>, std::pair<std::vector<NodeId>, std::vector<double>>> sums;

    if (!opts.dense) {
      for (const auto& [key, p] : joint.entries) {
        const NodeId a = layer[l].at(project(key, lpos));
        const NodeId b = layer[r].at(project(key, rpos));
        auto& s = sums[project(key, wpos)];
        s.first.push_back(product_of(a, b));
        s.second.push_back(p / prior.at(project(key, wpos)));
      }
    } else {
      // Every consistent combination of existing child nodes, zero weights kept.
      const SparseTable& pj = joint;
      const auto lrpos_l = [&](const std::vector<int>& u) { return detail::assignment_on(u, SparseTable{lr, {}, {}}, cl); };
      const auto lrpos_r = [&](const std::vector<int>& u) { return detail::assignment_on(u, SparseTable{lr, {}, {}}, cr); };
      std::vector<std::vector<int>> combos;
      for (const auto& u : detail::all_values(bn, lr)) {
        auto ul = lrpos_l(u), ur = lrpos_r(u);
        if (layer[l].count(ul) && layer[r].count(ur)) combos.push_back(u);
      }
      SparseTable all_tab{all, {}, {}};
      const auto lr_in_all = all_tab.positions(lr);
      const auto cw_in_all = all_tab.positions(cw);
      for (const auto& [g, pg] : prior.entries) {
        for (const auto& u : combos) {
          // Consistency with g on shared latents.
          std::vector<int> key(all.size(), kMissing);
          for (std::size_t i = 0; i < lr.size(); ++i) key[lr_in_all[i]] = u[i];
          bool ok = true;
          for (std::size_t i = 0; i < cw.size(); ++i) {
            int& slot = key[cw_in_all[i]];
            if (slot != kMissing && slot != g[i]) ok = false;
            slot = g[i];
          }
          if (!ok) continue;
          auto& s = sums[g];
          s.first.push_back(product_of(layer[l].at(lrpos_l(u)), layer[r].at(lrpos_r(u))));
          s.second.push_back(pj.at(key) / pg);
        }
      }
    }

    for (auto& [g, s] : sums) {
      double total = std::accumulate(s.second.begin(), s.second.end(), 0.0);
      if (std::abs(total - 1.0) > 1e-12)
        for (double& x : s.second) x /= total;
      st.sum_edges += s.first.size();
      layer[w][g] = out.add_sum(std::move(s.first), std::move(s.second));
    }
    st.products = static_cast<int>(products.size());
    st.sums = static_cast<int>(sums.size());
    charge(2 * products.size() + st.sum_edges);
    res.layers.push_back(st);
  }

  const auto& top = layer[W.root()];
  if (top.size() != 1) throw Error(Stage::assembly, "root layer must hold exactly one node");
  res.circuit = out.build(top.begin()->second, Normalization::normalized);
  std::tie(res.M, res.M_prime) = label_cardinality(lw);
  return res;
}

/// Source circuit → network → greedy labelling of the target → rebuild.
inline RestructureResult restructure_to_vtree(const Circuit& c, const Vtree& source, const Vtree& target,
                                              const RestructureOptions& opts = {}, TieBreak tie = TieBreak::first) {
  const TreeBayesNet bn = pc_to_bn(c, source);
  return restructure(c, source, compute_label(bn, target, tie), opts);
}

/// Restructures onto the balanced vtree derived from the source vtree.
inline RestructureResult depth_reduce(const Circuit& c, const Vtree& source, const RestructureOptions& opts = {}) {
  return restructure(c, source, balanced_vtree(source), opts);
}

}  // namespace pcr
