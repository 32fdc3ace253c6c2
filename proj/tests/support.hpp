#pragma once

#include <cmath>
#include <string>

#include "pcr/pcr.hpp"

namespace pcr::fixtures {

/// Four binary variables, right-linear vtree, two products per inner node.
/// Hand-picked weights; every latent transition is dense.
inline Circuit four_var_chain() {
  CircuitBuilder b({2, 2, 2, 2});
  // X3 and X2 leaves, one pair per state of the bottom latent.
  const NodeId x3a = b.add_leaf(3, {0.9, 0.1}), x3b = b.add_leaf(3, {0.2, 0.8});
  const NodeId x2a = b.add_leaf(2, {0.7, 0.3}), x2b = b.add_leaf(2, {0.4, 0.6});
  const NodeId p3a = b.add_product({x2a, x3a}), p3b = b.add_product({x2b, x3b});
  const NodeId s3a = b.add_sum({p3a, p3b}, {0.8, 0.2}), s3b = b.add_sum({p3a, p3b}, {0.3, 0.7});
  const NodeId x1a = b.add_leaf(1, {0.6, 0.4}), x1b = b.add_leaf(1, {0.1, 0.9});
  const NodeId p2a = b.add_product({x1a, s3a}), p2b = b.add_product({x1b, s3b});
  const NodeId s2a = b.add_sum({p2a, p2b}, {0.75, 0.25}), s2b = b.add_sum({p2a, p2b}, {0.35, 0.65});
  const NodeId x0a = b.add_leaf(0, {0.5, 0.5}), x0b = b.add_leaf(0, {0.85, 0.15});
  const NodeId p1a = b.add_product({x0a, s2a}), p1b = b.add_product({x0b, s2b});
  return b.build(b.add_sum({p1a, p1b}, {0.4, 0.6}));
}

inline Vtree chain_vtree(int n) { return Vtree::right_linear(Vtree::canonical_order(n)); }

/// 0.5 * p(X0) p(X1, X2) + 0.5 * p(X0, X1) p(X2): contiguous, decomposable,
/// but its two products split {X0, X1, X2} at different points.
inline Circuit mixed_split_circuit() {
  CircuitBuilder b({2, 2, 2});
  const NodeId a0 = b.add_leaf(0, {0.3, 0.7}), a1 = b.add_leaf(1, {0.6, 0.4}), a2 = b.add_leaf(2, {0.2, 0.8});
  const NodeId c0 = b.add_leaf(0, {0.9, 0.1}), c1 = b.add_leaf(1, {0.5, 0.5}), c2 = b.add_leaf(2, {0.45, 0.55});
  const NodeId right = b.add_sum({b.add_product({a1, a2}), b.add_product({c1, c2})}, {0.5, 0.5});
  const NodeId left = b.add_sum({b.add_product({a0, a1}), b.add_product({c0, c1})}, {0.25, 0.75});
  const NodeId p = b.add_product({a0, right});
  const NodeId q = b.add_product({left, c2});
  return b.build(b.add_sum({p, q}, {0.5, 0.5}));
}

/// Uniform distribution over the given domains as a product of leaves.
inline Circuit uniform_circuit(const std::vector<int>& domains, const Vtree& v) {
  CircuitBuilder b(domains);
  std::function<NodeId(int)> rec = [&](int u) -> NodeId {
    if (v.is_leaf(u)) {
      const int var = v.node(u).var;
      return b.add_leaf(var, std::vector<double>(domains[var], 1.0 / domains[var]));
    }
    const NodeId p = b.add_product({rec(v.node(u).left), rec(v.node(u).right)});
    return b.add_sum({p}, {1.0});
  };
  return b.build(rec(v.root()));
}

/// Likelihood of a full observation under a tree network by upward
/// message passing.
inline double tree_likelihood(const TreeBayesNet& bn, const Assignment& x) {
  const int root = bn.root();
  std::function<std::vector<double>(int)> up = [&](int v) -> std::vector<double> {
    // msg[parent_state] = p(observations below v | parent state)
    const int pc = bn.parent(v) < 0 ? 1 : bn.card[bn.parent(v)];
    std::vector<double> below(bn.card[v], 1.0);
    if (!bn.is_latent(v)) {
      std::fill(below.begin(), below.end(), 0.0);
      below[x[bn.vtree.node(v).var]] = 1.0;
    } else {
      for (int c : {bn.vtree.node(v).left, bn.vtree.node(v).right}) {
        auto m = up(c);
        for (int s = 0; s < bn.card[v]; ++s) below[s] *= m[s];
      }
    }
    std::vector<double> msg(pc, 0.0);
    for (int j = 0; j < pc; ++j)
      for (int s = 0; s < bn.card[v]; ++s) msg[j] += bn.prob(v, j, s) * below[s];
    return msg;
  };
  return up(root)[0];
}

inline bool near_relative(double a, double b, double tol) { return oracle::relative_deviation(a, b) <= tol; }

/// All strings of length n over k symbols in lexicographic order.
inline std::vector<std::vector<int>> all_strings(int n, int k) {
  std::vector<std::vector<int>> out;
  for_each_assignment(std::vector<int>(n, k), [&](const Assignment& s) { out.push_back(s); });
  return out;
}

}  // namespace pcr::fixtures
