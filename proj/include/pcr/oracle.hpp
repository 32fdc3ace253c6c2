#pragma once

#include <cmath>
#include <deque>

#include "pcr/bayes_net.hpp"
#include "pcr/circuit.hpp"
#include "pcr/labelling.hpp"

namespace pcr::oracle {

inline constexpr double kEnumerationLimit = 1e6;
inline constexpr std::size_t kInducedTreeLimit = 10'000;

/// Dense table over every joint value, lexicographic with variable 0 slowest.
struct DenseTable {
  std::vector<int> domains;
  std::vector<double> values;

  std::size_t index(const Assignment& x) const {
    std::size_t i = 0;
    for (std::size_t k = 0; k < domains.size(); ++k) i = i * domains[k] + x[k];
    return i;
  }
  double total() const { return std::accumulate(values.begin(), values.end(), 0.0); }
};

inline void require_enumerable(const std::vector<int>& domains) {
  if (state_space_size(domains) > kEnumerationLimit)
    throw Error(Stage::usage, "state space of " + std::to_string(state_space_size(domains)) + " is too large to enumerate");
}

inline DenseTable joint_table(const Circuit& c) {
  require_enumerable(c.domains());
  DenseTable t{c.domains(), {}};
  for_each_assignment(c.domains(), [&](const Assignment& x) { t.values.push_back(evaluate(c, x)); });
  return t;
}

/// Joint over every network node (ids in order): product of all CPT entries.
inline DenseTable bn_joint_table(const TreeBayesNet& bn) {
  require_enumerable(bn.card);
  DenseTable t{bn.card, {}};
  for_each_assignment(bn.card, [&](const Assignment& z) {
    double p = 1.0;
    for (int v = 0; v < bn.size() && p > 0.0; ++v) {
      const int par = bn.parent(v);
      p *= bn.prob(v, par < 0 ? 0 : z[par], z[v]);
    }
    t.values.push_back(p);
  });
  return t;
}

/// Sums the latents out of a network joint, leaving a table over X in
/// variable order.
inline DenseTable observed_marginal(const TreeBayesNet& bn, const DenseTable& full) {
  const int n = bn.vtree.num_vars();
  DenseTable out;
  for (int x = 0; x < n; ++x) out.domains.push_back(bn.card[bn.node_of_var(x)]);
  out.values.assign(static_cast<std::size_t>(state_space_size(out.domains)), 0.0);
  std::size_t i = 0;
  Assignment xs(n);
  for_each_assignment(full.domains, [&](const Assignment& z) {
    for (int x = 0; x < n; ++x) xs[x] = z[bn.node_of_var(x)];
    out.values[out.index(xs)] += full.values[i++];
  });
  return out;
}

/// Sum over latents of the network joint, by depth-first enumeration of
/// every (x, z) with zero-probability prefixes cut off. Slower than
/// elimination but shares no code with it.
inline DenseTable bn_observed_table(const TreeBayesNet& bn, double limit = 1e9) {
  if (state_space_size(bn.card) > limit) throw Error(Stage::usage, "network state space too large to enumerate");
  const int n = bn.vtree.num_vars();
  DenseTable out;
  for (int x = 0; x < n; ++x) out.domains.push_back(bn.card[bn.node_of_var(x)]);
  out.values.assign(static_cast<std::size_t>(state_space_size(out.domains)), 0.0);
  // Pre-order ids put every parent before its children.
  Assignment z(bn.size(), 0), xs(n, 0);
  std::function<void(int, double)> rec = [&](int v, double p) {
    if (v == bn.size()) {
      for (int x = 0; x < n; ++x) xs[x] = z[bn.node_of_var(x)];
      out.values[out.index(xs)] += p;
      return;
    }
    const int par = bn.parent(v);
    for (int s = 0; s < bn.card[v]; ++s) {
      const double q = p * bn.prob(v, par < 0 ? 0 : z[par], s);
      if (q == 0.0) continue;
      z[v] = s;
      rec(v + 1, q);
    }
  };
  rec(0, 1.0);
  return out;
}

inline double relative_deviation(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline double max_relative_deviation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(Stage::usage, "tables have different sizes");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_deviation(a[i], b[i]));
  return worst;
}

/// Largest relative difference between the two circuits over all inputs.
inline double check_equivalence(const Circuit& a, const Circuit& b) {
  if (a.domains() != b.domains()) throw Error(Stage::usage, "circuits have different variables or domains");
  return max_relative_deviation(joint_table(a).values, joint_table(b).values);
}

struct Proportionality {
  double constant = 0.0;  // sum_x p_a(x) p_b(x)
  double deviation = 0.0;
};

/// How far prod(x) * constant strays from p_a(x) * p_b(x).
inline Proportionality check_proportional(const Circuit& prod, const Circuit& a, const Circuit& b) {
  if (a.domains() != b.domains() || prod.domains() != a.domains())
    throw Error(Stage::usage, "circuits have different variables or domains");
  const auto ta = joint_table(a).values, tb = joint_table(b).values, tp = joint_table(prod).values;
  Proportionality r;
  std::vector<double> target(ta.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    target[i] = ta[i] * tb[i];
    r.constant += target[i];
  }
  if (r.constant == 0.0) throw Error(Stage::usage, "pointwise product is identically zero");
  std::vector<double> scaled(tp.size());
  for (std::size_t i = 0; i < tp.size(); ++i) scaled[i] = tp[i] * r.constant;
  r.deviation = max_relative_deviation(scaled, target);
  return r;
}

/// Path criterion on the tree; on a tree every path is a chain or a fork.
inline bool check_dsep(const TreeBayesNet& bn, const Scope& A, const Scope& B, const Scope& C) {
  return paths_blocked(bn.vtree, A, B, C);
}

/// Largest |p(a,b|c) - p(a|c) p(b|c)| over network node sets, from the full
/// joint; conditioning values of zero probability are skipped.
inline double ci_residual(const DenseTable& full, const Scope& A, const Scope& B, const Scope& C) {
  std::map<std::vector<int>, double> pabc, pac, pbc, pc;
  std::size_t i = 0;
  auto pick = [](const Assignment& z, const Scope& s) {
    std::vector<int> out;
    for (int v : s) out.push_back(z[v]);
    return out;
  };
  for_each_assignment(full.domains, [&](const Assignment& z) {
    const double p = full.values[i++];
    if (p == 0.0) return;
    auto a = pick(z, A), b = pick(z, B), c = pick(z, C);
    std::vector<int> abc = a;
    abc.insert(abc.end(), b.begin(), b.end());
    abc.insert(abc.end(), c.begin(), c.end());
    std::vector<int> ac = a, bc = b;
    ac.insert(ac.end(), c.begin(), c.end());
    bc.insert(bc.end(), c.begin(), c.end());
    pabc[abc] += p;
    pac[ac] += p;
    pbc[bc] += p;
    pc[c] += p;
  });
  double worst = 0.0;
  std::vector<int> dom_a, dom_b;
  for (int v : A) dom_a.push_back(full.domains[v]);
  for (int v : B) dom_b.push_back(full.domains[v]);
  for (const auto& [c, p_c] : pc)
    for_each_assignment(dom_a, [&](const Assignment& a) {
      std::vector<int> ac = a;
      ac.insert(ac.end(), c.begin(), c.end());
      const double pa = pac.count(ac) ? pac[ac] / p_c : 0.0;
      for_each_assignment(dom_b, [&](const Assignment& b) {
        std::vector<int> bc = b, abc = a;
        bc.insert(bc.end(), c.begin(), c.end());
        abc.insert(abc.end(), b.begin(), b.end());
        abc.insert(abc.end(), c.begin(), c.end());
        const double pb = pbc.count(bc) ? pbc[bc] / p_c : 0.0;
        const double pab = pabc.count(abc) ? pabc[abc] / p_c : 0.0;
        worst = std::max(worst, std::abs(pab - pa * pb));
      });
    });
  return worst;
}

/// Number of induced trees rooted at the circuit root (as a double so that
/// large counts do not overflow).
inline double induced_tree_count(const Circuit& c) {
  std::vector<double> n(c.size(), 0.0);
  for (NodeId id : c.topological_order()) {
    const Node& nd = c.node(id);
    switch (nd.kind) {
      case NodeKind::leaf: n[id] = 1.0; break;
      case NodeKind::sum:
        for (NodeId ch : nd.children) n[id] += n[ch];
        break;
      case NodeKind::product:
        n[id] = 1.0;
        for (NodeId ch : nd.children) n[id] *= n[ch];
        break;
    }
  }
  return n[c.root()];
}

/// Value of every induced tree at x: the product of its sum-edge weights
/// and leaf values. Shared sub-DAGs are unfolded.
inline std::vector<double> induced_tree_values(const Circuit& c, const Assignment& x,
                                               std::size_t limit = kInducedTreeLimit) {
  if (induced_tree_count(c) > static_cast<double>(limit))
    throw Error(Stage::usage, "circuit has more than " + std::to_string(limit) + " induced trees");
  std::vector<std::vector<double>> vals(c.size());
  for (NodeId id : c.topological_order()) {
    const Node& nd = c.node(id);
    auto& out = vals[id];
    switch (nd.kind) {
      case NodeKind::leaf: out = {nd.probs.at(x.at(nd.var))}; break;
      case NodeKind::sum:
        for (std::size_t i = 0; i < nd.children.size(); ++i)
          for (double v : vals[nd.children[i]]) out.push_back(nd.weights[i] * v);
        break;
      case NodeKind::product:
        out = {1.0};
        for (NodeId ch : nd.children) {
          std::vector<double> next;
          for (double u : out)
            for (double v : vals[ch]) next.push_back(u * v);
          out = std::move(next);
        }
        break;
    }
  }
  return vals[c.root()];
}

inline double induced_tree_sum(const Circuit& c, const Assignment& x, std::size_t limit = kInducedTreeLimit) {
  const auto v = induced_tree_values(c, x, limit);
  return std::accumulate(v.begin(), v.end(), 0.0);
}

/// Whether S blocks every path between A and B in a rooted tree; nodes of S
/// that are also endpoints count as blocking.
inline bool tree_separates(const RootedTree& t, const Scope& A, const Scope& B, const Scope& S) {
  std::vector<int> parent = t.parent;
  if (parent.size() != t.children.size()) {
    parent.assign(t.size(), -1);
    for (int u = 0; u < t.size(); ++u)
      for (int c : t.children[u]) parent[c] = u;
  }
  std::vector<char> blocked(t.size(), 0), seen(t.size(), 0), target(t.size(), 0);
  for (int s : S) blocked.at(s) = 1;
  for (int b : B) target.at(b) = 1;
  std::deque<int> queue;
  for (int a : A)
    if (!blocked.at(a) && !seen[a]) {
      seen[a] = 1;
      queue.push_back(a);
    }
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (target[u]) return false;
    std::vector<int> next = t.children[u];
    if (parent[u] >= 0) next.push_back(parent[u]);
    for (int w : next)
      if (!seen[w] && !blocked[w]) {
        seen[w] = 1;
        queue.push_back(w);
      }
  }
  return true;
}

/// Smallest latent subsets found by exhaustive search: one separating A
/// from B, one that also blocks A from the root, one that also blocks B.
struct SeparatorMinima {
  int sep = -1;
  int sep_a = -1;
  int sep_b = -1;
};

inline SeparatorMinima brute_force_separators(const RootedTree& t, const Scope& A, const Scope& B) {
  std::vector<int> latent;
  for (int u = 0; u < t.size(); ++u)
    if (!t.observed[u]) latent.push_back(u);
  if (latent.size() > 20) throw Error(Stage::usage, "too many latents for exhaustive separator search");
  SeparatorMinima m;
  const Scope root{t.root};
  for (std::uint32_t mask = 0; mask < (1u << latent.size()); ++mask) {
    Scope s;
    for (std::size_t i = 0; i < latent.size(); ++i)
      if (mask >> i & 1u) s.push_back(latent[i]);
    if (!tree_separates(t, A, B, s)) continue;
    const int k = static_cast<int>(s.size());
    if (m.sep < 0 || k < m.sep) m.sep = k;
    if (tree_separates(t, A, root, s) && (m.sep_a < 0 || k < m.sep_a)) m.sep_a = k;
    if (tree_separates(t, B, root, s) && (m.sep_b < 0 || k < m.sep_b)) m.sep_b = k;
  }
  return m;
}

}  // namespace pcr::oracle
