#pragma once

#include <random>

#include "pcr/circuit.hpp"
#include "pcr/grammar.hpp"
#include "pcr/labelling.hpp"
#include "pcr/logical.hpp"
#include "pcr/vtree.hpp"

namespace pcr::gen {

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline double uniform_real(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

/// Positive weights summing to 1, bounded away from zero.
inline std::vector<double> simplex(Rng& rng, std::size_t k) {
  std::vector<double> w(k);
  double total = 0.0;
  for (double& x : w) total += x = uniform_real(rng, 0.05, 1.0);
  for (double& x : w) x /= total;
  return w;
}

/// Distribution over `domain` values with some entries zeroed when
/// `zero_rate` > 0; at least one entry stays positive.
inline std::vector<double> leaf_table(Rng& rng, int domain, double zero_rate = 0.0) {
  std::vector<double> p(domain);
  double total = 0.0;
  for (double& x : p) x = coin(rng, zero_rate) ? 0.0 : uniform_real(rng, 0.05, 1.0);
  if (std::all_of(p.begin(), p.end(), [](double x) { return x == 0.0; })) p[uniform_int(rng, 0, domain - 1)] = 1.0;
  for (double x : p) total += x;
  for (double& x : p) x /= total;
  return p;
}

inline std::vector<int> random_domains(Rng& rng, int n, int max_domain) {
  std::vector<int> d(n);
  for (int& x : d) x = uniform_int(rng, 2, max_domain);
  return d;
}

namespace detail {

inline int random_split_tree(Vtree::Builder& b, Rng& rng, const std::vector<int>& vars) {
  if (vars.size() == 1) return b.add_leaf(vars[0]);
  const int cut = uniform_int(rng, 1, static_cast<int>(vars.size()) - 1);
  std::vector<int> left(vars.begin(), vars.begin() + cut), right(vars.begin() + cut, vars.end());
  const int l = random_split_tree(b, rng, left);
  const int r = random_split_tree(b, rng, right);
  return b.add_inner(l, r);
}

}  // namespace detail

/// Random vtree over the canonical order: every scope is an interval.
inline Vtree random_contiguous_vtree(Rng& rng, int n) {
  Vtree::Builder b;
  const int root = detail::random_split_tree(b, rng, Vtree::canonical_order(n));
  return b.build(root);
}

/// Random vtree over a random variable permutation.
inline Vtree random_vtree(Rng& rng, int n) {
  auto order = Vtree::canonical_order(n);
  std::shuffle(order.begin(), order.end(), rng);
  Vtree::Builder b;
  const int root = detail::random_split_tree(b, rng, order);
  return b.build(root);
}

struct StructuredOptions {
  int h = 2;                 // product nodes per inner vtree node
  double edge_keep = 0.7;    // chance that a sum keeps each optional child
  double zero_rate = 0.0;    // chance of a zero entry in a leaf table
};

/// Normalized circuit structured by v with exactly h products per inner
/// vtree node. Each product owns fresh sums over random non-empty subsets
/// of the child's products; leaves come from a pool of h tables per
/// variable.
inline Circuit random_structured_pc(Rng& rng, const Vtree& v, const std::vector<int>& domains,
                                    const StructuredOptions& opt = {}) {
  if (static_cast<int>(domains.size()) != v.num_vars()) throw Error(Stage::usage, "domain list does not match vtree");
  CircuitBuilder out(domains);
  if (v.size() == 1) return [&] {
    const NodeId leaf = out.add_leaf(0, leaf_table(rng, domains[0], opt.zero_rate));
    return out.build(leaf);
  }();
  std::vector<std::vector<NodeId>> products(v.size()), pool(v.size());
  auto mix_over = [&](const std::vector<NodeId>& items) {
    std::vector<NodeId> ch;
    for (NodeId p : items)
      if (coin(rng, opt.edge_keep)) ch.push_back(p);
    if (ch.empty()) ch.push_back(items[uniform_int(rng, 0, static_cast<int>(items.size()) - 1)]);
    return out.add_sum(ch, simplex(rng, ch.size()));
  };
  auto child_of = [&](int u) -> NodeId {
    if (v.is_leaf(u)) return pool[u][uniform_int(rng, 0, static_cast<int>(pool[u].size()) - 1)];
    return mix_over(products[u]);
  };
  for (int u : v.post_order()) {
    if (v.is_leaf(u)) {
      const int var = v.node(u).var;
      for (int i = 0; i < opt.h; ++i) pool[u].push_back(out.add_leaf(var, leaf_table(rng, domains[var], opt.zero_rate)));
      continue;
    }
    for (int i = 0; i < opt.h; ++i) {
      const NodeId l = child_of(v.node(u).left);
      const NodeId r = child_of(v.node(u).right);
      products[u].push_back(out.add_product({l, r}));
    }
  }
  // The root sum mixes every root product so all h states stay reachable.
  const auto& top = products[v.root()];
  return out.build(out.add_sum(top, simplex(rng, top.size())));
}

/// Deterministic structured circuit: every sum splits the allowed values
/// of one variable into disjoint parts, one product per part. Leaves put
/// positive mass exactly on the allowed values.
inline Circuit random_deterministic_pc(Rng& rng, const Vtree& v, const std::vector<int>& domains, int max_branch = 3) {
  CircuitBuilder out(domains);
  using Allowed = std::vector<std::vector<int>>;  // per variable, allowed values
  std::map<std::pair<int, Allowed>, NodeId> memo;
  auto restrict_to = [&](const Allowed& a, int u) {
    Allowed r(a.size());
    for (int var : v.scope(u)) r[var] = a[var];
    return r;
  };
  auto leaf_on = [&](int var, const std::vector<int>& values) {
    std::vector<double> p(domains[var], 0.0);
    auto w = simplex(rng, values.size());
    for (std::size_t i = 0; i < values.size(); ++i) p[values[i]] = w[i];
    return out.add_leaf(var, std::move(p));
  };
  std::function<NodeId(int, const Allowed&)> sum_at = [&](int u, const Allowed& allowed) -> NodeId {
    const Allowed key = restrict_to(allowed, u);
    if (auto it = memo.find({u, key}); it != memo.end()) return it->second;
    if (v.is_leaf(u)) {
      const int var = v.node(u).var;
      return memo[{u, key}] = leaf_on(var, key[var]);
    }
    std::vector<int> splittable;
    for (int var : v.scope(u))
      if (key[var].size() >= 2) splittable.push_back(var);
    std::vector<Allowed> parts;
    if (splittable.empty()) {
      parts.push_back(key);
    } else {
      const int d = splittable[uniform_int(rng, 0, static_cast<int>(splittable.size()) - 1)];
      std::vector<int> vals = key[d];
      std::shuffle(vals.begin(), vals.end(), rng);
      const int k = uniform_int(rng, std::min(2, max_branch), std::min<int>(max_branch, static_cast<int>(vals.size())));
      // Cut the shuffled values into k non-empty blocks.
      std::vector<int> cuts = {0};
      std::vector<int> inner(vals.size() - 1);
      std::iota(inner.begin(), inner.end(), 1);
      std::shuffle(inner.begin(), inner.end(), rng);
      inner.resize(k - 1);
      std::sort(inner.begin(), inner.end());
      cuts.insert(cuts.end(), inner.begin(), inner.end());
      cuts.push_back(static_cast<int>(vals.size()));
      for (int i = 0; i < k; ++i) {
        Allowed a = key;
        a[d].assign(vals.begin() + cuts[i], vals.begin() + cuts[i + 1]);
        std::sort(a[d].begin(), a[d].end());
        parts.push_back(std::move(a));
      }
    }
    std::vector<NodeId> ch;
    for (const Allowed& a : parts) ch.push_back(out.add_product({sum_at(v.node(u).left, a), sum_at(v.node(u).right, a)}));
    return memo[{u, key}] = out.add_sum(ch, simplex(rng, ch.size()));
  };
  Allowed all(domains.size());
  for (std::size_t var = 0; var < domains.size(); ++var) {
    all[var].resize(domains[var]);
    std::iota(all[var].begin(), all[var].end(), 0);
  }
  return out.build(sum_at(v.root(), all));
}

struct ContiguousOptions {
  int pool = 2;      // sum nodes per segment
  int branches = 2;  // products under each sum
  double zero_rate = 0.0;
};

/// Normalized circuit whose scopes are all intervals but whose products
/// split a segment at independently drawn points, so it is usually not
/// structured.
inline Circuit random_contiguous_circuit(Rng& rng, const std::vector<int>& domains, const ContiguousOptions& opt = {}) {
  const int n = static_cast<int>(domains.size());
  CircuitBuilder out(domains);
  // pool[a][b]: nodes over X_{a:b}
  std::vector<std::vector<std::vector<NodeId>>> pool(n, std::vector<std::vector<NodeId>>(n));
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < opt.pool; ++i) pool[a][a].push_back(out.add_leaf(a, leaf_table(rng, domains[a], opt.zero_rate)));
  auto any_of_pool = [&](int a, int b) {
    const auto& p = pool[a][b];
    return p[uniform_int(rng, 0, static_cast<int>(p.size()) - 1)];
  };
  for (int len = 2; len <= n; ++len)
    for (int a = 0; a + len - 1 < n; ++a) {
      const int b = a + len - 1;
      const int sums = len == n ? 1 : opt.pool;
      for (int i = 0; i < sums; ++i) {
        std::vector<NodeId> ch;
        for (int j = 0; j < opt.branches; ++j) {
          const int m = uniform_int(rng, a, b - 1);
          ch.push_back(out.add_product({any_of_pool(a, m), any_of_pool(m + 1, b)}));
        }
        pool[a][b].push_back(out.add_sum(ch, simplex(rng, ch.size())));
      }
    }
  return out.build(pool[0][n - 1].front());
}

/// Random complete OBDD over x_0 < ... < x_{n-1} with at most `width` nodes
/// per level, as a smooth deterministic decomposable logical circuit that
/// is structured by the right-linear vtree.
inline LogicalCircuit random_obdd(Rng& rng, int n, int width = 3) {
  LogicalCircuit l(n);
  std::vector<int> below;  // nodes of level i + 1 (none under the last level)
  for (int i = n - 1; i >= 0; --i) {
    const int count = i == 0 ? 1 : uniform_int(rng, 1, width);
    const int pos = l.literal(i, true), neg = l.literal(i, false);
    std::vector<int> level;
    for (int k = 0; k < count; ++k) {
      // Each branch is a node of the level below or false (-1); never both false.
      auto pick = [&]() {
        if (below.empty()) return coin(rng, 0.7) ? 0 : -1;
        return coin(rng, 0.2) ? -1 : below[uniform_int(rng, 0, static_cast<int>(below.size()) - 1)];
      };
      int hi = pick(), lo = pick();
      if (hi < 0 && lo < 0) (coin(rng) ? hi : lo) = below.empty() ? 0 : below[uniform_int(rng, 0, static_cast<int>(below.size()) - 1)];
      std::vector<int> terms;
      if (below.empty()) {
        if (hi >= 0) terms.push_back(pos);
        if (lo >= 0) terms.push_back(neg);
      } else {
        if (hi >= 0) terms.push_back(l.conj({pos, hi}));
        if (lo >= 0) terms.push_back(l.conj({neg, lo}));
      }
      level.push_back(l.disj(std::move(terms)));
    }
    below = std::move(level);
  }
  return l;
}

struct GrammarOptions {
  int max_nonterminals = 6;
  int max_rules = 12;
  int terminals = 2;
};

/// Random CNF grammar: one lexical rule per nonterminal plus random binary
/// rules, the start symbol always having at least one binary rule.
inline Pcfg random_cnf_grammar(Rng& rng, const GrammarOptions& opt = {}) {
  Pcfg g;
  const int m = uniform_int(rng, 1, std::min(opt.max_nonterminals, opt.max_rules / 2));
  for (int i = 0; i < m; ++i) g.nonterminals.push_back("N" + std::to_string(i));
  for (int t = 0; t < opt.terminals; ++t) g.terminals.push_back(std::string(1, static_cast<char>('a' + t)));
  g.start = 0;
  std::vector<std::vector<double>> raw(m);
  for (int i = 0; i < m; ++i) g.lexical.push_back({i, uniform_int(rng, 0, opt.terminals - 1), 0.0});
  const int binary = uniform_int(rng, 1, opt.max_rules - m);
  for (int k = 0; k < binary; ++k)
    g.binary.push_back({k == 0 ? 0 : uniform_int(rng, 0, m - 1), uniform_int(rng, 0, m - 1), uniform_int(rng, 0, m - 1), 0.0});
  std::vector<double> total(m, 0.0);
  for (auto& r : g.lexical) total[r.lhs] += r.p = uniform_real(rng, 0.1, 1.0);
  for (auto& r : g.binary) total[r.lhs] += r.p = uniform_real(rng, 0.1, 1.0);
  for (auto& r : g.lexical) r.p /= total[r.lhs];
  for (auto& r : g.binary) r.p /= total[r.lhs];
  return g;
}

/// Rooted tree with `latents` internal nodes (ids 0..latents-1, root 0)
/// and one to three observed leaves under each latent.
inline RootedTree random_rooted_tree(Rng& rng, int latents) {
  RootedTree t;
  t.root = 0;
  t.children.assign(latents, {});
  t.observed.assign(latents, 0);
  for (int i = 1; i < latents; ++i) t.children[uniform_int(rng, 0, i - 1)].push_back(i);
  for (int i = 0; i < latents; ++i) {
    const int k = uniform_int(rng, t.children[i].empty() ? 1 : 0, 3);
    for (int j = 0; j < k; ++j) {
      const int id = t.size();
      t.children.emplace_back();
      t.observed.push_back(1);
      t.children[i].push_back(id);
    }
  }
  t.link();
  return t;
}

}  // namespace pcr::gen
