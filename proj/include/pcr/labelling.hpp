#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <optional>

#include "pcr/bayes_net.hpp"
#include "pcr/vtree.hpp"

namespace pcr {

/// Rooted tree with arbitrary fan-out; the input of minimum_separator.
struct RootedTree {
  int root = 0;
  std::vector<std::vector<int>> children;
  std::vector<int> parent;
  std::vector<char> observed;  // observed nodes are leaves

  int size() const { return static_cast<int>(children.size()); }

  /// Fills parent links from children lists.
  void link() {
    parent.assign(children.size(), -1);
    for (int u = 0; u < size(); ++u)
      for (int c : children[u]) parent.at(c) = u;
  }
};

struct SeparatorTriple {
  Scope sep_a;  // separates A from B and blocks A from the root
  Scope sep_b;  // separates A from B and blocks B from the root
  Scope sep;    // separates A from B
};

/// How the size comparison in the recursive combiner settles ties.
enum class TieBreak {
  first,       // keep the first argument, as written in the recursion
  avoid_root,  // prefer the candidate that does not contain the subtree root
};

namespace detail {

struct SepWork {
  const RootedTree& t;
  std::vector<char> in_a, in_b, has_a, has_b;
  TieBreak tie;

  const Scope& pick(const Scope& x, const Scope& y, int root) const {
    if (x.size() != y.size()) return x.size() < y.size() ? x : y;
    if (tie == TieBreak::avoid_root && scope::contains(x, root) && !scope::contains(y, root)) return y;
    return x;
  }

  void mark(int u) {
    has_a[u] = in_a[u];
    has_b[u] = in_b[u];
    for (int c : t.children[u]) {
      mark(c);
      has_a[u] |= has_a[c];
      has_b[u] |= has_b[c];
    }
  }

  SeparatorTriple run(int z) const {
    if (!has_a[z] && !has_b[z]) return {};
    if (!has_b[z]) return {{z}, {}, {}};
    if (!has_a[z]) return {{}, {z}, {}};
    Scope all_c{z}, all_a, all_b;
    for (int c : t.children[z]) {
      auto sub = run(c);
      all_c = scope::unite(all_c, sub.sep);
      all_a = scope::unite(all_a, sub.sep_a);
      all_b = scope::unite(all_b, sub.sep_b);
    }
    SeparatorTriple out;
    out.sep_a = pick(all_c, all_a, z);
    out.sep_b = pick(all_c, all_b, z);
    out.sep = pick(out.sep_a, out.sep_b, z);
    return out;
  }
};

inline Scope lift_observed(const RootedTree& t, const Scope& s) {
  Scope out;
  for (int u : s) out.push_back(t.observed[u] && t.parent[u] >= 0 ? t.parent[u] : u);
  return scope::make(std::move(out));
}

}  // namespace detail

/// Minimum d-separator between observed sets A and B in a rooted tree.
/// Observed nodes chosen by the recursion are replaced by their parent.
inline SeparatorTriple minimum_separator(const RootedTree& t, const Scope& A, const Scope& B,
                                         TieBreak tie = TieBreak::first) {
  if (!scope::disjoint(A, B)) throw Error(Stage::labelling, "separator sides overlap");
  RootedTree linked = t;
  if (linked.parent.size() != linked.children.size()) linked.link();
  detail::SepWork w{linked, std::vector<char>(t.size(), 0), std::vector<char>(t.size(), 0),
                    std::vector<char>(t.size(), 0), std::vector<char>(t.size(), 0), tie};
  for (int a : A) w.in_a.at(a) = 1;
  for (int b : B) w.in_b.at(b) = 1;
  w.mark(t.root);
  auto raw = w.run(t.root);
  return {detail::lift_observed(linked, raw.sep_a), detail::lift_observed(linked, raw.sep_b),
          detail::lift_observed(linked, raw.sep)};
}

/// Component of the network after deleting blocker nodes. Blockers below
/// the component stay attached as neutral leaves; a blocker above it is
/// recorded as boundary.
struct Component {
  RootedTree tree;
  std::vector<int> node;  // local id -> network id
  Scope boundary;
};

inline std::vector<Component> connected_components(const TreeBayesNet& bn, const Scope& blockers) {
  const Vtree& v = bn.vtree;
  std::vector<char> blocked(v.size(), 0), seen(v.size(), 0);
  for (int z : blockers) blocked.at(z) = 1;
  std::vector<Component> out;
  for (int start = 0; start < v.size(); ++start) {
    if (blocked[start] || seen[start]) continue;
    std::vector<int> members;
    std::deque<int> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      members.push_back(u);
      for (int w : bn.neighbours(u))
        if (!blocked[w] && !seen[w]) {
          seen[w] = 1;
          queue.push_back(w);
        }
    }
    Component comp;
    std::map<int, int> local;
    auto add = [&](int u, bool obs) {
      local[u] = static_cast<int>(comp.node.size());
      comp.node.push_back(u);
      comp.tree.children.emplace_back();
      comp.tree.observed.push_back(obs);
    };
    std::sort(members.begin(), members.end());  // pre-order ids: top node first
    for (int u : members) add(u, !bn.is_latent(u));
    comp.tree.root = 0;
    for (int u : members) {
      int p = v.node(u).parent;
      if (p >= 0 && blocked[p]) comp.boundary.push_back(p);
      if (v.is_leaf(u)) continue;
      for (int c : {v.node(u).left, v.node(u).right}) {
        if (blocked[c]) add(c, false);
        comp.tree.children[local.at(u)].push_back(local.at(c));
      }
    }
    comp.boundary = scope::make(comp.boundary);
    comp.tree.link();
    out.push_back(std::move(comp));
  }
  return out;
}

/// Blockers reached from `sources` by paths that meet no other blocker first.
inline Scope trace_first_blocked(const TreeBayesNet& bn, const Scope& sources, const Scope& blockers) {
  std::vector<char> blocked(bn.size(), 0), seen(bn.size(), 0);
  for (int z : blockers) blocked.at(z) = 1;
  Scope hit;
  std::deque<int> queue;
  for (int s : sources) {
    if (seen.at(s)) continue;
    seen[s] = 1;
    if (blocked[s]) hit.push_back(s);
    else queue.push_back(s);
  }
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int w : bn.neighbours(u)) {
      if (seen[w]) continue;
      seen[w] = 1;
      if (blocked[w]) hit.push_back(w);
      else queue.push_back(w);
    }
  }
  return scope::make(std::move(hit));
}

struct LabellingReport {
  bool valid = true;
  bool root_empty = true;
  std::vector<char> covers;        // property 1 per node
  std::vector<char> left_blocks;   // property 2 per inner node
  std::vector<char> right_blocks;  // property 3 per inner node
  std::vector<std::string> problems;
  int M = 0;
  int M_prime = 0;
};

/// max |C_l ∪ C_r| and max |C_l ∪ C_r ∪ C_w| over inner nodes.
inline std::pair<int, int> label_cardinality(const LabelledVtree& lw) {
  int m = 0, mp = 0;
  for (int w : lw.vtree.inner_nodes()) {
    const auto& nd = lw.vtree.node(w);
    Scope lr = scope::unite(lw.labels[nd.left], lw.labels[nd.right]);
    m = std::max(m, static_cast<int>(lr.size()));
    mp = std::max(mp, static_cast<int>(scope::unite(lr, lw.labels[w]).size()));
  }
  return {m, mp};
}

inline LabellingReport validate_labelling(const TreeBayesNet& bn, const LabelledVtree& lw) {
  LabellingReport r;
  const Vtree& W = lw.vtree;
  const Vtree& V = bn.vtree;
  const int n = W.size();
  r.covers.assign(n, 1);
  r.left_blocks.assign(n, 1);
  r.right_blocks.assign(n, 1);
  auto fail = [&](std::string msg) {
    r.valid = false;
    r.problems.push_back(std::move(msg));
  };
  if (W.num_vars() != V.num_vars()) {
    fail("target vtree covers " + std::to_string(W.num_vars()) + " variables, network has " + std::to_string(V.num_vars()));
    return r;
  }
  if (static_cast<int>(lw.labels.size()) != n) {
    fail("label count differs from target vtree size");
    return r;
  }
  for (int w = 0; w < n; ++w)
    for (int z : lw.labels[w])
      if (z < 0 || z >= V.size() || V.is_leaf(z)) fail("label of node " + std::to_string(w) + " names non-latent " + std::to_string(z));
  if (!r.valid) return r;
  if (!lw.labels[W.root()].empty()) {
    r.root_empty = false;
    fail("root label must be empty");
  }
  for (int w = 0; w < n; ++w) {
    if (!covers(V, lw.labels[w], W.scope(w))) {
      r.covers[w] = 0;
      fail("label of node " + std::to_string(w) + " does not cover its variables");
    }
    if (W.is_leaf(w)) continue;
    const int l = W.node(w).left, rr = W.node(w).right;
    const Scope xl = leaf_nodes(V, W.scope(l)), xr = leaf_nodes(V, W.scope(rr));
    if (!paths_blocked(V, xl, scope::unite(lw.labels[rr], lw.labels[w]), lw.labels[l])) {
      r.left_blocks[w] = 0;
      fail("left label under node " + std::to_string(w) + " leaks to its sibling or parent label");
    }
    if (!paths_blocked(V, xr, scope::unite(lw.labels[l], lw.labels[w]), lw.labels[rr])) {
      r.right_blocks[w] = 0;
      fail("right label under node " + std::to_string(w) + " leaks to its sibling or parent label");
    }
  }
  std::tie(r.M, r.M_prime) = label_cardinality(lw);
  return r;
}

/// Greedy top-down labelling built from per-component minimum separators.
inline LabelledVtree compute_label(const TreeBayesNet& bn, const Vtree& target, TieBreak tie = TieBreak::first) {
  const Vtree& V = bn.vtree;
  if (target.num_vars() != V.num_vars()) throw Error(Stage::labelling, "target vtree and network cover different variables");
  LabelledVtree lw{target, std::vector<Scope>(target.size())};
  for (int w = 0; w < target.size(); ++w) {  // pre-order: parents first
    if (target.is_leaf(w)) continue;
    const Scope& cw = lw.labels[w];
    const int l = target.node(w).left, r = target.node(w).right;
    const Scope xl = leaf_nodes(V, target.scope(l)), xr = leaf_nodes(V, target.scope(r));
    Scope dw = cw;
    for (const Component& comp : connected_components(bn, cw)) {
      Scope a, b;
      for (int i = 0; i < comp.tree.size(); ++i) {
        if (scope::contains(xl, comp.node[i])) a.push_back(i);
        if (scope::contains(xr, comp.node[i])) b.push_back(i);
      }
      if (a.empty() || b.empty()) continue;
      for (int u : minimum_separator(comp.tree, a, b, tie).sep) dw.push_back(comp.node[u]);
    }
    dw = scope::make(std::move(dw));
    if (!paths_blocked(V, xl, leaf_nodes(V, scope::subtract(Vtree::canonical_order(V.num_vars()), target.scope(l))), dw) ||
        !paths_blocked(V, xr, leaf_nodes(V, scope::subtract(Vtree::canonical_order(V.num_vars()), target.scope(r))), dw))
      throw Error(Stage::labelling, "intermediate separator fails to cover the children of node " + std::to_string(w));
    lw.labels[l] = trace_first_blocked(bn, xl, dw);
    lw.labels[r] = trace_first_blocked(bn, xr, dw);
  }
  return lw;
}

/// Subtree roots of a contiguous vtree whose leaves tile [a, b] (0-based,
/// inclusive). Roots may be vtree leaves.
inline Scope segment_cover(const Vtree& v, int a, int b) {
  if (!v.is_contiguous()) throw Error(Stage::labelling, "segment cover needs a contiguous vtree");
  if (a < 0 || b >= v.num_vars() || a > b) throw Error(Stage::usage, "segment out of range");
  Scope out;
  std::function<void(int)> rec = [&](int u) {
    const Scope& s = v.scope(u);
    const int lo = std::max(a, s.front()), hi = std::min(b, s.back());
    if (lo > hi) return;
    if (lo == s.front() && hi == s.back()) {
      out.push_back(u);
      return;
    }
    rec(v.node(u).left);
    rec(v.node(u).right);
  };
  rec(v.root());
  return scope::make(std::move(out));
}

/// Replaces observed (leaf) ids by their parent latent.
inline Scope lift_to_latents(const Vtree& v, const Scope& s) {
  Scope out;
  for (int u : s) out.push_back(v.is_leaf(u) && v.node(u).parent >= 0 ? v.node(u).parent : u);
  return scope::make(std::move(out));
}

/// Two-latent cover {Z_a, Z_{b+1}} of [a, b] for a linear source vtree.
/// Z_k is the parent of X_k; the last variable shares its parent with the
/// one before, so indices past the end cap at the last latent.
inline Scope linear_segment_label(const Vtree& v, int a, int b) {
  const int n = v.num_vars();
  auto par = [&](int var) { return v.node(v.leaf_of(var)).parent; };
  Scope out;
  if (n == 1) return out;
  if (v.is_right_linear()) {
    if (a > 0) out.push_back(par(a));
    if (b < n - 1) out.push_back(par(b + 1));
  } else if (v.is_left_linear()) {
    if (a > 0) out.push_back(par(a - 1));
    if (b < n - 1) out.push_back(par(b));
  } else {
    throw Error(Stage::labelling, "source vtree is not linear");
  }
  return scope::make(std::move(out));
}

enum class ContiguousStrategy { automatic, linear, segment };

/// Labels each target node X_{a:b} by a cover of the segment in the source
/// vtree. The linear rule is used for linear sources; the segment-tree rule
/// otherwise. `automatic` keeps whichever has the smaller (M′, total size).
inline LabelledVtree contiguous_labelling(const TreeBayesNet& bn, const Vtree& target,
                                          ContiguousStrategy strategy = ContiguousStrategy::automatic) {
  const Vtree& V = bn.vtree;
  if (!V.is_contiguous() || !target.is_contiguous())
    throw Error(Stage::labelling, "contiguous labelling needs contiguous source and target vtrees");
  if (target.num_vars() != V.num_vars()) throw Error(Stage::labelling, "target vtree and network cover different variables");
  const bool linear = V.num_vars() > 1 && (V.is_right_linear() || V.is_left_linear());
  auto build = [&](bool use_linear) {
    LabelledVtree lw{target, std::vector<Scope>(target.size())};
    for (int w = 0; w < target.size(); ++w) {
      if (w == target.root()) continue;
      const Scope& s = target.scope(w);
      lw.labels[w] = use_linear ? linear_segment_label(V, s.front(), s.back())
                                : lift_to_latents(V, segment_cover(V, s.front(), s.back()));
    }
    return lw;
  };
  if (strategy == ContiguousStrategy::linear) {
    if (!linear) throw Error(Stage::labelling, "source vtree is not linear");
    return build(true);
  }
  auto seg = build(false);
  if (strategy == ContiguousStrategy::segment || !linear) return seg;
  auto lin = build(true);
  auto total = [](const LabelledVtree& lw) {
    std::size_t t = 0;
    for (const auto& l : lw.labels) t += l.size();
    return t;
  };
  const auto key_lin = std::make_pair(label_cardinality(lin).second, total(lin));
  const auto key_seg = std::make_pair(label_cardinality(seg).second, total(seg));
  return key_seg < key_lin ? seg : lin;
}

namespace detail {

/// Connected fragment of a vtree, itself a full binary tree once contracted
/// nodes are skipped.
struct Piece {
  struct PNode {
    int orig;
    int left = -1;
    int right = -1;
  };
  std::vector<PNode> nodes;
  int root = 0;

  bool is_leaf(int i) const { return nodes[i].left < 0; }
};

inline std::vector<int> piece_subtree(const Piece& p, int i) {
  std::vector<int> out{i};
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& nd = p.nodes[out[k]];
    if (nd.left >= 0) {
      out.push_back(nd.left);
      out.push_back(nd.right);
    }
  }
  return out;
}

/// Copies the listed local nodes into a fresh piece rooted at `root`.
inline Piece extract(const Piece& p, const std::vector<int>& keep, int root,
                     const std::map<int, int>& redirect = {}) {
  std::map<int, int> local;
  Piece out;
  for (int i : keep) {
    local[i] = static_cast<int>(out.nodes.size());
    out.nodes.push_back({p.nodes[i].orig});
  }
  auto follow = [&](int i) {
    auto it = redirect.find(i);
    return local.at(it == redirect.end() ? i : it->second);
  };
  for (int i : keep) {
    if (p.is_leaf(i)) continue;
    out.nodes[local[i]].left = follow(p.nodes[i].left);
    out.nodes[local[i]].right = follow(p.nodes[i].right);
  }
  out.root = local.at(root);
  return out;
}

/// Latents outside the piece adjacent to it in the source vtree.
inline Scope boundary(const Vtree& v, const Piece& p) {
  std::vector<char> in(v.size(), 0);
  for (const auto& nd : p.nodes) in[nd.orig] = 1;
  Scope out;
  for (const auto& nd : p.nodes) {
    const auto& vn = v.node(nd.orig);
    if (vn.parent >= 0 && !in[vn.parent]) out.push_back(vn.parent);
    if (!vn.is_leaf())
      for (int c : {vn.left, vn.right})
        if (!in[c]) out.push_back(c);
  }
  return scope::make(std::move(out));
}

struct Split {
  Piece rest;
  Piece child;
  int pivot;  // source vtree node removed by the split
};

/// Removes local node x; the subtree under its `side` child becomes one
/// piece and the remainder (other child lifted into x's place) the other.
inline Split split_piece(const Piece& p, int x, bool right_side) {
  const int c = right_side ? p.nodes[x].right : p.nodes[x].left;
  const int other = right_side ? p.nodes[x].left : p.nodes[x].right;
  std::vector<int> sub = piece_subtree(p, c);
  std::vector<char> drop(p.nodes.size(), 0);
  for (int i : sub) drop[i] = 1;
  drop[x] = 1;
  std::vector<int> rest;
  for (int i = 0; i < static_cast<int>(p.nodes.size()); ++i)
    if (!drop[i]) rest.push_back(i);
  Split s;
  s.child = extract(p, sub, c);
  int rest_root = x == p.root ? other : p.root;
  s.rest = extract(p, rest, rest_root, {{x, other}});
  s.pivot = p.nodes[x].orig;
  return s;
}

}  // namespace detail

/// Log-depth target vtree with labels of cardinality at most three.
///
/// Each recursive step removes one source node, picked by walking toward
/// the larger child until it holds at most 2/3 of the fragment. Labels are
/// the exact boundary latents of each fragment. If the walk would leave a
/// fragment with more than two boundary latents, the best balanced split
/// keeping both boundaries at two or fewer is used instead.
inline LabelledVtree balanced_vtree(const Vtree& v) {
  using detail::Piece;
  Piece whole;
  for (int u = 0; u < v.size(); ++u) {
    whole.nodes.push_back({u});
    if (!v.is_leaf(u)) {
      whole.nodes[u].left = v.node(u).left;
      whole.nodes[u].right = v.node(u).right;
    }
  }
  whole.root = v.root();

  Vtree::Builder b;
  std::map<Scope, Scope> label_of;

  std::function<int(const Piece&)> rec = [&](const Piece& p) -> int {
    const Scope bnd = detail::boundary(v, p);
    if (p.nodes.size() == 1) {
      int id = b.add_leaf(v.node(p.nodes[0].orig).var);
      label_of[{v.node(p.nodes[0].orig).var}] = bnd;
      return id;
    }
    const double total = static_cast<double>(p.nodes.size());
    std::vector<int> size(p.nodes.size(), 1);
    std::vector<char> touches(p.nodes.size(), 0);  // subtree adjacent to an inner boundary
    {
      std::vector<int> order = detail::piece_subtree(p, p.root);
      std::vector<char> in(v.size(), 0);
      for (const auto& nd : p.nodes) in[nd.orig] = 1;
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto& nd = p.nodes[*it];
        const auto& vn = v.node(nd.orig);
        bool gap = false;
        if (!vn.is_leaf())
          for (int c : {vn.left, vn.right}) gap |= !in[c];
        if (*it != p.root && vn.parent >= 0 && !in[vn.parent]) gap = true;
        touches[*it] = gap;
        if (nd.left >= 0) {
          size[*it] += size[nd.left] + size[nd.right];
          touches[*it] |= touches[nd.left] | touches[nd.right];
        }
      }
    }
    auto bigger_is_right = [&](int x) {
      const auto& nd = p.nodes[x];
      if (size[nd.left] != size[nd.right]) return size[nd.right] > size[nd.left];
      return touches[nd.right] || !touches[nd.left];
    };
    int x = p.root;
    bool right = bigger_is_right(x);
    while (true) {
      int big = right ? p.nodes[x].right : p.nodes[x].left;
      if (size[big] <= 2.0 / 3.0 * total || p.is_leaf(big)) break;
      x = big;
      right = bigger_is_right(x);
    }
    auto split = detail::split_piece(p, x, right);
    auto ok = [&](const detail::Split& s) {
      return detail::boundary(v, s.rest).size() <= 2 && detail::boundary(v, s.child).size() <= 2;
    };
    if (!ok(split)) {
      std::optional<detail::Split> best;
      std::size_t best_size = 0;
      for (int i = 0; i < static_cast<int>(p.nodes.size()); ++i) {
        if (p.is_leaf(i)) continue;
        for (bool side : {false, true}) {
          auto cand = detail::split_piece(p, i, side);
          if (!ok(cand)) continue;
          std::size_t worst = std::max(cand.rest.nodes.size(), cand.child.nodes.size());
          if (!best || worst < best_size) {
            best_size = worst;
            best = std::move(cand);
          }
        }
      }
      if (best) split = std::move(*best);
    }
    int l = rec(split.rest);
    int r = rec(split.child);
    int id = b.add_inner(l, r);
    Scope vars;
    for (const auto& nd : p.nodes)
      if (v.is_leaf(nd.orig)) vars.push_back(v.node(nd.orig).var);
    label_of[scope::make(vars)] = bnd;
    return id;
  };
  int root = rec(whole);
  LabelledVtree out{b.build(root), {}};
  out.labels.assign(out.vtree.size(), {});
  for (int w = 0; w < out.vtree.size(); ++w) out.labels[w] = label_of.at(out.vtree.scope(w));
  return out;
}

}  // namespace pcr
