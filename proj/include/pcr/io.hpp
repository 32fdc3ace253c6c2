#pragma once

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pcr/circuit.hpp"
#include "pcr/vtree.hpp"

namespace pcr {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Stage::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Stage::io, "cannot write " + path);
  out << content;
  if (!out) throw Error(Stage::io, "failed writing " + path);
}

struct ParseOptions {
  /// Rescale sum weights and leaf tables to total 1 instead of rejecting them.
  bool renormalize = false;
};

namespace detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Stage::parse, std::string("malformed syntax: ") + e.what());
  }
}

template <class T>
T field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Stage::parse, where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(Stage::parse, where + ": field '" + key + "' has the wrong type");
  }
}

inline void rescale(std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  if (total > 0.0)
    for (double& x : v) x /= total;
}

}  // namespace detail

inline Circuit parse_circuit(const std::string& text, const ParseOptions& opts = {}) {
  using detail::field;
  const auto doc = detail::parse_json(text);
  if (!doc.is_object()) throw Error(Stage::parse, "circuit file must be an object");
  if (field<int>(doc, "format_version", "circuit") != 1) throw Error(Stage::parse, "unsupported format_version");
  const int num_vars = field<int>(doc, "num_vars", "circuit");
  const NodeId root = field<int>(doc, "root", "circuit");
  if (num_vars < 1) throw Error(Stage::parse, "num_vars must be positive");
  const auto& list = doc.find("nodes");
  if (list == doc.end() || !list->is_array() || list->empty()) throw Error(Stage::parse, "missing or empty 'nodes' list");

  Normalization norm = Normalization::normalized;
  if (auto it = doc.find("normalization"); it != doc.end()) {
    auto v = it->get<std::string>();
    if (v == "unnormalized") norm = Normalization::unnormalized;
    else if (v != "normalized") throw Error(Stage::parse, "unknown normalization '" + v + "'");
  }

  std::vector<Node> nodes(list->size());
  std::vector<char> seen(list->size(), 0);
  for (const auto& rec : *list) {
    if (!rec.is_object()) throw Error(Stage::parse, "node records must be objects");
    const int id = field<int>(rec, "id", "node");
    const std::string where = "node " + std::to_string(id);
    if (id < 0 || id >= static_cast<int>(nodes.size()))
      throw Error(Stage::parse, where + ": ids must be dense 0.." + std::to_string(nodes.size() - 1));
    if (seen[id]++) throw Error(Stage::parse, where + ": duplicate id");
    const auto kind = field<std::string>(rec, "kind", where);
    Node& nd = nodes[id];
    if (kind == "leaf") {
      nd.kind = NodeKind::leaf;
      nd.var = field<int>(rec, "var", where);
      nd.probs = field<std::vector<double>>(rec, "probs", where);
      if (opts.renormalize && norm == Normalization::normalized) detail::rescale(nd.probs);
    } else if (kind == "sum") {
      nd.kind = NodeKind::sum;
      nd.children = field<std::vector<int>>(rec, "children", where);
      nd.weights = field<std::vector<double>>(rec, "weights", where);
      if (opts.renormalize && norm == Normalization::normalized) detail::rescale(nd.weights);
    } else if (kind == "prod") {
      nd.kind = NodeKind::product;
      nd.children = field<std::vector<int>>(rec, "children", where);
      if (rec.contains("weights")) throw Error(Stage::parse, where + ": product nodes carry no weights");
    } else {
      throw Error(Stage::parse, where + ": unknown kind '" + kind + "'");
    }
  }

  std::vector<int> domains;
  if (auto it = doc.find("domains"); it != doc.end()) {
    domains = it->get<std::vector<int>>();
    if (static_cast<int>(domains.size()) != num_vars) throw Error(Stage::parse, "'domains' length differs from num_vars");
  } else {
    domains.assign(num_vars, 0);
    for (NodeId id = 0; id < static_cast<int>(nodes.size()); ++id) {
      const Node& nd = nodes[id];
      if (nd.kind != NodeKind::leaf) continue;
      if (nd.var < 0 || nd.var >= num_vars) throw Error(Stage::parse, "node " + std::to_string(id) + ": leaf variable out of range");
      int& d = domains[nd.var];
      if (d != 0 && d != static_cast<int>(nd.probs.size()))
        throw Error(Stage::parse, "node " + std::to_string(id) + ": inconsistent domain size for variable " + std::to_string(nd.var));
      d = static_cast<int>(nd.probs.size());
    }
    for (int v = 0; v < num_vars; ++v)
      if (domains[v] == 0) throw Error(Stage::parse, "variable " + std::to_string(v) + " has no leaf");
  }
  return Circuit(std::move(nodes), root, std::move(domains), norm);
}

/// One node per line, ascending ids, children in stored order.
inline std::string serialize_circuit(const Circuit& c) {
  using detail::ordered_json;
  std::ostringstream out;
  out << "{\n  \"format_version\": 1,\n  \"num_vars\": " << c.num_vars() << ",\n  \"root\": " << c.root()
      << ",\n  \"domains\": " << ordered_json(c.domains()).dump() << ",\n";
  if (!c.is_normalized()) out << "  \"normalization\": \"unnormalized\",\n";
  out << "  \"nodes\": [\n";
  for (NodeId id = 0; id < c.size(); ++id) {
    const Node& nd = c.node(id);
    ordered_json rec;
    rec["id"] = id;
    rec["kind"] = std::string(kind_name(nd.kind));
    if (nd.kind == NodeKind::leaf) {
      rec["var"] = nd.var;
      rec["probs"] = nd.probs;
    } else {
      rec["children"] = nd.children;
      if (nd.kind == NodeKind::sum) rec["weights"] = nd.weights;
    }
    out << "    " << rec.dump() << (id + 1 < c.size() ? ",\n" : "\n");
  }
  out << "  ]\n}\n";
  return out.str();
}

namespace detail {

inline int parse_vtree_rec(const json& rec, Vtree::Builder& b, std::vector<std::pair<int, Scope>>* labels) {
  if (!rec.is_object()) throw Error(Stage::parse, "vtree records must be objects");
  int id;
  if (rec.contains("var")) {
    if (rec.contains("left") || rec.contains("right")) throw Error(Stage::parse, "vtree record has both 'var' and children");
    int var = field<int>(rec, "var", "vtree leaf");
    if (var < 0) throw Error(Stage::parse, "vtree variable must be non-negative");
    id = b.add_leaf(var);
  } else {
    auto l = rec.find("left");
    auto r = rec.find("right");
    if (l == rec.end() || r == rec.end()) throw Error(Stage::parse, "vtree inner record needs 'left' and 'right'");
    int li = parse_vtree_rec(*l, b, labels);
    int ri = parse_vtree_rec(*r, b, labels);
    id = b.add_inner(li, ri);
  }
  if (labels) labels->emplace_back(id, scope::make(field<std::vector<int>>(rec, "labels", "labelled vtree")));
  return id;
}

inline ordered_json vtree_to_json(const Vtree& v, int id, const std::vector<Scope>* labels) {
  ordered_json rec;
  const auto& nd = v.node(id);
  if (nd.is_leaf()) {
    rec["var"] = nd.var;
  } else {
    rec["left"] = vtree_to_json(v, nd.left, labels);
    rec["right"] = vtree_to_json(v, nd.right, labels);
  }
  if (labels) rec["labels"] = (*labels)[id];
  return rec;
}

}  // namespace detail

inline Vtree parse_vtree(const std::string& text) {
  Vtree::Builder b;
  int root = detail::parse_vtree_rec(detail::parse_json(text), b, nullptr);
  return b.build(root);
}

inline std::string serialize_vtree(const Vtree& v) { return detail::vtree_to_json(v, v.root(), nullptr).dump() + "\n"; }

inline LabelledVtree parse_labelled_vtree(const std::string& text) {
  Vtree::Builder b;
  std::vector<std::pair<int, Scope>> raw;
  int root = detail::parse_vtree_rec(detail::parse_json(text), b, &raw);
  LabelledVtree out{b.build(root), std::vector<Scope>(raw.size())};
  // Builder ids follow visit order; walk again in lockstep with the final pre-order ids.
  const auto doc = detail::parse_json(text);
  std::function<void(const detail::json&, int)> assign = [&](const detail::json& rec, int id) {
    out.labels[id] = scope::make(rec.at("labels").get<std::vector<int>>());
    const auto& nd = out.vtree.node(id);
    if (!nd.is_leaf()) {
      assign(rec.at("left"), nd.left);
      assign(rec.at("right"), nd.right);
    }
  };
  assign(doc, out.vtree.root());
  return out;
}

inline std::string serialize_labelled_vtree(const LabelledVtree& lw) {
  return detail::vtree_to_json(lw.vtree, lw.vtree.root(), &lw.labels).dump() + "\n";
}

}  // namespace pcr
