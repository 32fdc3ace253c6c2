#pragma once

#include <cmath>
#include <map>
#include <regex>
#include <sstream>
#include <tuple>

#include "pcr/circuit.hpp"
#include "pcr/properties.hpp"

namespace pcr {

/// Probabilistic context-free grammar in Chomsky normal form.
struct Pcfg {
  struct Binary {
    int lhs, left, right;
    double p;
  };
  struct Lexical {
    int lhs, terminal;
    double p;
  };
  std::vector<std::string> nonterminals;
  std::vector<std::string> terminals;  // sorted; index = variable value
  std::vector<Binary> binary;
  std::vector<Lexical> lexical;
  int start = 0;

  int num_rules() const { return static_cast<int>(binary.size() + lexical.size()); }

  int terminal_index(const std::string& t) const {
    auto it = std::lower_bound(terminals.begin(), terminals.end(), t);
    if (it == terminals.end() || *it != t) throw Error(Stage::grammar, "unknown terminal '" + t + "'");
    return static_cast<int>(it - terminals.begin());
  }

  /// Throws unless every nonterminal's rule probabilities total 1.
  void check() const {
    if (nonterminals.empty()) throw Error(Stage::grammar, "grammar has no rules");
    if (terminals.empty()) throw Error(Stage::grammar, "grammar has no lexical rules");
    std::vector<double> mass(nonterminals.size(), 0.0);
    for (const auto& r : binary) {
      if (!(r.p >= 0.0)) throw Error(Stage::grammar, "negative rule probability");
      mass[r.lhs] += r.p;
    }
    for (const auto& r : lexical) {
      if (!(r.p >= 0.0)) throw Error(Stage::grammar, "negative rule probability");
      mass[r.lhs] += r.p;
    }
    for (std::size_t i = 0; i < mass.size(); ++i)
      if (std::abs(mass[i] - 1.0) > kWeightTolerance)
        throw Error(Stage::grammar, "rules of '" + nonterminals[i] + "' sum to " + std::to_string(mass[i]) + ", not 1");
  }
};

/// Reads records `rule: A -> B C @ p`, `lex: A -> t @ p` and `start: S`.
/// Blank lines and lines starting with '#' are ignored.
inline Pcfg parse_pcfg(const std::string& text) {
  struct RawRule {
    std::string lhs;
    std::vector<std::string> rhs;
    double p;
    bool lexical;
    int line;
  };
  std::vector<RawRule> raw;
  std::string start;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  static const std::regex rule_re(R"(^\s*(rule|lex)\s*:\s*(\S+)\s*->\s*(.*?)\s*@\s*(\S+)\s*$)");
  static const std::regex start_re(R"(^\s*start\s*:\s*(\S+)\s*$)");
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    const std::string where = "line " + std::to_string(lineno);
    if (std::regex_match(line, m, start_re)) {
      if (!start.empty()) throw Error(Stage::grammar, where + ": start symbol given twice");
      start = m[1];
      continue;
    }
    if (!std::regex_match(line, m, rule_re)) throw Error(Stage::parse, where + ": unrecognized record");
    RawRule r;
    r.lexical = m[1] == "lex";
    r.lhs = m[2];
    r.line = lineno;
    std::istringstream rhs(m[3].str());
    for (std::string sym; rhs >> sym;) r.rhs.push_back(sym);
    try {
      std::size_t used = 0;
      r.p = std::stod(m[4].str(), &used);
      if (used != m[4].str().size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(Stage::parse, where + ": bad probability '" + m[4].str() + "'");
    }
    if (r.lexical && r.rhs.size() != 1) throw Error(Stage::grammar, where + ": lexical rule must have one terminal (not in CNF)");
    if (!r.lexical && r.rhs.size() != 2) throw Error(Stage::grammar, where + ": binary rule must have two nonterminals (not in CNF)");
    raw.push_back(std::move(r));
  }
  if (start.empty()) throw Error(Stage::grammar, "missing start symbol");

  Pcfg g;
  std::map<std::string, int> nt;
  std::vector<std::string> terms;
  auto nt_id = [&](const std::string& s) {
    auto [it, fresh] = nt.emplace(s, static_cast<int>(g.nonterminals.size()));
    if (fresh) g.nonterminals.push_back(s);
    return it->second;
  };
  for (const auto& r : raw) {
    nt_id(r.lhs);
    if (r.lexical) terms.push_back(r.rhs[0]);
  }
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  g.terminals = terms;
  for (const auto& r : raw) {
    const int lhs = nt.at(r.lhs);
    if (r.lexical) {
      if (nt.count(r.rhs[0])) throw Error(Stage::grammar, "line " + std::to_string(r.line) + ": '" + r.rhs[0] + "' is both terminal and nonterminal");
      g.lexical.push_back({lhs, g.terminal_index(r.rhs[0]), r.p});
    } else {
      for (const auto& s : r.rhs)
        if (std::binary_search(terms.begin(), terms.end(), s))
          throw Error(Stage::grammar, "line " + std::to_string(r.line) + ": terminal '" + s + "' on the right of a binary rule (not in CNF)");
      g.binary.push_back({lhs, nt_id(r.rhs[0]), nt_id(r.rhs[1]), r.p});
    }
  }
  auto it = nt.find(start);
  if (it == nt.end()) throw Error(Stage::grammar, "start symbol '" + start + "' has no rules");
  g.start = it->second;
  g.check();
  return g;
}

inline std::string serialize_pcfg(const Pcfg& g) {
  std::ostringstream out;
  out.precision(17);
  out << "start: " << g.nonterminals[g.start] << "\n";
  for (const auto& r : g.binary)
    out << "rule: " << g.nonterminals[r.lhs] << " -> " << g.nonterminals[r.left] << " " << g.nonterminals[r.right] << " @ " << r.p << "\n";
  for (const auto& r : g.lexical)
    out << "lex: " << g.nonterminals[r.lhs] << " -> " << g.terminals[r.terminal] << " @ " << r.p << "\n";
  return out.str();
}

struct PcfgOptions {
  /// Rescale into a proper distribution over length-n strings.
  bool renormalize = false;
};

/// Circuit whose value on a string of length n is the probability that
/// the start symbol derives it. One node per live (nonterminal, segment);
/// products are shared by (B, C, a, m, b).
inline Circuit compile_pcfg(const Pcfg& g, int n, const PcfgOptions& opts = {}) {
  if (n < 1) throw Error(Stage::usage, "string length must be positive");
  g.check();
  const int k = static_cast<int>(g.terminals.size());
  CircuitBuilder out(std::vector<int>(n, k));
  std::map<std::tuple<int, int, int>, NodeId> memo;
  std::map<std::tuple<int, int, int, int, int>, NodeId> products;
  std::vector<std::vector<const Pcfg::Binary*>> rules_of(g.nonterminals.size());
  for (const auto& r : g.binary) rules_of[r.lhs].push_back(&r);

  std::function<NodeId(int, int, int)> node = [&](int sym, int a, int b) -> NodeId {
    auto key = std::make_tuple(sym, a, b);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    NodeId made = -1;
    if (a == b) {
      std::vector<double> t(k, 0.0);
      for (const auto& r : g.lexical)
        if (r.lhs == sym) t[r.terminal] += r.p;
      if (std::any_of(t.begin(), t.end(), [](double x) { return x > 0.0; })) made = out.add_leaf(a, std::move(t));
    } else {
      std::vector<NodeId> ch;
      std::vector<double> w;
      std::map<NodeId, std::size_t> slot;
      for (const Pcfg::Binary* r : rules_of[sym]) {
        if (r->p <= 0.0) continue;
        for (int m = a; m < b; ++m) {
          NodeId x = node(r->left, a, m);
          if (x < 0) continue;
          NodeId y = node(r->right, m + 1, b);
          if (y < 0) continue;
          auto [pit, fresh] = products.emplace(std::make_tuple(r->left, r->right, a, m, b), -1);
          if (fresh) pit->second = out.add_product({x, y});
          auto [sit, added] = slot.emplace(pit->second, ch.size());
          if (added) {
            ch.push_back(pit->second);
            w.push_back(r->p);
          } else {
            w[sit->second] += r->p;
          }
        }
      }
      if (!ch.empty()) made = out.add_sum(std::move(ch), std::move(w));
    }
    return memo[key] = made;
  };

  NodeId root = node(g.start, 0, n - 1);
  if (root < 0) throw Error(Stage::grammar, "start symbol derives no string of length " + std::to_string(n));
  Circuit c = out.build(root, Normalization::unnormalized);
  if (opts.renormalize) return renormalize(c).first;
  return c;
}

/// Inside probability of the start symbol over the whole string.
inline double cyk_inside(const Pcfg& g, const std::vector<int>& s) {
  const int n = static_cast<int>(s.size());
  if (n == 0) return 0.0;
  for (int t : s)
    if (t < 0 || t >= static_cast<int>(g.terminals.size())) throw Error(Stage::grammar, "unknown terminal index " + std::to_string(t));
  const int m = static_cast<int>(g.nonterminals.size());
  // chart[(a * n + b) * m + sym]
  std::vector<double> chart(static_cast<std::size_t>(n) * n * m, 0.0);
  auto at = [&](int a, int b, int sym) -> double& { return chart[(static_cast<std::size_t>(a) * n + b) * m + sym]; };
  for (int a = 0; a < n; ++a)
    for (const auto& r : g.lexical)
      if (r.terminal == s[a]) at(a, a, r.lhs) += r.p;
  for (int len = 2; len <= n; ++len)
    for (int a = 0; a + len - 1 < n; ++a) {
      const int b = a + len - 1;
      for (const auto& r : g.binary)
        for (int mid = a; mid < b; ++mid) at(a, b, r.lhs) += r.p * at(a, mid, r.left) * at(mid + 1, b, r.right);
    }
  return at(0, n - 1, g.start);
}

inline double cyk_inside(const Pcfg& g, const std::vector<std::string>& words) {
  std::vector<int> s;
  for (const auto& w : words) s.push_back(g.terminal_index(w));
  return cyk_inside(g, s);
}

}  // namespace pcr
