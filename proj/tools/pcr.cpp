#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "pcr/pcr.hpp"

namespace {

using namespace pcr;
using json = nlohmann::ordered_json;

constexpr int kExitFailed = 1;  // a requested property or check does not hold
constexpr int kExitError = 2;   // the command could not run

Circuit load_circuit(const std::string& path, bool renormalize = false) {
  return parse_circuit(read_file(path), ParseOptions{renormalize});
}

json stats_json(const Circuit& c) {
  const auto s = stats(c);
  return json{{"size", s.size}, {"depth", s.depth}, {"nodes", c.size()},
              {"sum", s.num_sum}, {"prod", s.num_product}, {"leaf", s.num_leaf}};
}

void emit(const json& doc, const std::string& path) {
  const std::string text = doc.dump(2) + "\n";
  if (path.empty() || path == "-") std::cout << text;
  else write_file(path, text);
}

/// Vtree from a file if given, else the one inferred from the circuit.
Vtree vtree_for(const Circuit& c, const std::string& path, const char* which) {
  if (!path.empty()) return parse_vtree(read_file(path));
  auto v = detail::infer_vtree(c);
  if (!v) throw Error(Stage::structure, std::string("circuit ") + which + " is not structured; pass its vtree explicitly");
  return *v;
}

json restructure_report(const RestructureResult& r) {
  json layers = json::array();
  for (const auto& l : r.layers)
    layers.push_back({{"node", l.node}, {"label_size", l.label_size}, {"m", l.m}, {"m_prime", l.m_prime},
                      {"products", l.products}, {"sums", l.sums}, {"sum_edges", l.sum_edges}, {"leaves", l.leaves}});
  return json{{"M", r.M},
              {"M_prime", r.M_prime},
              {"source_hidden_states", r.source_hidden_states},
              {"vtree_depth", r.labelled.vtree.depth()},
              {"circuit", stats_json(r.circuit)},
              {"layers", layers}};
}

int cmd_check(const std::string& path, const std::vector<std::string>& require, bool renormalize) {
  const Circuit c = load_circuit(path, renormalize);
  const auto rep = validate(c);
  json doc;
  doc["smooth"] = rep.smooth;
  doc["decomposable"] = rep.decomposable;
  doc["structured"] = rep.structured;
  if (rep.vtree) doc["vtree"] = json::parse(serialize_vtree(*rep.vtree));
  doc["deterministic"] = std::string(verdict_name(rep.deterministic));
  doc["alternating"] = rep.alternating;
  doc["binary_products"] = rep.binary_products;
  doc["contiguous"] = rep.contiguous;
  doc["non_smooth_sums"] = rep.non_smooth_sums;
  doc["non_decomposable_products"] = rep.non_decomposable_products;
  doc["non_deterministic_sums"] = rep.non_deterministic_sums;
  doc["stats"] = stats_json(c);
  if (rep.smooth && rep.decomposable) doc["partition"] = partition_function(c);
  std::cout << doc.dump(2) << "\n";

  auto holds = [&](const std::string& p) -> bool {
    if (p == "smooth") return rep.smooth;
    if (p == "decomposable") return rep.decomposable;
    if (p == "structured") return rep.structured;
    if (p == "deterministic") return rep.deterministic == Verdict::yes;
    if (p == "alternating") return rep.alternating;
    if (p == "binary_products") return rep.binary_products;
    if (p == "contiguous") return rep.contiguous;
    throw Error(Stage::usage, "unknown property '" + p + "'");
  };
  std::vector<std::string> wanted = {"smooth", "decomposable"};
  wanted.insert(wanted.end(), require.begin(), require.end());
  bool ok = true;
  for (const auto& p : wanted)
    if (!holds(p)) {
      std::cerr << "check: property '" << p << "' does not hold";
      if (p == "smooth" && !rep.non_smooth_sums.empty()) std::cerr << " (sum node " << rep.non_smooth_sums.front() << ")";
      if (p == "decomposable" && !rep.non_decomposable_products.empty())
        std::cerr << " (product node " << rep.non_decomposable_products.front() << ")";
      if (p == "deterministic" && !rep.non_deterministic_sums.empty())
        std::cerr << " (sum node " << rep.non_deterministic_sums.front() << ")";
      std::cerr << "\n";
      ok = false;
    }
  return ok ? 0 : kExitFailed;
}

struct VerifyArgs {
  std::string a, b, times;
  bool proportional = false;
  double tol = 1e-9;
};

int cmd_verify(const VerifyArgs& args) {
  const Circuit a = load_circuit(args.a);
  const Circuit b = load_circuit(args.b);
  json doc;
  double deviation = 0.0;
  if (!args.times.empty()) {
    const auto p = oracle::check_proportional(a, b, load_circuit(args.times));
    deviation = p.deviation;
    doc["mode"] = "product";
    doc["constant"] = p.constant;
  } else if (args.proportional) {
    const auto ta = oracle::joint_table(a), tb = oracle::joint_table(b);
    if (ta.domains != tb.domains) throw Error(Stage::usage, "circuits have different variables or domains");
    const double za = ta.total(), zb = tb.total();
    if (za == 0.0 || zb == 0.0) throw Error(Stage::usage, "a circuit is identically zero");
    std::vector<double> scaled(ta.values.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = ta.values[i] * (zb / za);
    deviation = oracle::max_relative_deviation(scaled, tb.values);
    doc["mode"] = "proportional";
    doc["constant"] = zb / za;
  } else {
    deviation = oracle::check_equivalence(a, b);
    doc["mode"] = "equal";
  }
  const bool ok = deviation <= args.tol;
  doc["max_deviation"] = deviation;
  doc["tol"] = args.tol;
  doc["pass"] = ok;
  std::cout << doc.dump(2) << "\n";
  return ok ? 0 : kExitFailed;
}

Vtree make_vtree(const std::string& kind, int n, gen::Rng& rng) {
  const auto order = Vtree::canonical_order(n);
  if (kind == "right-linear") return Vtree::right_linear(order);
  if (kind == "left-linear") return Vtree::left_linear(order);
  if (kind == "balanced") return Vtree::balanced(order);
  if (kind == "random") return gen::random_vtree(rng, n);
  if (kind == "random-contiguous") return gen::random_contiguous_vtree(rng, n);
  throw Error(Stage::usage, "unknown vtree kind '" + kind + "'");
}

std::uint64_t seed_from_env(std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* s = std::getenv("PCR_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw Error(Stage::usage, "PCR_SEED must be a non-negative integer");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic circuit restructuring toolkit"};
  app.require_subcommand(1);
  std::size_t budget = kDefaultTableBudget;
  app.add_option("--budget", budget, "Maximum table entries per operation")->capture_default_str();

  // check
  std::string check_path;
  std::vector<std::string> require;
  bool check_renorm = false;
  auto* check = app.add_subcommand("check", "Report structural properties and statistics of a circuit");
  check->add_option("path", check_path, "Circuit file")->required();
  check->add_option("--require", require, "Additional property that must hold")
      ->check(CLI::IsMember({"smooth", "decomposable", "structured", "deterministic", "alternating", "binary_products", "contiguous"}));
  check->add_flag("--renormalize", check_renorm, "Rescale weights instead of rejecting unnormalized ones");

  // restructure
  std::string rs_circuit, rs_source, rs_target, rs_out, rs_labels, rs_report, rs_labelling = "greedy";
  auto* rs = app.add_subcommand("restructure", "Rebuild a circuit to respect another vtree");
  rs->add_option("--circuit", rs_circuit)->required();
  rs->add_option("--source-vtree", rs_source)->required();
  rs->add_option("--target-vtree", rs_target)->required();
  rs->add_option("--out", rs_out)->required();
  rs->add_option("--labels-out", rs_labels);
  rs->add_option("--report", rs_report);
  rs->add_option("--labelling", rs_labelling, "greedy or contiguous")->check(CLI::IsMember({"greedy", "contiguous"}))->capture_default_str();

  // multiply
  std::string mu_a, mu_b, mu_va, mu_vb, mu_mode, mu_out, mu_report;
  auto* mu = app.add_subcommand("multiply", "Multiply two circuits");
  mu->add_option("--a", mu_a)->required();
  mu->add_option("--b", mu_b)->required();
  mu->add_option("--a-vtree", mu_va, "Vtree of a (inferred when omitted)");
  mu->add_option("--b-vtree", mu_vb, "Vtree of b (inferred when omitted)");
  mu->add_option("--mode", mu_mode)->required()->check(CLI::IsMember({"same-vtree", "restructure", "onthefly"}));
  mu->add_option("--out", mu_out)->required();
  mu->add_option("--report", mu_report);

  // depth-reduce
  std::string dr_circuit, dr_source, dr_out, dr_report, dr_labels;
  auto* dr = app.add_subcommand("depth-reduce", "Restructure onto a balanced vtree of logarithmic depth");
  dr->add_option("--circuit", dr_circuit)->required();
  dr->add_option("--source-vtree", dr_source)->required();
  dr->add_option("--out", dr_out)->required();
  dr->add_option("--report", dr_report);
  dr->add_option("--labels-out", dr_labels);

  // pcfg
  std::string pg_grammar, pg_out;
  int pg_length = 0;
  bool pg_normalize = false;
  auto* pg = app.add_subcommand("pcfg", "Compile a grammar into a circuit over strings of fixed length");
  pg->add_option("--grammar", pg_grammar)->required();
  pg->add_option("--length", pg_length)->required()->check(CLI::PositiveNumber);
  pg->add_option("--out", pg_out)->required();
  pg->add_flag("--normalize", pg_normalize, "Rescale into a distribution over length-n strings");

  // verify
  VerifyArgs va;
  auto* ve = app.add_subcommand("verify", "Compare circuits by exhaustive enumeration");
  ve->add_option("--a", va.a)->required();
  ve->add_option("--b", va.b)->required();
  ve->add_option("--times", va.times, "Check a proportional to b times this circuit");
  ve->add_flag("--proportional", va.proportional, "Allow a constant factor between a and b");
  ve->add_option("--tol", va.tol)->capture_default_str();

  // gen
  int g_vars = 4, g_hidden = 2, g_domain = 2;
  std::optional<std::uint64_t> g_seed;
  std::string g_kind = "structured", g_vtree = "right-linear", g_out, g_vtree_out;
  double g_zero = 0.0;
  auto* ge = app.add_subcommand("gen", "Generate a random circuit (seed from --seed or PCR_SEED)");
  ge->add_option("--vars", g_vars)->check(CLI::PositiveNumber)->capture_default_str();
  ge->add_option("--hidden", g_hidden)->check(CLI::PositiveNumber)->capture_default_str();
  ge->add_option("--max-domain", g_domain)->check(CLI::Range(2, 64))->capture_default_str();
  ge->add_option("--seed", g_seed);
  ge->add_option("--kind", g_kind)->check(CLI::IsMember({"structured", "deterministic", "contiguous"}))->capture_default_str();
  ge->add_option("--vtree", g_vtree)
      ->check(CLI::IsMember({"right-linear", "left-linear", "balanced", "random", "random-contiguous"}))
      ->capture_default_str();
  ge->add_option("--zero-rate", g_zero)->check(CLI::Range(0.0, 0.9));
  ge->add_option("--out", g_out)->required();
  ge->add_option("--vtree-out", g_vtree_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) return cmd_check(check_path, require, check_renorm);

    if (*rs) {
      const Circuit c = load_circuit(rs_circuit);
      const Vtree src = parse_vtree(read_file(rs_source));
      const Vtree tgt = parse_vtree(read_file(rs_target));
      const auto bn = pc_to_bn(c, src);
      const auto lw = rs_labelling == "contiguous" ? contiguous_labelling(bn, tgt) : compute_label(bn, tgt);
      RestructureOptions opts;
      opts.budget = budget;
      const auto r = restructure(c, src, lw, opts);
      write_file(rs_out, serialize_circuit(r.circuit));
      if (!rs_labels.empty()) write_file(rs_labels, serialize_labelled_vtree(r.labelled));
      if (!rs_report.empty()) emit(restructure_report(r), rs_report);
      return 0;
    }

    if (*mu) {
      const Circuit a = load_circuit(mu_a), b = load_circuit(mu_b);
      ProductResult res;
      if (mu_mode == "same-vtree") {
        const Vtree v = vtree_for(a, mu_va, "a");
        res = multiply_same_vtree(a, b, v);
      } else if (mu_mode == "restructure") {
        RestructureOptions opts;
        opts.budget = budget;
        res = multiply(a, vtree_for(a, mu_va, "a"), b, vtree_for(b, mu_vb, "b"), opts);
      } else {
        res = multiply_onthefly(a, vtree_for(a, mu_va, "a"), b, budget);
      }
      write_file(mu_out, serialize_circuit(res.circuit));
      json doc{{"partition", res.partition}, {"raw_size", res.raw.size}, {"circuit", stats_json(res.circuit)}};
      if (res.restructured) doc["restructured_a"] = restructure_report(*res.restructured);
      if (!mu_report.empty()) emit(doc, mu_report);
      std::cout.precision(17);
      std::cout << "partition " << res.partition << "\n";
      return 0;
    }

    if (*dr) {
      const Circuit c = load_circuit(dr_circuit);
      RestructureOptions opts;
      opts.budget = budget;
      const auto r = depth_reduce(c, parse_vtree(read_file(dr_source)), opts);
      write_file(dr_out, serialize_circuit(r.circuit));
      if (!dr_labels.empty()) write_file(dr_labels, serialize_labelled_vtree(r.labelled));
      if (!dr_report.empty()) emit(restructure_report(r), dr_report);
      return 0;
    }

    if (*pg) {
      const Pcfg g = parse_pcfg(read_file(pg_grammar));
      write_file(pg_out, serialize_circuit(compile_pcfg(g, pg_length, PcfgOptions{pg_normalize})));
      return 0;
    }

    if (*ve) return cmd_verify(va);

    if (*ge) {
      gen::Rng rng(seed_from_env(g_seed));
      const auto dom = gen::random_domains(rng, g_vars, g_domain);
      Vtree v = make_vtree(g_vtree, g_vars, rng);
      Circuit c;
      if (g_kind == "structured") {
        c = gen::random_structured_pc(rng, v, dom, {g_hidden, 0.7, g_zero});
      } else if (g_kind == "deterministic") {
        c = gen::random_deterministic_pc(rng, v, dom, std::max(2, g_hidden));
      } else {
        c = gen::random_contiguous_circuit(rng, dom, {g_hidden, 2, g_zero});
        if (!g_vtree_out.empty()) throw Error(Stage::usage, "contiguous circuits have no vtree to write");
      }
      write_file(g_out, serialize_circuit(c));
      if (!g_vtree_out.empty()) write_file(g_vtree_out, serialize_vtree(v));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error[" << stage_name(e.stage()) << "]: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
