#include <gtest/gtest.h>

#include "support.hpp"

using namespace pcr;
using fixtures::four_var_chain;

namespace {

Circuit single_leaf() {
  CircuitBuilder b({2});
  return b.build(b.add_leaf(0, {0.3, 0.7}));
}

std::string data(const std::string& name) { return read_file(std::string(PCR_DATA_DIR) + "/" + name); }

}  // namespace

TEST(Parse, SingleLeafFile) {
  const Circuit c = parse_circuit(data("leaf.json"));
  EXPECT_EQ(c.size(), 1);
  EXPECT_EQ(c.node(c.root()).kind, NodeKind::leaf);
  EXPECT_DOUBLE_EQ(evaluate(c, {1}), 0.7);
}

TEST(Parse, ChainFixtureIsAlternatingAndStructured) {
  const Circuit c = parse_circuit(data("chain4.json"));
  const auto rep = validate(c);
  EXPECT_TRUE(rep.alternating);
  EXPECT_TRUE(rep.structured);
  ASSERT_TRUE(rep.vtree);
  EXPECT_TRUE(rep.vtree->same_structure(fixtures::chain_vtree(4)));
  EXPECT_EQ(hidden_state_size(c, fixtures::chain_vtree(4)), 2);
}

TEST(Parse, RejectsUnnormalizedWeights) {
  try {
    parse_circuit(data("bad_weights.json"));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("weights not normalized"), std::string::npos);
  }
}

TEST(Parse, RenormalizeFlagRescales) {
  const Circuit c = parse_circuit(data("bad_weights.json"), ParseOptions{true});
  EXPECT_NEAR(partition_function(c), 1.0, 1e-12);
}

TEST(Parse, RejectsCycles) {
  const std::string text = R"({"format_version":1,"num_vars":1,"root":0,"nodes":[
    {"id":0,"kind":"sum","children":[1],"weights":[1.0]},
    {"id":1,"kind":"prod","children":[0]}]})";
  EXPECT_THROW(parse_circuit(text), Error);
}

TEST(Parse, RejectsWeightLengthMismatch) {
  const std::string text = R"({"format_version":1,"num_vars":1,"root":1,"nodes":[
    {"id":0,"kind":"leaf","var":0,"probs":[0.5,0.5]},
    {"id":1,"kind":"sum","children":[0],"weights":[0.5,0.5]}]})";
  EXPECT_THROW(parse_circuit(text), Error);
}

TEST(Parse, RejectsMalformedSyntax) {
  try {
    parse_circuit("{ not json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), Stage::parse);
  }
}

TEST(Serialize, RoundTripPreservesDistribution) {
  gen::Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const int n = gen::uniform_int(rng, 1, 5);
    const auto dom = gen::random_domains(rng, n, 3);
    const Circuit c = gen::random_structured_pc(rng, gen::random_vtree(rng, n), dom, {2, 0.7, 0.2});
    const std::string text = serialize_circuit(c);
    const Circuit back = parse_circuit(text);
    EXPECT_EQ(back.size(), c.size());
    EXPECT_LE(oracle::check_equivalence(c, back), 1e-15);
    EXPECT_EQ(serialize_circuit(back), text);
  }
}

TEST(Serialize, SingleLeafIsCanonical) {
  const std::string a = serialize_circuit(single_leaf());
  EXPECT_EQ(a, serialize_circuit(single_leaf()));
  EXPECT_NE(a.find(R"("kind":"leaf")"), std::string::npos);
}

TEST(Validate, MixedSplitCircuitIsNotStructured) {
  const auto rep = validate(fixtures::mixed_split_circuit());
  EXPECT_TRUE(rep.smooth);
  EXPECT_TRUE(rep.decomposable);
  EXPECT_TRUE(rep.contiguous);
  EXPECT_FALSE(rep.structured);
  EXPECT_FALSE(rep.vtree);
}

TEST(Validate, HmmIsStructuredByRightLinearVtree) {
  gen::Rng rng(2);
  const Vtree v = fixtures::chain_vtree(6);
  const Circuit c = gen::random_structured_pc(rng, v, std::vector<int>(6, 3), {3});
  const auto rep = validate(c);
  EXPECT_TRUE(rep.smooth);
  ASSERT_TRUE(rep.vtree);
  EXPECT_TRUE(rep.vtree->is_right_linear());
  EXPECT_TRUE(respects(c, *rep.vtree));
}

TEST(Validate, SumOverDifferentScopesIsNotSmooth) {
  const auto rep = validate(parse_circuit(data("nonsmooth.json")));
  EXPECT_FALSE(rep.smooth);
  ASSERT_EQ(rep.non_smooth_sums.size(), 1u);
  EXPECT_EQ(rep.non_smooth_sums.front(), 4);
}

TEST(Validate, StructuredImpliesDecomposable) {
  gen::Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    const auto dom = gen::random_domains(rng, 4, 2);
    const Circuit c = i % 2 ? gen::random_contiguous_circuit(rng, dom) : gen::random_structured_pc(rng, gen::random_vtree(rng, 4), dom);
    const auto rep = validate(c);
    if (rep.structured) EXPECT_TRUE(rep.decomposable);
  }
}

TEST(Validate, DeterminismVerdicts) {
  gen::Rng rng(4);
  const Vtree v = gen::random_vtree(rng, 4);
  EXPECT_EQ(validate(gen::random_deterministic_pc(rng, v, {2, 3, 2, 2})).deterministic, Verdict::yes);
  EXPECT_EQ(validate(four_var_chain()).deterministic, Verdict::no);
}

TEST(Validate, LargeCircuitsFallBackToSyntacticCheck) {
  gen::Rng rng(5);
  const int n = 24;
  const Circuit c = gen::random_structured_pc(rng, fixtures::chain_vtree(n), std::vector<int>(n, 2), {2});
  EXPECT_EQ(validate(c).deterministic, Verdict::unchecked);
}

TEST(Normalize, CanonicalCircuitIsFixpoint) {
  const Circuit c = four_var_chain();
  const Circuit n = normalize(c);
  EXPECT_EQ(n.size(), c.size());
  EXPECT_EQ(stats(n).size, stats(c).size);
  EXPECT_LE(oracle::check_equivalence(c, n), 1e-12);
}

TEST(Normalize, TernaryProductBecomesNestedBinaryProducts) {
  CircuitBuilder b({2, 3, 2});
  const NodeId p = b.add_product({b.add_leaf(0, {0.2, 0.8}), b.add_leaf(1, {0.1, 0.3, 0.6}), b.add_leaf(2, {0.5, 0.5})});
  const Circuit c = b.build(b.add_sum({p}, {1.0}));
  const Circuit n = normalize(c);
  const auto rep = validate(n);
  EXPECT_TRUE(rep.binary_products);
  EXPECT_TRUE(rep.alternating);
  EXPECT_LE(oracle::check_equivalence(c, n), 1e-12);
  // Left fold in child order: ({X0}, {X1}) first, then with {X2}.
  ASSERT_TRUE(rep.vtree);
  EXPECT_TRUE(rep.vtree->same_structure(Vtree::left_linear({0, 1, 2})));
}

TEST(Normalize, SumChainsCollapse) {
  CircuitBuilder b({2});
  const NodeId a = b.add_leaf(0, {0.9, 0.1}), c = b.add_leaf(0, {0.2, 0.8}), d = b.add_leaf(0, {0.5, 0.5});
  const NodeId inner = b.add_sum({a, c}, {0.3, 0.7});
  const Circuit circ = b.build(b.add_sum({inner, d}, {0.6, 0.4}));
  const Circuit n = normalize(circ);
  EXPECT_LE(oracle::check_equivalence(circ, n), 1e-12);
  EXPECT_TRUE(validate(n).alternating);
}

TEST(Normalize, PreservesJointOnRandomCircuits) {
  gen::Rng rng(6);
  for (int i = 0; i < 30; ++i) {
    const int n = gen::uniform_int(rng, 1, 6);
    const auto dom = gen::random_domains(rng, n, 3);
    const Circuit c = gen::random_contiguous_circuit(rng, dom, {2, 2, 0.2});
    const Circuit m = normalize(c);
    const auto ta = oracle::joint_table(c).values, tb = oracle::joint_table(m).values;
    for (std::size_t k = 0; k < ta.size(); ++k) EXPECT_NEAR(ta[k], tb[k], 1e-12);
    EXPECT_TRUE(validate(m).alternating);
    EXPECT_TRUE(validate(m).binary_products);
  }
}

TEST(Normalize, RejectsNonDecomposable) {
  CircuitBuilder b({2});
  const NodeId p = b.add_product({b.add_leaf(0, {0.5, 0.5}), b.add_leaf(0, {0.2, 0.8})});
  EXPECT_THROW(normalize(b.build(p, Normalization::unnormalized)), Error);
}

TEST(Evaluate, LeafAndProduct) {
  EXPECT_DOUBLE_EQ(evaluate(single_leaf(), {1}), 0.7);
  CircuitBuilder b({2, 2});
  const Circuit c = b.build(b.add_product({b.add_leaf(0, {0.3, 0.7}), b.add_leaf(1, {0.3, 0.7})}));
  EXPECT_DOUBLE_EQ(evaluate(c, {1, 1}), 0.49);
}

TEST(Evaluate, RejectsBadAssignments) {
  EXPECT_THROW(evaluate(single_leaf(), {2}), Error);
  EXPECT_THROW(evaluate(single_leaf(), {}), Error);
  EXPECT_THROW(evaluate(single_leaf(), {kMissing}), Error);
}

TEST(Evaluate, RandomCircuitsSumToOne) {
  gen::Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const int n = gen::uniform_int(rng, 1, 6);
    const auto dom = gen::random_domains(rng, n, 3);
    const Circuit c = gen::random_structured_pc(rng, gen::random_vtree(rng, n), dom, {3, 0.6, 0.3});
    EXPECT_NEAR(oracle::joint_table(c).total(), 1.0, 1e-9);
  }
}

TEST(Marginalize, EmptyEvidenceIsOne) {
  EXPECT_NEAR(marginalize_evaluate(four_var_chain(), Assignment(4, kMissing)), 1.0, 1e-9);
}

TEST(Marginalize, MatchesSumOverCompletions) {
  gen::Rng rng(8);
  const Circuit c = gen::random_structured_pc(rng, fixtures::chain_vtree(5), {2, 3, 2, 3, 2}, {3});
  for (int v0 = 0; v0 < 2; ++v0) {
    Assignment ev(5, kMissing);
    ev[0] = v0;
    double brute = 0.0;
    for_each_assignment(c.domains(), [&](const Assignment& x) {
      if (x[0] == v0) brute += evaluate(c, x);
    });
    EXPECT_NEAR(marginalize_evaluate(c, ev), brute, 1e-12);
  }
}

TEST(Marginalize, FullAssignmentEqualsEvaluate) {
  const Circuit c = four_var_chain();
  for_each_assignment(c.domains(), [&](const Assignment& x) { EXPECT_DOUBLE_EQ(marginalize_evaluate(c, x), evaluate(c, x)); });
}

TEST(Marginalize, RejectsNonSmooth) {
  EXPECT_THROW(marginalize_evaluate(parse_circuit(data("nonsmooth.json")), {kMissing, kMissing}), Error);
}

TEST(HiddenStateSize, OneProductPerScope) {
  const Vtree v = fixtures::chain_vtree(4);
  gen::Rng rng(9);
  const Circuit c = gen::random_structured_pc(rng, v, {2, 2, 2, 2}, {1});
  EXPECT_EQ(hidden_state_size(c, v), 1);
}

TEST(HiddenStateSize, MismatchedVtreeThrows) {
  EXPECT_THROW(hidden_state_size(four_var_chain(), Vtree::balanced({0, 1, 2, 3})), Error);
}

TEST(Stats, SmallCases) {
  const auto s1 = stats(single_leaf());
  EXPECT_EQ(s1.size, 0u);
  EXPECT_EQ(s1.depth, 1);
  CircuitBuilder b({2, 2});
  const auto s2 = stats(b.build(b.add_product({b.add_leaf(0, {0.3, 0.7}), b.add_leaf(1, {0.3, 0.7})})));
  EXPECT_EQ(s2.size, 2u);
  EXPECT_EQ(s2.depth, 2);
}

TEST(Stats, MatchesIndependentRecount) {
  gen::Rng rng(10);
  const Circuit c = gen::random_contiguous_circuit(rng, {2, 2, 3, 2, 2});
  std::size_t edges = 0;
  int sums = 0;
  for (const Node& n : c.nodes()) {
    edges += n.children.size();
    sums += n.kind == NodeKind::sum;
  }
  EXPECT_EQ(stats(c).size, edges);
  EXPECT_EQ(stats(c).num_sum, sums);
  EXPECT_EQ(stats(c).num_sum + stats(c).num_product + stats(c).num_leaf, c.size());
}

TEST(Logical, PositiveLiteralRoundTrip) {
  LogicalCircuit l(1);
  l.literal(0, true);
  const Circuit c = from_logical(l);
  ASSERT_EQ(c.size(), 1);
  EXPECT_EQ(c.node(0).probs, (std::vector<double>{0.0, 1.0}));
  const LogicalCircuit back = to_logical(c);
  EXPECT_EQ(back.node(back.root()).kind, LogicKind::literal);
  EXPECT_TRUE(back.node(back.root()).positive);
}

TEST(Logical, XorHasTwoModels) {
  LogicalCircuit l(2);
  const int a = l.conj({l.literal(0, true), l.literal(1, false)});
  const int b = l.conj({l.literal(0, false), l.literal(1, true)});
  l.disj({a, b});
  const Circuit c = from_logical(l);
  EXPECT_EQ(model_count(c), 2u);
  int support = 0;
  for_each_assignment({2, 2}, [&](const Assignment& x) {
    const bool pos = evaluate(c, x) > 0.0;
    EXPECT_EQ(pos, l.evaluate(x));
    support += pos;
  });
  EXPECT_EQ(support, 2);
}

TEST(Logical, RestructureToReversedOrderKeepsModelCount) {
  gen::Rng rng(11);
  const LogicalCircuit l = gen::random_obdd(rng, 3, 2);
  const Circuit c = normalize(from_logical(l));
  const auto r = restructure_to_vtree(c, Vtree::right_linear({0, 1, 2}), Vtree::right_linear({2, 1, 0}));
  EXPECT_EQ(model_count(r.circuit), l.brute_force_count());
}

TEST(Logical, SupportRoundTripOnObdds) {
  gen::Rng rng(12);
  for (int i = 0; i < 10; ++i) {
    const LogicalCircuit l = gen::random_obdd(rng, 5, 3);
    const Circuit c = from_logical(l);
    const LogicalCircuit back = to_logical(c);
    for_each_assignment(std::vector<int>(5, 2), [&](const Assignment& x) {
      EXPECT_EQ(evaluate(c, x) > 0.0, l.evaluate(x));
      EXPECT_EQ(back.evaluate(x), l.evaluate(x));
    });
  }
}

TEST(Logical, RejectsNonDecomposableConjunction) {
  LogicalCircuit l(1);
  l.conj({l.literal(0, true), l.literal(0, false)});
  EXPECT_THROW(from_logical(l), Error);
}
