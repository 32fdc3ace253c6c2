#include <gtest/gtest.h>

#include "support.hpp"

using namespace pcr;

namespace {

constexpr double kTol = 1e-9;

double deviation(const Circuit& a, const Circuit& b) {
  return oracle::max_relative_deviation(oracle::joint_table(a).values, oracle::joint_table(b).values);
}

struct Case {
  Circuit c;
  Vtree v;
};

Case random_case(gen::Rng& rng, int n, int h, double zero_rate = 0.0, bool contiguous = false) {
  const Vtree v = contiguous ? gen::random_contiguous_vtree(rng, n) : gen::random_vtree(rng, n);
  return {gen::random_structured_pc(rng, v, gen::random_domains(rng, n, 3), {h, 0.7, zero_rate}), v};
}

}  // namespace

TEST(Restructure, ChainToBalancedPreservesDistribution) {
  const Circuit c = fixtures::four_var_chain();
  const Vtree src = fixtures::chain_vtree(4), tgt = Vtree::balanced(Vtree::canonical_order(4));
  const auto r = restructure_to_vtree(c, src, tgt);
  EXPECT_LE(deviation(c, r.circuit), kTol);
  const auto rep = validate(r.circuit);
  EXPECT_TRUE(rep.smooth && rep.decomposable && rep.structured);
  ASSERT_TRUE(rep.vtree.has_value());
  EXPECT_TRUE(rep.vtree->same_structure(tgt));
}

TEST(Restructure, RootSumWeightsArePriorOfSplitLabel) {
  // The root label {Z2} yields one root sum whose weights are p(Z2).
  const Circuit c = fixtures::four_var_chain();
  const Vtree src = fixtures::chain_vtree(4);
  const auto r = restructure_to_vtree(c, src, Vtree::balanced(Vtree::canonical_order(4)));
  const Node& root = r.circuit.node(r.circuit.root());
  ASSERT_EQ(root.kind, NodeKind::sum);
  ASSERT_EQ(root.weights.size(), 2u);
  const auto bn = pc_to_bn(c, src);
  const auto full = oracle::bn_joint_table(bn);
  std::vector<double> prior(2, 0.0);
  std::size_t i = 0;
  for_each_assignment(full.domains, [&](const Assignment& z) { prior[z[2]] += full.values[i++]; });
  std::vector<double> got = root.weights;
  std::sort(got.begin(), got.end());
  std::sort(prior.begin(), prior.end());
  EXPECT_NEAR(got[0], prior[0], 1e-12);
  EXPECT_NEAR(got[1], prior[1], 1e-12);
}

TEST(Restructure, IdentityTarget) {
  gen::Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    auto [c, v] = random_case(rng, gen::uniform_int(rng, 1, 6), 2, 0.1);
    const auto r = restructure_to_vtree(c, v, v);
    EXPECT_LE(deviation(c, r.circuit), kTol);
    EXPECT_TRUE(respects(r.circuit, v));
  }
}

TEST(Restructure, RandomTargetsPreserveDistribution) {
  gen::Rng rng(32);
  for (int t = 0; t < 40; ++t) {
    const int n = gen::uniform_int(rng, 2, 7);
    auto [c, v] = random_case(rng, n, gen::uniform_int(rng, 1, 3), 0.15);
    const Vtree w = gen::random_vtree(rng, n);
    const auto r = restructure_to_vtree(c, v, w);
    EXPECT_LE(deviation(c, r.circuit), kTol);
    EXPECT_TRUE(respects(r.circuit, w));
    const auto rep = validate(r.circuit);
    EXPECT_TRUE(rep.smooth && rep.decomposable);
  }
}

TEST(Restructure, ExplicitAllLatentLabelling) {
  gen::Rng rng(33);
  for (int n = 2; n <= 5; ++n) {
    auto [c, v] = random_case(rng, n, 2);
    const Vtree w = gen::random_vtree(rng, n);
    const auto bn = pc_to_bn(c, v);
    LabelledVtree lw{w, std::vector<Scope>(w.size(), bn.latents())};
    lw.labels[w.root()].clear();
    const auto r = restructure(c, v, lw);
    EXPECT_LE(deviation(c, r.circuit), kTol);
    EXPECT_EQ(r.M_prime, n - 1);
  }
}

TEST(Restructure, LayerCountsWithinLabelBounds) {
  gen::Rng rng(34);
  for (int t = 0; t < 20; ++t) {
    const int n = gen::uniform_int(rng, 2, 7), h = gen::uniform_int(rng, 1, 3);
    auto [c, v] = random_case(rng, n, h);
    const auto r = restructure_to_vtree(c, v, gen::random_vtree(rng, n));
    const int states = r.source_hidden_states;
    EXPECT_LE(states, h);
    for (const auto& st : r.layers) {
      if (st.m == 0 && st.m_prime == 0) continue;  // leaf layer
      EXPECT_LE(st.products, static_cast<int>(std::pow(states, st.m)));
      EXPECT_LE(st.sums, static_cast<int>(std::pow(states, st.label_size)));
      EXPECT_LE(st.sum_edges, static_cast<std::size_t>(std::pow(states, st.m_prime)));
    }
  }
}

TEST(Restructure, SumWeightsPositiveAndNormalized) {
  gen::Rng rng(35);
  for (int t = 0; t < 20; ++t) {
    const int n = gen::uniform_int(rng, 2, 6);
    auto [c, v] = random_case(rng, n, 3, 0.3);
    const auto r = restructure_to_vtree(c, v, gen::random_vtree(rng, n));
    for (NodeId id = 0; id < r.circuit.size(); ++id) {
      const Node& nd = r.circuit.node(id);
      if (nd.kind != NodeKind::sum) continue;
      double total = 0.0;
      for (double w : nd.weights) {
        EXPECT_GT(w, 0.0);
        total += w;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Restructure, DenseModeKeepsZeroEdgesAndDistribution) {
  gen::Rng rng(36);
  auto [c, v] = random_case(rng, 4, 2, 0.3);
  const Vtree w = gen::random_vtree(rng, 4);
  RestructureOptions opts;
  opts.dense = true;
  const auto dense = restructure_to_vtree(c, v, w, opts);
  const auto sparse = restructure_to_vtree(c, v, w);
  EXPECT_LE(deviation(c, dense.circuit), kTol);
  EXPECT_GE(stats(dense.circuit).size, stats(sparse.circuit).size);
}

TEST(Restructure, LinearToReversedLinear) {
  gen::Rng rng(37);
  for (int n = 2; n <= 7; ++n) {
    const Vtree v = fixtures::chain_vtree(n);
    const Circuit c = gen::random_structured_pc(rng, v, std::vector<int>(n, 2), {2});
    const Vtree w = Vtree::left_linear(Vtree::canonical_order(n));
    const auto bn = pc_to_bn(c, v);
    const auto r = restructure(c, v, contiguous_labelling(bn, w));
    EXPECT_LE(deviation(c, r.circuit), kTol);
    EXPECT_LE(r.M_prime, 3);
  }
}

TEST(Restructure, DeterminismPreservedForDeterministicSource) {
  gen::Rng rng(38);
  for (int t = 0; t < 10; ++t) {
    const int n = gen::uniform_int(rng, 2, 5);
    const Vtree v = gen::random_vtree(rng, n);
    const Circuit c = gen::random_deterministic_pc(rng, v, gen::random_domains(rng, n, 3));
    const auto r = restructure_to_vtree(c, v, gen::random_vtree(rng, n));
    EXPECT_LE(deviation(c, r.circuit), kTol);
    EXPECT_EQ(validate(r.circuit).deterministic, Verdict::yes);
  }
}

TEST(Restructure, InvalidLabellingRejected) {
  const Circuit c = fixtures::four_var_chain();
  const Vtree v = fixtures::chain_vtree(4);
  LabelledVtree lw{Vtree::balanced(Vtree::canonical_order(4)), std::vector<Scope>(7)};
  try {
    restructure(c, v, lw);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), Stage::labelling);
  }
}

TEST(Restructure, BudgetExceeded) {
  gen::Rng rng(39);
  auto [c, v] = random_case(rng, 6, 3);
  RestructureOptions opts;
  opts.budget = 20;
  EXPECT_THROW(restructure_to_vtree(c, v, gen::random_vtree(rng, 6), opts), BudgetExceeded);
}

TEST(Restructure, RejectsCircuitNotOnSourceVtree) {
  gen::Rng rng(40);
  auto [c, v] = random_case(rng, 4, 2);
  Vtree other = gen::random_vtree(rng, 4);
  while (other.same_structure(v)) other = gen::random_vtree(rng, 4);
  EXPECT_THROW(restructure_to_vtree(c, other, v), Error);
}

TEST(DepthReduce, LinearChainsBecomeShallow) {
  gen::Rng rng(41);
  for (int n : {2, 3, 5, 8, 13, 24}) {
    const Vtree v = fixtures::chain_vtree(n);
    const Circuit c = gen::random_structured_pc(rng, v, std::vector<int>(n, 2), {2});
    const auto r = depth_reduce(c, v);
    const int bound = static_cast<int>(std::ceil(std::log(n) / std::log(1.5) - 1e-12)) + 2;
    EXPECT_LE(r.labelled.vtree.depth(), bound);
    EXPECT_LE(r.M_prime, 3);
    if (n <= 13) {
      EXPECT_LE(deviation(c, r.circuit), kTol);
    } else {
      // Too many states for the full table: compare on sampled assignments.
      for (int k = 0; k < 200; ++k) {
        Assignment x(n);
        for (int& xi : x) xi = gen::uniform_int(rng, 0, 1);
        EXPECT_TRUE(fixtures::near_relative(evaluate(c, x), evaluate(r.circuit, x), kTol));
      }
    }
  }
}

TEST(DepthReduce, MarginalsAgree) {
  gen::Rng rng(42);
  const int n = 9;
  const Vtree v = gen::random_contiguous_vtree(rng, n);
  const Circuit c = gen::random_structured_pc(rng, v, gen::random_domains(rng, n, 3), {3, 0.7, 0.1});
  const auto r = depth_reduce(c, v);
  Assignment x(n, kMissing);
  x[2] = 0;
  x[7] = 1 % c.domain(7);
  EXPECT_TRUE(fixtures::near_relative(marginalize_evaluate(c, x), marginalize_evaluate(r.circuit, x), kTol));
}
