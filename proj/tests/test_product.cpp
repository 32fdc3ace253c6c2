#include <gtest/gtest.h>

#include "support.hpp"

using namespace pcr;

namespace {

constexpr double kTol = 1e-9;

// Pointwise product of two joint tables, renormalized, plus its mass.
std::pair<std::vector<double>, double> product_oracle(const Circuit& a, const Circuit& b) {
  const auto ta = oracle::joint_table(a), tb = oracle::joint_table(b);
  std::vector<double> out(ta.values.size());
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) z += out[i] = ta.values[i] * tb.values[i];
  for (double& x : out) x /= z;
  return {out, z};
}

void expect_product(const ProductResult& r, const Circuit& a, const Circuit& b) {
  const auto [want, z] = product_oracle(a, b);
  EXPECT_TRUE(fixtures::near_relative(r.partition, z, kTol)) << r.partition << " vs " << z;
  EXPECT_LE(oracle::max_relative_deviation(oracle::joint_table(r.circuit).values, want), kTol);
}

Circuit single_leaf(std::vector<double> p) {
  CircuitBuilder b({static_cast<int>(p.size())});
  return b.build(b.add_leaf(0, std::move(p)));
}

}  // namespace

TEST(Multiply, LeafTimesLeaf) {
  const Circuit a = single_leaf({0.3, 0.7});
  const Vtree v = fixtures::chain_vtree(1);
  const auto r = multiply_same_vtree(a, a, v);
  EXPECT_NEAR(r.partition, 0.58, 1e-12);
  EXPECT_NEAR(evaluate(r.circuit, {0}), 0.09 / 0.58, 1e-12);
  EXPECT_NEAR(evaluate(r.circuit, {1}), 0.49 / 0.58, 1e-12);
}

TEST(Multiply, UniformFactorLeavesDistributionUnchanged) {
  const Circuit c = fixtures::four_var_chain();
  const Vtree v = fixtures::chain_vtree(4);
  const auto r = multiply_same_vtree(c, fixtures::uniform_circuit({2, 2, 2, 2}, v), v);
  EXPECT_NEAR(r.partition, 1.0 / 16.0, 1e-12);
  EXPECT_LE(oracle::check_equivalence(r.circuit, c), kTol);
}

TEST(Multiply, SameVtreeRandom) {
  gen::Rng rng(51);
  for (int t = 0; t < 30; ++t) {
    const int n = gen::uniform_int(rng, 1, 6);
    const Vtree v = gen::random_vtree(rng, n);
    const auto d = gen::random_domains(rng, n, 3);
    const Circuit a = gen::random_structured_pc(rng, v, d, {gen::uniform_int(rng, 1, 3), 0.7, 0.1});
    const Circuit b = gen::random_structured_pc(rng, v, d, {gen::uniform_int(rng, 1, 3)});
    const auto r = multiply_same_vtree(a, b, v);
    expect_product(r, a, b);
    EXPECT_TRUE(respects(r.circuit, v));
    EXPECT_FALSE(r.restructured.has_value());
  }
}

TEST(Multiply, SameVtreeRawSizeIsProductOfSizes) {
  gen::Rng rng(52);
  const Vtree v = fixtures::chain_vtree(5);
  const Circuit a = gen::random_structured_pc(rng, v, std::vector<int>(5, 2), {3});
  const Circuit b = gen::random_structured_pc(rng, v, std::vector<int>(5, 2), {2});
  const auto r = multiply_same_vtree(a, b, v);
  EXPECT_LE(r.raw.size, stats(a).size * stats(b).size);
}

TEST(Multiply, RejectsMismatchedVtree) {
  gen::Rng rng(53);
  const Vtree v = fixtures::chain_vtree(3), w = Vtree::left_linear(Vtree::canonical_order(3));
  const Circuit a = gen::random_structured_pc(rng, v, {2, 2, 2}, {2});
  const Circuit b = gen::random_structured_pc(rng, w, {2, 2, 2}, {2});
  EXPECT_THROW(multiply_same_vtree(a, b, v), Error);
}

TEST(Multiply, RestructuresFirstOperand) {
  gen::Rng rng(54);
  for (int t = 0; t < 30; ++t) {
    const int n = gen::uniform_int(rng, 2, 7);
    const Vtree va = gen::random_contiguous_vtree(rng, n), vb = gen::random_contiguous_vtree(rng, n);
    const auto d = gen::random_domains(rng, n, 3);
    const Circuit a = gen::random_structured_pc(rng, va, d, {2, 0.7, 0.1});
    const Circuit b = gen::random_structured_pc(rng, vb, d, {2});
    const auto r = multiply(a, va, b, vb);
    expect_product(r, a, b);
    EXPECT_TRUE(respects(r.circuit, vb));
    if (!(va == vb)) {
      ASSERT_TRUE(r.restructured.has_value());
      EXPECT_LE(oracle::check_equivalence(r.restructured->circuit, a), kTol);
    }
  }
}

TEST(Multiply, EqualVtreesSkipRestructuring) {
  const Circuit c = fixtures::four_var_chain();
  const Vtree v = fixtures::chain_vtree(4);
  const auto r = multiply(c, v, c, v);
  EXPECT_FALSE(r.restructured.has_value());
  expect_product(r, c, c);
}

TEST(Multiply, RejectsNonContiguousVtree) {
  gen::Rng rng(55);
  const Vtree va = Vtree::right_linear({1, 0, 2}), vb = fixtures::chain_vtree(3);
  const Circuit a = gen::random_structured_pc(rng, va, {2, 2, 2}, {2});
  const Circuit b = gen::random_structured_pc(rng, vb, {2, 2, 2}, {2});
  EXPECT_THROW(multiply(a, va, b, vb), Error);
}

TEST(Multiply, Commutes) {
  gen::Rng rng(56);
  const int n = 5;
  const Vtree va = gen::random_contiguous_vtree(rng, n), vb = gen::random_contiguous_vtree(rng, n);
  const Circuit a = gen::random_structured_pc(rng, va, std::vector<int>(n, 2), {2});
  const Circuit b = gen::random_structured_pc(rng, vb, std::vector<int>(n, 2), {2});
  const auto ab = multiply(a, va, b, vb), ba = multiply(b, vb, a, va);
  EXPECT_TRUE(fixtures::near_relative(ab.partition, ba.partition, kTol));
  EXPECT_LE(oracle::check_equivalence(ab.circuit, ba.circuit), kTol);
}

TEST(MultiplyOnTheFly, MixedSplitTimesChain) {
  const Circuit b = fixtures::mixed_split_circuit();
  EXPECT_FALSE(validate(b).structured);
  gen::Rng rng(57);
  for (const Vtree& va : {fixtures::chain_vtree(3), Vtree::left_linear(Vtree::canonical_order(3))}) {
    const Circuit a = gen::random_structured_pc(rng, va, {2, 2, 2}, {2});
    const auto r = multiply_onthefly(a, va, b);
    expect_product(r, a, b);
    const auto rep = validate(r.circuit);
    EXPECT_TRUE(rep.smooth && rep.decomposable);
  }
}

TEST(MultiplyOnTheFly, AgreesWithRestructureMode) {
  gen::Rng rng(58);
  for (int t = 0; t < 20; ++t) {
    const int n = gen::uniform_int(rng, 2, 7);
    const Vtree va = fixtures::chain_vtree(n), vb = gen::random_contiguous_vtree(rng, n);
    const auto d = gen::random_domains(rng, n, 3);
    const Circuit a = gen::random_structured_pc(rng, va, d, {2, 0.7, 0.1});
    const Circuit b = gen::random_structured_pc(rng, vb, d, {2});
    const auto fly = multiply_onthefly(a, va, b);
    const auto via = multiply(a, va, b, vb);
    EXPECT_TRUE(fixtures::near_relative(fly.partition, via.partition, kTol));
    EXPECT_LE(oracle::check_equivalence(fly.circuit, via.circuit), kTol);
  }
}

TEST(MultiplyOnTheFly, RandomContiguousCircuits) {
  gen::Rng rng(59);
  for (int t = 0; t < 20; ++t) {
    const int n = gen::uniform_int(rng, 1, 6);
    const auto d = gen::random_domains(rng, n, 3);
    const Vtree va = gen::coin(rng, 0.5) ? fixtures::chain_vtree(n) : Vtree::left_linear(Vtree::canonical_order(n));
    const Circuit a = gen::random_structured_pc(rng, va, d, {gen::uniform_int(rng, 1, 3)});
    const Circuit b = gen::random_contiguous_circuit(rng, d);
    expect_product(multiply_onthefly(a, va, b), a, b);
  }
}

TEST(MultiplyOnTheFly, GrammarTimesHiddenMarkovChain) {
  // Product of a string distribution with an HMM-style chain, checked
  // string by string against the inside value times the chain likelihood.
  const Pcfg g = parse_pcfg("start: S\nrule: S -> S S @ 0.4\nrule: S -> A S @ 0.2\nlex: S -> a @ 0.3\nlex: S -> b @ 0.1\nlex: A -> a @ 1.0\n");
  const int n = 5;
  const Circuit b = compile_pcfg(g, n);
  const Vtree va = fixtures::chain_vtree(n);
  gen::Rng rng(60);
  const Circuit a = gen::random_structured_pc(rng, va, std::vector<int>(n, 2), {2});
  const auto bn = pc_to_bn(a, va);
  const auto r = multiply_onthefly(a, va, b);
  std::vector<double> raw;
  double z = 0.0;
  for (const auto& s : fixtures::all_strings(n, 2)) {
    raw.push_back(cyk_inside(g, s) * fixtures::tree_likelihood(bn, s));
    z += raw.back();
  }
  EXPECT_TRUE(fixtures::near_relative(r.partition, z, kTol));
  const auto strings = fixtures::all_strings(n, 2);
  for (std::size_t i = 0; i < strings.size(); ++i)
    EXPECT_TRUE(fixtures::near_relative(evaluate(r.circuit, strings[i]), raw[i] / z, kTol));
}

TEST(MultiplyOnTheFly, RejectsNonLinearFirstOperand) {
  gen::Rng rng(61);
  const Vtree v = Vtree::balanced(Vtree::canonical_order(4));
  const Circuit a = gen::random_structured_pc(rng, v, {2, 2, 2, 2}, {2});
  EXPECT_THROW(multiply_onthefly(a, v, a), Error);
}

TEST(MultiplyOnTheFly, RejectsDomainMismatch) {
  gen::Rng rng(62);
  const Vtree v = fixtures::chain_vtree(3);
  const Circuit a = gen::random_structured_pc(rng, v, {2, 2, 2}, {2});
  const Circuit b = gen::random_structured_pc(rng, v, {2, 3, 2}, {2});
  EXPECT_THROW(multiply_onthefly(a, v, b), Error);
}

TEST(MultiplyOnTheFly, BudgetExceeded) {
  gen::Rng rng(63);
  const int n = 8;
  const Vtree v = fixtures::chain_vtree(n);
  const Circuit a = gen::random_structured_pc(rng, v, std::vector<int>(n, 2), {3});
  const Circuit b = gen::random_contiguous_circuit(rng, std::vector<int>(n, 2));
  EXPECT_THROW(multiply_onthefly(a, v, b, 5), BudgetExceeded);
}

TEST(Multiply, DisjointSupportsRejected) {
  const Circuit a = single_leaf({1.0, 0.0}), b = single_leaf({0.0, 1.0});
  EXPECT_THROW(multiply_same_vtree(a, b, fixtures::chain_vtree(1)), Error);
}
