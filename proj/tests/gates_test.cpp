#include "mnn/gates.hpp"

#include <array>

#include <gtest/gtest.h>

#include "mnn/error.hpp"

namespace mnn::gates {
namespace {

// Rows in order 00, 01, 10, 11 (x1 x2); NOT rows 0, 1.
const std::array<bool, 4> kAnd{false, false, false, true};
const std::array<bool, 4> kOr{false, true, true, true};
const std::array<bool, 4> kXor{false, true, true, false};
const std::array<bool, 2> kNot{true, false};

TEST(TruthTable, MatchesReferenceTable) {
  auto check = [](GateKind kind, auto expected) {
    const auto t = truth_table(kind);
    ASSERT_EQ(t.rows.size(), expected.size());
    for (std::size_t r = 0; r < expected.size(); ++r) EXPECT_EQ(t.rows[r].expected, expected[r]);
  };
  check(GateKind::And, kAnd);
  check(GateKind::Or, kOr);
  check(GateKind::Xor, kXor);
  check(GateKind::Not, kNot);
  const auto t = truth_table(GateKind::Xor);
  EXPECT_EQ(t.rows[1].inputs, (std::vector<bool>{false, true}));
  EXPECT_EQ(t.rows[2].inputs, (std::vector<bool>{true, false}));
}

TEST(MakeGate, XorWeights) {
  const auto spec = make_gate(GateKind::Xor);
  const Matrix& w1 = spec.network.weights_into(1);
  EXPECT_EQ(w1(0, 0), 1.0);   // x1 -> h1
  EXPECT_EQ(w1(1, 0), -1.0);  // x1 -> h2
  EXPECT_EQ(w1(0, 1), -1.0);  // x2 -> h1
  EXPECT_EQ(w1(1, 1), 1.0);   // x2 -> h2
  EXPECT_EQ(spec.network.weight(2, 0, 0), 1.0);
  EXPECT_EQ(spec.network.weight(2, 0, 1), 1.0);
  EXPECT_EQ(spec.threshold, 0.5);
}

TEST(MakeGate, AndOrShareNetworkAndDifferInThreshold) {
  const auto a = make_gate(GateKind::And);
  const auto o = make_gate(GateKind::Or);
  EXPECT_EQ(a.network, o.network);
  EXPECT_EQ(a.threshold, 1.0);
  EXPECT_EQ(o.threshold, 0.5);
}

TEST(MakeGate, NotUsesPinnedBias) {
  const auto spec = make_gate(GateKind::Not);
  EXPECT_EQ(spec.arity, 1u);
  EXPECT_EQ(spec.network.pinned_value(1), 1.0);
  EXPECT_EQ(spec.network.weight(1, 0, 0), -1.0);
  EXPECT_EQ(spec.network.weight(1, 0, 1), 1.0);
  EXPECT_EQ(spec.network.weight(2, 0, 0), 1.0);
}

TEST(EvaluateGate, Examples) {
  const std::array<bool, 2> b11{true, true}, b00{false, false}, b10{true, false};
  EXPECT_FALSE(evaluate_gate(make_gate(GateKind::Xor), b11));
  EXPECT_FALSE(evaluate_gate(make_gate(GateKind::And), b00));
  EXPECT_TRUE(evaluate_gate(make_gate(GateKind::Or), b10));
  const std::array<bool, 1> one{true};
  EXPECT_THROW(evaluate_gate(make_gate(GateKind::Xor), one), ShapeError);
}

TEST(VerifyGate, ShippedSpecsPassExactly) {
  for (auto kind : {GateKind::And, GateKind::Or, GateKind::Not, GateKind::Xor}) {
    const auto report = verify_gate(make_gate(kind));
    EXPECT_TRUE(report.passed()) << to_string(kind);
    EXPECT_EQ(report.rows.size(), std::size_t{1} << arity(kind));
  }
}

TEST(VerifyGate, RawOutputs) {
  const auto x = verify_gate(make_gate(GateKind::Xor));
  const std::array<double, 4> xor_raw{0, 1, 1, 0};
  const auto a = verify_gate(make_gate(GateKind::And));
  const std::array<double, 4> and_raw{0, 0.5, 0.5, 1};
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(x.rows[r].raw, xor_raw[r]);
    EXPECT_EQ(a.rows[r].raw, and_raw[r]);
  }
}

TEST(VerifyGate, BrokenXorFailsMixedRows) {
  auto spec = make_gate(GateKind::Xor);
  spec.network = spec.network.with_weight(2, 0, 0, 0.0);  // h1 -> y cut
  const auto report = verify_gate(spec);
  EXPECT_FALSE(report.passed());
  // Row 10 drives h1 only, so it now reads 0.
  EXPECT_FALSE(report.rows[2].pass);
  EXPECT_TRUE(report.rows[1].pass);
  EXPECT_TRUE(report.rows[0].pass);
  EXPECT_TRUE(report.rows[3].pass);
}

TEST(VerifyGate, FigureLabelNotFails) {
  const auto report = verify_gate(make_not_gate_figure_labels());
  EXPECT_FALSE(report.passed());
  EXPECT_EQ(report.rows[0].raw, 0.0);
  EXPECT_EQ(report.rows[1].raw, 0.0);
  EXPECT_FALSE(report.rows[0].pass);
  EXPECT_TRUE(report.rows[1].pass);
}

TEST(VerifyGate, ArityMismatchIsAShapeError) {
  EXPECT_THROW(verify_gate(Network::canonical(), GateKind::Not, 0.5), ShapeError);
  EXPECT_NO_THROW(verify_gate(Network::canonical().pin_input(1, 1.0), GateKind::Not, 0.5));
}

TEST(XorDecomposition, HiddenNeuronsAreAndNotTerms) {
  const auto spec = make_gate(GateKind::Xor);
  for (bool a : {false, true}) {
    for (bool b : {false, true}) {
      const auto trace = forward(spec.network, {a ? 1.0 : 0.0, b ? 1.0 : 0.0});
      EXPECT_EQ(trace.at(1, 0).out, (a && !b) ? 1.0 : 0.0);
      EXPECT_EQ(trace.at(1, 1).out, (!a && b) ? 1.0 : 0.0);
    }
  }
}

TEST(ThresholdMonotonicity, SharedAndOrNetwork) {
  const auto spec = make_gate(GateKind::And);
  const std::array<bool, 2> b00{false, false}, b01{false, true}, b10{true, false}, b11{true, true};
  const double y00 = gate_output(spec, b00), y01 = gate_output(spec, b01), y10 = gate_output(spec, b10),
               y11 = gate_output(spec, b11);
  EXPECT_GE(y11, y10);
  EXPECT_EQ(y10, y01);
  EXPECT_GE(y01, y00);
}

// Solution counts were computed independently with an integer brute force over
// tenths (weights a, b, c in [-10, 10], threshold t in [1, 10], output
// clamp(a*x1 + b*x2 + c, 0, 10) >= t).
TEST(SingleLayerSearch, FrozenCounts) {
  const auto x = single_layer_xor_search(0.1);
  EXPECT_EQ(x.solutions, 0u);
  EXPECT_EQ(x.configurations, 92610u);
  EXPECT_FALSE(x.example_weights.has_value());
  EXPECT_EQ(single_layer_search(GateKind::And, 0.1).solutions, 3355u);
  EXPECT_EQ(single_layer_search(GateKind::Or, 0.1).solutions, 3850u);
  EXPECT_EQ(single_layer_search(GateKind::And, 0.1, false).solutions, 165u);
  EXPECT_EQ(single_layer_search(GateKind::Or, 0.1, false).solutions, 385u);
  EXPECT_EQ(single_layer_xor_search(0.1, false).solutions, 0u);
}

TEST(SingleLayerSearch, ExampleSolutionChecksOut) {
  for (auto kind : {GateKind::And, GateKind::Or}) {
    const auto r = single_layer_search(kind, 0.1);
    ASSERT_TRUE(r.example_weights && r.example_threshold);
    const auto& w = *r.example_weights;
    for (const auto& row : truth_table(kind).rows) {
      const double x1 = row.inputs[0], x2 = row.inputs[1];
      const double y = dorelu(w[0] * x1 + w[1] * x2 + w[2]);
      // Grid values are exact in tenths up to rounding; allow for it at the cut.
      EXPECT_EQ(y >= *r.example_threshold - 1e-9, row.expected);
    }
  }
}

TEST(SingleLayerSearch, RejectsBadResolution) {
  EXPECT_THROW(single_layer_xor_search(0.3), RangeError);
  EXPECT_THROW(single_layer_xor_search(0.0), RangeError);
  EXPECT_THROW(single_layer_search(GateKind::Not, 0.1), ShapeError);
  EXPECT_EQ(single_layer_xor_search(0.5).solutions, 0u);
}

TEST(GateKind, Parsing) {
  EXPECT_EQ(parse_gate_kind("XOR"), GateKind::Xor);
  EXPECT_EQ(parse_gate_kind("not"), GateKind::Not);
  EXPECT_FALSE(parse_gate_kind("nand").has_value());
}

}  // namespace
}  // namespace mnn::gates
