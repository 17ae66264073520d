#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mnn/core.hpp"

namespace mnn::gates {

enum class GateKind { And, Or, Not, Xor };

std::string_view to_string(GateKind kind) noexcept;
std::optional<GateKind> parse_gate_kind(std::string_view name) noexcept;
std::size_t arity(GateKind kind) noexcept;
bool logic(GateKind kind, std::span<const bool> bits);

/// Network plus the readout rule. The network has no comparator; a human
/// reading the lever applies `output >= threshold`. The readout is output
/// neuron 0.
struct GateSpec {
  GateKind kind = GateKind::And;
  Network network = Network::zeros({2, 1, 1});
  double threshold = 0.5;  // (0, 1]
  std::size_t arity = 2;
};

struct TruthRow {
  std::vector<bool> inputs;
  bool expected = false;
};

struct TruthTable {
  std::vector<TruthRow> rows;  // 2^arity rows, lexicographic in the inputs
};

TruthTable truth_table(GateKind kind);

/// Canonical configurations:
///   AND/OR: x1,x2 -0.5,0.5-> h -1-> y, thresholds 1.0 and 0.5
///   NOT:    x1 -(-1)-> h, pinned x2=1 -(+1)-> h, h -1-> y, threshold 0.5
///   XOR:    x1 -> h1 +1, h2 -1; x2 -> h1 -1, h2 +1; h1,h2 -> y +1; threshold 0.5
GateSpec make_gate(GateKind kind);

/// NOT with the edge signs as printed in the published configuration figure
/// (x1 -> h: +1, pinned -> h: -1). Fails its truth table; kept for teaching.
GateSpec make_not_gate_figure_labels();

double gate_output(const GateSpec& spec, std::span<const bool> bits);
bool evaluate_gate(const GateSpec& spec, std::span<const bool> bits);

struct GateRow {
  std::vector<bool> inputs;
  double raw = 0.0;
  bool actual = false;
  bool expected = false;
  bool pass = false;
};

struct GateReport {
  GateKind kind = GateKind::And;
  double threshold = 0.5;
  std::vector<GateRow> rows;

  bool passed() const noexcept;
  std::size_t pass_count() const noexcept;
};

GateReport verify_gate(const GateSpec& spec);

/// Checks an arbitrary network against the truth table of `kind`. Throws
/// ShapeError when the network's free inputs do not match the gate arity.
GateReport verify_gate(const Network& net, GateKind kind, double threshold);

/// Exhaustive search over single-layer machines (inputs wired straight to
/// one output lever, optionally with a third input pinned to 1 as bias).
struct SeparabilityReport {
  GateKind kind = GateKind::Xor;
  double resolution = 0.1;
  bool with_bias = true;
  std::size_t configurations = 0;  // weight tuples x thresholds examined
  std::size_t solutions = 0;
  // First solution found, if any: weights (x1, x2[, bias]) and threshold.
  std::optional<std::vector<double>> example_weights;
  std::optional<double> example_threshold;
};

/// Weights range over k / m for k in [-m, m] and thresholds over j / m for
/// j in [1, m], where m = 1 / resolution must be a positive integer. Throws
/// RangeError otherwise. Only two-input gates are accepted.
SeparabilityReport single_layer_search(GateKind kind, double resolution, bool with_bias = true);

inline SeparabilityReport single_layer_xor_search(double resolution, bool with_bias = true) {
  return single_layer_search(GateKind::Xor, resolution, with_bias);
}

}  // namespace mnn::gates
