#pragma once

#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mnn/matrix.hpp"

namespace mnn {

/// Clipped ReLU used by every hidden and output lever: min(1, max(0, x)).
/// Throws DomainError for NaN or infinite arguments.
double dorelu(double x);

/// Biasless weighted sum of the previous layer's outputs.
/// Throws ShapeError when the spans differ in length.
double net_input(std::span<const double> prev_outputs, std::span<const double> weight_row);

/// Clips a weight into the box [-1, 1].
double project_weight(double w) noexcept;

/// Biasless, box-constrained multilayer perceptron.
///
/// Layer 0 is the input layer. `weights()[k - 1]` is the matrix into layer k,
/// with entry (i, j) the weight from neuron j of layer k-1 to neuron i of
/// layer k. Input neurons may be pinned to a fixed value; a neuron pinned to 1
/// turns its outgoing weights into biases of the next layer.
///
/// Instances are immutable; the `with_*` and `pin_*` members return modified
/// copies. Every constructor validates shapes and ranges, so a live Network
/// always has all weights and pins inside [-1, 1].
class Network {
 public:
  Network(std::vector<std::size_t> layer_sizes, std::vector<Matrix> weights,
          std::map<std::size_t, double> pinned = {});

  /// All-zero weights, no pins.
  static Network zeros(std::vector<std::size_t> layer_sizes);

  /// The full physical model: 2 inputs, 4 hidden, 2 outputs, all clamps at the pivot.
  static Network canonical();

  const std::vector<std::size_t>& layer_sizes() const noexcept { return layer_sizes_; }
  std::size_t layer_count() const noexcept { return layer_sizes_.size(); }
  std::size_t input_count() const noexcept { return layer_sizes_.front(); }
  std::size_t output_count() const noexcept { return layer_sizes_.back(); }
  std::size_t free_input_count() const noexcept { return input_count() - pinned_.size(); }
  std::size_t connection_count() const noexcept;

  const std::vector<Matrix>& weights() const noexcept { return weights_; }
  /// Matrix into `layer` (1 <= layer < layer_count()).
  const Matrix& weights_into(std::size_t layer) const;
  double weight(std::size_t layer, std::size_t recv, std::size_t send) const;
  double max_abs_weight() const noexcept;

  const std::map<std::size_t, double>& pinned() const noexcept { return pinned_; }
  std::optional<double> pinned_value(std::size_t input) const;
  bool is_pinned(std::size_t input) const { return pinned_.contains(input); }

  Network with_weight(std::size_t layer, std::size_t recv, std::size_t send, double w) const;
  Network with_weights(std::vector<Matrix> weights) const;
  Network pin_input(std::size_t index, double value) const;
  Network unpin_input(std::size_t index) const;

  /// Merges free inputs (in index order over non-pinned neurons) with pinned
  /// values into the full input-layer output vector.
  std::vector<double> input_layer(std::span<const double> free_inputs) const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  void validate() const;

  std::vector<std::size_t> layer_sizes_;
  std::vector<Matrix> weights_;
  std::map<std::size_t, double> pinned_;
};

struct NeuronTrace {
  std::optional<double> net;  // absent on input neurons
  double out = 0.0;
  bool slack = false;  // net < 0 on a hidden/output neuron

  friend bool operator==(const NeuronTrace&, const NeuronTrace&) = default;
};

struct ForwardTrace {
  std::vector<std::vector<NeuronTrace>> layers;

  const NeuronTrace& at(std::size_t layer, std::size_t neuron) const {
    return layers.at(layer).at(neuron);
  }
  std::vector<double> outputs(std::size_t layer) const;
  std::vector<double> output() const { return outputs(layers.size() - 1); }

  friend bool operator==(const ForwardTrace&, const ForwardTrace&) = default;
};

/// Evaluates the network. `free_inputs` covers the non-pinned input neurons.
/// Throws ShapeError on a dimension mismatch and RangeError (or DomainError
/// for non-finite values) on inputs outside [-1, 1].
ForwardTrace forward(const Network& net, std::span<const double> free_inputs);

inline ForwardTrace forward(const Network& net, std::initializer_list<double> free_inputs) {
  return forward(net, std::span<const double>(free_inputs.begin(), free_inputs.size()));
}

}  // namespace mnn
