#include "mnn/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "mnn/error.hpp"

namespace mnn {

namespace {

std::string describe(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void require_unit_box(double v, const std::string& what) {
  if (!std::isfinite(v)) {
    throw DomainError(what + " is not finite");
  }
  if (v < -1.0 || v > 1.0) {
    throw RangeError(what + " = " + describe(v) + " lies outside [-1, 1]");
  }
}

}  // namespace

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) {
    return {};
  }
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) {
      throw ShapeError("ragged matrix: row " + std::to_string(r) + " has " +
                       std::to_string(rows[r].size()) + " entries, expected " +
                       std::to_string(m.cols()));
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

std::vector<std::vector<double>> Matrix::to_rows() const {
  std::vector<std::vector<double>> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    auto src = row(r);
    out[r].assign(src.begin(), src.end());
  }
  return out;
}

double dorelu(double x) {
  if (!std::isfinite(x)) {
    throw DomainError("dorelu: argument is not finite");
  }
  return std::min(1.0, std::max(0.0, x));
}

double net_input(std::span<const double> prev_outputs, std::span<const double> weight_row) {
  if (prev_outputs.size() != weight_row.size()) {
    throw ShapeError("net_input: " + std::to_string(prev_outputs.size()) + " outputs vs " +
                     std::to_string(weight_row.size()) + " weights");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < prev_outputs.size(); ++j) {
    sum += prev_outputs[j] * weight_row[j];
  }
  return sum;
}

double project_weight(double w) noexcept { return std::clamp(w, -1.0, 1.0); }

Network::Network(std::vector<std::size_t> layer_sizes, std::vector<Matrix> weights,
                 std::map<std::size_t, double> pinned)
    : layer_sizes_(std::move(layer_sizes)), weights_(std::move(weights)), pinned_(std::move(pinned)) {
  validate();
}

Network Network::zeros(std::vector<std::size_t> layer_sizes) {
  std::vector<Matrix> weights;
  for (std::size_t k = 1; k < layer_sizes.size(); ++k) {
    weights.emplace_back(layer_sizes[k], layer_sizes[k - 1]);
  }
  return Network(std::move(layer_sizes), std::move(weights));
}

Network Network::canonical() { return zeros({2, 4, 2}); }

void Network::validate() const {
  if (layer_sizes_.size() < 2) {
    throw ShapeError("a network needs at least an input and an output layer");
  }
  for (std::size_t k = 0; k < layer_sizes_.size(); ++k) {
    if (layer_sizes_[k] == 0) {
      throw ShapeError("layer " + std::to_string(k + 1) + " is empty");
    }
  }
  if (weights_.size() != layer_sizes_.size() - 1) {
    throw ShapeError("expected " + std::to_string(layer_sizes_.size() - 1) +
                     " weight matrices, got " + std::to_string(weights_.size()));
  }
  for (std::size_t k = 1; k < layer_sizes_.size(); ++k) {
    const Matrix& m = weights_[k - 1];
    if (m.rows() != layer_sizes_[k] || m.cols() != layer_sizes_[k - 1]) {
      throw ShapeError("weights into layer " + std::to_string(k + 1) + " are " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                       std::to_string(layer_sizes_[k]) + "x" + std::to_string(layer_sizes_[k - 1]));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        require_unit_box(m(i, j), "weight (layer " + std::to_string(k + 1) + ", recv " +
                                      std::to_string(i + 1) + ", send " + std::to_string(j + 1) + ")");
      }
    }
  }
  for (const auto& [index, value] : pinned_) {
    if (index >= input_count()) {
      throw RangeError("pinned index " + std::to_string(index + 1) + " is not an input neuron");
    }
    require_unit_box(value, "pinned value of input " + std::to_string(index + 1));
  }
}

std::size_t Network::connection_count() const noexcept {
  std::size_t n = 0;
  for (const auto& m : weights_) {
    n += m.size();
  }
  return n;
}

const Matrix& Network::weights_into(std::size_t layer) const {
  if (layer == 0 || layer >= layer_count()) {
    throw RangeError("layer " + std::to_string(layer + 1) + " has no incoming weights");
  }
  return weights_[layer - 1];
}

double Network::weight(std::size_t layer, std::size_t recv, std::size_t send) const {
  const Matrix& m = weights_into(layer);
  if (recv >= m.rows() || send >= m.cols()) {
    throw RangeError("connection index out of range");
  }
  return m(recv, send);
}

double Network::max_abs_weight() const noexcept {
  double best = 0.0;
  for (const auto& m : weights_) {
    for (double w : m.data()) {
      best = std::max(best, std::abs(w));
    }
  }
  return best;
}

std::optional<double> Network::pinned_value(std::size_t input) const {
  if (auto it = pinned_.find(input); it != pinned_.end()) {
    return it->second;
  }
  return std::nullopt;
}

Network Network::with_weight(std::size_t layer, std::size_t recv, std::size_t send, double w) const {
  weight(layer, recv, send);  // bounds check
  auto weights = weights_;
  weights[layer - 1](recv, send) = w;
  return Network(layer_sizes_, std::move(weights), pinned_);
}

Network Network::with_weights(std::vector<Matrix> weights) const {
  return Network(layer_sizes_, std::move(weights), pinned_);
}

Network Network::pin_input(std::size_t index, double value) const {
  if (index >= input_count()) {
    throw RangeError("cannot pin input " + std::to_string(index + 1) + ": input layer has " +
                     std::to_string(input_count()) + " neurons");
  }
  auto pinned = pinned_;
  pinned[index] = value;
  return Network(layer_sizes_, weights_, std::move(pinned));
}

Network Network::unpin_input(std::size_t index) const {
  auto pinned = pinned_;
  pinned.erase(index);
  return Network(layer_sizes_, weights_, std::move(pinned));
}

std::vector<double> Network::input_layer(std::span<const double> free_inputs) const {
  if (free_inputs.size() != free_input_count()) {
    throw ShapeError("expected " + std::to_string(free_input_count()) + " inputs, got " +
                     std::to_string(free_inputs.size()));
  }
  std::vector<double> out(input_count());
  std::size_t next = 0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (auto pin = pinned_value(j)) {
      out[j] = *pin;
    } else {
      const double v = free_inputs[next++];
      require_unit_box(v, "input " + std::to_string(j + 1));
      out[j] = v;
    }
  }
  return out;
}

std::vector<double> ForwardTrace::outputs(std::size_t layer) const {
  const auto& l = layers.at(layer);
  std::vector<double> out(l.size());
  std::transform(l.begin(), l.end(), out.begin(), [](const NeuronTrace& n) { return n.out; });
  return out;
}

ForwardTrace forward(const Network& net, std::span<const double> free_inputs) {
  ForwardTrace trace;
  trace.layers.reserve(net.layer_count());

  std::vector<double> prev = net.input_layer(free_inputs);
  auto& input = trace.layers.emplace_back(prev.size());
  for (std::size_t j = 0; j < prev.size(); ++j) {
    input[j].out = prev[j];
  }

  for (std::size_t k = 1; k < net.layer_count(); ++k) {
    const Matrix& w = net.weights_into(k);
    auto& layer = trace.layers.emplace_back(w.rows());
    std::vector<double> outs(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      const double n = net_input(prev, w.row(i));
      layer[i] = NeuronTrace{n, dorelu(n), n < 0.0};
      outs[i] = layer[i].out;
    }
    prev = std::move(outs);
  }
  return trace;
}

}  // namespace mnn
