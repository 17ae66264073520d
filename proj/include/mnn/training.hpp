#pragma once

// Trainer for the box-constrained, biasless network: per-sample SGD on MSE,
// backpropagation with a subgradient of the clipped ReLU, and a projection of
// every weight back into [-1, 1] after each step.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mnn/core.hpp"
#include "mnn/error.hpp"
#include "mnn/gates.hpp"

namespace mnn::training {

using Gradients = std::vector<Matrix>;  // same shapes as Network::weights()

struct Sample {
  std::vector<double> input;   // free inputs, each in [-1, 1]
  std::vector<double> target;  // one per output neuron, each in [0, 1]
};

struct Dataset {
  std::string name;
  std::vector<Sample> samples;
  // Gate datasets are scored by thresholding; regression sets by tolerance.
  std::optional<double> readout_threshold;

  /// Throws ShapeError / RangeError if the samples do not fit `net`.
  void validate_for(const Network& net) const;
};

Dataset gate_dataset(gates::GateKind kind);

/// Regression set: target (x1 + x2) / 2 on a 5x5 grid over [0, 1]^2.
Dataset mean_dataset();

/// Resolves "and", "or", "not", "xor", "mean". Returns nullopt otherwise.
std::optional<Dataset> named_dataset(std::string_view name);

/// Network layout a dataset trains on by default: 2-2-1 for two-input gates,
/// 2-1-1 with input 2 pinned to 1 for NOT, 2-1-1 for mean.
Network default_topology(const Dataset& data);

enum class Loss { Mse };

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 5000;
  std::uint64_t seed = 1;
  double init_range = 0.5;  // weights drawn uniformly from [-init_range, init_range]
  Loss loss = Loss::Mse;
  bool shuffle = true;
  double regression_tolerance = 0.05;  // success rule when no readout threshold

  /// Throws RangeError for a non-positive rate, zero epochs or init_range outside (0, 1].
  void validate() const;
};

struct TrainRun {
  double initial_loss = 0.0;
  bool initial_success = false;
  std::vector<double> epoch_loss;      // mean loss over the dataset after each epoch
  std::vector<double> epoch_max_weight;  // max |w| after each epoch
  Network network = Network::zeros({1, 1});
  std::uint64_t seed = 0;
  bool success = false;
};

/// Raised when the loss becomes NaN or infinite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what) : Error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// 1 on the open interval (0, 1), 0 elsewhere including both kinks.
double dorelu_subgrad(double x);

/// L = (1/m) * sum (out - target)^2 over the m output neurons.
double loss(const Network& net, std::span<const double> x, std::span<const double> target);
double dataset_loss(const Network& net, const Dataset& data);

Gradients backprop(const Network& net, std::span<const double> x, std::span<const double> target);

/// Central differences of `loss`, switching to one-sided differences where a
/// perturbation of size h would leave [-1, 1]. Independent of backprop.
Gradients finite_diff_grads(const Network& net, std::span<const double> x, std::span<const double> target,
                            double h);

/// w <- clip(w - learning_rate * g, -1, 1).
Network sgd_step(const Network& net, const Gradients& grads, double learning_rate);

/// Uniform init in [-init_range, init_range] with the given seed. Keeps the
/// topology and pins of `topology`.
Network initialize(const Network& topology, double init_range, std::uint64_t seed);

/// Called after every SGD step with the epoch index and the updated network.
using StepObserver = std::function<void(std::size_t epoch, const Network&)>;

/// Per-sample SGD from `net`. Deterministic for a given config.
TrainRun train(const Network& net, const Dataset& data, const TrainConfig& cfg,
               const StepObserver& observer = {});

bool is_success(const Network& net, const Dataset& data, const TrainConfig& cfg);

struct SeedSweep {
  std::vector<TrainRun> runs;
  std::optional<std::size_t> first_success;  // index into runs

  const TrainRun& best() const;  // lowest final loss, successful runs first
};

/// Restarts from fresh random weights with seeds cfg.seed, cfg.seed + 1, ...
SeedSweep train_restarts(const Network& topology, const Dataset& data, const TrainConfig& cfg,
                         std::size_t restarts, const StepObserver& observer = {});

/// `epoch,<n>,loss,<decimal>` per line, epochs 1-based.
std::string format_loss_log(const TrainRun& run);
std::vector<std::pair<std::size_t, double>> parse_loss_log(std::string_view text);

}  // namespace mnn::training
