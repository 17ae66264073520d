#include "mnn/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace mnn::training {

void Dataset::validate_for(const Network& net) const {
  if (samples.empty()) {
    throw ShapeError("dataset '" + name + "' has no samples");
  }
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& sample = samples[s];
    if (sample.input.size() != net.free_input_count() || sample.target.size() != net.output_count()) {
      throw ShapeError("dataset '" + name + "' sample " + std::to_string(s) + " is " +
                       std::to_string(sample.input.size()) + "->" + std::to_string(sample.target.size()) +
                       ", network is " + std::to_string(net.free_input_count()) + "->" +
                       std::to_string(net.output_count()));
    }
    for (double v : sample.input) {
      if (!(v >= -1.0 && v <= 1.0)) {
        throw RangeError("dataset '" + name + "' sample " + std::to_string(s) + " has an input outside [-1, 1]");
      }
    }
    for (double v : sample.target) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw RangeError("dataset '" + name + "' sample " + std::to_string(s) + " has a target outside [0, 1]");
      }
    }
  }
}

Dataset gate_dataset(gates::GateKind kind) {
  Dataset data;
  data.name = std::string(gates::to_string(kind));
  data.readout_threshold = 0.5;
  for (const auto& row : gates::truth_table(kind).rows) {
    Sample s;
    for (bool b : row.inputs) {
      s.input.push_back(b ? 1.0 : 0.0);
    }
    s.target.push_back(row.expected ? 1.0 : 0.0);
    data.samples.push_back(std::move(s));
  }
  return data;
}

Dataset mean_dataset() {
  Dataset data;
  data.name = "mean";
  for (int a = 0; a <= 4; ++a) {
    for (int b = 0; b <= 4; ++b) {
      const double x1 = a / 4.0;
      const double x2 = b / 4.0;
      data.samples.push_back({{x1, x2}, {(x1 + x2) / 2.0}});
    }
  }
  return data;
}

std::optional<Dataset> named_dataset(std::string_view name) {
  if (name == "mean") {
    return mean_dataset();
  }
  if (auto kind = gates::parse_gate_kind(name)) {
    return gate_dataset(*kind);
  }
  return std::nullopt;
}

Network default_topology(const Dataset& data) {
  if (data.name == "not") {
    return Network::zeros({2, 1, 1}).pin_input(1, 1.0);
  }
  if (data.name == "xor") {
    return Network::zeros({2, 2, 1});
  }
  if (data.name == "and" || data.name == "or" || data.name == "mean") {
    return Network::zeros({2, 1, 1});
  }
  const std::size_t in = data.samples.empty() ? 2 : data.samples.front().input.size();
  const std::size_t out = data.samples.empty() ? 1 : data.samples.front().target.size();
  return Network::zeros({in, 4, out});
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw RangeError("learning rate must be a positive finite number");
  }
  if (epochs == 0) {
    throw RangeError("epochs must be positive");
  }
  if (!(init_range > 0.0 && init_range <= 1.0)) {
    throw RangeError("init range must lie in (0, 1]");
  }
}

double dorelu_subgrad(double x) {
  if (!std::isfinite(x)) {
    throw DomainError("dorelu_subgrad: argument is not finite");
  }
  return (x > 0.0 && x < 1.0) ? 1.0 : 0.0;
}

double loss(const Network& net, std::span<const double> x, std::span<const double> target) {
  const auto out = forward(net, x).output();
  if (target.size() != out.size()) {
    throw ShapeError("target has " + std::to_string(target.size()) + " entries, network has " +
                     std::to_string(out.size()) + " outputs");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = out[i] - target[i];
    sum += r * r;
  }
  return sum / static_cast<double>(out.size());
}

double dataset_loss(const Network& net, const Dataset& data) {
  double sum = 0.0;
  for (const auto& s : data.samples) {
    sum += loss(net, s.input, s.target);
  }
  return sum / static_cast<double>(data.samples.size());
}

Gradients backprop(const Network& net, std::span<const double> x, std::span<const double> target) {
  const ForwardTrace trace = forward(net, x);
  const std::size_t last = net.layer_count() - 1;
  if (target.size() != net.output_count()) {
    throw ShapeError("target has " + std::to_string(target.size()) + " entries, network has " +
                     std::to_string(net.output_count()) + " outputs");
  }

  Gradients grads;
  for (const auto& m : net.weights()) {
    grads.emplace_back(m.rows(), m.cols());
  }

  // dL/d(out) at the output layer.
  const double m = static_cast<double>(target.size());
  std::vector<double> d_out(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    d_out[i] = 2.0 * (trace.at(last, i).out - target[i]) / m;
  }

  for (std::size_t k = last; k >= 1; --k) {
    const Matrix& w = net.weights_into(k);
    std::vector<double> delta(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      delta[i] = d_out[i] * dorelu_subgrad(*trace.at(k, i).net);
    }
    Matrix& g = grads[k - 1];
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        g(i, j) = delta[i] * trace.at(k - 1, j).out;
      }
    }
    if (k == 1) {
      break;
    }
    std::vector<double> d_prev(w.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        d_prev[j] += w(i, j) * delta[i];
      }
    }
    d_out = std::move(d_prev);
  }
  return grads;
}

Gradients finite_diff_grads(const Network& net, std::span<const double> x, std::span<const double> target,
                            double h) {
  if (!(h > 0.0)) {
    throw RangeError("finite difference step must be positive");
  }
  const double base = loss(net, x, target);
  Gradients grads;
  for (std::size_t k = 1; k < net.layer_count(); ++k) {
    const Matrix& w = net.weights_into(k);
    Matrix g(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        const double v = w(i, j);
        auto at = [&](double value) { return loss(net.with_weight(k, i, j, value), x, target); };
        if (v + h <= 1.0 && v - h >= -1.0) {
          g(i, j) = (at(v + h) - at(v - h)) / (2.0 * h);
        } else if (v + h > 1.0) {
          g(i, j) = (base - at(v - h)) / h;
        } else {
          g(i, j) = (at(v + h) - base) / h;
        }
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

Network sgd_step(const Network& net, const Gradients& grads, double learning_rate) {
  if (grads.size() != net.weights().size()) {
    throw ShapeError("gradient list does not match the network's layers");
  }
  std::vector<Matrix> weights = net.weights();
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (grads[k].rows() != weights[k].rows() || grads[k].cols() != weights[k].cols()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(k + 1));
    }
    auto w = weights[k].data();
    auto g = grads[k].data();
    for (std::size_t n = 0; n < w.size(); ++n) {
      w[n] = project_weight(w[n] - learning_rate * g[n]);
    }
  }
  return net.with_weights(std::move(weights));
}

Network initialize(const Network& topology, double init_range, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-init_range, init_range);
  std::vector<Matrix> weights = topology.weights();
  for (auto& m : weights) {
    for (double& w : m.data()) {
      w = dist(rng);
    }
  }
  return topology.with_weights(std::move(weights));
}

bool is_success(const Network& net, const Dataset& data, const TrainConfig& cfg) {
  for (const auto& s : data.samples) {
    const auto out = forward(net, s.input).output();
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (data.readout_threshold) {
        const double t = *data.readout_threshold;
        if ((out[i] >= t) != (s.target[i] >= t)) {
          return false;
        }
      } else if (std::abs(out[i] - s.target[i]) > cfg.regression_tolerance) {
        return false;
      }
    }
  }
  return true;
}

TrainRun train(const Network& net, const Dataset& data, const TrainConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  data.validate_for(net);

  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainRun run;
  run.seed = cfg.seed;
  run.network = net;
  run.epoch_loss.reserve(cfg.epochs);
  run.epoch_max_weight.reserve(cfg.epochs);
  run.initial_loss = dataset_loss(net, data);
  run.initial_success = is_success(net, data, cfg);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t idx : order) {
      const auto& s = data.samples[idx];
      run.network = sgd_step(run.network, backprop(run.network, s.input, s.target), cfg.learning_rate);
      if (observer) {
        observer(epoch, run.network);
      }
    }
    const double l = dataset_loss(run.network, data);
    if (!std::isfinite(l)) {
      throw DivergenceError(epoch, "loss became non-finite in epoch " + std::to_string(epoch + 1));
    }
    run.epoch_loss.push_back(l);
    run.epoch_max_weight.push_back(run.network.max_abs_weight());
  }
  run.success = is_success(run.network, data, cfg);
  return run;
}

const TrainRun& SeedSweep::best() const {
  if (runs.empty()) {
    throw ShapeError("empty seed sweep");
  }
  // Successful runs rank ahead of failed ones, then by final loss.
  return *std::min_element(runs.begin(), runs.end(), [](const TrainRun& a, const TrainRun& b) {
    if (a.success != b.success) return a.success;
    return a.epoch_loss.back() < b.epoch_loss.back();
  });
}

SeedSweep train_restarts(const Network& topology, const Dataset& data, const TrainConfig& cfg,
                         std::size_t restarts, const StepObserver& observer) {
  SeedSweep sweep;
  for (std::size_t r = 0; r < restarts; ++r) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + r;
    sweep.runs.push_back(train(initialize(topology, c.init_range, c.seed), data, c, observer));
    if (!sweep.first_success && sweep.runs.back().success) {
      sweep.first_success = r;
    }
  }
  return sweep;
}

std::string format_loss_log(const TrainRun& run) {
  std::string out;
  char buf[64];
  for (std::size_t e = 0; e < run.epoch_loss.size(); ++e) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, run.epoch_loss[e]);
    out += "epoch," + std::to_string(e + 1) + ",loss," + std::string(buf, ptr) + "\n";
  }
  return out;
}

std::vector<std::pair<std::size_t, double>> parse_loss_log(std::string_view text) {
  std::vector<std::pair<std::size_t, double>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> fields;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      fields.push_back(cell);
    }
    std::size_t epoch = 0;
    double value = 0.0;
    bool ok = fields.size() == 4 && fields[0] == "epoch" && fields[2] == "loss";
    if (ok) {
      auto r1 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), epoch);
      auto r2 = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), value);
      ok = r1.ec == std::errc{} && r2.ec == std::errc{} && r1.ptr == fields[1].data() + fields[1].size() &&
           r2.ptr == fields[3].data() + fields[3].size();
    }
    if (!ok) {
      throw ParseError("loss log line " + std::to_string(line_no) + " is malformed");
    }
    rows.emplace_back(epoch, value);
  }
  return rows;
}

}  // namespace mnn::training
