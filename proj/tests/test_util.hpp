#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mnn/core.hpp"

namespace mnn::testing {

inline Network random_network(std::mt19937_64& rng, std::vector<std::size_t> sizes, double range = 1.0) {
  std::uniform_real_distribution<double> dist(-range, range);
  std::vector<Matrix> weights;
  for (std::size_t k = 1; k < sizes.size(); ++k) {
    Matrix m(sizes[k], sizes[k - 1]);
    for (double& w : m.data()) {
      w = dist(rng);
    }
    weights.push_back(std::move(m));
  }
  return Network(std::move(sizes), std::move(weights));
}

inline std::vector<double> random_inputs(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) {
    v = dist(rng);
  }
  return x;
}

// Reference biased MLP with the same clipped activation, written without any
// library code: out_i = clip(b_i + sum_j w_ij * o_j).
inline std::vector<std::vector<double>> biased_reference(const std::vector<std::vector<std::vector<double>>>& w,
                                                         const std::vector<std::vector<double>>& b,
                                                         std::vector<double> x) {
  std::vector<std::vector<double>> outs{x};
  for (std::size_t k = 0; k < w.size(); ++k) {
    std::vector<double> next;
    for (std::size_t i = 0; i < w[k].size(); ++i) {
      double s = b[k][i];
      for (std::size_t j = 0; j < w[k][i].size(); ++j) {
        s += w[k][i][j] * outs.back()[j];
      }
      next.push_back(s < 0 ? 0.0 : (s > 1 ? 1.0 : s));
    }
    outs.push_back(next);
  }
  return outs;
}

}  // namespace mnn::testing
