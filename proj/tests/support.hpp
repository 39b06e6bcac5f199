#pragma once

#include <random>

#include "hencky/tensor.hpp"

namespace testing {

inline hencky::SymTensor random_sym(std::mt19937& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  hencky::SymTensor t(n);
  for (int k = 0; k < t.size(); ++k) t.component(k) = g(rng);
  return t;
}

inline hencky::SymTensor random_dev(std::mt19937& rng, int n, double scale = 1.0) {
  return random_sym(rng, n, scale).deviator();
}

inline bool close(double a, double b, double rel, double abs = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs;
}

}  // namespace testing
