#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sstl::models {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam step. A fresh state (empty moments) is sized on
/// first use. Throws on shape mismatch or a non-finite gradient, leaving
/// params and state untouched.
void adam_update(std::span<double> params, std::span<const double> grads,
                 AdamState& state, double lr);

}  // namespace sstl::models
