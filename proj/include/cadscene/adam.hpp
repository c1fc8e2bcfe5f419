#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cadscene {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over a fixed list of tensors. The list passed to step() must have
/// the same shapes, in the same order, on every call.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);

  long long steps_taken() const { return t_; }

 private:
  AdamConfig config_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace cadscene
