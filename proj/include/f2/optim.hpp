#pragma once

#include <string>
#include <vector>

#include "f2/tensor.hpp"

namespace f2 {

enum class OptKind { Adam, Adagrad };

OptKind opt_kind_from_string(const std::string& s);
const char* to_string(OptKind k);

struct OptimizerConfig {
  OptKind kind = OptKind::Adam;
  double lr = 0.01;
  double weight_decay = 0.0;
};

// Adam (beta1=0.9, beta2=0.999, eps=1e-8, bias-corrected) or AdaGrad
// (eps=1e-8). Weight decay is decoupled: p -= lr * wd * p, applied to the
// pre-step value, independent of the gradient path. State is keyed by the
// position of each parameter in the list, which callers must keep stable
// across steps.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(const std::vector<DenseTensor*>& params,
            const std::vector<DenseTensor>& grads);

  long steps_taken() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  long t_ = 0;
  std::vector<DenseTensor> m_;  // Adam first moment / AdaGrad accumulator
  std::vector<DenseTensor> v_;  // Adam second moment
};

}  // namespace f2
