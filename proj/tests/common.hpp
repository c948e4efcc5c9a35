#pragma once

// Shared test utilities: random tensor generators and the central
// finite-difference gradient checker used by the unit tests and the
// acceptance suite. The checker is deliberately independent of the tape's
// own backward arithmetic: it only calls forward() repeatedly.

#include <cmath>
#include <functional>
#include <vector>

#include "f2/autodiff.hpp"
#include "f2/rng.hpp"
#include "f2/tensor.hpp"

namespace f2::testing {

inline DenseTensor random_tensor(int r, int c, Rng& rng, double lo = -1.0,
                                 double hi = 1.0) {
  return DenseTensor::uniform(r, c, lo, hi, rng);
}

// Builds a forward pass from leaf values and returns the scalar loss.
using BuildFn =
    std::function<Value(Tape&, const std::vector<Value>&)>;

struct FdReport {
  double max_rel_err = 0.0;
  int checked_entries = 0;
};

// Central finite differences with step eps on every entry of every input.
// Relative error uses max(1, |analytic|, |numeric|) as the denominator.
inline FdReport fd_check(const BuildFn& build, std::vector<DenseTensor> inputs,
                         double eps = 1e-5) {
  auto eval = [&](const std::vector<DenseTensor>& ins) {
    Tape tape;
    std::vector<Value> leaves;
    leaves.reserve(ins.size());
    for (const auto& t : ins) leaves.push_back(tape.leaf(t));
    return build(tape, leaves).tensor().item();
  };

  Tape tape;
  std::vector<Value> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
  Value loss = build(tape, leaves);
  tape.backward(loss);
  std::vector<DenseTensor> analytic;
  analytic.reserve(leaves.size());
  for (const Value& v : leaves) analytic.push_back(tape.grad_of(v));

  FdReport rep;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double orig = inputs[i].data()[j];
      inputs[i].data()[j] = orig + eps;
      const double up = eval(inputs);
      inputs[i].data()[j] = orig - eps;
      const double down = eval(inputs);
      inputs[i].data()[j] = orig;
      const double fd = (up - down) / (2.0 * eps);
      const double an = analytic[i].data()[j];
      const double denom = std::max({1.0, std::fabs(an), std::fabs(fd)});
      rep.max_rel_err = std::max(rep.max_rel_err, std::fabs(an - fd) / denom);
      ++rep.checked_entries;
    }
  }
  return rep;
}

// Finite differences over parameter tensors owned outside the tape (layer
// and fusion weights bound via Tape::param). `loss` evaluates a fresh
// forward with the slots' current contents; `build_and_backward` runs one
// forward+backward on the given tape so analytic grads can be read back.
inline double fd_check_slots(const std::function<double()>& loss,
                             const std::function<void(Tape&)>& build_and_backward,
                             const std::vector<DenseTensor*>& slots,
                             double eps = 1e-5) {
  Tape tape;
  build_and_backward(tape);
  double worst = 0.0;
  for (DenseTensor* slot : slots) {
    DenseTensor analytic = tape.grad_for(slot);
    for (std::size_t i = 0; i < slot->size(); ++i) {
      const double keep = slot->data()[i];
      slot->data()[i] = keep + eps;
      const double up = loss();
      slot->data()[i] = keep - eps;
      const double down = loss();
      slot->data()[i] = keep;
      const double fd = (up - down) / (2.0 * eps);
      const double an = analytic.data()[i];
      const double denom = std::max({1.0, std::fabs(an), std::fabs(fd)});
      worst = std::max(worst, std::fabs(an - fd) / denom);
    }
  }
  return worst;
}

}  // namespace f2::testing
