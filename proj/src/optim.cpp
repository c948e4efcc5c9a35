#include "f2/optim.hpp"

#include <cmath>

#include "f2/errors.hpp"

namespace f2 {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
}  // namespace

OptKind opt_kind_from_string(const std::string& s) {
  if (s == "adam") return OptKind::Adam;
  if (s == "adagrad") return OptKind::Adagrad;
  throw UsageError("unknown optimizer '" + s + "' (expected adam|adagrad)");
}

const char* to_string(OptKind k) {
  return k == OptKind::Adam ? "adam" : "adagrad";
}

void Optimizer::step(const std::vector<DenseTensor*>& params,
                     const std::vector<DenseTensor>& grads) {
  if (params.size() != grads.size())
    throw DimensionError("optimizer step: " + std::to_string(params.size()) +
                         " params vs " + std::to_string(grads.size()) + " grads");
  if (m_.empty()) {
    m_.resize(params.size());
    if (cfg_.kind == OptKind::Adam) v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = DenseTensor(params[i]->rows(), params[i]->cols());
      if (cfg_.kind == OptKind::Adam)
        v_[i] = DenseTensor(params[i]->rows(), params[i]->cols());
    }
  }
  if (m_.size() != params.size())
    throw DimensionError("optimizer step: parameter list size changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    DenseTensor& p = *params[i];
    const DenseTensor& g = grads[i];
    if (!p.same_shape(g))
      throw DimensionError("optimizer step: grad shape " + g.shape_str() +
                           " does not match param " + p.shape_str());
    double* pd = p.data();
    const double* gd = g.data();
    double* md = m_[i].data();
    if (cfg_.kind == OptKind::Adam) {
      double* vd = v_[i].data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        md[j] = kBeta1 * md[j] + (1.0 - kBeta1) * gd[j];
        vd[j] = kBeta2 * vd[j] + (1.0 - kBeta2) * gd[j] * gd[j];
        const double mhat = md[j] / bc1;
        const double vhat = vd[j] / bc2;
        const double decay = cfg_.weight_decay * pd[j];
        pd[j] -= cfg_.lr * (mhat / (std::sqrt(vhat) + kEps) + decay);
      }
    } else {
      for (std::size_t j = 0; j < p.size(); ++j) {
        md[j] += gd[j] * gd[j];
        const double decay = cfg_.weight_decay * pd[j];
        pd[j] -= cfg_.lr * (gd[j] / (std::sqrt(md[j]) + kEps) + decay);
      }
    }
  }
}

}  // namespace f2
