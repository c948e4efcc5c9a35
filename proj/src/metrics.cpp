#include "f2/metrics.hpp"

#include <cmath>

#include "f2/childnet.hpp"
#include "f2/errors.hpp"

namespace f2 {

double accuracy(const DenseTensor& logits, const std::vector<int>& labels,
                const std::vector<int>& mask) {
  if (mask.empty()) throw UsageError("accuracy needs a non-empty mask");
  if (logits.rows() != static_cast<int>(labels.size()))
    throw DimensionError("logit rows (" + std::to_string(logits.rows()) +
                         ") disagree with label count (" + std::to_string(labels.size()) + ")");
  long hits = 0;
  for (int u : mask) {
    if (u < 0 || u >= logits.rows()) throw UsageError("mask node out of range");
    int best = 0;
    for (int c = 1; c < logits.cols(); ++c)
      if (logits.at(u, c) > logits.at(u, best)) best = c;
    if (best == labels[(std::size_t)u]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

namespace {

// 1 - cosine, with the zero-norm-is-orthogonal convention
double cos_distance(const DenseTensor& h, int u, int v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (int k = 0; k < h.cols(); ++k) {
    const double a = h.at(u, k), b = h.at(v, k);
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  if (nu == 0.0 || nv == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

}  // namespace

double mad(const DenseTensor& h, const Graph& g, MadTarget target) {
  if (h.rows() != g.n) throw DimensionError("feature rows disagree with node count");
  std::vector<std::vector<int>> targets(static_cast<std::size_t>(g.n));
  if (target == MadTarget::Neighbors) {
    for (auto [u, v] : g.edges) {
      targets[(std::size_t)u].push_back(v);
      targets[(std::size_t)v].push_back(u);
    }
  } else {
    for (int u = 0; u < g.n; ++u)
      for (int v = 0; v < g.n; ++v)
        if (v != u) targets[(std::size_t)u].push_back(v);
  }
  double total = 0.0;
  int counted = 0;
  for (int u = 0; u < g.n; ++u) {
    const auto& ts = targets[(std::size_t)u];
    if (ts.empty()) continue;
    double acc = 0.0;
    for (int v : ts) acc += cos_distance(h, u, v);
    total += acc / static_cast<double>(ts.size());
    ++counted;
  }
  if (counted == 0) throw UsageError("mad: every node has an empty target set");
  return total / static_cast<double>(counted);
}

std::vector<MadPoint> mad_profile(ChildNet& net, const Graph& g, const GraphOps& ops,
                                  MadTarget target) {
  Tape t;
  std::vector<DenseTensor> taps;
  Rng unused(0);
  net.forward(t, g.features, ops, /*train=*/false, unused, &taps);
  std::vector<MadPoint> profile;
  for (int i = 1; i < static_cast<int>(taps.size()); ++i)
    profile.push_back({i, mad(taps[(std::size_t)i], g, target)});
  return profile;
}

DenseTensor usage_matrix(const TopologySpec& spec) {
  ensure_valid(spec);
  const int n = spec.n_blocks;
  DenseTensor cells(n + 1, n + 1);
  for (int i = 0; i < n; ++i) {
    const auto& sel = spec.blocks[(std::size_t)i].select;
    for (std::size_t j = 0; j < sel.size(); ++j)
      if (sel[j]) cells.at(i, static_cast<int>(j)) = 1.0;
  }
  for (std::size_t j = 0; j < spec.output.select.size(); ++j)
    if (spec.output.select[j]) cells.at(n, static_cast<int>(j)) = 1.0;
  return cells;
}

}  // namespace f2
