#include "f2/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "f2/errors.hpp"

namespace f2 {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = (char)std::tolower((unsigned char)c);
  return s;
}

// width-`i` mask with the named history levels switched on
std::vector<bool> mask(int width, std::initializer_list<int> bits) {
  std::vector<bool> m((std::size_t)width, false);
  for (int b : bits)
    if (b >= 0 && b < width) m[(std::size_t)b] = true;
  return m;
}

}  // namespace

BaselineKind baseline_from_string(const std::string& s) {
  const std::string k = lower(s);
  if (k == "vanilla") return BaselineKind::Vanilla;
  if (k == "res") return BaselineKind::Res;
  if (k == "dense") return BaselineKind::Dense;
  if (k == "jk") return BaselineKind::Jk;
  if (k == "gnnii") return BaselineKind::Gnnii;
  if (k == "pna") return BaselineKind::Pna;
  if (k == "mixhop") return BaselineKind::Mixhop;
  if (k == "random") return BaselineKind::Random;
  throw UsageError("unknown baseline '" + s +
                   "' (expected vanilla, res, dense, jk, gnnii, pna, mixhop, or random)");
}

std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Vanilla: return "vanilla";
    case BaselineKind::Res: return "res";
    case BaselineKind::Dense: return "dense";
    case BaselineKind::Jk: return "jk";
    case BaselineKind::Gnnii: return "gnnii";
    case BaselineKind::Pna: return "pna";
    case BaselineKind::Mixhop: return "mixhop";
    case BaselineKind::Random: return "random";
  }
  return "?";
}

TopologySpec translate(const BaselineId& id, AggKind agg) {
  if (id.depth < 1)
    throw UsageError("baseline depth must be at least 1, got " + std::to_string(id.depth));

  TopologySpec spec;
  const int L = id.depth;

  switch (id.kind) {
    case BaselineKind::Vanilla:
    case BaselineKind::Jk: {
      spec.n_blocks = L;
      for (int i = 1; i <= L; ++i)
        spec.blocks.push_back({mask(i, {i - 1}), FuseKind::Sum, agg});
      if (id.kind == BaselineKind::Vanilla) {
        spec.output = {mask(L + 1, {L}), FuseKind::Sum};
      } else {
        std::vector<bool> all((std::size_t)L + 1, true);
        all[0] = false;
        spec.output = {all, id.jk_fuse};
      }
      break;
    }
    case BaselineKind::Res: {
      spec.n_blocks = L;
      for (int i = 1; i <= L; ++i)
        spec.blocks.push_back({mask(i, {i - 1, i - 2}), FuseKind::Sum, agg});
      spec.output = {mask(L + 1, {L}), FuseKind::Sum};
      break;
    }
    case BaselineKind::Dense: {
      spec.n_blocks = L;
      for (int i = 1; i <= L; ++i)
        spec.blocks.push_back({std::vector<bool>((std::size_t)i, true), FuseKind::Concat, agg});
      spec.output = {mask(L + 1, {L}), FuseKind::Sum};
      break;
    }
    case BaselineKind::Gnnii: {
      spec.n_blocks = L;
      for (int i = 1; i <= L; ++i)
        spec.blocks.push_back({mask(i, {0, i - 1}), FuseKind::Sum, agg});
      spec.output = {mask(L + 1, {L}), FuseKind::Sum};
      break;
    }
    case BaselineKind::Pna: {
      const int m = id.towers;
      if (m < 1)
        throw UsageError("pna needs at least one tower, got " + std::to_string(m));
      spec.n_blocks = m * L;
      for (int level = 1; level <= L; ++level) {
        for (int tower = 0; tower < m; ++tower) {
          const int i = (level - 1) * m + tower + 1;
          BlockSpec b;
          b.select.assign((std::size_t)i, false);
          if (level == 1) {
            b.select[0] = true;
            b.fuse = FuseKind::Sum;
          } else {
            for (int j = 1; j <= m; ++j) b.select[(std::size_t)((level - 2) * m + j)] = true;
            b.fuse = FuseKind::Concat;
          }
          b.agg = agg;
          spec.blocks.push_back(b);
        }
      }
      std::vector<bool> out((std::size_t)spec.n_blocks + 1, false);
      for (int j = 1; j <= m; ++j) out[(std::size_t)((L - 1) * m + j)] = true;
      spec.output = {out, FuseKind::Concat};
      break;
    }
    default:
      throw UsageError("baseline '" + to_string(id.kind) +
                       "' has no fixed topology translation");
  }
  ensure_valid(spec);
  return spec;
}

TopologySpec random_spec(int n_blocks, std::uint64_t seed, bool learnable_agg,
                         AggKind fixed_agg) {
  if (n_blocks < 1)
    throw UsageError("random spec needs at least one block, got " + std::to_string(n_blocks));
  Rng rng(seed);
  TopologySpec spec;
  spec.n_blocks = n_blocks;
  for (int i = 1; i <= n_blocks; ++i) {
    BlockSpec b;
    for (int j = 0; j < i; ++j) b.select.push_back(rng.bernoulli(0.5));
    b.fuse = static_cast<FuseKind>(rng.uniform_int(6));
    b.agg = learnable_agg ? static_cast<AggKind>(rng.uniform_int(4)) : fixed_agg;
    spec.blocks.push_back(b);
  }
  for (;;) {
    spec.output.select.clear();
    bool any = false;
    for (int j = 0; j <= n_blocks; ++j) {
      const bool bit = rng.bernoulli(0.5);
      spec.output.select.push_back(bit);
      any = any || bit;
    }
    if (any) break;
  }
  spec.output.fuse = static_cast<FuseKind>(rng.uniform_int(6));
  ensure_valid(spec);
  return spec;
}

std::vector<DenseTensor*> MixHopParams::params() {
  std::vector<DenseTensor*> out;
  for (DenseTensor& wi : w) out.push_back(&wi);
  out.push_back(&proj);
  return out;
}

MixHopParams make_mixhop(const std::vector<int>& powers, int d_in, int d_out,
                         Rng& rng) {
  if (powers.empty()) throw UsageError("mixhop needs at least one adjacency power");
  std::set<int> seen;
  for (int p : powers) {
    if (p < 0)
      throw UsageError("adjacency powers must be non-negative, got " + std::to_string(p));
    if (!seen.insert(p).second)
      throw UsageError("duplicate adjacency power " + std::to_string(p));
  }
  if (d_in < 1 || d_out < 1) throw UsageError("mixhop dimensions must be positive");

  MixHopParams p;
  p.powers = powers;
  for (std::size_t i = 0; i < powers.size(); ++i)
    p.w.push_back(DenseTensor::glorot(d_in, d_out, rng));
  p.proj = DenseTensor::glorot((int)powers.size() * d_out, d_out, rng);
  return p;
}

Value mixhop_forward(Tape& t, MixHopParams& p, Value h, const GraphOps& ops) {
  if (h.tensor().cols() != p.w[0].rows())
    throw DimensionError("mixhop input is " + std::to_string(h.tensor().cols()) +
                         "-wide but transforms expect " + std::to_string(p.w[0].rows()));
  const int max_power = *std::max_element(p.powers.begin(), p.powers.end());
  std::vector<Value> propagated;
  propagated.push_back(h);
  for (int j = 1; j <= max_power; ++j)
    propagated.push_back(spmm(ops.a_sym, propagated.back()));

  std::vector<Value> parts;
  for (std::size_t k = 0; k < p.powers.size(); ++k)
    parts.push_back(matmul(propagated[(std::size_t)p.powers[k]], t.param(&p.w[k])));
  return matmul(concat_cols(parts), t.param(&p.proj));
}

}  // namespace f2
