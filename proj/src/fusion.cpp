#include "f2/fusion.hpp"

#include "f2/errors.hpp"

namespace f2 {

namespace {
// Floor for the log-mask; keeps vlog away from zero even when a sharp
// softmax underflows a weight to exactly 0.0.
constexpr double kMaskFloor = 1e-300;
constexpr double kMeanFloor = 1e-12;
}  // namespace

FuseKind fuse_from_string(const std::string& s) {
  if (s == "SUM" || s == "sum") return FuseKind::Sum;
  if (s == "MEAN" || s == "mean") return FuseKind::Mean;
  if (s == "MAX" || s == "max") return FuseKind::Max;
  if (s == "CONCAT" || s == "concat") return FuseKind::Concat;
  if (s == "LSTM" || s == "lstm") return FuseKind::Lstm;
  if (s == "ATT" || s == "att") return FuseKind::Att;
  throw UsageError("unknown fusion '" + s + "' (expected SUM, MEAN, MAX, CONCAT, LSTM, or ATT)");
}

const char* to_string(FuseKind k) {
  switch (k) {
    case FuseKind::Sum: return "SUM";
    case FuseKind::Mean: return "MEAN";
    case FuseKind::Max: return "MAX";
    case FuseKind::Concat: return "CONCAT";
    case FuseKind::Lstm: return "LSTM";
    case FuseKind::Att: return "ATT";
  }
  return "?";
}

std::vector<DenseTensor*> FusionParams::params() {
  switch (kind) {
    case FuseKind::Concat:
      return concat_proj.rows() > 0 ? std::vector<DenseTensor*>{&concat_proj}
                                    : std::vector<DenseTensor*>{};
    case FuseKind::Lstm: return {&lstm_wx, &lstm_wh, &lstm_b};
    case FuseKind::Att: return {&att_v};
    default: return {};
  }
}

FusionParams make_fusion(FuseKind kind, int d, int k_inputs, Rng& rng) {
  FusionParams p;
  p.kind = kind;
  switch (kind) {
    case FuseKind::Concat:
      if (k_inputs > 0) p.concat_proj = DenseTensor::glorot(k_inputs * d, d, rng);
      break;
    case FuseKind::Lstm:
      p.lstm_wx = DenseTensor::glorot(d, 4 * d, rng);
      p.lstm_wh = DenseTensor::glorot(d, 4 * d, rng);
      p.lstm_b = DenseTensor(1, 4 * d);
      break;
    case FuseKind::Att:
      p.att_v = DenseTensor::glorot(d, 1, rng);
      break;
    default:
      break;
  }
  return p;
}

namespace {

// ln(max(w, floor) / max(wmax, floor)) as a 1x1 Value
Value log_mask(Value w, Value wmax) {
  return sub(vlog(max_scalar(w, kMaskFloor)), vlog(max_scalar(wmax, kMaskFloor)));
}

Value weight_max(const std::vector<Value>& ws) {
  Value m = ws[0];
  for (std::size_t i = 1; i < ws.size(); ++i) m = vmax(m, ws[i]);
  return m;
}

Value fuse_sum(const std::vector<Value>& xs, const std::vector<Value>& ws) {
  Value acc = scale_by(xs[0], ws[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, scale_by(xs[i], ws[i]));
  return acc;
}

Value fuse_mean(const std::vector<Value>& xs, const std::vector<Value>& ws) {
  Value num = fuse_sum(xs, ws);
  Value den = ws[0];
  for (std::size_t i = 1; i < ws.size(); ++i) den = add(den, ws[i]);
  return scale_by(num, vrecip(max_scalar(den, kMeanFloor)));
}

Value fuse_max(const std::vector<Value>& xs, const std::vector<Value>& ws) {
  Value wmax = weight_max(ws);
  Value acc = add_scalar(scale_by(xs[0], ws[0]), log_mask(ws[0], wmax));
  for (std::size_t i = 1; i < xs.size(); ++i)
    acc = vmax(acc, add_scalar(scale_by(xs[i], ws[i]), log_mask(ws[i], wmax)));
  return acc;
}

Value fuse_concat(Tape& t, FusionParams& p, const std::vector<Value>& xs,
                  const std::vector<Value>& ws) {
  const int d = xs[0].cols();
  if (p.concat_proj.rows() != static_cast<int>(xs.size()) * d)
    throw DimensionError("concat projection expects " +
                         std::to_string(p.concat_proj.rows() / std::max(d, 1)) +
                         " inputs, got " + std::to_string(xs.size()));
  std::vector<Value> scaled;
  scaled.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) scaled.push_back(scale_by(xs[i], ws[i]));
  return matmul(concat_cols(scaled), t.param(&p.concat_proj));
}

Value fuse_lstm(Tape& t, FusionParams& p, const std::vector<Value>& xs,
                const std::vector<Value>& ws) {
  const int n = xs[0].rows();
  const int d = xs[0].cols();
  Value h = t.leaf(DenseTensor(n, d));
  Value c = t.leaf(DenseTensor(n, d));
  Value one = t.leaf(DenseTensor::scalar(1.0));
  Value wx = t.param(&p.lstm_wx);
  Value wh = t.param(&p.lstm_wh);
  Value b = t.param(&p.lstm_b);
  for (std::size_t step = 0; step < xs.size(); ++step) {
    Value gates = add_bias(add(matmul(xs[step], wx), matmul(h, wh)), b);
    Value gi = sigmoid(slice_cols(gates, 0, d));
    Value gf = sigmoid(slice_cols(gates, d, 2 * d));
    Value gg = vtanh(slice_cols(gates, 2 * d, 3 * d));
    Value go = sigmoid(slice_cols(gates, 3 * d, 4 * d));
    Value c_new = add(mul(gf, c), mul(gi, gg));
    Value h_new = mul(go, vtanh(c_new));
    // blend: weight w keeps the new state, 1-w skips the input
    Value w = ws[step];
    Value keep = sub(one, w);
    c = add(scale_by(c_new, w), scale_by(c, keep));
    h = add(scale_by(h_new, w), scale_by(h, keep));
  }
  return h;
}

Value fuse_att(Tape& t, FusionParams& p, const std::vector<Value>& xs,
               const std::vector<Value>& ws) {
  Value v = t.param(&p.att_v);
  Value wmax = weight_max(ws);
  std::vector<Value> score_cols, mask_cells;
  score_cols.reserve(xs.size());
  mask_cells.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    score_cols.push_back(matmul(xs[i], v));       // n x 1
    mask_cells.push_back(log_mask(ws[i], wmax));  // 1 x 1
  }
  Value scores = concat_cols(score_cols);                       // n x k
  Value masked = add_bias(scores, concat_cols(mask_cells));     // shift each column
  Value att = softmax_rows(masked);                             // n x k
  Value acc = row_scale(xs[0], slice_cols(att, 0, 1));
  for (std::size_t i = 1; i < xs.size(); ++i)
    acc = add(acc, row_scale(xs[i], slice_cols(att, static_cast<int>(i),
                                               static_cast<int>(i) + 1)));
  return acc;
}

}  // namespace

Value fuse_weighted(Tape& t, FusionParams& p, const std::vector<Value>& inputs,
                    const std::vector<Value>& weights) {
  if (inputs.empty()) throw UsageError("fusion needs at least one input");
  if (inputs.size() != weights.size())
    throw UsageError("fusion got " + std::to_string(inputs.size()) + " inputs but " +
                     std::to_string(weights.size()) + " weights");
  const int n = inputs[0].rows();
  const int d = inputs[0].cols();
  for (const Value& x : inputs)
    if (x.rows() != n || x.cols() != d)
      throw DimensionError("fusion inputs disagree in shape");
  for (const Value& w : weights)
    if (w.rows() != 1 || w.cols() != 1)
      throw DimensionError("fusion weights must be scalars");

  switch (p.kind) {
    case FuseKind::Sum: return fuse_sum(inputs, weights);
    case FuseKind::Mean: return fuse_mean(inputs, weights);
    case FuseKind::Max: return fuse_max(inputs, weights);
    case FuseKind::Concat: return fuse_concat(t, p, inputs, weights);
    case FuseKind::Lstm: return fuse_lstm(t, p, inputs, weights);
    case FuseKind::Att: return fuse_att(t, p, inputs, weights);
  }
  throw UsageError("unhandled fusion kind");
}

Value fuse(Tape& t, FusionParams& p, const std::vector<Value>& inputs) {
  if (inputs.empty()) throw UsageError("fusion needs at least one input");
  std::vector<Value> ones;
  ones.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    ones.push_back(t.leaf(DenseTensor::scalar(1.0)));
  return fuse_weighted(t, p, inputs, ones);
}

}  // namespace f2
