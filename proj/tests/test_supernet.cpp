#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "f2/baselines.hpp"
#include "f2/childnet.hpp"
#include "f2/errors.hpp"
#include "f2/supernet.hpp"

using namespace f2;
using f2::testing::fd_check_slots;
using f2::testing::random_tensor;

namespace {

Graph small_sbm(uint64_t seed, int n = 20, int c = 2) {
  SbmConfig cfg;
  cfg.n = n;
  cfg.num_classes = c;
  cfg.feature_dim = 5;
  cfg.intra_prob = 0.3;
  cfg.inter_prob = 0.08;
  cfg.feature_signal = 1.5;
  cfg.seed = seed;
  Graph g = generate_synthetic(cfg);
  g.masks = split_nodes(g, SplitConfig{0.5, 0.25, 0.25, seed, true});
  return g;
}

SupernetConfig tiny_cfg(int blocks, int hidden = 4, double lambda = 0.5) {
  SupernetConfig cfg;
  cfg.n_blocks = blocks;
  cfg.hidden = hidden;
  cfg.lambda = lambda;
  cfg.learnable_agg = true;
  cfg.dropout = 0.0;
  return cfg;
}

DenseTensor row6(std::initializer_list<double> vals) {
  DenseTensor t(1, 6);
  int c = 0;
  for (double v : vals) t.at(0, c++) = v;
  return t;
}

}  // namespace

TEST_CASE("temperature softmax matches the analytic examples") {
  auto flat = softmax_with_temperature(std::vector<double>{0.0, 0.0}, 0.37);
  CHECK(flat[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(flat[1] == doctest::Approx(0.5).epsilon(1e-14));

  auto two_thirds = softmax_with_temperature({std::log(2.0), 0.0}, 1.0);
  CHECK(std::fabs(two_thirds[0] - 2.0 / 3.0) < 1e-12);
  CHECK(std::fabs(two_thirds[1] - 1.0 / 3.0) < 1e-12);

  // a hundredth of a unit of preference, divided by a milli-temperature,
  // is ten nats
  auto sharp = softmax_with_temperature({0.01, 0.0}, 0.001);
  const double want = 1.0 / (1.0 + std::exp(-10.0));
  CHECK(std::fabs(sharp[0] - want) < 1e-12);
}

TEST_CASE("temperature softmax normalizes and rejects bad temperatures") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> alpha;
    for (int k = 0; k < 6; ++k) alpha.push_back(rng.uniform(-3.0, 3.0));
    auto c = softmax_with_temperature(alpha, rng.uniform(0.01, 2.0));
    double sum = 0.0;
    for (double v : c) sum += v;
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(softmax_with_temperature(std::vector<double>{1.0, 2.0}, 0.0), UsageError);
  CHECK_THROWS_AS(softmax_with_temperature(std::vector<double>{1.0, 2.0}, -0.5), UsageError);
}

TEST_CASE("tensor-form temperature softmax agrees with the vector form") {
  Rng rng(6);
  DenseTensor alpha = random_tensor(1, 4, rng, -2.0, 2.0);
  Tape t;
  Value c = softmax_with_temperature(t, t.leaf(alpha), 0.2);
  auto want = softmax_with_temperature(
      std::vector<double>{alpha.at(0, 0), alpha.at(0, 1), alpha.at(0, 2), alpha.at(0, 3)},
      0.2);
  for (int k = 0; k < 4; ++k) CHECK(std::fabs(c.tensor().at(0, k) - want[(std::size_t)k]) < 1e-13);

  Tape t2;
  CHECK_THROWS_AS(softmax_with_temperature(t2, t2.leaf(alpha), 0.0), UsageError);
}

TEST_CASE("mixed selection scales by the identity weight") {
  Rng rng(7);
  DenseTensor x = random_tensor(3, 2, rng);
  Tape t;

  Value zero_sel = mixed_selection(t, t.leaf(DenseTensor::from_rows({{1.0, 0.0}})), t.leaf(x));
  CHECK(zero_sel.tensor().max_abs_diff(DenseTensor(3, 2)) == 0.0);

  Value ident = mixed_selection(t, t.leaf(DenseTensor::from_rows({{0.0, 1.0}})), t.leaf(x));
  CHECK(ident.tensor().max_abs_diff(x) == 0.0);

  Value soft = mixed_selection(t, t.leaf(DenseTensor::from_rows({{0.3, 0.7}})),
                               t.leaf(DenseTensor::from_rows({{1.0, 2.0}})));
  CHECK(std::fabs(soft.tensor().at(0, 0) - 0.7) < 1e-15);
  CHECK(std::fabs(soft.tensor().at(0, 1) - 1.4) < 1e-15);
}

TEST_CASE("mixed fusion reduces to one candidate when its weight is one-hot") {
  Rng rng(8);
  std::vector<FusionParams> cands;
  for (int k = 0; k < 6; ++k)
    cands.push_back(make_fusion(static_cast<FuseKind>(k), 3, 2, rng));
  DenseTensor xa = random_tensor(4, 3, rng), xb = random_tensor(4, 3, rng);

  Tape t;
  std::vector<Value> inputs = {t.leaf(xa), t.leaf(xb)};
  std::vector<Value> unit = {t.leaf(DenseTensor::scalar(1.0)), t.leaf(DenseTensor::scalar(1.0))};
  Value mixed =
      mixed_fusion(t, t.leaf(row6({1, 0, 0, 0, 0, 0})), cands, inputs, unit);
  Value plain = fuse(t, cands[0], inputs);
  CHECK(mixed.tensor().max_abs_diff(plain.tensor()) == 0.0);
}

TEST_CASE("mixed fusion of all-zero inputs is zero for any weighting") {
  Rng rng(9);
  std::vector<FusionParams> cands;
  for (int k = 0; k < 6; ++k)
    cands.push_back(make_fusion(static_cast<FuseKind>(k), 3, 2, rng));

  Tape t;
  std::vector<Value> zeros = {t.leaf(DenseTensor(5, 3)), t.leaf(DenseTensor(5, 3))};
  std::vector<Value> unit = {t.leaf(DenseTensor::scalar(1.0)), t.leaf(DenseTensor::scalar(1.0))};
  for (const DenseTensor& c :
       {row6({1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6}),
        row6({0.1, 0.2, 0.3, 0.1, 0.2, 0.1}), row6({0, 0, 0, 0, 0, 1})}) {
    Value mixed = mixed_fusion(t, t.leaf(c), cands, zeros, unit);
    CHECK(mixed.tensor().max_abs_diff(DenseTensor(5, 3)) < 1e-15);
  }
}

TEST_CASE("mixed fusion composes sum and mean halves by hand") {
  Rng rng(10);
  std::vector<FusionParams> cands;
  for (int k = 0; k < 6; ++k)
    cands.push_back(make_fusion(static_cast<FuseKind>(k), 3, 2, rng));
  DenseTensor xa = random_tensor(4, 3, rng), xb = random_tensor(4, 3, rng);

  Tape t;
  std::vector<Value> inputs = {t.leaf(xa), t.leaf(xb)};
  std::vector<Value> unit = {t.leaf(DenseTensor::scalar(1.0)), t.leaf(DenseTensor::scalar(1.0))};
  Value mixed =
      mixed_fusion(t, t.leaf(row6({0.5, 0.5, 0, 0, 0, 0})), cands, inputs, unit);
  // 0.5 (X+Y) + 0.5 (X+Y)/2
  Value want = scale(add(inputs[0], inputs[1]), 0.75);
  CHECK(mixed.tensor().max_abs_diff(want.tensor()) < 1e-12);

  std::vector<Value> none;
  CHECK_THROWS_AS(mixed_fusion(t, t.leaf(row6({1, 0, 0, 0, 0, 0})), cands, none, none),
                  UsageError);
}

TEST_CASE("degenerate one-block supernet hard-set to identity-sum-sage is a plain layer") {
  Graph g = small_sbm(11);
  GraphOps ops = build_graph_ops(g);
  SupernetConfig cfg = tiny_cfg(1, 6, 0.001);
  cfg.learnable_agg = false;
  cfg.fixed_agg = AggKind::Sage;
  Rng rng(12);
  Supernet s(cfg, g.feature_dim(), g.num_classes, rng);

  TopologySpec spec;
  spec.n_blocks = 1;
  spec.hidden = 6;
  spec.blocks.push_back({{true}, FuseKind::Sum, AggKind::Sage});
  spec.output.select = {false, true};
  spec.output.fuse = FuseKind::Sum;
  align_alphas(s, spec, 1.0);

  DenseTensor got = eval_logits(s, g, ops);

  Tape t;
  Value h0 = mlp_forward(t, s.input_mlp(), t.leaf(g.features), cfg.act);
  Value h1 = apply_act(cfg.act, layer_forward(t, s.blocks()[0].layers[0], h0, ops, cfg.act));
  Value want = mlp_forward(t, s.output_mlp(), h1, cfg.act);
  CHECK(got.max_abs_diff(want.tensor()) < 1e-10);
}

TEST_CASE("doubling the temperature and the alphas leaves the logits unchanged") {
  Graph g = small_sbm(13);
  GraphOps ops = build_graph_ops(g);
  SupernetConfig cfg = tiny_cfg(2, 5, 0.4);
  Rng rng(14);
  Supernet s(cfg, g.feature_dim(), g.num_classes, rng);
  DenseTensor before = eval_logits(s, g, ops);

  for (DenseTensor* a : s.alpha_params())
    for (std::size_t i = 0; i < a->size(); ++i) a->data()[i] *= 2.0;
  s.set_lambda(0.8);
  CHECK(eval_logits(s, g, ops).max_abs_diff(before) < 1e-12);
  CHECK_THROWS_AS(s.set_lambda(0.0), UsageError);
}

TEST_CASE("one-hot supernets match their derived childnets exactly") {
  Graph g = small_sbm(15);
  GraphOps ops = build_graph_ops(g);
  for (uint64_t trial = 0; trial < 20; ++trial) {
    const int n_blocks = 1 + (int)(trial % 3);
    TopologySpec spec = random_spec(n_blocks, 1000 + trial, true);
    spec.hidden = 5;

    SupernetConfig cfg = tiny_cfg(n_blocks, 5, 0.001);
    Rng rng(trial);
    Supernet s(cfg, g.feature_dim(), g.num_classes, rng);
    align_alphas(s, spec, 1.0);

    DeriveResult d = derive(s);
    REQUIRE(serialize_spec(d.spec) == serialize_spec(spec));
    CHECK_FALSE(d.forced_output);

    ChildNet child = derive_childnet(s, d.spec);
    const double diff =
        eval_logits(s, g, ops).max_abs_diff(eval_logits(child, g, ops));
    CHECK(diff < 1e-10);
  }
}

TEST_CASE("sharp temperatures push non-max weights under the analytic bound") {
  for (double gap : {0.01, 0.1}) {
    std::vector<double> alpha = {0.0, gap, -gap, -2.0 * gap, 0.0 - 3.0 * gap, -gap};
    auto c = softmax_with_temperature(alpha, 0.001);
    const double bound = std::exp(-gap / 0.001);
    std::size_t argmax = 1;
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (k == argmax) continue;
      CHECK(c[k] <= bound * (1.0 + 1e-12));
    }
    CHECK(c[argmax] >= 1.0 - 6.0 * bound);
  }
}

TEST_CASE("alpha and weight gradients pass finite differences") {
  Graph g = small_sbm(16, 8);
  GraphOps ops = build_graph_ops(g);
  SupernetConfig cfg = tiny_cfg(2, 3, 0.5);
  Rng rng(17);
  Supernet s(cfg, g.feature_dim(), g.num_classes, rng);
  Rng unused(0);

  auto build = [&](Tape& t) {
    Value logits = s.forward(t, g.features, ops, false, unused);
    t.backward(cross_entropy(logits, g.labels, g.masks.train));
  };
  auto loss = [&]() {
    Tape t;
    Value logits = s.forward(t, g.features, ops, false, unused);
    return cross_entropy(logits, g.labels, g.masks.train).tensor().at(0, 0);
  };
  CHECK(fd_check_slots(loss, build, s.alpha_params()) < 1e-4);

  // weight slots: spot-check a subset to keep the probe count sane
  std::vector<DenseTensor*> all = s.weight_params();
  std::vector<DenseTensor*> some;
  for (std::size_t i = 0; i < all.size(); i += 7) some.push_back(all[i]);
  CHECK(fd_check_slots(loss, build, some) < 1e-4);
}

TEST_CASE("derive takes the argmax with zero-before-identity ties") {
  Graph g = small_sbm(18);
  SupernetConfig cfg = tiny_cfg(1);
  Rng rng(19);
  Supernet s(cfg, g.feature_dim(), g.num_classes, rng);

  s.blocks()[0].sel_alpha[0] = DenseTensor::from_rows({{0.2, 0.9}});
  s.output_sel_alpha()[0] = DenseTensor::from_rows({{0.5, 0.5}});  // tie -> ZERO
  s.output_sel_alpha()[1] = DenseTensor::from_rows({{0.1, 0.4}});
  s.blocks()[0].fuse_alpha = DenseTensor(1, 6);                    // tie -> SUM
  s.blocks()[0].agg_alpha = DenseTensor(1, 4);                     // tie -> GCN
  s.output_fuse_alpha() = DenseTensor::from_rows({{0, 0, 0.3, 0, 0, 0}});

  DeriveResult d = derive(s);
  CHECK(d.spec.blocks[0].select == std::vector<bool>{true});
  CHECK(d.spec.blocks[0].fuse == FuseKind::Sum);
  CHECK(d.spec.blocks[0].agg == AggKind::Gcn);
  CHECK(d.spec.output.select == std::vector<bool>{false, true});
  CHECK(d.spec.output.fuse == FuseKind::Max);
  CHECK_FALSE(d.forced_output);
}

TEST_CASE("derive is invariant to per-vector constant shifts") {
  Graph g = small_sbm(20);
  SupernetConfig cfg = tiny_cfg(3);
  Rng rng(21);
  Supernet s(cfg, g.feature_dim(), g.num_classes, rng);
  const std::string before = serialize_spec(derive(s).spec);

  Rng shift_rng(22);
  for (DenseTensor* a : s.alpha_params()) {
    const double c = shift_rng.uniform(-5.0, 5.0);
    for (std::size_t i = 0; i < a->size(); ++i) a->data()[i] += c;
  }
  CHECK(serialize_spec(derive(s).spec) == before);
}

TEST_CASE("derive forces the strongest readout bit on when all derive to zero") {
  Graph g = small_sbm(23);
  SupernetConfig cfg = tiny_cfg(2);
  Rng rng(24);
  Supernet s(cfg, g.feature_dim(), g.num_classes, rng);
  s.output_sel_alpha()[0] = DenseTensor::from_rows({{1.0, 0.2}});
  s.output_sel_alpha()[1] = DenseTensor::from_rows({{1.0, 0.8}});  // strongest identity
  s.output_sel_alpha()[2] = DenseTensor::from_rows({{1.0, 0.5}});

  DeriveResult d = derive(s);
  CHECK(d.forced_output);
  CHECK(d.spec.output.select == std::vector<bool>{false, true, false});
  CHECK(validate_spec(d.spec).errors.empty());
}

TEST_CASE("zero-epoch search derives the initial supernet untouched") {
  Graph g = small_sbm(25);
  GraphOps ops = build_graph_ops(g);
  SupernetConfig cfg = tiny_cfg(2);
  Rng rng(26);
  Supernet s(cfg, g.feature_dim(), g.num_classes, rng);
  const std::string init = serialize_spec(derive(s).spec);

  SearchConfig sc;
  sc.epochs = 0;
  sc.lambda = cfg.lambda;
  SearchResult res = search(s, g, ops, sc);
  CHECK(res.history.empty());
  CHECK(serialize_spec(res.derived.spec) == init);

  sc.epochs = -1;
  CHECK_THROWS_AS(search(s, g, ops, sc), UsageError);
}

TEST_CASE("search is deterministic per seed") {
  Graph g = small_sbm(27);
  GraphOps ops = build_graph_ops(g);
  SupernetConfig cfg = tiny_cfg(2, 4);
  cfg.dropout = 0.3;

  SearchConfig sc;
  sc.epochs = 6;
  sc.lambda = cfg.lambda;
  sc.seed = 9;

  std::vector<SearchEpoch> hist[2];
  std::string specs[2];
  for (int run = 0; run < 2; ++run) {
    Rng rng(28);
    Supernet s(cfg, g.feature_dim(), g.num_classes, rng);
    SearchResult res = search(s, g, ops, sc);
    hist[run] = res.history;
    specs[run] = serialize_spec(res.derived.spec);
  }
  CHECK(specs[0] == specs[1]);
  REQUIRE(hist[0].size() == hist[1].size());
  for (std::size_t e = 0; e < hist[0].size(); ++e) {
    CHECK(hist[0][e].train_loss == hist[1][e].train_loss);
    CHECK(hist[0][e].val_loss == hist[1][e].val_loss);
    CHECK(hist[0][e].val_acc == hist[1][e].val_acc);
  }
}

TEST_CASE("search with a frozen alpha rate is exactly a weight-only trainer") {
  Graph g = small_sbm(29);
  GraphOps ops = build_graph_ops(g);
  SupernetConfig cfg = tiny_cfg(2, 4);

  SearchConfig sc;
  sc.epochs = 5;
  sc.lambda = cfg.lambda;
  sc.alpha_lr = 0.0;

  Rng rng_a(30);
  Supernet searched(cfg, g.feature_dim(), g.num_classes, rng_a);
  SearchResult res = search(searched, g, ops, sc);

  Rng rng_b(30);
  Supernet hand(cfg, g.feature_dim(), g.num_classes, rng_b);
  Optimizer opt({sc.w_optimizer, sc.w_lr, sc.w_weight_decay});
  Rng unused(0);
  std::vector<double> hand_losses;
  for (int epoch = 1; epoch <= sc.epochs; ++epoch) {
    Tape t;
    Value loss =
        cross_entropy(hand.forward(t, g.features, ops, true, unused), g.labels, g.masks.train);
    hand_losses.push_back(loss.tensor().at(0, 0));
    t.backward(loss);
    std::vector<DenseTensor*> slots = hand.weight_params();
    std::vector<DenseTensor> grads;
    for (DenseTensor* sl : slots) grads.push_back(t.grad_for(sl));
    opt.step(slots, grads);
  }
  REQUIRE(res.history.size() == hand_losses.size());
  for (std::size_t e = 0; e < hand_losses.size(); ++e)
    CHECK(res.history[e].train_loss == hand_losses[(std::size_t)e]);
  CHECK(eval_logits(searched, g, ops).max_abs_diff(eval_logits(hand, g, ops)) == 0.0);
}

TEST_CASE("a poisoned validation node names the architecture step") {
  // isolated node whose features are NaN, visible only through the val mask
  Graph g;
  g.n = 6;
  g.num_classes = 2;
  g.labels = {0, 1, 0, 1, 0, 1};
  g.edges = {{0, 1}, {2, 3}};
  Rng frng(31);
  g.features = random_tensor(6, 3, frng);
  g.features.at(5, 0) = std::nan("");
  g.masks.train = {0, 1, 2, 3};
  g.masks.val = {5};
  GraphOps ops = build_graph_ops(g);

  SupernetConfig cfg = tiny_cfg(1);
  cfg.act = ActKind::Elu;  // relu would map the NaN rows to zero and hide them
  Rng rng(32);
  Supernet s(cfg, g.feature_dim(), g.num_classes, rng);
  SearchConfig sc;
  sc.epochs = 3;
  sc.lambda = cfg.lambda;
  try {
    search(s, g, ops, sc);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("architecture") != std::string::npos);
  }
}

TEST_CASE("a converged supernet shows no accuracy gap against its childnet") {
  Graph g = small_sbm(33, 24);
  GraphOps ops = build_graph_ops(g);
  SupernetConfig cfg = tiny_cfg(2, 5, 0.001);
  Rng rng(34);
  Supernet s(cfg, g.feature_dim(), g.num_classes, rng);

  TopologySpec spec = random_spec(2, 77, true);
  spec.hidden = 5;
  align_alphas(s, spec, 0.01);  // alpha gaps of exactly 0.01, ten nats at this lambda

  DeriveResult d = derive(s);
  REQUIRE(serialize_spec(d.spec) == serialize_spec(spec));
  GapPoint p = gap_between(s, d, g, ops);
  CHECK(p.gap_pp == 0.0);
  CHECK(p.max_logit_diff < 1e-3);
  CHECK(p.max_logit_diff > 0.0);  // soft weights are sharp, not literally one-hot
}

TEST_CASE("measure gap sweeps temperatures end to end") {
  Graph g = small_sbm(35, 24);
  SupernetConfig cfg = tiny_cfg(1, 4, 0.001);
  SearchConfig sc;
  sc.epochs = 4;
  sc.seed = 36;

  GapReport rep = measure_gap(cfg, g, {1.0, 0.001}, sc);
  REQUIRE(rep.points.size() == 2);
  for (const GapPoint& p : rep.points) {
    CHECK(std::isfinite(p.supernet_val_acc));
    CHECK(std::isfinite(p.childnet_val_acc));
    CHECK(std::isfinite(p.max_logit_diff));
    CHECK(p.gap_pp >= 0.0);
    CHECK(validate_spec(p.spec).errors.empty());
  }
  CHECK(rep.points[0].lambda == 1.0);
  CHECK(rep.points[1].lambda == 0.001);
}

TEST_CASE("short smoke search returns a valid spec and full history") {
  Graph g = small_sbm(37, 24);
  GraphOps ops = build_graph_ops(g);
  SupernetConfig cfg = tiny_cfg(2, 6, 0.001);
  Rng rng(38);
  Supernet s(cfg, g.feature_dim(), g.num_classes, rng);

  SearchConfig sc;
  sc.epochs = 8;
  sc.lambda = cfg.lambda;
  sc.seed = 39;
  SearchResult res = search(s, g, ops, sc);
  REQUIRE(res.history.size() == 8);
  for (std::size_t e = 0; e < res.history.size(); ++e) {
    CHECK(res.history[e].epoch == (int)e + 1);
    CHECK(std::isfinite(res.history[e].train_loss));
    CHECK(std::isfinite(res.history[e].val_loss));
    CHECK(res.history[e].val_acc >= 0.0);
    CHECK(res.history[e].val_acc <= 1.0);
  }
  CHECK(validate_spec(res.derived.spec).errors.empty());
  CHECK(res.derived.spec.hidden == 6);
}

TEST_CASE("supernet construction rejects nonsense shapes") {
  Rng rng(40);
  SupernetConfig cfg = tiny_cfg(0);
  CHECK_THROWS_AS(Supernet(cfg, 4, 2, rng), UsageError);
  cfg = tiny_cfg(1);
  cfg.lambda = 0.0;
  CHECK_THROWS_AS(Supernet(cfg, 4, 2, rng), UsageError);
  cfg = tiny_cfg(1);
  CHECK_THROWS_AS(Supernet(cfg, 0, 2, rng), UsageError);
  CHECK_THROWS_AS(Supernet(cfg, 4, 0, rng), UsageError);
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(Supernet(cfg, 4, 2, rng), UsageError);
}

TEST_CASE("align alphas rejects a spec that does not fit the supernet") {
  Rng rng(41);
  SupernetConfig cfg = tiny_cfg(2);
  Supernet s(cfg, 4, 2, rng);
  TopologySpec three = random_spec(3, 1, true);
  CHECK_THROWS_AS(align_alphas(s, three, 1.0), UsageError);

  cfg.learnable_agg = false;
  cfg.fixed_agg = AggKind::Gcn;
  Supernet fixed(cfg, 4, 2, rng);
  TopologySpec spec = random_spec(2, 2, false, AggKind::Sage);
  CHECK_THROWS_AS(align_alphas(fixed, spec, 1.0), UsageError);
}
