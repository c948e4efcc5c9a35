#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "f2/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "f2: train, search, and profile block-structured GNN topologies.\n"
      "Architectures come from a spec file (--spec), a named baseline\n"
      "translation (--baseline), or the search command's supernet."};
  app.set_version_flag("--version", "f2 0.1.0");
  app.require_subcommand(1);

  f2::RunConfig cfg;
  std::string config_path;

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", cfg.data,
                    "dataset directory or synth:n=..,classes=..,dim=..,intra=..,"
                    "inter=..,signal=..,seed=.. generator string");
    sub->add_option("--seeds", cfg.seeds, "run seeds, comma separated")
        ->delimiter(',');
  };
  auto add_arch = [&](CLI::App* sub) {
    sub->add_option("--spec", cfg.spec_path, "topology spec file (canonical text form)");
    sub->add_option("--baseline", cfg.baseline,
                    "vanilla|res|dense|jk|gnnii|pna|mixhop|random");
    sub->add_option("--depth", cfg.depth, "baseline depth (blocks or layers per tower)");
    sub->add_option("--towers", cfg.towers, "pna tower count");
    sub->add_option("--powers", cfg.powers, "mixhop adjacency powers, comma separated")
        ->delimiter(',');
    sub->add_option("--jk-fuse", cfg.jk_fuse, "jk readout fusion: sum|mean|max|concat|lstm|att");
    sub->add_option("--blocks", cfg.blocks, "block count for random topologies");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--agg", cfg.agg, "aggregator: gcn|gat|sage|gin");
    sub->add_option("--hidden", cfg.hidden, "embedding width");
    sub->add_option("--act", cfg.act, "activation: relu|elu");
    sub->add_option("--dropout", cfg.dropout, "dropout rate in [0,1)");
  };
  auto add_train_hp = [&](CLI::App* sub) {
    sub->add_option("--lr", cfg.lr, "learning rate");
    sub->add_option("--weight-decay", cfg.weight_decay, "decoupled weight decay");
    sub->add_option("--optimizer", cfg.optimizer, "adam|adagrad");
    sub->add_option("--epochs", cfg.epochs, "training epochs");
    sub->add_option("--patience", cfg.patience, "early-stop patience; <=0 disables");
  };
  auto add_search_hp = [&](CLI::App* sub) {
    sub->add_option("--blocks", cfg.blocks, "searchable block count");
    sub->add_option("--lambda", cfg.lambda, "softmax temperature (> 0)");
    sub->add_option("--search-epochs", cfg.search_epochs, "alternating search epochs");
    sub->add_option("--alpha-lr", cfg.alpha_lr, "architecture step size");
    sub->add_option("--alpha-weight-decay", cfg.alpha_weight_decay,
                    "architecture weight decay");
  };
  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--config", config_path,
                    "key = value config file; flags given on the command line win");
  };

  CLI::App* train = app.add_subcommand(
      "train", "train one architecture across seeds and report accuracy");
  add_data(train);
  add_arch(train);
  add_model(train);
  add_train_hp(train);
  add_out(train);
  train->add_flag("--svg", cfg.svg, "also write a bar-chart figure");

  CLI::App* searchc = app.add_subcommand(
      "search", "alternating topology search, then retrain the derived spec");
  add_data(searchc);
  add_model(searchc);
  add_train_hp(searchc);
  add_search_hp(searchc);
  add_out(searchc);

  CLI::App* gap = app.add_subcommand(
      "gap", "search at several temperatures and measure the supernet-to-derived "
             "accuracy gap");
  add_data(gap);
  add_model(gap);
  add_train_hp(gap);
  add_search_hp(gap);
  gap->add_option("--lambdas", cfg.lambdas, "temperatures to sweep, comma separated")
      ->delimiter(',');
  add_out(gap);
  gap->add_flag("--svg", cfg.svg, "also write a bar-chart figure");

  CLI::App* mad = app.add_subcommand(
      "mad", "train, then profile per-block representation smoothness");
  add_data(mad);
  add_arch(mad);
  add_model(mad);
  add_train_hp(mad);
  add_out(mad);
  mad->add_flag("--svg", cfg.svg, "also write a bar-chart figure");

  CLI::App* translate = app.add_subcommand(
      "translate", "write the topology spec for a named baseline");
  add_arch(translate);
  translate->add_option("--agg", cfg.agg, "aggregator: gcn|gat|sage|gin");
  translate->add_option("--hidden", cfg.hidden, "embedding width stored in the spec");
  translate->add_option("--act", cfg.act, "activation stored in the spec");
  translate->add_option("--out", cfg.out,
                        "output directory, or a path ending in .spec");

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic dataset directory with stored splits");
  synth->add_option("--data", cfg.data, "synth:... generator string")->required();
  synth->add_option("--out", cfg.out, "dataset directory to write")->required();

  CLI::App* tune = app.add_subcommand(
      "tune", "random-sample hyperparameters and keep the best by validation "
              "accuracy");
  add_data(tune);
  add_arch(tune);
  tune->add_option("--agg", cfg.agg, "aggregator: gcn|gat|sage|gin");
  tune->add_option("--trials", cfg.trials, "sampling budget");
  tune->add_option("--epochs", cfg.epochs, "training epochs per trial");
  tune->add_option("--patience", cfg.patience, "early-stop patience");
  add_out(tune);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // --help/--version exit clean; bad flags are usage errors
  }

  CLI::App* sub = app.get_subcommands().front();
  cfg.use_search = sub == searchc || sub == gap;
  const CLI::Option* agg_opt = sub->get_option_no_throw("--agg");
  cfg.agg_given = agg_opt != nullptr && agg_opt->count() > 0;
  if (!config_path.empty()) {
    auto flag_was_set = [&](const std::string& key) {
      const CLI::Option* opt = sub->get_option_no_throw("--" + key);
      return opt != nullptr && opt->count() > 0;
    };
    try {
      f2::apply_config_file(cfg, config_path, flag_was_set);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return f2::run_command(sub->get_name(), cfg);
}
