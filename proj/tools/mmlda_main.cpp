#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmlda/errors.hpp"
#include "mmlda/experiment.hpp"

using namespace mmlda;

namespace {

struct Overrides {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  int rounds = -1;
  int top_k = -1;
  int runs = -1;
  std::vector<std::string> k_values;  // id=value
  std::string source, target;         // predict only
};

void add_common(CLI::App* sub, Overrides& ov) {
  sub->add_option("--config", ov.config_path, "experiment config file")->required();
  sub->add_option("--seed", ov.seed, "override config seed");
  sub->add_option("--out", ov.out_dir, "override output directory");
  sub->add_option("--rounds", ov.rounds, "override message-passing rounds");
  sub->add_option("--top-k", ov.top_k, "override the top-level category count");
  sub->add_option("--k", ov.k_values, "override a concept's category count as id=value");
  sub->add_option("--runs", ov.runs, "override comparison run count");
}

ExperimentConfig configure(const Overrides& ov) {
  ExperimentConfig config = ExperimentConfig::load(ov.config_path);
  if (ov.seed >= 0) config.seed = static_cast<std::uint64_t>(ov.seed);
  if (!ov.out_dir.empty()) config.out_dir = ov.out_dir;
  if (ov.rounds > 0) config.hierarchy.rounds = ov.rounds;
  if (ov.top_k > 0) config.hierarchy.top_k = ov.top_k;
  if (ov.runs > 0) config.runs = ov.runs;
  for (const auto& kv : ov.k_values) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--k expects id=value, got '" + kv + "'");
    const std::string id = kv.substr(0, eq);
    const int k = std::atoi(kv.c_str() + eq + 1);
    if (k < 1) throw ConfigError("--k " + kv + ": category count must be >= 1");
    const int idx = config.hierarchy.concept_index(id);
    if (idx < 0) throw ConfigError("--k " + kv + ": unknown concept '" + id + "'");
    config.hierarchy.lower[static_cast<size_t>(idx)].k = k;
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical multimodal topic model pipeline"};
  app.require_subcommand(1);
  Overrides ov;

  CLI::App* s_synth = app.add_subcommand("synth", "sample a synthetic corpus with ground truth");
  CLI::App* s_pre = app.add_subcommand("preprocess", "turn a raw signal into count vectors");
  CLI::App* s_train = app.add_subcommand("train", "train the two-layer model");
  CLI::App* s_predict = app.add_subcommand("predict", "cross-modal prediction table");
  CLI::App* s_eval = app.add_subcommand("eval", "Rand/KL evaluation report");
  CLI::App* s_compare = app.add_subcommand("compare", "LDA/MLDA/full-model comparison table");
  CLI::App* s_report = app.add_subcommand("report", "bundle artifacts into one report");
  for (CLI::App* sub : {s_synth, s_pre, s_train, s_predict, s_eval, s_compare, s_report})
    add_common(sub, ov);
  s_predict->add_option("--source", ov.source, "observed concept id")->required();
  s_predict->add_option("--target", ov.target, "predicted modality id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ExperimentConfig config = configure(ov);
    if (app.got_subcommand(s_synth)) cmd_synth(config);
    if (app.got_subcommand(s_pre)) cmd_preprocess(config);
    if (app.got_subcommand(s_train)) cmd_train(config);
    if (app.got_subcommand(s_predict)) cmd_predict(config, ov.source, ov.target);
    if (app.got_subcommand(s_eval)) cmd_eval(config);
    if (app.got_subcommand(s_compare)) cmd_compare(config);
    if (app.got_subcommand(s_report)) cmd_report(config);
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
