#include "mmlda/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mmlda/errors.hpp"
#include "mmlda/eval.hpp"
#include "mmlda/preprocess.hpp"
#include "mmlda/rng.hpp"
#include "mmlda/synth.hpp"
#include "mmlda/topic_model.hpp"

namespace fs = std::filesystem;

namespace mmlda {

using nlohmann::json;

HierarchySpec default_hierarchy_spec() {
  HierarchySpec spec;
  spec.lower = {{"I", {"eda", "rri"}, 4}, {"V", {"vision"}, 4}, {"W", {"word"}, 34}};
  spec.top_k = 28;
  return spec;
}

static std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

static void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError(strfmt("config: unknown key '%s' in %s", key.c_str(), where.c_str()));
}

static void parse_hierarchy(const json& j, HierarchySpec& spec) {
  check_keys(j, {"top_k", "alpha", "beta", "rounds", "lower_sweeps", "top_sweeps", "weight",
                 "lower"},
             "hierarchy");
  spec.top_k = j.value("top_k", spec.top_k);
  spec.alpha = j.value("alpha", spec.alpha);
  spec.beta = j.value("beta", spec.beta);
  spec.rounds = j.value("rounds", spec.rounds);
  spec.lower_sweeps = j.value("lower_sweeps", spec.lower_sweeps);
  spec.top_sweeps = j.value("top_sweeps", spec.top_sweeps);
  spec.weight = j.value("weight", spec.weight);
  if (j.contains("lower")) {
    spec.lower.clear();
    for (const auto& c : j.at("lower")) {
      check_keys(c, {"id", "modalities", "k"}, "hierarchy.lower");
      spec.lower.push_back({c.at("id").get<std::string>(),
                            c.at("modalities").get<std::vector<std::string>>(),
                            c.at("k").get<int>()});
    }
  }
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(strfmt("%s: %s", path.c_str(), e.what()));
  }
  try {
    check_keys(j, {"corpus", "synth", "hierarchy", "split", "lexicon", "out", "seed", "runs",
                   "preprocess"},
               "top level");
    ExperimentConfig c;
    c.hierarchy = default_hierarchy_spec();
    c.corpus_path = j.value("corpus", "");
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      check_keys(s, {"kind", "docs", "concentration", "params_seed", "params"}, "synth");
      c.has_synth = true;
      c.synth.kind = s.value("kind", c.synth.kind);
      c.synth.docs = s.value("docs", c.synth.docs);
      c.synth.concentration = s.value("concentration", c.synth.concentration);
      c.synth.params_seed = s.value("params_seed", c.synth.params_seed);
      c.synth.params_path = s.value("params", "");
    }
    if (j.contains("hierarchy")) parse_hierarchy(j.at("hierarchy"), c.hierarchy);
    if (j.contains("split")) {
      c.has_split = true;
      for (const auto& [label, counts] : j.at("split").items()) {
        if (!counts.is_array() || counts.size() != 2)
          throw ConfigError("config: split entries must be [train, test] pairs");
        c.split[label] = {counts[0].get<int>(), counts[1].get<int>()};
      }
    }
    if (j.contains("lexicon")) {
      if (j.at("lexicon").is_string()) {
        c.lexicon_path = j.at("lexicon").get<std::string>();
      } else {
        check_keys(j.at("lexicon"), {"path", "modality"}, "lexicon");
        c.lexicon_path = j.at("lexicon").at("path").get<std::string>();
        c.lexicon_modality = j.at("lexicon").value("modality", c.lexicon_modality);
      }
    }
    c.out_dir = j.value("out", "");
    c.seed = j.value("seed", c.seed);
    c.runs = j.value("runs", c.runs);
    if (j.contains("preprocess")) {
      const json& p = j.at("preprocess");
      check_keys(p, {"signal", "kind", "codebook", "modality", "codebook_size", "iterations",
                     "window_seconds", "highpass_hz", "smooth_seconds", "resample_hz"},
                 "preprocess");
      c.has_preprocess = true;
      c.preprocess.signal_path = p.value("signal", "");
      c.preprocess.kind = p.value("kind", c.preprocess.kind);
      c.preprocess.codebook_path = p.value("codebook", "");
      c.preprocess.modality = p.value("modality", c.preprocess.kind);
      c.preprocess.codebook_size = p.value("codebook_size", c.preprocess.codebook_size);
      c.preprocess.iterations = p.value("iterations", c.preprocess.iterations);
      c.preprocess.window_seconds = p.value("window_seconds", c.preprocess.window_seconds);
      c.preprocess.highpass_hz = p.value("highpass_hz", c.preprocess.highpass_hz);
      c.preprocess.smooth_seconds = p.value("smooth_seconds", c.preprocess.smooth_seconds);
      c.preprocess.resample_hz = p.value("resample_hz", c.preprocess.resample_hz);
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(strfmt("%s: %s", path.c_str(), e.what()));
  }
}

static void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path))
    throw ConfigError(strfmt("config: %s '%s' does not exist", what.c_str(), path.c_str()));
}

void ExperimentConfig::validate() const {
  if (!corpus_path.empty() && has_synth)
    throw ConfigError("config: give either a corpus path or a synth block, not both");
  if (out_dir.empty()) throw ConfigError("config: 'out' directory is required");
  hierarchy.validate();
  if (!corpus_path.empty()) require_file(corpus_path, "corpus");
  if (has_synth) {
    if (synth.kind != "default" && synth.kind != "complementary" && synth.kind != "params")
      throw ConfigError("config: synth.kind must be default, complementary, or params");
    if (synth.kind == "params") {
      if (synth.params_path.empty()) throw ConfigError("config: synth.kind=params needs a path");
      require_file(synth.params_path, "synth params");
    }
    if (synth.docs < 0) throw ConfigError("config: synth.docs must be >= 0");
    if (!(synth.concentration > 0.0) || synth.concentration > 1.0)
      throw ConfigError("config: synth.concentration must be in (0, 1]");
  }
  for (const auto& [label, counts] : split)
    if (counts.first < 0 || counts.second < 0)
      throw ConfigError("config: split counts must be >= 0 for label " + label);
  if (!lexicon_path.empty()) require_file(lexicon_path, "lexicon");
  if (runs < 1) throw ConfigError("config: runs must be >= 1");
  if (has_preprocess) {
    if (preprocess.signal_path.empty()) throw ConfigError("config: preprocess.signal is required");
    require_file(preprocess.signal_path, "signal");
    if (!preprocess.codebook_path.empty()) require_file(preprocess.codebook_path, "codebook");
    if (preprocess.kind != "eda" && preprocess.kind != "rri")
      throw ConfigError("config: preprocess.kind must be eda or rri");
    if (preprocess.codebook_size < 1 || preprocess.iterations < 1)
      throw ConfigError("config: preprocess codebook_size and iterations must be >= 1");
  }
}

static void ensure_out(const ExperimentConfig& config) {
  fs::create_directories(config.out_dir);
}

static std::string out_path(const ExperimentConfig& config, const std::string& name) {
  return (fs::path(config.out_dir) / name).string();
}

static GenParams synth_params(const ExperimentConfig& config) {
  if (config.synth.kind == "complementary")
    return make_complementary_params(config.synth.docs, config.synth.concentration,
                                     config.synth.params_seed);
  if (config.synth.kind == "params") return load_gen_params(config.synth.params_path);
  return default_gen_params(config.synth.docs, config.synth.concentration,
                            config.synth.params_seed);
}

// corpus named by the config, sampling when the source is synthetic
static Corpus source_corpus(const ExperimentConfig& config, std::uint64_t sample_seed) {
  if (!config.corpus_path.empty()) return load_corpus(config.corpus_path);
  if (!config.has_synth)
    throw ConfigError("config: a corpus path or synth block is required for this command");
  return sample_corpus(synth_params(config), sample_seed).first;
}

void cmd_synth(const ExperimentConfig& config) {
  config.validate();
  if (!config.has_synth) throw ConfigError("synth: config needs a synth block");
  GenParams params = synth_params(config);
  auto [corpus, truth] = sample_corpus(params, mix_seed(config.seed, hash_id("synth")));
  if (corpus.size() == 0) std::fprintf(stderr, "warning: synth produced an empty corpus\n");
  ensure_out(config);
  save_corpus(corpus, out_path(config, "corpus.json"));
  save_gen_params(params, out_path(config, "gen_params.json"));
  save_ground_truth(truth, out_path(config, "ground_truth.json"));
  std::map<std::string, int> label_sizes;
  for (const auto& [id, label] : corpus.labels) ++label_sizes[label];
  std::ostringstream sizes;
  for (const auto& [label, n] : label_sizes) sizes << " " << label << "=" << n;
  std::cout << "synth: " << corpus.size() << " documents, " << corpus.specs.size()
            << " modalities;" << sizes.str() << "\n";
}

void cmd_preprocess(const ExperimentConfig& config) {
  config.validate();
  if (!config.has_preprocess) throw ConfigError("preprocess: config needs a preprocess block");
  const PreprocessSource& p = config.preprocess;
  Signal raw = load_signal(p.signal_path);

  Signal features;
  size_t rri_points = 0;
  if (p.kind == "eda") {
    Signal hp = highpass(raw, p.highpass_hz);
    Signal smooth = moving_average(hp, p.smooth_seconds);
    features = standardize(smooth);
  } else {
    Signal st = standardize(raw);
    std::vector<RriPoint> rri = detect_rri(st);
    rri_points = rri.size();
    if (rri.size() < 5)
      throw ValidationError(strfmt("preprocess: only %zu RRI points; need 5 to resample",
                                   rri.size()));
    std::vector<double> times, values;
    for (const auto& r : rri) {
      times.push_back(r.time);
      values.push_back(r.interval);
    }
    features = standardize(akima_resample(times, values, p.resample_hz));
  }

  const int window = std::max(1, static_cast<int>(std::llround(p.window_seconds * features.rate)));
  const int stride = std::max(1, window / 2);
  std::vector<std::vector<double>> windows = make_windows(features, window, stride);

  ensure_out(config);
  Codebook cb;
  if (!p.codebook_path.empty()) {
    cb = load_codebook(p.codebook_path);
  } else {
    cb = fit_codebook(windows, p.codebook_size, p.iterations,
                      mix_seed(config.seed, hash_id("codebook"), hash_id(p.modality)), stride);
    save_codebook(cb, out_path(config, "codebook_" + p.modality + ".txt"));
  }
  SparseCounts counts = encode_counts(features, cb);

  json j;
  j["modality"] = p.modality;
  j["dimension"] = cb.centers.rows();
  j["windows"] = windows.size();
  if (p.kind == "rri") j["rri_points"] = rri_points;
  json rows = json::array();
  for (const auto& [w, n] : counts) rows.push_back({w, n});
  j["counts"] = std::move(rows);
  std::ofstream out(out_path(config, "counts_" + p.modality + ".json"));
  if (!out) throw IoError("cannot open for writing: " + out_path(config, "counts"));
  out << j.dump(1) << "\n";

  std::cout << "preprocess: " << p.signal_path << " -> " << windows.size() << " windows, "
            << counts.size() << " codes used\n";
}

void cmd_train(const ExperimentConfig& config) {
  config.validate();
  Corpus corpus = source_corpus(config, mix_seed(config.seed, hash_id("synth")));
  config.hierarchy.validate(corpus);

  ensure_out(config);
  Corpus train = corpus;
  if (config.has_split) {
    auto [train_part, test_part] =
        split_stratified(corpus, config.split, mix_seed(config.seed, hash_id("split")));
    save_corpus(train_part, out_path(config, "train.json"));
    save_corpus(test_part, out_path(config, "test.json"));
    train = std::move(train_part);
  }

  HierarchyModel model = train_hierarchy(train, config.hierarchy, config.seed);
  save_hierarchy(model, out_path(config, "model.json"));

  std::ofstream diag(out_path(config, "diagnostics.csv"));
  if (!diag) throw IoError("cannot open for writing: " + out_path(config, "diagnostics.csv"));
  diag << "round,top_loglik";
  for (const auto& c : config.hierarchy.lower) diag << ",delta_" << c.id;
  diag << "\n";
  for (const auto& d : model.diagnostics) {
    diag << d.round << "," << num(d.top_loglik);
    for (double delta : d.message_delta) diag << "," << num(delta);
    diag << "\n";
  }

  const double final_ll =
      model.diagnostics.empty() ? 0.0 : model.diagnostics.back().top_loglik;
  std::cout << "train: " << train.size() << " documents, " << config.hierarchy.rounds
            << " rounds, final top loglik " << num(final_ll) << "\n";
}

static HierarchyModel load_trained(const ExperimentConfig& config) {
  const std::string path = out_path(config, "model.json");
  if (!fs::exists(path))
    throw ConfigError("no trained model at " + path + "; run train first");
  return load_hierarchy(path);
}

// test split if the out directory has one, otherwise the configured corpus
static Corpus eval_corpus(const ExperimentConfig& config) {
  const std::string test_path = out_path(config, "test.json");
  if (fs::exists(test_path)) return load_corpus(test_path);
  return source_corpus(config, mix_seed(config.seed, hash_id("synth")));
}

void cmd_predict(const ExperimentConfig& config, const std::string& source_concept,
                 const std::string& target) {
  config.validate();
  HierarchyModel model = load_trained(config);
  const int src = model.spec.concept_index(source_concept);
  if (src < 0) throw ConfigError("predict: unknown source concept " + source_concept);
  if (model.spec.concept_for_modality(target) < 0)
    throw ConfigError("predict: unknown target modality " + target);
  Corpus corpus = eval_corpus(config);

  const auto& src_modalities = model.spec.lower[static_cast<size_t>(src)].modalities;
  std::ofstream out(out_path(config, "predictions_" + source_concept + "_" + target + ".csv"));
  if (!out) throw IoError("cannot open predictions file for writing");
  out << "doc_id";
  const int t_concept = model.spec.concept_for_modality(target);
  const FittedModel& tm = model.lower[static_cast<size_t>(t_concept)];
  const int dim = tm.phi[static_cast<size_t>(tm.modality_index(target))].cols();
  for (int w = 0; w < dim; ++w) out << ",p" << w;
  out << "\n";
  int rows = 0;
  for (const auto& doc : corpus.documents) {
    Document observed;
    observed.id = doc.id;
    for (const auto& m : src_modalities) {
      auto it = doc.counts.find(m);
      if (it != doc.counts.end() && total_count(it->second) > 0) observed.counts[m] = it->second;
    }
    if (observed.counts.empty()) continue;
    std::vector<double> pred = predict_cross(model, observed, target);
    out << doc.id;
    for (double v : pred) out << "," << num(v);
    out << "\n";
    ++rows;
  }
  std::cout << "predict: " << rows << " documents, " << source_concept << " -> " << target
            << "\n";
}

void cmd_eval(const ExperimentConfig& config) {
  config.validate();
  HierarchyModel model = load_trained(config);
  Corpus test = eval_corpus(config);

  Lexicon lexicon;
  const bool has_lexicon = !config.lexicon_path.empty();
  if (has_lexicon)
    lexicon = load_lexicon(config.lexicon_path, test, config.lexicon_modality);

  EvalReport report = evaluate_predictions(model, test, has_lexicon ? &lexicon : nullptr);
  save_report(report, out_path(config, "eval_rows.csv"), out_path(config, "eval_summary.csv"));
  std::cout << "eval: " << report.rows.size() << " rows, rand " << num(report.rand)
            << ", chance " << num(report.chance) << "\n";
}

static std::vector<int> argmax_rows(const Array2D<double>& m) {
  std::vector<int> out(static_cast<size_t>(m.rows()), 0);
  for (int r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r);
    int best = 0;
    for (int c = 1; c < m.cols(); ++c)
      if (row[c] > row[best]) best = c;
    out[static_cast<size_t>(r)] = best;
  }
  return out;
}

static void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double v : xs) mean += v;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double acc = 0.0;
  for (double v : xs) acc += (v - mean) * (v - mean);
  sd = std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

void cmd_compare(const ExperimentConfig& config) {
  config.validate();
  const HierarchySpec& spec = config.hierarchy;
  const LowerSpec& readout = spec.lower.front();

  std::vector<std::string> names;
  for (const auto& m : readout.modalities) names.push_back("lda_" + m);
  names.push_back("mlda");
  names.push_back("mmlda");
  names.push_back("chance");
  names.push_back("chance_sized");
  std::map<std::string, std::vector<double>> rand_by_model;

  for (int run = 0; run < config.runs; ++run) {
    const std::uint64_t run_seed =
        mix_seed(config.seed, hash_id("compare"), static_cast<std::uint64_t>(run));
    Corpus corpus = source_corpus(config, mix_seed(run_seed, hash_id("synth")));
    spec.validate(corpus);
    if (corpus.labels.empty()) throw ConfigError("compare: corpus carries no labels");

    std::vector<std::string> label_strings;
    for (const auto& d : corpus.documents) label_strings.push_back(corpus.labels.at(d.id));
    std::vector<int> reference = categorize(label_strings);

    // shared Gibbs budget: standalone fits get rounds x lower_sweeps
    ModelConfig base;
    base.K = readout.k;
    base.alpha = spec.alpha;
    base.sweeps = spec.lower_sweeps * spec.rounds;
    base.burn_in = std::min(base.burn_in, base.sweeps / 5);

    for (const auto& m : readout.modalities) {
      Corpus sub = restrict_modalities(corpus, {m});
      ModelConfig cfg = base;
      cfg.beta[m] = spec.beta;
      cfg.seed = mix_seed(run_seed, hash_id("lda_" + m));
      FittedModel lda = fit(sub, cfg);
      rand_by_model["lda_" + m].push_back(rand_index(reference, argmax_rows(lda.theta)));
    }

    Corpus both = restrict_modalities(corpus, readout.modalities);
    ModelConfig mcfg = base;
    for (const auto& m : readout.modalities) mcfg.beta[m] = spec.beta;
    mcfg.seed = mix_seed(run_seed, hash_id("mlda"));
    FittedModel mlda = fit(both, mcfg);
    rand_by_model["mlda"].push_back(rand_index(reference, argmax_rows(mlda.theta)));

    HierarchyModel full = train_hierarchy(corpus, spec, mix_seed(run_seed, hash_id("mmlda")));
    rand_by_model["mmlda"].push_back(rand_index(reference, argmax_rows(full.lower.front().theta)));

    rand_by_model["chance"].push_back(
        chance_rand(reference, readout.k, 20000, mix_seed(run_seed, hash_id("chance"))));
    rand_by_model["chance_sized"].push_back(
        chance_rand_sized(reference, 20000, mix_seed(run_seed, hash_id("chance_sized"))));
  }

  ensure_out(config);
  std::ofstream out(out_path(config, "compare.csv"));
  if (!out) throw IoError("cannot open for writing: " + out_path(config, "compare.csv"));
  out << "model,runs,mean_rand,sd_rand\n";
  std::cout << "compare over " << config.runs << " runs:\n";
  for (const auto& name : names) {
    double mean = 0.0, sd = 0.0;
    mean_sd(rand_by_model[name], mean, sd);
    out << name << "," << config.runs << "," << num(mean) << "," << num(sd) << "\n";
    std::cout << "  " << name << ": " << num(mean) << " +- " << num(sd) << "\n";
  }
}

void cmd_report(const ExperimentConfig& config) {
  config.validate();
  const std::vector<std::pair<std::string, std::string>> sections = {
      {"training diagnostics", "diagnostics.csv"},
      {"evaluation summary", "eval_summary.csv"},
      {"model comparison", "compare.csv"},
  };
  int found = 0;
  std::ostringstream body;
  for (const auto& [title, name] : sections) {
    const std::string path = out_path(config, name);
    if (!fs::exists(path)) continue;
    std::ifstream in(path);
    body << "== " << title << " (" << name << ") ==\n" << in.rdbuf() << "\n";
    ++found;
  }
  if (found == 0)
    throw ConfigError("report: no artifacts in " + config.out_dir +
                      "; run train/eval/compare first");
  ensure_out(config);
  std::ofstream out(out_path(config, "report.txt"));
  if (!out) throw IoError("cannot open for writing: " + out_path(config, "report.txt"));
  out << body.str();
  std::cout << "report: " << found << " sections -> " << out_path(config, "report.txt") << "\n";
}

}  // namespace mmlda
