#include "mmlda/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "mmlda/errors.hpp"
#include "mmlda/rng.hpp"

namespace mmlda {

static double pairs2(long long n) { return 0.5 * static_cast<double>(n) * (n - 1); }

double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw ValidationError(strfmt("rand_index: lengths differ (%zu vs %zu)", a.size(), b.size()));
  const long long n = static_cast<long long>(a.size());
  if (n < 2) throw ValidationError("rand_index: need at least 2 items");
  std::map<int, long long> ca, cb;
  std::map<std::pair<int, int>, long long> cab;
  for (size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++cab[{a[i], b[i]}];
  }
  double sa = 0.0, sb = 0.0, sab = 0.0;
  for (const auto& [k, c] : ca) sa += pairs2(c);
  for (const auto& [k, c] : cb) sb += pairs2(c);
  for (const auto& [k, c] : cab) sab += pairs2(c);
  const double total = pairs2(n);
  return (total - sa - sb + 2.0 * sab) / total;
}

std::vector<int> categorize(const std::vector<std::string>& labels) {
  std::map<std::string, int> codes;
  std::vector<int> out;
  for (const auto& s : labels)
    out.push_back(codes.emplace(s, static_cast<int>(codes.size())).first->second);
  return out;
}

double chance_rand(const std::vector<int>& reference, int k, int trials, std::uint64_t seed) {
  if (k < 1) throw ConfigError("chance_rand: k must be >= 1");
  if (trials < 1) throw ConfigError("chance_rand: trials must be >= 1");
  const size_t n = reference.size();
  std::vector<double> per_trial(static_cast<size_t>(trials), 0.0);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<int> random(n);
    for (size_t i = 0; i < n; ++i)
      random[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    per_trial[static_cast<size_t>(t)] = rand_index(reference, random);
  }
  double sum = 0.0;
  for (double v : per_trial) sum += v;
  return sum / trials;
}

double chance_rand_sized(const std::vector<int>& reference, int trials, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("chance_rand_sized: trials must be >= 1");
  std::vector<double> per_trial(static_cast<size_t>(trials), 0.0);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<int> shuffled = reference;
    for (size_t i = shuffled.size() - 1; i > 0; --i)
      std::swap(shuffled[i], shuffled[rng.below(static_cast<std::uint64_t>(i + 1))]);
    per_trial[static_cast<size_t>(t)] = rand_index(reference, shuffled);
  }
  double sum = 0.0;
  for (double v : per_trial) sum += v;
  return sum / trials;
}

double kl_divergence(const SparseCounts& actual, const std::vector<double>& predicted) {
  long long total = 0;
  for (const auto& [w, c] : actual) {
    if (w < 0 || w >= static_cast<int>(predicted.size()))
      throw ValidationError(strfmt("kl_divergence: index %d outside dimension %zu", w,
                                   predicted.size()));
    if (c < 0) throw ValidationError("kl_divergence: negative count");
    total += c;
  }
  if (total <= 0) throw ValidationError("kl_divergence: actual has no mass");
  double kl = 0.0;
  for (const auto& [w, c] : actual) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    const double q = predicted[static_cast<size_t>(w)];
    if (!(q > 0.0)) {
      std::fprintf(stderr, "warning: kl_divergence: predicted mass 0 at index %d\n", w);
      return std::numeric_limits<double>::infinity();
    }
    kl += p * std::log(p / q);
  }
  return std::max(kl, 0.0);  // clamp tiny negative rounding when p == q
}

double uniform_kl(const SparseCounts& actual, int dimension) {
  if (dimension < 1) throw ConfigError("uniform_kl: dimension must be >= 1");
  return kl_divergence(actual, std::vector<double>(static_cast<size_t>(dimension),
                                                   1.0 / dimension));
}

Restricted restrict_lexicon(const SparseCounts& actual, const std::vector<double>& predicted,
                            const Lexicon& lexicon) {
  if (lexicon.indices.empty()) throw ValidationError("restrict_lexicon: empty lexicon");
  std::map<int, int> pos;
  for (size_t i = 0; i < lexicon.indices.size(); ++i) {
    const int w = lexicon.indices[i];
    if (w < 0 || w >= static_cast<int>(predicted.size()))
      throw ValidationError(strfmt("restrict_lexicon: lexicon index %d outside dimension %zu",
                                   w, predicted.size()));
    pos.emplace(w, static_cast<int>(i));
  }
  Restricted out;
  out.predicted.resize(lexicon.indices.size());
  double psum = 0.0;
  for (size_t i = 0; i < lexicon.indices.size(); ++i) {
    out.predicted[i] = predicted[static_cast<size_t>(lexicon.indices[i])];
    psum += out.predicted[i];
  }
  if (psum > 0.0)
    for (double& v : out.predicted) v /= psum;
  long long mass = 0;
  for (const auto& [w, c] : actual) {
    auto it = pos.find(w);
    if (it == pos.end()) continue;
    out.actual.emplace_back(it->second, c);
    mass += c;
  }
  std::sort(out.actual.begin(), out.actual.end());
  out.excluded = mass <= 0;
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

EvalReport evaluate_predictions(const HierarchyModel& model, const Corpus& test,
                                const Lexicon* lexicon) {
  test.validate();
  const HierarchySpec& spec = model.spec;
  EvalReport report;
  const int M = test.size();

  // emotion readout: first lower concept's classify against the labels
  if (!test.labels.empty() && M >= 2) {
    const LowerSpec& readout = spec.lower.front();
    const FittedModel& rm = model.lower.front();
    Corpus restricted = restrict_modalities(test, readout.modalities);
    Array2D<double> post = infer_many(rm, restricted, InferOptions{}, rm.config.seed);
    std::vector<int> predicted(static_cast<size_t>(M), 0);
    for (int j = 0; j < M; ++j) {
      const double* row = post.row(j);
      int best = 0;
      for (int c = 1; c < post.cols(); ++c)
        if (row[c] > row[best]) best = c;
      predicted[static_cast<size_t>(j)] = best;
    }
    std::vector<std::string> label_strings;
    for (const auto& d : test.documents) label_strings.push_back(test.labels.at(d.id));
    std::vector<int> reference = categorize(label_strings);
    report.rand = rand_index(reference, predicted);
    report.chance = chance_rand(reference, readout.k, 20000, 9001);
    report.chance_sized = chance_rand_sized(reference, 20000, 9002);
  }

  // row plan: (doc, source concept, target modality) with the target owned
  // by a different concept and actually counted in the document
  std::vector<std::vector<KlRow>> per_doc(static_cast<size_t>(M));
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < M; ++j) {
    const Document& doc = test.documents[static_cast<size_t>(j)];
    for (const auto& src : spec.lower) {
      Document observed;
      observed.id = doc.id;
      for (const auto& m : src.modalities) {
        auto it = doc.counts.find(m);
        if (it != doc.counts.end() && total_count(it->second) > 0) observed.counts[m] = it->second;
      }
      if (observed.counts.empty()) continue;
      for (const auto& ms : test.specs) {
        if (spec.concept_for_modality(ms.id) == spec.concept_index(src.id)) continue;
        auto it = doc.counts.find(ms.id);
        if (it == doc.counts.end() || total_count(it->second) <= 0) continue;
        std::vector<double> predicted = predict_cross(model, observed, ms.id);
        if (static_cast<int>(predicted.size()) != ms.dimension)
          throw ValidationError(strfmt("evaluate_predictions: model dimension %zu != corpus "
                                       "dimension %d for %s",
                                       predicted.size(), ms.dimension, ms.id.c_str()));
        KlRow row;
        row.doc_id = doc.id;
        row.source = src.id;
        row.target = ms.id;
        row.kl_predicted = kl_divergence(it->second, predicted);
        row.kl_uniform = uniform_kl(it->second, ms.dimension);
        if (lexicon && lexicon->modality == ms.id) {
          Restricted r = restrict_lexicon(it->second, predicted, *lexicon);
          row.lex_applies = true;
          row.lex_excluded = r.excluded;
          if (!r.excluded) {
            row.kl_predicted_lex = kl_divergence(r.actual, r.predicted);
            row.kl_uniform_lex =
                uniform_kl(r.actual, static_cast<int>(lexicon->indices.size()));
          }
        }
        per_doc[static_cast<size_t>(j)].push_back(std::move(row));
      }
    }
  }
  for (auto& rows : per_doc)
    for (auto& row : rows) report.rows.push_back(std::move(row));

  for (const auto& src : spec.lower) {
    for (const auto& ms : test.specs) {
      std::vector<double> kp, ku, kpl, kul;
      for (const auto& row : report.rows) {
        if (row.source != src.id || row.target != ms.id) continue;
        kp.push_back(row.kl_predicted);
        ku.push_back(row.kl_uniform);
        if (row.lex_applies && !row.lex_excluded) {
          kpl.push_back(row.kl_predicted_lex);
          kul.push_back(row.kl_uniform_lex);
        }
      }
      if (kp.empty()) continue;
      TargetSummary s;
      s.source = src.id;
      s.target = ms.id;
      s.rows = static_cast<int>(kp.size());
      mean_sd(kp, s.mean_predicted, s.sd_predicted);
      mean_sd(ku, s.mean_uniform, s.sd_uniform);
      s.lex_rows = static_cast<int>(kpl.size());
      mean_sd(kpl, s.mean_predicted_lex, s.sd_predicted_lex);
      mean_sd(kul, s.mean_uniform_lex, s.sd_uniform_lex);
      report.summary.push_back(std::move(s));
    }
  }
  return report;
}

static std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void save_report(const EvalReport& report, const std::string& rows_path,
                 const std::string& summary_path) {
  std::ofstream rows(rows_path);
  if (!rows) throw IoError("cannot open for writing: " + rows_path);
  rows << "doc_id,source,target,kl_predicted,kl_uniform,"
          "kl_predicted_lex,kl_uniform_lex,lex_status\n";
  for (const auto& r : report.rows) {
    rows << r.doc_id << "," << r.source << "," << r.target << "," << num(r.kl_predicted) << ","
         << num(r.kl_uniform) << ",";
    if (r.lex_applies && !r.lex_excluded)
      rows << num(r.kl_predicted_lex) << "," << num(r.kl_uniform_lex) << ",ok\n";
    else if (r.lex_applies)
      rows << ",,excluded\n";
    else
      rows << ",,none\n";
  }
  if (!rows) throw IoError("write failed: " + rows_path);

  std::ofstream sum(summary_path);
  if (!sum) throw IoError("cannot open for writing: " + summary_path);
  sum << "rand," << num(report.rand) << "\n";
  sum << "chance_rand," << num(report.chance) << "\n";
  sum << "chance_rand_sized," << num(report.chance_sized) << "\n";
  sum << "source,target,rows,mean_predicted,sd_predicted,mean_uniform,sd_uniform,"
         "lex_rows,mean_predicted_lex,sd_predicted_lex,mean_uniform_lex,sd_uniform_lex\n";
  for (const auto& s : report.summary) {
    sum << s.source << "," << s.target << "," << s.rows << "," << num(s.mean_predicted) << ","
        << num(s.sd_predicted) << "," << num(s.mean_uniform) << "," << num(s.sd_uniform) << ","
        << s.lex_rows << "," << num(s.mean_predicted_lex) << "," << num(s.sd_predicted_lex) << ","
        << num(s.mean_uniform_lex) << "," << num(s.sd_uniform_lex) << "\n";
  }
  if (!sum) throw IoError("write failed: " + summary_path);
}

}  // namespace mmlda
