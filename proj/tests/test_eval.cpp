#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmlda/errors.hpp"
#include "mmlda/eval.hpp"
#include "mmlda/rng.hpp"
#include "mmlda/synth.hpp"
#include "oracles.hpp"

using namespace mmlda;
namespace fs = std::filesystem;

static fs::path work_dir() {
  fs::path p = fs::temp_directory_path() / "mmlda_test_eval";
  fs::create_directories(p);
  return p;
}

TEST_CASE("rand index on hand-counted partitions") {
  CHECK(rand_index({0, 0, 1}, {0, 1, 1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(rand_index({0, 1, 2, 3}, {3, 2, 1, 0}) == 1.0);
  CHECK(rand_index({0, 0, 1}, {5, 5, 2}) == 1.0);  // labels are arbitrary
  CHECK(rand_index({0, 0, 1}, {0, 1, 1}) == rand_index({0, 1, 1}, {0, 0, 1}));

  std::vector<int> a = {0, 0, 1, 2, 1, 0};
  std::vector<int> b = {1, 0, 1, 1, 2, 0};
  std::vector<int> b_relabeled = {2, 0, 2, 2, 1, 0};  // 1->2, 2->1
  CHECK(rand_index(a, b) == rand_index(a, b_relabeled));

  CHECK_THROWS_AS(rand_index({0, 1}, {0, 1, 2}), ValidationError);
  CHECK_THROWS_AS(rand_index({0}, {0}), ValidationError);
}

TEST_CASE("categorize assigns codes by first appearance") {
  CHECK(categorize({"b", "a", "b", "c"}) == std::vector<int>{0, 1, 0, 2});
  CHECK(categorize({}).empty());
  CHECK(categorize({"x", "x"}) == std::vector<int>{0, 0});
}

TEST_CASE("chance level of a single-category assigner is exact") {
  CHECK(chance_rand({0, 0, 0}, 1, 5, 1) == 1.0);
  // against (2,1) sizes every trial agrees on exactly the one same pair
  CHECK(chance_rand({0, 0, 1}, 1, 5, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(chance_rand_sized({0, 0, 0}, 5, 1) == 1.0);

  CHECK_THROWS_AS(chance_rand({0, 1}, 0, 5, 1), ConfigError);
  CHECK_THROWS_AS(chance_rand({0, 1}, 2, 0, 1), ConfigError);
  CHECK_THROWS_AS(chance_rand_sized({0, 1}, 0, 1), ConfigError);
}

TEST_CASE("chance levels match closed forms on small partitions") {
  // sizes (3,2,1): same-pair fraction q = 4/15
  std::vector<int> ref = {0, 0, 0, 1, 1, 2};
  // uniform K=3: E = q/3 + (1-q)*2/3 = 26/45
  CHECK(std::abs(chance_rand(ref, 3, 20000, 77) - 26.0 / 45.0) < 0.01);
  // size-matched: E = q^2 + (1-q)^2 = 137/225
  CHECK(std::abs(chance_rand_sized(ref, 20000, 78) - 137.0 / 225.0) < 0.01);
}

TEST_CASE("chance level of the reference composition") {
  // sizes (8,26,18,6) plus two singletons: q = 521/1770, K=4 chance
  // 3/4 - q/2 = 0.602825
  std::vector<int> ref;
  const int sizes[6] = {8, 26, 18, 6, 1, 1};
  for (int c = 0; c < 6; ++c) ref.insert(ref.end(), static_cast<size_t>(sizes[c]), c);
  REQUIRE(ref.size() == 60);
  CHECK(std::abs(chance_rand(ref, 4, 4000, 5) - (0.75 - 521.0 / 3540.0)) < 0.01);
}

TEST_CASE("KL divergence: zero, closed form, brute force, edge cases") {
  CHECK(kl_divergence({{0, 2}, {1, 6}}, {0.25, 0.75}) == 0.0);
  CHECK(kl_divergence({{0, 4}}, {0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Rng rng(23);
  SparseCounts actual;
  std::vector<double> predicted(20);
  double psum = 0.0;
  for (int w = 0; w < 20; ++w) {
    if (w % 3 != 2) actual.emplace_back(w, 1 + static_cast<int>(rng.below(9)));
    psum += predicted[static_cast<size_t>(w)] = 0.05 + rng.uniform01();
  }
  for (double& v : predicted) v /= psum;
  long long total = total_count(actual);
  double want = 0.0;
  for (auto& [w, c] : actual) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    want += p * std::log(p / predicted[static_cast<size_t>(w)]);
  }
  CHECK(kl_divergence(actual, predicted) == doctest::Approx(want).epsilon(1e-12));
  CHECK(kl_divergence(actual, predicted) >= 0.0);

  CHECK(std::isinf(kl_divergence({{0, 1}, {1, 1}}, {1.0, 0.0})));
  CHECK_THROWS_AS(kl_divergence({{5, 1}}, {0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(kl_divergence({{0, -1}}, {0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(kl_divergence({{0, 0}}, {0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(kl_divergence({}, {0.5, 0.5}), ValidationError);
}

TEST_CASE("uniform KL is KL against the flat distribution") {
  SparseCounts act = {{1, 3}, {4, 2}, {6, 5}};
  CHECK(uniform_kl(act, 7) == kl_divergence(act, std::vector<double>(7, 1.0 / 7.0)));
  CHECK(uniform_kl({{0, 1}, {1, 1}}, 2) == 0.0);
  CHECK_THROWS_AS(uniform_kl(act, 0), ConfigError);
}

TEST_CASE("lexicon restriction remaps, renormalizes, and flags empties") {
  SparseCounts actual = {{0, 2}, {2, 3}, {4, 1}};
  std::vector<double> predicted = {0.1, 0.2, 0.3, 0.15, 0.25};
  Lexicon lex{"m", {2, 4}};

  Restricted r = restrict_lexicon(actual, predicted, lex);
  CHECK(!r.excluded);
  CHECK(r.actual == SparseCounts{{0, 3}, {1, 1}});
  REQUIRE(r.predicted.size() == 2);
  CHECK(r.predicted[0] == doctest::Approx(0.3 / 0.55).epsilon(1e-12));
  CHECK(r.predicted[1] == doctest::Approx(0.25 / 0.55).epsilon(1e-12));
  CHECK(r.predicted[0] + r.predicted[1] == doctest::Approx(1.0).epsilon(1e-12));

  Lexicon all{"m", {0, 1, 2, 3, 4}};
  Restricted rid = restrict_lexicon(actual, predicted, all);
  CHECK(rid.actual == actual);
  for (size_t i = 0; i < predicted.size(); ++i)
    CHECK(rid.predicted[i] == doctest::Approx(predicted[i]).epsilon(1e-12));

  Lexicon disjoint{"m", {1, 3}};
  CHECK(restrict_lexicon(actual, predicted, disjoint).excluded);

  CHECK_THROWS_AS(restrict_lexicon(actual, predicted, Lexicon{"m", {}}), ValidationError);
  CHECK_THROWS_AS(restrict_lexicon(actual, predicted, Lexicon{"m", {9}}), ValidationError);
}

// small trained hierarchy over a separable synthetic corpus
static std::pair<HierarchyModel, Corpus> trained_pair() {
  HierarchySpec spec;
  spec.lower = {{"A", {"ma"}, 2}, {"B", {"mb"}, 2}};
  spec.top_k = 2;
  spec.rounds = 2;
  spec.lower_sweeps = 20;
  spec.top_sweeps = 30;
  spec.weight = 50;
  spec.beta = 0.1;
  GenParams params = make_separable_params(spec, {{"ma", 4}, {"mb", 4}},
                                           {{"ma", 20}, {"mb", 20}}, 10, 0.1, 13);
  auto [corpus, truth] = sample_corpus(params, 21);
  HierarchyModel model = train_hierarchy(corpus, spec, 31);
  return {std::move(model), std::move(corpus)};
}

TEST_CASE("prediction evaluation emits one row per observed source/target pair") {
  auto [model, corpus] = trained_pair();
  EvalReport report = evaluate_predictions(model, corpus);

  CHECK(report.rand >= 0.0);
  CHECK(report.rand <= 1.0);
  CHECK(report.chance > 0.0);
  CHECK(report.chance <= 1.0);
  CHECK(report.chance_sized > 0.0);

  REQUIRE(report.rows.size() == 20);  // 10 docs x (A->mb, B->ma)
  for (size_t i = 0; i < report.rows.size(); i += 2) {
    CHECK(report.rows[i].doc_id == report.rows[i + 1].doc_id);  // grouped by document
    CHECK(report.rows[i].source == "A");
    CHECK(report.rows[i].target == "mb");
    CHECK(report.rows[i + 1].source == "B");
    CHECK(report.rows[i + 1].target == "ma");
  }
  for (const auto& row : report.rows) {
    CHECK(std::isfinite(row.kl_predicted));
    CHECK(row.kl_predicted >= 0.0);
    CHECK(row.kl_uniform >= 0.0);
    CHECK(!row.lex_applies);
  }

  REQUIRE(report.summary.size() == 2);
  for (const auto& s : report.summary) {
    CHECK(s.rows == 10);
    CHECK(s.lex_rows == 0);
    double mean = 0.0;
    std::vector<double> vals;
    for (const auto& row : report.rows)
      if (row.source == s.source && row.target == s.target) vals.push_back(row.kl_predicted);
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double acc = 0.0;
    for (double v : vals) acc += (v - mean) * (v - mean);
    CHECK(s.mean_predicted == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.sd_predicted ==
          doctest::Approx(std::sqrt(acc / (static_cast<double>(vals.size()) - 1.0))).epsilon(1e-12));
  }

  // dropping one document's mb counts removes both of its rows
  Corpus partial = corpus;
  partial.documents[0].counts.erase("mb");
  EvalReport smaller = evaluate_predictions(model, partial);
  CHECK(smaller.rows.size() == 18);
}

TEST_CASE("prediction evaluation applies a lexicon to its modality only") {
  auto [model, corpus] = trained_pair();
  Lexicon lex{"mb", {0, 1}};
  EvalReport report = evaluate_predictions(model, corpus, &lex);
  int applied = 0, excluded = 0;
  for (const auto& row : report.rows) {
    if (row.target == "mb") {
      CHECK(row.lex_applies);
      ++applied;
      if (row.lex_excluded) {
        ++excluded;
        continue;
      }
      // recompute the restricted divergence for this document
      const Document* doc = nullptr;
      for (const auto& d : corpus.documents)
        if (d.id == row.doc_id) doc = &d;
      REQUIRE(doc != nullptr);
      Document observed;
      observed.id = doc->id;
      observed.counts["ma"] = doc->counts.at("ma");
      auto predicted = predict_cross(model, observed, "mb");
      Restricted r = restrict_lexicon(doc->counts.at("mb"), predicted, lex);
      CHECK(row.kl_predicted_lex == kl_divergence(r.actual, r.predicted));
      CHECK(row.kl_uniform_lex == uniform_kl(r.actual, 2));
    } else {
      CHECK(!row.lex_applies);
    }
  }
  CHECK(applied == 10);
  for (const auto& s : report.summary)
    if (s.target == "mb") CHECK(s.lex_rows == applied - excluded);
}

TEST_CASE("degenerate single-category model scores a perfect rand against one label") {
  Corpus corpus;
  corpus.specs = {{"ma", 2}, {"mb", 2}};
  for (int j = 0; j < 4; ++j) {
    Document d;
    d.id = "d" + std::to_string(j);
    d.counts["ma"] = {{j % 2, 3}};
    d.counts["mb"] = {{(j + 1) % 2, 3}};
    corpus.documents.push_back(d);
    corpus.labels[d.id] = "same";
  }
  HierarchySpec spec;
  spec.lower = {{"A", {"ma"}, 1}, {"B", {"mb"}, 1}};
  spec.top_k = 1;
  spec.rounds = 1;
  spec.lower_sweeps = 5;
  spec.top_sweeps = 5;
  HierarchyModel model = train_hierarchy(corpus, spec, 1);
  EvalReport report = evaluate_predictions(model, corpus);
  CHECK(report.rand == 1.0);
  CHECK(report.chance == 1.0);
  CHECK(report.chance_sized == 1.0);

  Corpus unlabeled = corpus;
  unlabeled.labels.clear();
  EvalReport quiet = evaluate_predictions(model, unlabeled);
  CHECK(quiet.rand == -1.0);
  CHECK(quiet.chance == -1.0);
  CHECK(quiet.chance_sized == -1.0);
  CHECK(quiet.rows.size() == report.rows.size());
}

TEST_CASE("report files carry the expected layout") {
  auto [model, corpus] = trained_pair();
  Lexicon lex{"mb", {0, 1}};
  EvalReport report = evaluate_predictions(model, corpus, &lex);
  fs::path rows_path = work_dir() / "rows.csv";
  fs::path sum_path = work_dir() / "summary.csv";
  save_report(report, rows_path.string(), sum_path.string());

  std::ifstream rows_in(rows_path);
  std::string line;
  REQUIRE(std::getline(rows_in, line));
  CHECK(line ==
        "doc_id,source,target,kl_predicted,kl_uniform,kl_predicted_lex,kl_uniform_lex,lex_status");
  int data_lines = 0, ok_lines = 0, none_lines = 0;
  while (std::getline(rows_in, line)) {
    ++data_lines;
    if (line.find(",ok") != std::string::npos) ++ok_lines;
    if (line.find(",,none") != std::string::npos) ++none_lines;
  }
  CHECK(data_lines == static_cast<int>(report.rows.size()));
  CHECK(none_lines == 10);  // every ma-target row lacks a lexicon
  int expect_ok = 0;
  for (const auto& row : report.rows) expect_ok += row.lex_applies && !row.lex_excluded;
  CHECK(ok_lines == expect_ok);

  std::ifstream sum_in(sum_path);
  REQUIRE(std::getline(sum_in, line));
  CHECK(line.rfind("rand,", 0) == 0);
  REQUIRE(std::getline(sum_in, line));
  CHECK(line.rfind("chance_rand,", 0) == 0);
  REQUIRE(std::getline(sum_in, line));
  CHECK(line.rfind("chance_rand_sized,", 0) == 0);
  REQUIRE(std::getline(sum_in, line));
  CHECK(line ==
        "source,target,rows,mean_predicted,sd_predicted,mean_uniform,sd_uniform,lex_rows,"
        "mean_predicted_lex,sd_predicted_lex,mean_uniform_lex,sd_uniform_lex");
  int summary_lines = 0;
  while (std::getline(sum_in, line)) ++summary_lines;
  CHECK(summary_lines == static_cast<int>(report.summary.size()));
}
