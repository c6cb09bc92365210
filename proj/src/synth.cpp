#include "mmlda/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "mmlda/errors.hpp"
#include "mmlda/rng.hpp"
#include "model_json.hpp"

namespace mmlda {

using nlohmann::json;

static void check_simplex_rows(const Array2D<double>& m, const std::string& what) {
  for (int r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (int c = 0; c < m.cols(); ++c) {
      if (!(m(r, c) >= 0.0))
        throw ValidationError(strfmt("%s: negative entry in row %d", what.c_str(), r));
      sum += m(r, c);
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ValidationError(strfmt("%s: row %d sums to %.12g", what.c_str(), r, sum));
  }
}

void GenParams::validate() const {
  if (spec.lower.empty()) throw ValidationError("gen params: empty hierarchy spec");
  if (spec.top_k < 1) throw ValidationError("gen params: top_k must be >= 1");
  if (docs < 0) throw ValidationError("gen params: negative document count");
  if (static_cast<int>(top_prior.size()) != spec.top_k)
    throw ValidationError("gen params: top prior length != top_k");
  double psum = 0.0;
  for (double p : top_prior) {
    if (!(p >= 0.0)) throw ValidationError("gen params: negative top prior entry");
    psum += p;
  }
  if (std::abs(psum - 1.0) > 1e-9) throw ValidationError("gen params: top prior must sum to 1");
  if (!top_counts.empty()) {
    if (static_cast<int>(top_counts.size()) != spec.top_k)
      throw ValidationError("gen params: top_counts length != top_k");
    int total = 0;
    for (int n : top_counts) {
      if (n < 0) throw ValidationError("gen params: negative top_counts entry");
      total += n;
    }
    if (total != docs) throw ValidationError("gen params: top_counts must sum to docs");
  }
  if (static_cast<int>(labels.size()) != spec.top_k)
    throw ValidationError("gen params: labels length != top_k");
  for (const auto& c : spec.lower) {
    auto it = mapping.find(c.id);
    if (it == mapping.end())
      throw ValidationError("gen params: missing mapping for concept " + c.id);
    if (it->second.rows() != spec.top_k || it->second.cols() != c.k)
      throw ValidationError("gen params: mapping shape mismatch for concept " + c.id);
    check_simplex_rows(it->second, "mapping " + c.id);
    for (const auto& m : c.modalities) {
      auto pit = phi.find(m);
      if (pit == phi.end()) throw ValidationError("gen params: missing phi for modality " + m);
      if (pit->second.rows() != c.k || pit->second.cols() < 1)
        throw ValidationError("gen params: phi shape mismatch for modality " + m);
      check_simplex_rows(pit->second, "phi " + m);
      auto tit = tokens_per_doc.find(m);
      if (tit == tokens_per_doc.end() || tit->second < 0)
        throw ValidationError("gen params: tokens_per_doc missing or negative for " + m);
    }
  }
}

// spillover cells get a seeded jitter, then rescale so the block keeps
// exactly 1 - concentration
static Array2D<double> block_rows(int k, int w, double concentration, Rng& rng) {
  Array2D<double> m(k, w, 0.0);
  for (int c = 0; c < k; ++c) {
    const int lo = static_cast<int>(static_cast<long long>(c) * w / k);
    const int hi = static_cast<int>(static_cast<long long>(c + 1) * w / k);
    const int block = hi - lo;
    const int off = w - block;
    if (off == 0) {
      for (int i = lo; i < hi; ++i) m(c, i) = 1.0 / block;
      continue;
    }
    for (int i = lo; i < hi; ++i) m(c, i) = (1.0 - concentration) / block;
    double off_sum = 0.0;
    for (int i = 0; i < w; ++i) {
      if (i >= lo && i < hi) continue;
      const double v = 0.5 + rng.uniform01();
      m(c, i) = v;
      off_sum += v;
    }
    for (int i = 0; i < w; ++i) {
      if (i >= lo && i < hi) continue;
      m(c, i) *= concentration / off_sum;
    }
  }
  return m;
}

GenParams make_separable_params(const HierarchySpec& spec, const std::map<std::string, int>& dims,
                                const std::map<std::string, int>& tokens_per_doc, int docs,
                                double concentration, std::uint64_t seed) {
  if (!(concentration > 0.0) || concentration > 1.0)
    throw ConfigError("make_separable_params: concentration must be in (0, 1]");
  GenParams params;
  params.spec = spec;
  params.docs = docs;
  params.top_prior.assign(static_cast<size_t>(spec.top_k), 1.0 / spec.top_k);
  for (int t = 0; t < spec.top_k; ++t) params.labels.push_back(strfmt("cat_%d", t));
  for (const auto& c : spec.lower) {
    Rng rng(mix_seed(seed, hash_id(c.id)));
    params.mapping[c.id] = block_rows(spec.top_k, c.k, concentration, rng);
    for (const auto& m : c.modalities) {
      auto it = dims.find(m);
      if (it == dims.end()) throw ConfigError("make_separable_params: no dimension for " + m);
      if (it->second < c.k)
        throw ValidationError(strfmt("make_separable_params: dimension %d < K %d for %s",
                                     it->second, c.k, m.c_str()));
      Rng mrng(mix_seed(seed, hash_id(m)));
      params.phi[m] = block_rows(c.k, it->second, concentration, mrng);
      auto tit = tokens_per_doc.find(m);
      if (tit == tokens_per_doc.end())
        throw ConfigError("make_separable_params: no tokens_per_doc for " + m);
      params.tokens_per_doc[m] = tit->second;
    }
  }
  params.validate();
  return params;
}

// (8, 26, 18, 6) of 60, scaled by largest remainder for other sizes
static std::vector<int> scaled_sizes(int docs) {
  const double base[4] = {8.0, 26.0, 18.0, 6.0};
  std::vector<int> sizes(4);
  std::vector<std::pair<double, int>> rem;
  int total = 0;
  for (int i = 0; i < 4; ++i) {
    const double exact = base[i] * docs / 60.0;
    sizes[static_cast<size_t>(i)] = static_cast<int>(std::floor(exact));
    total += sizes[static_cast<size_t>(i)];
    rem.push_back({exact - std::floor(exact), i});
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; total < docs; ++i, ++total) ++sizes[static_cast<size_t>(rem[static_cast<size_t>(i % 4)].second)];
  return sizes;
}

static HierarchySpec desk_spec() {
  HierarchySpec spec;
  spec.lower = {{"I", {"eda", "rri"}, 4}, {"V", {"vision"}, 4}, {"W", {"word"}, 4}};
  spec.top_k = 4;
  return spec;
}

GenParams default_gen_params(int docs, double concentration, std::uint64_t seed) {
  const std::map<std::string, int> dims = {
      {"eda", 128}, {"rri", 128}, {"vision", 256}, {"word", 512}};
  const std::map<std::string, int> tokens = {
      {"eda", 100}, {"rri", 100}, {"vision", 100}, {"word", 100}};
  GenParams params = make_separable_params(desk_spec(), dims, tokens, docs, concentration, seed);
  params.top_counts = scaled_sizes(docs);
  params.labels = {"hv_ha", "lv_ha", "lv_la", "hv_la"};
  params.validate();
  return params;
}

GenParams make_complementary_params(int docs, double concentration, std::uint64_t seed) {
  const std::map<std::string, int> dims = {
      {"eda", 64}, {"rri", 64}, {"vision", 128}, {"word", 128}};
  const std::map<std::string, int> tokens = {
      {"eda", 60}, {"rri", 60}, {"vision", 60}, {"word", 60}};
  GenParams params = make_separable_params(desk_spec(), dims, tokens, docs, concentration, seed);
  // overwrite the physiology rows: category c uses block c>>1 (eda) / c&1 (rri)
  Rng erng(mix_seed(seed, hash_id("eda"), 1));
  Array2D<double> eda_base = block_rows(2, dims.at("eda"), concentration, erng);
  Rng rrng(mix_seed(seed, hash_id("rri"), 1));
  Array2D<double> rri_base = block_rows(2, dims.at("rri"), concentration, rrng);
  Array2D<double>& eda = params.phi["eda"];
  Array2D<double>& rri = params.phi["rri"];
  for (int c = 0; c < 4; ++c)
    for (int w = 0; w < dims.at("eda"); ++w) {
      eda(c, w) = eda_base(c >> 1, w);
      rri(c, w) = rri_base(c & 1, w);
    }
  std::vector<int> sizes(4, docs / 4);
  for (int i = 0; i < docs % 4; ++i) ++sizes[static_cast<size_t>(i)];
  params.top_counts = std::move(sizes);
  params.validate();
  return params;
}

std::pair<Corpus, GroundTruth> sample_corpus(const GenParams& params, std::uint64_t seed) {
  params.validate();
  const int M = params.docs;

  GroundTruth truth;
  truth.params = params;
  truth.top_category.resize(static_cast<size_t>(M));
  std::vector<std::vector<int>> concept_cat(params.spec.lower.size(),
                                            std::vector<int>(static_cast<size_t>(M), 0));

  Corpus corpus;
  for (const auto& c : params.spec.lower)
    for (const auto& m : c.modalities)
      corpus.specs.push_back({m, params.phi.at(m).cols()});
  corpus.documents.resize(static_cast<size_t>(M));

  std::vector<std::string> doc_ids(static_cast<size_t>(M));
  for (int j = 0; j < M; ++j) doc_ids[static_cast<size_t>(j)] = strfmt("doc_%04d", j);

  if (!params.top_counts.empty()) {
    std::vector<int> cats;
    for (int t = 0; t < params.spec.top_k; ++t)
      cats.insert(cats.end(), static_cast<size_t>(params.top_counts[static_cast<size_t>(t)]), t);
    Rng shuffle_rng(mix_seed(seed, hash_id("composition")));
    for (int i = M - 1; i > 0; --i)
      std::swap(cats[static_cast<size_t>(i)],
                cats[shuffle_rng.below(static_cast<std::uint64_t>(i + 1))]);
    truth.top_category = std::move(cats);
  }

#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < M; ++j) {
    Rng rng(mix_seed(seed, hash_id(doc_ids[static_cast<size_t>(j)])));
    int top;
    if (params.top_counts.empty()) {
      top = rng.categorical(params.top_prior.data(), params.spec.top_k);
      truth.top_category[static_cast<size_t>(j)] = top;
    } else {
      top = truth.top_category[static_cast<size_t>(j)];
    }
    Document d;
    d.id = doc_ids[static_cast<size_t>(j)];
    for (size_t ci = 0; ci < params.spec.lower.size(); ++ci) {
      const auto& c = params.spec.lower[ci];
      const Array2D<double>& map_c = params.mapping.at(c.id);
      const int cat = rng.categorical(map_c.row(top), c.k);
      concept_cat[ci][static_cast<size_t>(j)] = cat;
      for (const auto& m : c.modalities) {
        const int n_tokens = params.tokens_per_doc.at(m);
        if (n_tokens == 0) continue;
        const Array2D<double>& phi_m = params.phi.at(m);
        std::vector<int> hist(static_cast<size_t>(phi_m.cols()), 0);
        for (int t = 0; t < n_tokens; ++t)
          ++hist[static_cast<size_t>(rng.categorical(phi_m.row(cat), phi_m.cols()))];
        SparseCounts counts;
        for (size_t w = 0; w < hist.size(); ++w)
          if (hist[w] > 0) counts.emplace_back(static_cast<int>(w), hist[w]);
        d.counts[m] = std::move(counts);
      }
    }
    corpus.documents[static_cast<size_t>(j)] = std::move(d);
  }

  for (int j = 0; j < M; ++j)
    corpus.labels[doc_ids[static_cast<size_t>(j)]] =
        params.labels[static_cast<size_t>(truth.top_category[static_cast<size_t>(j)])];
  for (size_t ci = 0; ci < params.spec.lower.size(); ++ci)
    truth.concept_category[params.spec.lower[ci].id] = std::move(concept_cat[ci]);

  corpus.validate();
  return {std::move(corpus), std::move(truth)};
}

// ---- serialization ----------------------------------------------------

static json params_to_json(const GenParams& params) {
  json j;
  j["spec"] = spec_to_json(params.spec);
  j["top_prior"] = json::array();
  for (double p : params.top_prior) j["top_prior"].push_back(round12(p));
  j["top_counts"] = params.top_counts;
  j["mapping"] = json::object();
  for (const auto& [id, m] : params.mapping) j["mapping"][id] = matrix_to_json(m);
  j["phi"] = json::object();
  for (const auto& [id, m] : params.phi) j["phi"][id] = matrix_to_json(m);
  j["tokens_per_doc"] = params.tokens_per_doc;
  j["docs"] = params.docs;
  j["labels"] = params.labels;
  return j;
}

static GenParams params_from_json(const json& j, const std::string& where) {
  GenParams params;
  params.spec = spec_from_json(j.at("spec"));
  params.top_prior = j.at("top_prior").get<std::vector<double>>();
  params.top_counts = j.at("top_counts").get<std::vector<int>>();
  for (const auto& [id, m] : j.at("mapping").items())
    params.mapping[id] = matrix_from_json(m, where + ": mapping/" + id);
  for (const auto& [id, m] : j.at("phi").items())
    params.phi[id] = matrix_from_json(m, where + ": phi/" + id);
  params.tokens_per_doc = j.at("tokens_per_doc").get<std::map<std::string, int>>();
  params.docs = j.at("docs").get<int>();
  params.labels = j.at("labels").get<std::vector<std::string>>();
  return params;
}

static json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw FormatError(strfmt("%s: %s", path.c_str(), e.what()));
  }
  return j;
}

static void dump_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(1) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

void save_gen_params(const GenParams& params, const std::string& path) {
  dump_json(params_to_json(params), path);
}

GenParams load_gen_params(const std::string& path) {
  try {
    GenParams params = params_from_json(load_json(path), path);
    params.validate();
    return params;
  } catch (const json::exception& e) {
    throw FormatError(strfmt("%s: %s", path.c_str(), e.what()));
  }
}

void save_ground_truth(const GroundTruth& truth, const std::string& path) {
  json j;
  j["top_category"] = truth.top_category;
  j["concept_category"] = truth.concept_category;
  j["params"] = params_to_json(truth.params);
  dump_json(j, path);
}

GroundTruth load_ground_truth(const std::string& path) {
  json j = load_json(path);
  try {
    GroundTruth truth;
    truth.top_category = j.at("top_category").get<std::vector<int>>();
    truth.concept_category =
        j.at("concept_category").get<std::map<std::string, std::vector<int>>>();
    truth.params = params_from_json(j.at("params"), path);
    return truth;
  } catch (const json::exception& e) {
    throw FormatError(strfmt("%s: %s", path.c_str(), e.what()));
  }
}

}  // namespace mmlda
