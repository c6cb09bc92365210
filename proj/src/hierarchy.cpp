#include "mmlda/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "model_json.hpp"

namespace mmlda {

using nlohmann::json;

int HierarchySpec::concept_index(const std::string& id) const {
  for (size_t i = 0; i < lower.size(); ++i)
    if (lower[i].id == id) return static_cast<int>(i);
  return -1;
}

int HierarchySpec::concept_for_modality(const std::string& modality) const {
  for (size_t i = 0; i < lower.size(); ++i)
    for (const auto& m : lower[i].modalities)
      if (m == modality) return static_cast<int>(i);
  return -1;
}

void HierarchySpec::validate() const {
  if (lower.empty()) throw ConfigError("hierarchy: needs at least one lower concept");
  if (top_k < 1) throw ConfigError("hierarchy: top_k must be >= 1");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("hierarchy: alpha and beta must be > 0");
  if (rounds < 1) throw ConfigError("hierarchy: rounds must be >= 1");
  if (lower_sweeps < 1 || top_sweeps < 1) throw ConfigError("hierarchy: sweep counts must be >= 1");
  if (weight < 1) throw ConfigError("hierarchy: weight must be >= 1");
  std::set<std::string> concept_ids, claimed;
  for (const auto& c : lower) {
    if (!concept_ids.insert(c.id).second)
      throw ConfigError(strfmt("hierarchy: duplicate concept id '%s'", c.id.c_str()));
    if (c.k < 1) throw ConfigError(strfmt("hierarchy: concept '%s' K must be >= 1", c.id.c_str()));
    if (c.modalities.empty())
      throw ConfigError(strfmt("hierarchy: concept '%s' claims no modalities", c.id.c_str()));
    for (const auto& m : c.modalities)
      if (!claimed.insert(m).second)
        throw ConfigError(strfmt("hierarchy: modality '%s' claimed by more than one concept",
                                 m.c_str()));
  }
}

void HierarchySpec::validate(const Corpus& corpus) const {
  validate();
  for (const auto& c : lower)
    for (const auto& m : c.modalities)
      if (corpus.modality_index(m) < 0)
        throw ConfigError(strfmt("hierarchy: concept '%s' claims unknown modality '%s'",
                                 c.id.c_str(), m.c_str()));
  for (const auto& s : corpus.specs)
    if (concept_for_modality(s.id) < 0)
      throw ConfigError(strfmt("hierarchy: corpus modality '%s' claimed by no concept",
                               s.id.c_str()));
}

void Message::check_simplex() const {
  for (int j = 0; j < rows.rows(); ++j) {
    double sum = 0.0;
    for (int k = 0; k < rows.cols(); ++k) {
      double v = rows(j, k);
      if (!(v >= 0.0) || !std::isfinite(v))
        throw InternalError(strfmt("message '%s': row %d has invalid entry", concept_id.c_str(), j));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw InternalError(strfmt("message '%s': row %d sums to %.12g", concept_id.c_str(), j, sum));
  }
}

Message lower_infer(const FittedModel& lower_model, const std::string& concept_id) {
  Message msg;
  msg.upward = true;
  msg.concept_id = concept_id;
  msg.rows = lower_model.theta;
  msg.check_simplex();
  return msg;
}

SparseCounts encode_upward_row(const double* p, int k, int weight) {
  SparseCounts counts;
  for (int c = 0; c < k; ++c) {
    int n = static_cast<int>(std::llround(weight * p[c]));
    if (n > 0) counts.emplace_back(c, n);
  }
  return counts;
}

Corpus encode_upward(const std::vector<Message>& upward, const HierarchySpec& spec,
                     const std::vector<std::string>& doc_ids) {
  if (upward.size() != spec.lower.size())
    throw ConfigError("encode_upward: one upward message per concept required");
  Corpus top;
  for (const auto& c : spec.lower) top.specs.push_back({c.id, c.k});
  for (size_t j = 0; j < doc_ids.size(); ++j) {
    Document d;
    d.id = doc_ids[j];
    for (size_t ci = 0; ci < spec.lower.size(); ++ci) {
      const Message& msg = upward[ci];
      if (msg.concept_id != spec.lower[ci].id || !msg.upward)
        throw ConfigError("encode_upward: messages must be upward and in concept order");
      SparseCounts counts =
          encode_upward_row(msg.rows.row(static_cast<int>(j)), msg.rows.cols(), spec.weight);
      if (!counts.empty()) d.counts[msg.concept_id] = std::move(counts);
    }
    top.documents.push_back(std::move(d));
  }
  return top;
}

std::vector<Message> downward_messages(const FittedModel& top_model, const HierarchySpec& spec) {
  std::vector<Message> down;
  const int M = top_model.theta.rows();
  const int K = top_model.config.K;
  for (const auto& c : spec.lower) {
    int m = top_model.modality_index(c.id);
    if (m < 0)
      throw ConfigError(strfmt("downward_messages: top model lacks concept '%s'", c.id.c_str()));
    const auto& phi_c = top_model.phi[static_cast<size_t>(m)];
    Message msg;
    msg.upward = false;
    msg.concept_id = c.id;
    msg.rows = Array2D<double>(M, c.k, 0.0);
    for (int j = 0; j < M; ++j) {
      double* row = msg.rows.row(j);
      for (int k = 0; k < K; ++k) {
        const double t = top_model.theta(j, k);
        const double* pr = phi_c.row(k);
        for (int cc = 0; cc < c.k; ++cc) row[cc] += t * pr[cc];
      }
      // guard against rounding drift before the simplex check
      double sum = 0.0;
      for (int cc = 0; cc < c.k; ++cc) sum += row[cc];
      for (int cc = 0; cc < c.k; ++cc) row[cc] /= sum;
    }
    msg.check_simplex();
    down.push_back(std::move(msg));
  }
  return down;
}

static ModelConfig top_config(const HierarchySpec& spec, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.K = spec.top_k;
  cfg.alpha = spec.alpha;
  for (const auto& c : spec.lower) cfg.beta[c.id] = spec.beta;
  cfg.sweeps = spec.top_sweeps;
  cfg.burn_in = 0;
  cfg.seed = seed;
  return cfg;
}

std::pair<FittedModel, std::vector<Message>> top_update(const std::vector<Message>& upward,
                                                        const HierarchySpec& spec,
                                                        const std::vector<std::string>& doc_ids,
                                                        std::uint64_t top_seed) {
  Corpus top_corpus = encode_upward(upward, spec, doc_ids);
  FittedModel top = fit(top_corpus, top_config(spec, top_seed));
  std::vector<Message> down = downward_messages(top, spec);
  return {std::move(top), std::move(down)};
}

std::uint64_t hierarchy_seed(std::uint64_t seed, const std::string& concept_id, int round) {
  return mix_seed(seed, hash_id(concept_id), static_cast<std::uint64_t>(round));
}

static ModelConfig lower_config(const HierarchySpec& spec, const LowerSpec& c,
                                const Corpus& sub_corpus) {
  ModelConfig cfg;
  cfg.K = c.k;
  cfg.alpha = spec.alpha;
  for (const auto& s : sub_corpus.specs) cfg.beta[s.id] = spec.beta;
  cfg.sweeps = spec.lower_sweeps;
  cfg.burn_in = 0;
  return cfg;
}

HierarchyModel train_hierarchy(const Corpus& corpus, const HierarchySpec& spec,
                               std::uint64_t seed) {
  spec.validate(corpus);
  const int n_concepts = static_cast<int>(spec.lower.size());
  const int M = corpus.size();

  std::vector<std::string> doc_ids;
  for (const auto& d : corpus.documents) doc_ids.push_back(d.id);

  std::vector<TokenizedCorpus> tok(static_cast<size_t>(n_concepts));
  std::vector<ModelConfig> cfg(static_cast<size_t>(n_concepts));
  std::vector<TopicState> state(static_cast<size_t>(n_concepts));
  for (int c = 0; c < n_concepts; ++c) {
    Corpus sub = restrict_modalities(corpus, spec.lower[static_cast<size_t>(c)].modalities);
    cfg[static_cast<size_t>(c)] = lower_config(spec, spec.lower[static_cast<size_t>(c)], sub);
    tok[static_cast<size_t>(c)] = TokenizedCorpus::from(sub);
  }

  std::vector<Message> upward(static_cast<size_t>(n_concepts));
  std::vector<Message> downward;  // empty in round 1
  std::vector<Array2D<double>> prev_upward(static_cast<size_t>(n_concepts));
  FittedModel top;
  std::vector<RoundDiagnostics> diags;

  for (int round = 1; round <= spec.rounds; ++round) {
    // lower Gibbs blocks; independent streams, so concepts may run in parallel
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < n_concepts; ++c) {
      const auto& lc = spec.lower[static_cast<size_t>(c)];
      ModelConfig block_cfg = cfg[static_cast<size_t>(c)];
      block_cfg.seed = hierarchy_seed(seed, lc.id, round);
      Rng rng(block_cfg.seed);
      const BiasField* bias = downward.empty() ? nullptr : &downward[static_cast<size_t>(c)].rows;
      if (round == 1)
        state[static_cast<size_t>(c)] = init_assignments(tok[static_cast<size_t>(c)], block_cfg, rng);
      for (int s = 0; s < spec.lower_sweeps; ++s)
        gibbs_sweep(state[static_cast<size_t>(c)], tok[static_cast<size_t>(c)], block_cfg, bias, rng);
      Message msg;
      msg.upward = true;
      msg.concept_id = lc.id;
      msg.rows = estimate_theta(tok[static_cast<size_t>(c)], block_cfg, state[static_cast<size_t>(c)]);
      upward[static_cast<size_t>(c)] = std::move(msg);
    }
    for (auto& msg : upward) msg.check_simplex();

    Corpus top_corpus = encode_upward(upward, spec, doc_ids);
    FittedModel top_model = fit(top_corpus, top_config(spec, hierarchy_seed(seed, "", round)));
    std::vector<Message> down = downward_messages(top_model, spec);

    RoundDiagnostics diag;
    diag.round = round;
    diag.top_loglik = log_likelihood(top_model, top_corpus);
    for (int c = 0; c < n_concepts; ++c) {
      const auto& cur = upward[static_cast<size_t>(c)].rows;
      const auto& prev = prev_upward[static_cast<size_t>(c)];
      if (prev.rows() == 0) {
        diag.message_delta.push_back(0.0);
      } else {
        double acc = 0.0;
        for (int j = 0; j < M; ++j) {
          double d2 = 0.0;
          for (int k = 0; k < cur.cols(); ++k) {
            double d = cur(j, k) - prev(j, k);
            d2 += d * d;
          }
          acc += std::sqrt(d2);
        }
        diag.message_delta.push_back(M > 0 ? acc / M : 0.0);
      }
      prev_upward[static_cast<size_t>(c)] = cur;
    }
    diags.push_back(std::move(diag));

    top = std::move(top_model);
    downward = std::move(down);
  }

  HierarchyModel model;
  model.spec = spec;
  for (int c = 0; c < n_concepts; ++c) {
    ModelConfig final_cfg = cfg[static_cast<size_t>(c)];
    final_cfg.seed = hierarchy_seed(seed, spec.lower[static_cast<size_t>(c)].id, 1);
    FittedModel fm;
    fm.config = final_cfg;
    fm.modalities = tok[static_cast<size_t>(c)].specs;
    fm.doc_ids = tok[static_cast<size_t>(c)].doc_ids;
    fm.theta = estimate_theta(tok[static_cast<size_t>(c)], final_cfg, state[static_cast<size_t>(c)]);
    fm.phi = estimate_phi(tok[static_cast<size_t>(c)], final_cfg, state[static_cast<size_t>(c)]);
    fm.state = std::move(state[static_cast<size_t>(c)]);
    model.lower.push_back(std::move(fm));
  }
  model.top = std::move(top);
  model.diagnostics = std::move(diags);
  return model;
}

std::vector<double> predict_cross(const HierarchyModel& model, const Document& observed,
                                  const std::string& target) {
  const HierarchySpec& spec = model.spec;
  int t = spec.concept_for_modality(target);
  if (t < 0) throw ConfigError(strfmt("predict_cross: unknown target modality '%s'", target.c_str()));
  const FittedModel& target_model = model.lower[static_cast<size_t>(t)];

  Document rest = strip_modality(observed, target);

  // split the remaining observations by owning concept
  std::vector<Document> per_concept(spec.lower.size());
  for (size_t c = 0; c < spec.lower.size(); ++c) per_concept[c].id = rest.id;
  for (const auto& [mod, counts] : rest.counts) {
    int c = spec.concept_for_modality(mod);
    if (c < 0) throw ConfigError(strfmt("predict_cross: unclaimed modality '%s'", mod.c_str()));
    if (total_count(counts) > 0) per_concept[static_cast<size_t>(c)].counts[mod] = counts;
  }

  // intra-concept case: the target's own concept is observed
  if (!per_concept[static_cast<size_t>(t)].counts.empty())
    return predict_modality(target_model, per_concept[static_cast<size_t>(t)], target);

  // source posteriors -> pseudo-document for the top model
  Document pseudo;
  pseudo.id = observed.id;
  for (size_t c = 0; c < spec.lower.size(); ++c) {
    if (per_concept[c].counts.empty()) continue;
    const FittedModel& lm = model.lower[c];
    std::vector<double> post =
        infer_new(lm, per_concept[c], InferOptions{}, doc_stream_seed(lm.config, observed.id));
    SparseCounts counts =
        encode_upward_row(post.data(), static_cast<int>(post.size()), spec.weight);
    if (!counts.empty()) pseudo.counts[spec.lower[c].id] = std::move(counts);
  }

  std::vector<double> top_post = infer_new(model.top, pseudo, InferOptions{},
                                           doc_stream_seed(model.top.config, observed.id));

  // downward: P(target concept category) = sum_k phi^C[k][.] * top_post[k]
  int cm = model.top.modality_index(spec.lower[static_cast<size_t>(t)].id);
  const auto& phi_c = model.top.phi[static_cast<size_t>(cm)];
  const int kc = spec.lower[static_cast<size_t>(t)].k;
  std::vector<double> down(static_cast<size_t>(kc), 0.0);
  for (int k = 0; k < model.top.config.K; ++k) {
    const double* pr = phi_c.row(k);
    for (int c = 0; c < kc; ++c) down[static_cast<size_t>(c)] += top_post[static_cast<size_t>(k)] * pr[c];
  }
  double dsum = 0.0;
  for (double v : down) dsum += v;
  for (double& v : down) v /= dsum;

  int tm = target_model.modality_index(target);
  const auto& phi_t = target_model.phi[static_cast<size_t>(tm)];
  const int W = phi_t.cols();
  std::vector<double> pred(static_cast<size_t>(W), 0.0);
  for (int c = 0; c < kc; ++c) {
    const double pc = down[static_cast<size_t>(c)];
    const double* row = phi_t.row(c);
    for (int w = 0; w < W; ++w) pred[static_cast<size_t>(w)] += pc * row[w];
  }
  return pred;
}

// ---- serialization ----------------------------------------------------

json spec_to_json(const HierarchySpec& spec) {
  json j;
  j["top_k"] = spec.top_k;
  j["alpha"] = spec.alpha;
  j["beta"] = spec.beta;
  j["rounds"] = spec.rounds;
  j["lower_sweeps"] = spec.lower_sweeps;
  j["top_sweeps"] = spec.top_sweeps;
  j["weight"] = spec.weight;
  j["lower"] = json::array();
  for (const auto& c : spec.lower)
    j["lower"].push_back({{"id", c.id}, {"modalities", c.modalities}, {"k", c.k}});
  return j;
}

HierarchySpec spec_from_json(const json& j) {
  HierarchySpec spec;
  spec.top_k = j.at("top_k").get<int>();
  spec.alpha = j.at("alpha").get<double>();
  spec.beta = j.at("beta").get<double>();
  spec.rounds = j.at("rounds").get<int>();
  spec.lower_sweeps = j.at("lower_sweeps").get<int>();
  spec.top_sweeps = j.at("top_sweeps").get<int>();
  spec.weight = j.at("weight").get<int>();
  for (const auto& c : j.at("lower"))
    spec.lower.push_back({c.at("id").get<std::string>(),
                          c.at("modalities").get<std::vector<std::string>>(),
                          c.at("k").get<int>()});
  return spec;
}

void save_hierarchy(const HierarchyModel& model, const std::string& path) {
  json j;
  j["spec"] = spec_to_json(model.spec);
  j["lower"] = json::array();
  for (const auto& m : model.lower) j["lower"].push_back(model_to_json(m));
  j["top"] = model_to_json(model.top);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(1) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

HierarchyModel load_hierarchy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open hierarchy file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw FormatError(strfmt("%s: %s", path.c_str(), e.what()));
  }
  try {
    HierarchyModel model;
    model.spec = spec_from_json(j.at("spec"));
    for (const auto& m : j.at("lower")) model.lower.push_back(model_from_json(m, path));
    model.top = model_from_json(j.at("top"), path);
    return model;
  } catch (const json::exception& e) {
    throw FormatError(strfmt("%s: %s", path.c_str(), e.what()));
  }
}

}  // namespace mmlda
