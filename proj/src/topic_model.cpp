#include "mmlda/topic_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "model_json.hpp"

namespace mmlda {

using nlohmann::json;

double ModelConfig::beta_for(const std::string& modality) const {
  auto it = beta.find(modality);
  if (it == beta.end())
    throw ConfigError(strfmt("no beta hyperparameter for modality '%s'", modality.c_str()));
  return it->second;
}

void ModelConfig::validate(const std::vector<ModalitySpec>& specs) const {
  if (K < 1) throw ConfigError(strfmt("K must be >= 1, got %d", K));
  if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
  if (sweeps < 1) throw ConfigError("sweeps must be >= 1");
  if (burn_in < 0 || burn_in >= sweeps)
    throw ConfigError(strfmt("burn_in must be in [0, sweeps), got %d with sweeps=%d", burn_in, sweeps));
  for (const auto& s : specs) {
    double b = beta_for(s.id);
    if (!(b > 0.0)) throw ConfigError(strfmt("beta for '%s' must be > 0", s.id.c_str()));
  }
}

long long TokenizedCorpus::total_tokens() const {
  long long t = 0;
  for (int n : doc_totals) t += n;
  return t;
}

TokenizedCorpus TokenizedCorpus::from(const Corpus& corpus) {
  corpus.validate();
  TokenizedCorpus tc;
  tc.specs = corpus.specs;
  const int n_mod = static_cast<int>(corpus.specs.size());
  tc.tokens.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) {
    tc.doc_ids.push_back(d.id);
    std::vector<std::vector<int>> per_mod(static_cast<size_t>(n_mod));
    int total = 0;
    for (int m = 0; m < n_mod; ++m) {
      auto it = d.counts.find(corpus.specs[static_cast<size_t>(m)].id);
      if (it == d.counts.end()) continue;
      auto& toks = per_mod[static_cast<size_t>(m)];
      for (auto& [w, n] : it->second)
        for (int r = 0; r < n; ++r) toks.push_back(w);
      total += static_cast<int>(toks.size());
    }
    tc.tokens.push_back(std::move(per_mod));
    tc.doc_totals.push_back(total);
  }
  return tc;
}

void TopicState::check_consistent(const TokenizedCorpus& tc, int K) const {
  Array2D<int> r_doc(tc.docs(), K, 0);
  std::vector<Array2D<int>> r_feat;
  std::vector<std::vector<int>> r_cat;
  for (int m = 0; m < tc.n_modalities(); ++m) {
    r_feat.emplace_back(tc.specs[static_cast<size_t>(m)].dimension, K, 0);
    r_cat.emplace_back(static_cast<size_t>(K), 0);
  }
  for (int j = 0; j < tc.docs(); ++j) {
    for (int m = 0; m < tc.n_modalities(); ++m) {
      const auto& toks = tc.tokens[static_cast<size_t>(j)][static_cast<size_t>(m)];
      const auto& zs = z[static_cast<size_t>(j)][static_cast<size_t>(m)];
      if (toks.size() != zs.size())
        throw InternalError(strfmt("state: doc %d modality %d token/assignment size mismatch", j, m));
      for (size_t i = 0; i < toks.size(); ++i) {
        int k = zs[i];
        if (k < 0 || k >= K) throw InternalError("state: assignment out of range");
        ++r_doc(j, k);
        ++r_feat[static_cast<size_t>(m)](toks[i], k);
        ++r_cat[static_cast<size_t>(m)][static_cast<size_t>(k)];
      }
    }
  }
  if (!(r_doc == n_doc)) throw InternalError("state: n_doc does not match assignments");
  for (int m = 0; m < tc.n_modalities(); ++m) {
    if (!(r_feat[static_cast<size_t>(m)] == n_feat[static_cast<size_t>(m)]))
      throw InternalError(strfmt("state: n_feat[%d] does not match assignments", m));
    if (r_cat[static_cast<size_t>(m)] != n_cat[static_cast<size_t>(m)])
      throw InternalError(strfmt("state: n_cat[%d] does not match assignments", m));
  }
  // per-document totals
  for (int j = 0; j < tc.docs(); ++j) {
    long long s = 0;
    for (int k = 0; k < K; ++k) s += n_doc(j, k);
    if (s != tc.doc_totals[static_cast<size_t>(j)])
      throw InternalError(strfmt("state: doc %d category counts do not sum to token count", j));
  }
}

int FittedModel::modality_index(const std::string& id) const {
  for (size_t i = 0; i < modalities.size(); ++i)
    if (modalities[i].id == id) return static_cast<int>(i);
  return -1;
}

int FittedModel::doc_index(const std::string& id) const {
  for (size_t i = 0; i < doc_ids.size(); ++i)
    if (doc_ids[i] == id) return static_cast<int>(i);
  return -1;
}

TopicState init_assignments(const TokenizedCorpus& tc, const ModelConfig& config, Rng& rng) {
  config.validate(tc.specs);
  const int K = config.K;
  TopicState st;
  st.n_doc = Array2D<int>(tc.docs(), K, 0);
  for (int m = 0; m < tc.n_modalities(); ++m) {
    st.n_feat.emplace_back(tc.specs[static_cast<size_t>(m)].dimension, K, 0);
    st.n_cat.emplace_back(static_cast<size_t>(K), 0);
  }
  st.z.resize(static_cast<size_t>(tc.docs()));
  for (int j = 0; j < tc.docs(); ++j) {
    auto& doc_z = st.z[static_cast<size_t>(j)];
    doc_z.resize(static_cast<size_t>(tc.n_modalities()));
    for (int m = 0; m < tc.n_modalities(); ++m) {
      const auto& toks = tc.tokens[static_cast<size_t>(j)][static_cast<size_t>(m)];
      auto& zs = doc_z[static_cast<size_t>(m)];
      zs.resize(toks.size());
      for (size_t i = 0; i < toks.size(); ++i) {
        int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
        zs[i] = k;
        ++st.n_doc(j, k);
        ++st.n_feat[static_cast<size_t>(m)](toks[i], k);
        ++st.n_cat[static_cast<size_t>(m)][static_cast<size_t>(k)];
      }
    }
  }
  return st;
}

TopicState init_assignments(const Corpus& corpus, const ModelConfig& config) {
  TokenizedCorpus tc = TokenizedCorpus::from(corpus);
  Rng rng(config.seed);
  return init_assignments(tc, config, rng);
}

long long gibbs_sweep(TopicState& state, const TokenizedCorpus& tc, const ModelConfig& config,
                      const BiasField* bias, Rng& rng) {
  const int K = config.K;
  const double alpha = config.alpha;
  if (bias && (bias->rows() != tc.docs() || bias->cols() != K))
    throw ConfigError("bias field shape does not match corpus/K");

  std::vector<double> beta(static_cast<size_t>(tc.n_modalities()));
  std::vector<double> beta_sum(static_cast<size_t>(tc.n_modalities()));
  for (int m = 0; m < tc.n_modalities(); ++m) {
    beta[static_cast<size_t>(m)] = config.beta_for(tc.specs[static_cast<size_t>(m)].id);
    beta_sum[static_cast<size_t>(m)] =
        beta[static_cast<size_t>(m)] * tc.specs[static_cast<size_t>(m)].dimension;
  }

  std::vector<double> weight(static_cast<size_t>(K));
  long long changed = 0;
  for (int j = 0; j < tc.docs(); ++j) {
    int* nd = state.n_doc.row(j);
    const double* bias_row = bias ? bias->row(j) : nullptr;
    for (int m = 0; m < tc.n_modalities(); ++m) {
      const auto& toks = tc.tokens[static_cast<size_t>(j)][static_cast<size_t>(m)];
      auto& zs = state.z[static_cast<size_t>(j)][static_cast<size_t>(m)];
      auto& nf = state.n_feat[static_cast<size_t>(m)];
      auto& nc = state.n_cat[static_cast<size_t>(m)];
      const double b = beta[static_cast<size_t>(m)];
      const double bs = beta_sum[static_cast<size_t>(m)];
      for (size_t i = 0; i < toks.size(); ++i) {
        const int w = toks[i];
        const int old_k = zs[i];
        --nd[old_k];
        --nf(w, old_k);
        --nc[static_cast<size_t>(old_k)];
        int* nfw = nf.row(w);
        for (int k = 0; k < K; ++k) {
          double p = (nd[k] + alpha) * (nfw[k] + b) / (nc[static_cast<size_t>(k)] + bs);
          if (bias_row) p *= bias_row[k];
          weight[static_cast<size_t>(k)] = p;
        }
        const int new_k = rng.categorical(weight.data(), K);
        zs[i] = new_k;
        ++nd[new_k];
        ++nf(w, new_k);
        ++nc[static_cast<size_t>(new_k)];
        if (new_k != old_k) ++changed;
      }
    }
  }
  return changed;
}

Array2D<double> estimate_theta(const TokenizedCorpus& tc, const ModelConfig& config,
                               const TopicState& state) {
  const int K = config.K;
  Array2D<double> theta(tc.docs(), K);
  for (int j = 0; j < tc.docs(); ++j) {
    const double denom = tc.doc_totals[static_cast<size_t>(j)] + K * config.alpha;
    for (int k = 0; k < K; ++k) theta(j, k) = (state.n_doc(j, k) + config.alpha) / denom;
  }
  return theta;
}

std::vector<Array2D<double>> estimate_phi(const TokenizedCorpus& tc, const ModelConfig& config,
                                          const TopicState& state) {
  const int K = config.K;
  std::vector<Array2D<double>> phi;
  for (int m = 0; m < tc.n_modalities(); ++m) {
    const int W = tc.specs[static_cast<size_t>(m)].dimension;
    const double b = config.beta_for(tc.specs[static_cast<size_t>(m)].id);
    Array2D<double> pm(K, W);
    for (int k = 0; k < K; ++k) {
      const double denom = state.n_cat[static_cast<size_t>(m)][static_cast<size_t>(k)] + W * b;
      for (int w = 0; w < W; ++w) pm(k, w) = (state.n_feat[static_cast<size_t>(m)](w, k) + b) / denom;
    }
    phi.push_back(std::move(pm));
  }
  return phi;
}

FittedModel fit(const TokenizedCorpus& tc, const ModelConfig& config, const BiasField* bias) {
  Rng rng(config.seed);
  TopicState state = init_assignments(tc, config, rng);
  const long long total = tc.total_tokens();
  int quiet_sweeps = 0;
  for (int s = 0; s < config.sweeps; ++s) {
    long long changed = gibbs_sweep(state, tc, config, bias, rng);
#ifndef NDEBUG
    state.check_consistent(tc, config.K);
#endif
    if (config.early_stop && total > 0) {
      double frac = static_cast<double>(changed) / static_cast<double>(total);
      quiet_sweeps = frac < config.early_stop_threshold ? quiet_sweeps + 1 : 0;
      if (quiet_sweeps >= config.early_stop_patience) break;
    }
  }
  FittedModel model;
  model.config = config;
  model.modalities = tc.specs;
  model.doc_ids = tc.doc_ids;
  model.theta = estimate_theta(tc, config, state);
  model.phi = estimate_phi(tc, config, state);
  model.state = std::move(state);
  return model;
}

FittedModel fit(const Corpus& corpus, const ModelConfig& config, const BiasField* bias) {
  return fit(TokenizedCorpus::from(corpus), config, bias);
}

// Per-document log-likelihood terms; summed in document order by both the
// parallel and the serial entry point so the results agree bitwise.
static double doc_log_likelihood(const FittedModel& model, const TokenizedCorpus& tc, int j) {
  const int K = model.config.K;
  double sum = 0.0;
  for (int m = 0; m < tc.n_modalities(); ++m) {
    const auto& toks = tc.tokens[static_cast<size_t>(j)][static_cast<size_t>(m)];
    const auto& pm = model.phi[static_cast<size_t>(m)];
    for (int w : toks) {
      double p = 0.0;
      for (int k = 0; k < K; ++k) p += model.theta(j, k) * pm(k, w);
      sum += std::log(p);
    }
  }
  return sum;
}

double log_likelihood(const FittedModel& model, const Corpus& corpus) {
  TokenizedCorpus tc = TokenizedCorpus::from(corpus);
  if (tc.docs() != model.theta.rows() || tc.doc_ids != model.doc_ids)
    throw ConfigError("log_likelihood: corpus documents do not match the model's training set");
  for (const auto& s : tc.specs)
    if (model.modality_index(s.id) < 0)
      throw ConfigError(strfmt("log_likelihood: model lacks modality '%s'", s.id.c_str()));
  std::vector<double> partial(static_cast<size_t>(tc.docs()), 0.0);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < tc.docs(); ++j)
    partial[static_cast<size_t>(j)] = doc_log_likelihood(model, tc, j);
  double sum = 0.0;
  for (double v : partial) sum += v;
  return sum;
}

std::uint64_t doc_stream_seed(const ModelConfig& config, const std::string& doc_id) {
  return mix_seed(config.seed, hash_id(doc_id));
}

// tokens of `observed` restricted to the model's modalities, in modality order
static std::vector<std::pair<int, int>> flatten_observed(const FittedModel& model,
                                                         const Document& observed) {
  std::vector<std::pair<int, int>> toks;  // (modality index, feature)
  for (const auto& [mod, counts] : observed.counts) {
    int m = model.modality_index(mod);
    if (m < 0)
      throw ConfigError(strfmt("document '%s' uses modality '%s' unknown to the model",
                               observed.id.c_str(), mod.c_str()));
    const int W = model.modalities[static_cast<size_t>(m)].dimension;
    for (auto& [w, n] : counts) {
      if (w < 0 || w >= W)
        throw ValidationError(strfmt("document '%s', modality '%s': feature %d outside [0, %d)",
                                     observed.id.c_str(), mod.c_str(), w, W));
      if (n < 0)
        throw ValidationError(strfmt("document '%s', modality '%s': negative count",
                                     observed.id.c_str(), mod.c_str()));
      for (int r = 0; r < n; ++r) toks.emplace_back(m, w);
    }
  }
  std::stable_sort(toks.begin(), toks.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return toks;
}

std::vector<double> infer_new(const FittedModel& model, const Document& observed,
                              const InferOptions& opt, std::uint64_t seed) {
  const int K = model.config.K;
  const double alpha = model.config.alpha;
  if (opt.sweeps < 1 || opt.burn_in < 0 || opt.burn_in >= opt.sweeps)
    throw ConfigError("infer_new: need 0 <= burn_in < sweeps");

  auto toks = flatten_observed(model, observed);
  const int N = static_cast<int>(toks.size());
  if (N == 0) return std::vector<double>(static_cast<size_t>(K), 1.0 / K);

  Rng rng(seed);
  std::vector<int> z(static_cast<size_t>(N));
  std::vector<int> n_k(static_cast<size_t>(K), 0);
  for (int i = 0; i < N; ++i) {
    int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
    z[static_cast<size_t>(i)] = k;
    ++n_k[static_cast<size_t>(k)];
  }

  std::vector<double> weight(static_cast<size_t>(K));
  std::vector<double> acc(static_cast<size_t>(K), 0.0);
  const double denom = N + K * alpha;
  for (int s = 0; s < opt.sweeps; ++s) {
    for (int i = 0; i < N; ++i) {
      const auto [m, w] = toks[static_cast<size_t>(i)];
      const auto& pm = model.phi[static_cast<size_t>(m)];
      --n_k[static_cast<size_t>(z[static_cast<size_t>(i)])];
      for (int k = 0; k < K; ++k)
        weight[static_cast<size_t>(k)] = (n_k[static_cast<size_t>(k)] + alpha) * pm(k, w);
      int k = rng.categorical(weight.data(), K);
      z[static_cast<size_t>(i)] = k;
      ++n_k[static_cast<size_t>(k)];
    }
    if (s >= opt.burn_in)
      for (int k = 0; k < K; ++k)
        acc[static_cast<size_t>(k)] += (n_k[static_cast<size_t>(k)] + alpha) / denom;
  }
  const double kept = opt.sweeps - opt.burn_in;
  for (double& v : acc) v /= kept;
  return acc;
}

std::vector<double> infer_new(const FittedModel& model, const Document& observed) {
  return infer_new(model, observed, InferOptions{}, doc_stream_seed(model.config, observed.id));
}

int classify(const FittedModel& model, const Document& observed) {
  std::vector<double> post = infer_new(model, observed);
  int best = 0;
  for (int k = 1; k < static_cast<int>(post.size()); ++k)
    if (post[static_cast<size_t>(k)] > post[static_cast<size_t>(best)]) best = k;
  return best;
}

std::vector<double> predict_modality(const FittedModel& model, const Document& observed,
                                     const std::string& target, const InferOptions& opt,
                                     std::uint64_t seed) {
  int t = model.modality_index(target);
  if (t < 0) throw ConfigError(strfmt("predict_modality: unknown target modality '%s'", target.c_str()));
  Document rest = strip_modality(observed, target);
  std::vector<double> post = infer_new(model, rest, opt, seed);
  const auto& pt = model.phi[static_cast<size_t>(t)];
  const int W = pt.cols();
  std::vector<double> pred(static_cast<size_t>(W), 0.0);
  for (int k = 0; k < model.config.K; ++k) {
    const double pk = post[static_cast<size_t>(k)];
    const double* row = pt.row(k);
    for (int w = 0; w < W; ++w) pred[static_cast<size_t>(w)] += pk * row[w];
  }
  return pred;
}

std::vector<double> predict_modality(const FittedModel& model, const Document& observed,
                                     const std::string& target) {
  return predict_modality(model, observed, target, InferOptions{},
                          doc_stream_seed(model.config, observed.id));
}

Array2D<double> infer_many(const FittedModel& model, const Corpus& corpus,
                           const InferOptions& opt, std::uint64_t seed) {
  const int M = corpus.size();
  Array2D<double> out(M, model.config.K);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < M; ++j) {
    const Document& d = corpus.documents[static_cast<size_t>(j)];
    std::vector<double> post = infer_new(model, d, opt, mix_seed(seed, hash_id(d.id)));
    std::copy(post.begin(), post.end(), out.row(j));
  }
  return out;
}

GridResult grid_search_k(const Corpus& corpus, int k_min, int k_max, const ModelConfig& base,
                         const Corpus* heldout) {
  if (k_min < 1 || k_max < k_min) throw ConfigError("grid_search_k: empty or invalid K range");
  const int n = k_max - k_min + 1;
  GridResult res;
  res.table.resize(static_cast<size_t>(n));
  TokenizedCorpus tc = TokenizedCorpus::from(corpus);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    ModelConfig cfg = base;
    cfg.K = k_min + i;
    cfg.seed = mix_seed(base.seed, static_cast<std::uint64_t>(cfg.K));
    FittedModel model = fit(tc, cfg);
    double score;
    if (heldout) {
      Array2D<double> post = infer_many(model, *heldout, InferOptions{}, cfg.seed);
      TokenizedCorpus htc = TokenizedCorpus::from(*heldout);
      double ll = 0.0;
      for (int j = 0; j < htc.docs(); ++j) {
        for (int m = 0; m < htc.n_modalities(); ++m) {
          int mm = model.modality_index(htc.specs[static_cast<size_t>(m)].id);
          const auto& pm = model.phi[static_cast<size_t>(mm)];
          for (int w : htc.tokens[static_cast<size_t>(j)][static_cast<size_t>(m)]) {
            double p = 0.0;
            for (int k = 0; k < cfg.K; ++k) p += post(j, k) * pm(k, w);
            ll += std::log(p);
          }
        }
      }
      score = ll;
    } else {
      score = log_likelihood(model, corpus);
    }
    res.table[static_cast<size_t>(i)] = {cfg.K, score};
  }
  res.best_k = res.table.front().k;
  double best = res.table.front().loglik;
  for (const auto& row : res.table)
    if (row.loglik > best) {
      best = row.loglik;
      res.best_k = row.k;
    }
  return res;
}

// ---- serialization ----------------------------------------------------

// decimal floats with 12 significant digits
double round12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

json matrix_to_json(const Array2D<double>& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(round12(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Array2D<double> matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw FormatError(where + ": expected nonempty matrix");
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  Array2D<double> m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[static_cast<size_t>(r)].size()) != cols)
      throw FormatError(where + ": ragged matrix");
    for (int c = 0; c < cols; ++c) m(r, c) = j[static_cast<size_t>(r)][static_cast<size_t>(c)].get<double>();
  }
  return m;
}

json model_to_json(const FittedModel& model) {
  json j;
  j["config"] = {{"K", model.config.K},
                 {"alpha", model.config.alpha},
                 {"beta", model.config.beta},
                 {"sweeps", model.config.sweeps},
                 {"burn_in", model.config.burn_in},
                 {"seed", model.config.seed}};
  j["modalities"] = json::array();
  for (const auto& s : model.modalities)
    j["modalities"].push_back({{"id", s.id}, {"dimension", s.dimension}});
  j["doc_ids"] = model.doc_ids;
  j["theta"] = matrix_to_json(model.theta);
  j["phi"] = json::object();
  for (size_t m = 0; m < model.modalities.size(); ++m)
    j["phi"][model.modalities[m].id] = matrix_to_json(model.phi[m]);
  return j;
}

FittedModel model_from_json(const json& j, const std::string& where) {
  FittedModel model;
  const auto& c = j.at("config");
  model.config.K = c.at("K").get<int>();
  model.config.alpha = c.at("alpha").get<double>();
  model.config.beta = c.at("beta").get<std::map<std::string, double>>();
  model.config.sweeps = c.at("sweeps").get<int>();
  model.config.burn_in = c.at("burn_in").get<int>();
  model.config.seed = c.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("modalities"))
    model.modalities.push_back({s.at("id").get<std::string>(), s.at("dimension").get<int>()});
  model.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
  model.theta = matrix_from_json(j.at("theta"), where + ": theta");
  for (const auto& s : model.modalities)
    model.phi.push_back(matrix_from_json(j.at("phi").at(s.id), where + ": phi/" + s.id));
  return model;
}

void save_model(const FittedModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << model_to_json(model).dump(1) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw FormatError(strfmt("%s: %s", path.c_str(), e.what()));
  }
  try {
    return model_from_json(j, path);
  } catch (const json::exception& e) {
    throw FormatError(strfmt("%s: %s", path.c_str(), e.what()));
  }
}

}  // namespace mmlda
