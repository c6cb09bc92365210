#include "mmlda/reference.hpp"

#include <algorithm>
#include <cmath>

#include "mmlda/errors.hpp"
#include "mmlda/eval.hpp"
#include "mmlda/rng.hpp"

namespace mmlda::ref {

double log_likelihood(const FittedModel& model, const Corpus& corpus) {
  TokenizedCorpus tc = TokenizedCorpus::from(corpus);
  if (tc.docs() != model.theta.rows() || tc.doc_ids != model.doc_ids)
    throw ConfigError("log_likelihood: corpus documents do not match the model's training set");
  for (const auto& s : tc.specs)
    if (model.modality_index(s.id) < 0)
      throw ConfigError(strfmt("log_likelihood: model lacks modality '%s'", s.id.c_str()));
  const int K = model.config.K;
  double sum = 0.0;
  for (int j = 0; j < tc.docs(); ++j) {
    double doc = 0.0;
    for (int m = 0; m < tc.n_modalities(); ++m) {
      const auto& toks = tc.tokens[static_cast<size_t>(j)][static_cast<size_t>(m)];
      const auto& pm = model.phi[static_cast<size_t>(m)];
      for (int w : toks) {
        double p = 0.0;
        for (int k = 0; k < K; ++k) p += model.theta(j, k) * pm(k, w);
        doc += std::log(p);
      }
    }
    sum += doc;
  }
  return sum;
}

Array2D<double> infer_many(const FittedModel& model, const Corpus& corpus,
                           const InferOptions& opt, std::uint64_t seed) {
  const int M = corpus.size();
  Array2D<double> out(M, model.config.K);
  for (int j = 0; j < M; ++j) {
    const Document& d = corpus.documents[static_cast<size_t>(j)];
    std::vector<double> post = infer_new(model, d, opt, mix_seed(seed, hash_id(d.id)));
    std::copy(post.begin(), post.end(), out.row(j));
  }
  return out;
}

std::vector<int> encode_codes(const std::vector<std::vector<double>>& windows,
                              const Codebook& cb) {
  std::vector<int> codes(windows.size(), -1);
  for (size_t i = 0; i < windows.size(); ++i)
    codes[i] = nearest_center(cb, windows[i].data());
  return codes;
}

double chance_rand(const std::vector<int>& reference, int k, int trials, std::uint64_t seed) {
  if (k < 1) throw ConfigError("chance_rand: k must be >= 1");
  if (trials < 1) throw ConfigError("chance_rand: trials must be >= 1");
  const size_t n = reference.size();
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<int> random(n);
    for (size_t i = 0; i < n; ++i)
      random[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    sum += rand_index(reference, random);
  }
  return sum / trials;
}

}  // namespace mmlda::ref
