#include "mmlda/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mmlda/rng.hpp"

namespace mmlda {

using nlohmann::json;

int Corpus::modality_index(const std::string& id) const {
  for (size_t i = 0; i < specs.size(); ++i)
    if (specs[i].id == id) return static_cast<int>(i);
  return -1;
}

const ModalitySpec& Corpus::modality(const std::string& id) const {
  int i = modality_index(id);
  if (i < 0) throw ConfigError(strfmt("unknown modality '%s'", id.c_str()));
  return specs[static_cast<size_t>(i)];
}

void Corpus::validate() const {
  std::set<std::string> spec_ids;
  for (const auto& s : specs) {
    if (s.dimension < 1)
      throw ValidationError(strfmt("modality '%s': dimension must be >= 1, got %d",
                                   s.id.c_str(), s.dimension));
    if (!spec_ids.insert(s.id).second)
      throw ValidationError(strfmt("duplicate modality id '%s'", s.id.c_str()));
  }
  std::set<std::string> doc_ids;
  for (const auto& d : documents) {
    if (!doc_ids.insert(d.id).second)
      throw ValidationError(strfmt("duplicate document id '%s'", d.id.c_str()));
    for (const auto& [mod, counts] : d.counts) {
      int mi = modality_index(mod);
      if (mi < 0)
        throw ValidationError(strfmt("document '%s' references undeclared modality '%s'",
                                     d.id.c_str(), mod.c_str()));
      int dim = specs[static_cast<size_t>(mi)].dimension;
      for (auto& [w, n] : counts) {
        if (w < 0 || w >= dim)
          throw ValidationError(strfmt(
              "document '%s', modality '%s': feature index %d outside [0, %d)",
              d.id.c_str(), mod.c_str(), w, dim));
        if (n < 0)
          throw ValidationError(strfmt(
              "document '%s', modality '%s': negative count %d for feature %d",
              d.id.c_str(), mod.c_str(), n, w));
      }
    }
  }
  for (const auto& [id, label] : labels) {
    (void)label;
    if (!doc_ids.count(id))
      throw ValidationError(strfmt("label references unknown document id '%s'", id.c_str()));
  }
  for (const auto& [mod, words] : vocab) {
    int mi = modality_index(mod);
    if (mi < 0)
      throw ValidationError(strfmt("vocab references undeclared modality '%s'", mod.c_str()));
    if (static_cast<int>(words.size()) != specs[static_cast<size_t>(mi)].dimension)
      throw ValidationError(strfmt("vocab for '%s' has %zu entries, dimension is %d",
                                   mod.c_str(), words.size(),
                                   specs[static_cast<size_t>(mi)].dimension));
  }
}

static json counts_to_json(const SparseCounts& counts) {
  json arr = json::array();
  for (auto& [w, n] : counts) arr.push_back(json::array({w, n}));
  return arr;
}

static SparseCounts counts_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw FormatError(where + ": counts must be an array of [index, count] pairs");
  SparseCounts out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
      throw FormatError(where + ": each entry must be an integer pair [index, count]");
    out.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  corpus.validate();
  json j;
  j["specs"] = json::array();
  for (const auto& s : corpus.specs)
    j["specs"].push_back({{"id", s.id}, {"dimension", s.dimension}});
  j["documents"] = json::array();
  for (const auto& d : corpus.documents) {
    json doc;
    doc["id"] = d.id;
    doc["counts"] = json::object();
    for (const auto& [mod, counts] : d.counts) doc["counts"][mod] = counts_to_json(counts);
    auto it = corpus.labels.find(d.id);
    if (it != corpus.labels.end()) doc["label"] = it->second;
    j["documents"].push_back(std::move(doc));
  }
  if (!corpus.vocab.empty()) {
    j["vocab"] = json::object();
    for (const auto& [mod, words] : corpus.vocab) j["vocab"][mod] = words;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(1) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw FormatError(strfmt("%s: %s", path.c_str(), e.what()));
  }
  Corpus corpus;
  if (!j.is_object() || !j.contains("specs") || !j.contains("documents"))
    throw FormatError(path + ": expected object with 'specs' and 'documents'");
  for (const auto& s : j["specs"]) {
    if (!s.contains("id") || !s.contains("dimension"))
      throw FormatError(path + ": each spec needs 'id' and 'dimension'");
    corpus.specs.push_back({s["id"].get<std::string>(), s["dimension"].get<int>()});
  }
  for (const auto& d : j["documents"]) {
    if (!d.contains("id")) throw FormatError(path + ": document missing 'id'");
    Document doc;
    doc.id = d["id"].get<std::string>();
    if (d.contains("counts")) {
      if (!d["counts"].is_object())
        throw FormatError(strfmt("%s: document '%s': 'counts' must be an object",
                                 path.c_str(), doc.id.c_str()));
      for (auto it = d["counts"].begin(); it != d["counts"].end(); ++it)
        doc.counts[it.key()] =
            counts_from_json(it.value(), strfmt("document '%s', modality '%s'",
                                                doc.id.c_str(), it.key().c_str()));
    }
    if (d.contains("label")) corpus.labels[doc.id] = d["label"].get<std::string>();
    corpus.documents.push_back(std::move(doc));
  }
  if (j.contains("vocab"))
    for (auto it = j["vocab"].begin(); it != j["vocab"].end(); ++it)
      corpus.vocab[it.key()] = it.value().get<std::vector<std::string>>();
  corpus.validate();
  return corpus;
}

Lexicon load_lexicon(const std::string& path, const Corpus& corpus, const std::string& modality) {
  const ModalitySpec& spec = corpus.modality(modality);
  const std::vector<std::string>* words = nullptr;
  if (auto it = corpus.vocab.find(modality); it != corpus.vocab.end()) words = &it->second;

  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file: " + path);
  std::set<int> indices;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // trim
    auto b = line.find_first_not_of(" \t\r\n");
    auto e = line.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) continue;
    std::string tok = line.substr(b, e - b + 1);
    if (tok[0] == '#') continue;

    bool numeric = !tok.empty() &&
                   std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); });
    int idx = -1;
    if (numeric) {
      idx = std::stoi(tok);
    } else {
      if (!words)
        throw FormatError(strfmt("%s:%d: word '%s' given but corpus has no vocab for '%s'",
                                 path.c_str(), lineno, tok.c_str(), modality.c_str()));
      auto wit = std::find(words->begin(), words->end(), tok);
      if (wit == words->end())
        throw ValidationError(strfmt("%s:%d: word '%s' not in '%s' vocabulary",
                                     path.c_str(), lineno, tok.c_str(), modality.c_str()));
      idx = static_cast<int>(wit - words->begin());
    }
    if (idx < 0 || idx >= spec.dimension)
      throw ValidationError(strfmt("%s:%d: index %d outside [0, %d)", path.c_str(), lineno, idx,
                                   spec.dimension));
    indices.insert(idx);
  }
  Lexicon lex;
  lex.modality = modality;
  lex.indices.assign(indices.begin(), indices.end());
  return lex;
}

std::pair<Corpus, Corpus> split_stratified(
    const Corpus& corpus,
    const std::map<std::string, std::pair<int, int>>& per_category_counts,
    std::uint64_t seed) {
  if (corpus.labels.empty()) throw ValidationError("split_stratified: corpus has no labels");

  std::map<std::string, std::vector<int>> by_label;  // label -> document indices, corpus order
  for (int i = 0; i < corpus.size(); ++i) {
    auto it = corpus.labels.find(corpus.documents[static_cast<size_t>(i)].id);
    if (it == corpus.labels.end())
      throw ValidationError(strfmt("split_stratified: document '%s' has no label",
                                   corpus.documents[static_cast<size_t>(i)].id.c_str()));
    by_label[it->second].push_back(i);
  }
  for (const auto& [label, req] : per_category_counts) {
    auto it = by_label.find(label);
    int avail = it == by_label.end() ? 0 : static_cast<int>(it->second.size());
    if (req.first < 0 || req.second < 0 || req.first + req.second != avail)
      throw ValidationError(strfmt(
          "split_stratified: category '%s' has %d documents, requested %d train + %d test",
          label.c_str(), avail, req.first, req.second));
  }
  for (const auto& [label, docs] : by_label) {
    (void)docs;
    if (!per_category_counts.count(label))
      throw ValidationError(strfmt("split_stratified: no request for category '%s'", label.c_str()));
  }

  std::vector<char> is_test(static_cast<size_t>(corpus.size()), 0);
  for (const auto& [label, indices_const] : by_label) {
    std::vector<int> indices = indices_const;
    // Fisher-Yates with a label-derived stream so the draw for one category
    // does not depend on the others
    Rng rng(mix_seed(seed, hash_id(label)));
    for (size_t i = indices.size(); i > 1; --i) {
      size_t k = rng.below(i);
      std::swap(indices[i - 1], indices[k]);
    }
    int test_n = per_category_counts.at(label).second;
    for (int t = 0; t < test_n; ++t) is_test[static_cast<size_t>(indices[static_cast<size_t>(t)])] = 1;
  }

  Corpus train, test;
  train.specs = test.specs = corpus.specs;
  train.vocab = test.vocab = corpus.vocab;
  for (int i = 0; i < corpus.size(); ++i) {
    const Document& d = corpus.documents[static_cast<size_t>(i)];
    Corpus& dst = is_test[static_cast<size_t>(i)] ? test : train;
    dst.documents.push_back(d);
    dst.labels[d.id] = corpus.labels.at(d.id);
  }
  return {std::move(train), std::move(test)};
}

Corpus restrict_modalities(const Corpus& corpus, const std::vector<std::string>& modality_ids) {
  Corpus out;
  for (const auto& id : modality_ids) out.specs.push_back(corpus.modality(id));
  out.labels = corpus.labels;
  for (const auto& d : corpus.documents) {
    Document nd;
    nd.id = d.id;
    for (const auto& id : modality_ids)
      if (auto it = d.counts.find(id); it != d.counts.end()) nd.counts[id] = it->second;
    out.documents.push_back(std::move(nd));
  }
  for (const auto& id : modality_ids)
    if (auto it = corpus.vocab.find(id); it != corpus.vocab.end()) out.vocab[id] = it->second;
  return out;
}

Document strip_modality(const Document& doc, const std::string& modality_id) {
  Document out = doc;
  out.counts.erase(modality_id);
  return out;
}

}  // namespace mmlda
