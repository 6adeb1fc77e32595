#include "evidentia/textio.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace evidentia {

namespace {

// multibyte UTF-8 passes through as word material
bool is_word_char(unsigned char c) { return c >= 128 || std::isalnum(c); }

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (unsigned char c : text)
    lowered.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));

  std::vector<std::string> out;
  std::istringstream ss(lowered);
  std::string chunk;
  while (ss >> chunk) {
    size_t lo = 0, hi = chunk.size();
    while (lo < hi && !is_word_char(chunk[lo])) out.push_back(std::string(1, chunk[lo++]));

    std::vector<char> trailing;
    while (hi > lo && !is_word_char(chunk[hi - 1])) {
      char c = chunk[hi - 1];
      if (c == '.' && chunk.substr(lo, hi - 1 - lo).find('.') != std::string::npos)
        break;  // abbreviation: "u.s." keeps its final period
      trailing.push_back(c);
      --hi;
    }
    if (hi > lo) out.push_back(chunk.substr(lo, hi - lo));
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it)
      out.push_back(std::string(1, *it));
  }
  return out;
}

std::unordered_map<std::string, std::vector<double>> load_pretrained(const std::string& path,
                                                                     int dim) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pretrained vector file: " + path);
  std::unordered_map<std::string, std::vector<double>> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> vec;
    vec.reserve(dim);
    std::string field;
    while (ls >> field) {
      size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(line_no) + ": unparsable value '" +
                              field + "'");
      }
      if (used != field.size())
        throw ValidationError(path + ":" + std::to_string(line_no) + ": unparsable value '" +
                              field + "'");
      vec.push_back(v);
    }
    if (static_cast<int>(vec.size()) != dim)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(dim) + " values, got " + std::to_string(vec.size()));
    out[token] = std::move(vec);
  }
  return out;
}

Vocabulary Vocabulary::build(
    const std::vector<std::vector<std::string>>& training_corpus, int k,
    const std::unordered_map<std::string, std::vector<double>>& pretrained, int dim,
    const std::vector<std::vector<std::string>>& extra_tokens) {
  if (k < 0) throw ValidationError("build_vocab: K must be >= 0");

  std::map<std::string, long> freq;  // ordered: lexicographic tie-break for free
  for (const auto& seq : training_corpus)
    for (const auto& t : seq) ++freq[t];

  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  v.dim_ = dim;
  v.adaptable_ = std::min<int>(k, static_cast<int>(ranked.size()));

  auto vec_for = [&](const std::string& t) {
    auto it = pretrained.find(t);
    return it != pretrained.end() ? it->second : std::vector<double>(dim, 0.0);
  };

  for (int i = 0; i < v.adaptable_; ++i)
    v.tokens_.push_back({ranked[i].first, ranked[i].second, i, vec_for(ranked[i].first)});

  std::set<std::string> rest;
  for (size_t i = v.adaptable_; i < ranked.size(); ++i) rest.insert(ranked[i].first);
  for (const auto& seq : extra_tokens)
    for (const auto& t : seq)
      if (!freq.count(t)) rest.insert(t);
  for (const auto& t : rest) {
    auto it = freq.find(t);
    v.tokens_.push_back({t, it != freq.end() ? it->second : 0, -1, vec_for(t)});
  }

  for (size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i].token] = static_cast<int>(i);
  return v;
}

int Vocabulary::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

TokenSequence Vocabulary::lookup(std::vector<std::string> tokens, int max_len) const {
  if (static_cast<int>(tokens.size()) > max_len) tokens.resize(max_len);  // tail truncation
  TokenSequence seq;
  seq.indices.reserve(tokens.size());
  for (const auto& t : tokens) seq.indices.push_back(index_of(t));
  seq.tokens = std::move(tokens);
  return seq;
}

Array Vocabulary::adaptable_init() const {
  Array table(std::max(adaptable_, 1), dim_);
  for (const auto& info : tokens_)
    if (info.adapt_index >= 0)
      std::copy(info.vec.begin(), info.vec.end(),
                &table.data[static_cast<size_t>(info.adapt_index) * dim_]);
  return table;
}

std::string Vocabulary::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "evidentia-vocab";
  j["version"] = 1;
  j["dim"] = dim_;
  j["adaptable"] = adaptable_;
  auto& arr = j["tokens"] = nlohmann::ordered_json::array();
  for (const auto& t : tokens_) {
    nlohmann::ordered_json e;
    e["t"] = t.token;
    e["f"] = t.freq;
    e["a"] = t.adapt_index;
    e["v"] = t.vec;
    arr.push_back(std::move(e));
  }
  return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("vocabulary: invalid JSON: ") + e.what());
  }
  if (j.value("format", "") != "evidentia-vocab")
    throw ValidationError("vocabulary: unrecognized format field");
  if (j.value("version", 0) != 1)
    throw ValidationError("vocabulary: unsupported version");
  Vocabulary v;
  v.dim_ = j.at("dim").get<int>();
  v.adaptable_ = j.at("adaptable").get<int>();
  for (const auto& e : j.at("tokens")) {
    TokenInfo info;
    info.token = e.at("t").get<std::string>();
    info.freq = e.at("f").get<long>();
    info.adapt_index = e.at("a").get<int>();
    info.vec = e.at("v").get<std::vector<double>>();
    if (static_cast<int>(info.vec.size()) != v.dim_)
      throw ValidationError("vocabulary: vector length mismatch for token '" + info.token + "'");
    v.tokens_.push_back(std::move(info));
  }
  for (size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i].token] = static_cast<int>(i);
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write vocabulary file: " + path);
  out << to_json() << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open vocabulary file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

Featurized featurize_pair(const TokenSequence& seq, const TokenSequence& paired, Role role,
                          const Vocabulary& vocab, int pad_len) {
  const int n = static_cast<int>(seq.tokens.size());
  if (n > pad_len)
    throw ValidationError("featurize_pair: sequence longer than pad length");
  if (seq.tokens.size() != seq.indices.size() || paired.tokens.size() != paired.indices.size())
    throw ValidationError("featurize_pair: tokens/indices length mismatch");

  auto check_vocab = [&](const TokenSequence& s) {
    for (size_t i = 0; i < s.tokens.size(); ++i) {
      int idx = s.indices[i];
      if (idx < 0) continue;
      if (idx >= static_cast<int>(vocab.size()) || vocab.info(idx).token != s.tokens[i])
        throw ValidationError("featurize_pair: sequence was tokenized against a different "
                              "vocabulary (token '" + s.tokens[i] + "')");
    }
  };
  check_vocab(seq);
  check_vocab(paired);

  std::set<std::string> uni(paired.tokens.begin(), paired.tokens.end());
  std::set<std::pair<std::string, std::string>> bi;
  for (size_t i = 0; i + 1 < paired.tokens.size(); ++i)
    bi.emplace(paired.tokens[i], paired.tokens[i + 1]);

  Featurized f;
  f.length = n;
  f.fixed = Array::zeros(pad_len, vocab.dim());
  f.aidx = Array::full(pad_len, 1, -1.0);
  f.flags = Array::zeros(pad_len, 3);
  f.mask = Array::zeros(pad_len, 1);

  for (int t = 0; t < n; ++t) {
    f.mask.data[t] = 1.0;
    int idx = seq.indices[t];
    if (idx >= 0) {
      const auto& info = vocab.info(idx);
      if (info.adapt_index >= 0) {
        f.aidx.data[t] = info.adapt_index;
      } else {
        std::copy(info.vec.begin(), info.vec.end(),
                  &f.fixed.data[static_cast<size_t>(t) * vocab.dim()]);
      }
    }
    f.flags.at(t, 0) = role == Role::hypothesis ? 1.0 : 0.0;
    f.flags.at(t, 1) = uni.count(seq.tokens[t]) ? 1.0 : 0.0;
    f.flags.at(t, 2) = (t + 1 < n && bi.count({seq.tokens[t], seq.tokens[t + 1]})) ? 1.0 : 0.0;
  }
  return f;
}

Array featurize_dense(const Featurized& f, const Array& adaptable_table) {
  const int T = f.fixed.rows, d = f.fixed.cols;
  Array out(T, d + 3);
  for (int t = 0; t < T; ++t) {
    int a = static_cast<int>(f.aidx.data[t]);
    for (int c = 0; c < d; ++c)
      out.at(t, c) = a >= 0 ? adaptable_table.at(a, c) : f.fixed.at(t, c);
    for (int c = 0; c < 3; ++c) out.at(t, d + c) = f.flags.at(t, c);
  }
  return out;
}

}  // namespace evidentia
