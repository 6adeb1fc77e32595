#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "evidentia/array.hpp"
#include "evidentia/error.hpp"

namespace evidentia {

// Tokenization, vocabulary construction, pretrained-vector loading and
// per-token feature assembly.

// Rule table (deterministic, documented because tests pin it):
//   1. lowercase ASCII letters (other bytes pass through),
//   2. split on whitespace,
//   3. peel leading punctuation characters off each chunk as single-char
//      tokens,
//   4. peel trailing punctuation the same way, except that a trailing '.'
//      stays attached when the remaining core still contains a '.'
//      ("u.s." keeps its final period, "run." does not).
// Punctuation = ASCII that is neither alphanumeric nor one of - ' . inside
// the core.
std::vector<std::string> tokenize(const std::string& text);

// Plain-text vector file: one token per line followed by dim decimals,
// whitespace-separated. Malformed lines are rejected with their 1-based
// line number.
std::unordered_map<std::string, std::vector<double>> load_pretrained(const std::string& path,
                                                                     int dim);

struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<int> indices;  // vocabulary index, -1 for out-of-vocabulary
};

class Vocabulary {
 public:
  struct TokenInfo {
    std::string token;
    long freq = 0;        // training-corpus frequency
    int adapt_index = -1; // row in the adaptable embedding matrix, -1 if frozen
    std::vector<double> vec;  // pretrained (or zero) vector; initial value for adaptable rows
  };

  // Adaptable set = the K most frequent training tokens (ties broken
  // lexicographically). extra_tokens (e.g. validation/test text) get
  // entries with freq 0 so their pretrained vectors stay available; they
  // are never adaptable.
  static Vocabulary build(const std::vector<std::vector<std::string>>& training_corpus, int k,
                          const std::unordered_map<std::string, std::vector<double>>& pretrained,
                          int dim, const std::vector<std::vector<std::string>>& extra_tokens = {});

  int dim() const { return dim_; }
  int adaptable_count() const { return adaptable_; }
  size_t size() const { return tokens_.size(); }
  const std::vector<TokenInfo>& tokens() const { return tokens_; }

  // -1 when the token is unknown.
  int index_of(const std::string& token) const;
  const TokenInfo& info(int index) const { return tokens_[index]; }

  TokenSequence lookup(std::vector<std::string> tokens, int max_len) const;

  // Initial value of the adaptable embedding matrix [K, dim].
  Array adaptable_init() const;

  std::string to_json() const;
  static Vocabulary from_json(const std::string& text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  int dim_ = 0;
  int adaptable_ = 0;
  std::vector<TokenInfo> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class Role { hypothesis, evidence };

// Per-sentence model inputs, padded to pad_len. The dense embedding part is
// split into the frozen rows (zeros at adaptable positions) and the index
// column used to gather adaptable rows in-graph.
struct Featurized {
  Array fixed;  // [T, dim] frozen vectors
  Array aidx;   // [T, 1] adaptable row index or -1
  Array flags;  // [T, 3] (type, unigram overlap, bigram overlap)
  Array mask;   // [T, 1]
  int length = 0;
};

Featurized featurize_pair(const TokenSequence& seq, const TokenSequence& paired, Role role,
                          const Vocabulary& vocab, int pad_len);

// The assembled [T, dim+3] matrix the encoders actually consume (frozen
// part + adaptable rows + flags); exposed for tests and diagnostics.
Array featurize_dense(const Featurized& f, const Array& adaptable_table);

}  // namespace evidentia
