#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "evidentia/error.hpp"
#include "evidentia/textio.hpp"

namespace evidentia {

// Okapi BM25 over a corpus of evidence sentences, used as the auxiliary
// word-overlap input of the bm25 scorer variant.

struct CorpusStats {
  long document_count = 0;
  double avg_doc_len = 0.0;
  std::unordered_map<std::string, long> doc_freq;

  long df(const std::string& term) const {
    auto it = doc_freq.find(term);
    return it == doc_freq.end() ? 0 : it->second;
  }
};

// "Documents" are the evidence sentences of one dataset split.
CorpusStats build_stats(const std::vector<std::vector<std::string>>& documents);

// IDF = ln(1 + (N - df + 0.5) / (df + 0.5)); query terms count once each.
double bm25(const std::vector<std::string>& query, const std::vector<std::string>& doc,
            const CorpusStats& stats, double k1 = 1.2, double b = 0.75);

}  // namespace evidentia
