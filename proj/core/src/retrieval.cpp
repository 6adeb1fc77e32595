#include "evidentia/retrieval.hpp"

#include <cmath>
#include <set>

namespace evidentia {

CorpusStats build_stats(const std::vector<std::vector<std::string>>& documents) {
  if (documents.empty()) throw ValidationError("build_stats: empty corpus");
  CorpusStats s;
  s.document_count = static_cast<long>(documents.size());
  size_t total_len = 0;
  for (const auto& doc : documents) {
    total_len += doc.size();
    std::set<std::string> seen(doc.begin(), doc.end());
    for (const auto& t : seen) ++s.doc_freq[t];
  }
  s.avg_doc_len = static_cast<double>(total_len) / static_cast<double>(documents.size());
  if (s.avg_doc_len <= 0.0) throw ValidationError("build_stats: corpus has no tokens");
  return s;
}

double bm25(const std::vector<std::string>& query, const std::vector<std::string>& doc,
            const CorpusStats& stats, double k1, double b) {
  if (!(k1 > 0.0)) throw ValidationError("bm25: k1 must be positive");
  if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("bm25: b must lie in [0,1]");

  std::unordered_map<std::string, long> tf;
  for (const auto& t : doc) ++tf[t];

  const double norm = 1.0 - b + b * static_cast<double>(doc.size()) / stats.avg_doc_len;
  const double n = static_cast<double>(stats.document_count);

  double score = 0.0;
  std::set<std::string> unique_terms(query.begin(), query.end());
  for (const auto& term : unique_terms) {
    auto it = tf.find(term);
    if (it == tf.end()) continue;
    const double f = static_cast<double>(it->second);
    const double df = static_cast<double>(stats.df(term));
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    score += idf * f * (k1 + 1.0) / (f + k1 * norm);
  }
  return score;
}

}  // namespace evidentia
