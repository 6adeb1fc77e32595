#include "evidentia/evidence.hpp"

#include <algorithm>
#include <cmath>

namespace evidentia {

IntegrationScheme scheme_from_string(const std::string& s) {
  if (s == "weighed") return IntegrationScheme::weighed;
  if (s == "mean") return IntegrationScheme::mean;
  if (s == "mean-with-bm25") return IntegrationScheme::mean_bm25;
  throw ValidationError("unknown integration scheme: '" + s +
                        "' (expected weighed|mean|mean-with-bm25)");
}

const char* scheme_name(IntegrationScheme s) {
  switch (s) {
    case IntegrationScheme::weighed: return "weighed";
    case IntegrationScheme::mean: return "mean";
    case IntegrationScheme::mean_bm25: return "mean-with-bm25";
  }
  return "?";
}

Array pair_features(const Array& h, const Array& e) {
  if (h.rows != 1 || e.rows != 1 || h.cols != e.cols)
    throw ValidationError("pair_features: embeddings must be [1,w] with equal widths");
  Array f(1, 2 * h.cols);
  for (int c = 0; c < h.cols; ++c) {
    f.data[c] = h.data[c] * e.data[c];
    f.data[h.cols + c] = h.data[c] + e.data[c];
  }
  return f;
}

static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double score_pair(const Array& features, const Array& weights, double bias) {
  if (features.size() != weights.size())
    throw ValidationError("score_pair: feature/weight width mismatch");
  double z = bias;
  for (size_t k = 0; k < features.size(); ++k) z += features.data[k] * weights.data[k];
  return sigmoid(z);
}

double score_pair_bm25(const Array& features, double bm25, const Array& weights, double bias) {
  if (bm25 < 0.0) throw ValidationError("score_pair_bm25: bm25 must be >= 0");
  if (features.size() + 1 != weights.size())
    throw ValidationError("score_pair_bm25: expected weights for features plus bm25");
  double z = bias + bm25 * weights.data[weights.size() - 1];
  for (size_t k = 0; k < features.size(); ++k) z += features.data[k] * weights.data[k];
  return sigmoid(z);
}

double integrate_weighed(const std::vector<PairScore>& scores) {
  if (scores.empty()) throw ValidationError("integrate_weighed: empty evidence list");
  double num = 0.0, den = 0.0;
  for (const auto& s : scores) {
    num += s.entailment * s.relevance;
    den += s.relevance;
  }
  return num / std::max(den, kIntegrationEpsilon);
}

double integrate_mean(const std::vector<double>& scalar_scores) {
  if (scalar_scores.empty()) throw ValidationError("integrate_mean: empty evidence list");
  double s = 0.0;
  for (double v : scalar_scores) s += v;
  return s / static_cast<double>(scalar_scores.size());
}

}  // namespace evidentia
