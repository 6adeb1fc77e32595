#pragma once

#include <string>
#include <vector>

#include "evidentia/array.hpp"
#include "evidentia/error.hpp"

namespace evidentia {

// Per-evidence scoring and integration into one answer.

// Entailment C and relevance R, both sigmoid outputs in [0,1].
struct PairScore {
  double entailment = 0.0;  // C
  double relevance = 0.0;   // R
};

enum class IntegrationScheme { weighed, mean, mean_bm25 };

IntegrationScheme scheme_from_string(const std::string& s);
const char* scheme_name(IntegrationScheme s);

// [h*e ; h+e], width 2h.
Array pair_features(const Array& h, const Array& e);

// sigma(w . features + b); entailment and relevance heads use independent
// weights but the same feature vector.
double score_pair(const Array& features, const Array& weights, double bias);
double score_pair_bm25(const Array& features, double bm25, const Array& weights, double bias);

// y = sum_i C_i R_i / max(sum_i R_i, eps). The max() guard keeps the paper
// formula exact whenever the denominator is healthy and only engages when
// every relevance underflows.
constexpr double kIntegrationEpsilon = 1e-6;
double integrate_weighed(const std::vector<PairScore>& scores);
double integrate_mean(const std::vector<double>& scalar_scores);

}  // namespace evidentia
