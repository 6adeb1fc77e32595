#pragma once

#include <map>
#include <string>
#include <vector>

#include "evidentia/graph.hpp"

namespace evidentia {

// Sentence-embedding architectures. Each builder appends the encoder
// subgraph for one sentence and returns the [1, W] embedding node.
// Parameters are declared by name through Graph::param, so the hypothesis
// side and every evidence side of one graph resolve to the same nodes
// (Siamese sharing).

enum class EncoderKind { avg, dan, cnn, rnn, rnn_cnn, attn1511 };
enum class FocusKind { softmax, sigma_max };

EncoderKind encoder_kind_from_string(const std::string& s);
const char* encoder_kind_name(EncoderKind k);
FocusKind focus_kind_from_string(const std::string& s);
const char* focus_kind_name(FocusKind k);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::avg;
  int hidden = 100;                        // h
  std::vector<int> cnn_widths = {2, 3, 4, 5};
  int cnn_filters = 50;                    // per width
  int dan_depth = 2;
  double word_dropout = 1.0 / 3.0;         // DAN only
  FocusKind focus = FocusKind::sigma_max;  // attn1511 only

  int output_width() const;
  int max_cnn_width() const;
  bool uses_cnn() const {
    return kind == EncoderKind::cnn || kind == EncoderKind::rnn_cnn ||
           kind == EncoderKind::attn1511;
  }
  bool uses_gru() const {
    return kind == EncoderKind::rnn || kind == EncoderKind::rnn_cnn ||
           kind == EncoderKind::attn1511;
  }
  void validate() const;
};

// Input nodes of one featurized sentence inside a graph.
struct SentenceNodes {
  int feats = -1;                  // [T, in]
  int mask = -1;                   // [T, 1]
  int word_drop = -1;              // [T, 1] DAN word-dropout mask (training)
  std::map<int, int> window_mask;  // cnn width -> [T-w+1, 1]
};

// r = sigma(W_r x + U_r h + b_r); z = sigma(W_z x + U_z h + b_z);
// hc = tanh(W_h x + U_h (r*h) + b_h); h' = (1-z)*h + z*hc
struct GruWeights {
  Array Wr, Ur, br, Wz, Uz, bz, Wh, Uh, bh;
};
Array gru_step(const Array& x_t, const Array& h_prev, const GruWeights& w);

// Normalize raw attention scores to focus weights.
//   softmax:   s_t = exp(a_t) / sum_t' exp(a_t')
//   sigma-max: s_t = sigma(a_t) / max_t' sigma(a_t')
// scores may be a row or column vector; the result keeps the orientation.
Array focus_weights(const Array& scores, FocusKind kind);

// In-graph focus over [T,1] scores with a [T,1] mask.
int build_focus(Graph& g, FocusKind kind, int scores, int mask);

// Standard encoder for one sentence. `training` wires the DAN word-dropout
// mask in; other dropout sites live outside the encoders.
int build_encoder(Graph& g, const EncoderConfig& cfg, const SentenceNodes& s, int input_width,
                  bool training);

// attn1511 evidence side: token states are scaled by hypothesis-conditioned
// focus weights before the CNN stage.
int build_encoder_attn(Graph& g, const EncoderConfig& cfg, const SentenceNodes& s,
                       int input_width, int hypothesis_embedding);

}  // namespace evidentia
