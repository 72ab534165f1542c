#pragma once

#include <string>
#include <vector>

#include "lesslab/numerics.hpp"

namespace lesslab {

// Two-head MLP classifier: tanh trunk, a class head producing logits over
// num_classes, and a projection head whose row-normalized output is scored
// against learnable unit-norm prototypes (cosine / temp).
struct ModelSpec {
  int input_dim = 0;
  int num_classes = 0;
  int hidden_width = 64;
  int hidden_layers = 2;
  int proj_dim = 16;
  int num_prototypes = 0;    // 0 -> 2 * num_classes
  double temp_proto = 0.1;

  int prototypes() const { return num_prototypes > 0 ? num_prototypes : 2 * num_classes; }
};

struct SgdConfig {
  double lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct Linear {
  Mat w;  // in x out
  Mat b;  // 1 x out
};

// One tensor per parameter; also the shape of gradients and momentum.
struct ParamSet {
  std::vector<Linear> mlp;
  Linear class_head;
  Linear proj_head;
  Mat prototypes;  // k x proj_dim

  void set_zero();
  void add_scaled(const ParamSet& other, double scale);  // this += scale * other
};

// Visit every parameter tensor with a stable name; the visitation order is
// the contract shared by gradients, momentum, and checkpoints.
template <class Params, class Fn>
void for_each_param(Params& p, Fn&& fn) {
  for (size_t i = 0; i < p.mlp.size(); ++i) {
    const std::string tag = "mlp" + std::to_string(i);
    fn(tag + ".w", p.mlp[i].w);
    fn(tag + ".b", p.mlp[i].b);
  }
  fn("class_head.w", p.class_head.w);
  fn("class_head.b", p.class_head.b);
  fn("proj_head.w", p.proj_head.w);
  fn("proj_head.b", p.proj_head.b);
  fn("prototypes", p.prototypes);
}

template <class Fn>
void for_each_param_pair(ParamSet& a, const ParamSet& b, Fn&& fn) {
  for (size_t i = 0; i < a.mlp.size(); ++i) {
    fn(a.mlp[i].w, b.mlp[i].w);
    fn(a.mlp[i].b, b.mlp[i].b);
  }
  fn(a.class_head.w, b.class_head.w);
  fn(a.class_head.b, b.class_head.b);
  fn(a.proj_head.w, b.proj_head.w);
  fn(a.proj_head.b, b.proj_head.b);
  fn(a.prototypes, b.prototypes);
}

struct ModelState {
  ModelSpec spec;
  SgdConfig sgd;
  ParamSet params;
  ParamSet momentum;  // same shapes as params, starts at zero
};

// Gaussian init scaled by 1/sqrt(fan_in); zero biases; unit-norm prototypes.
ModelState init_model(const ModelSpec& spec, Rng& rng);

// Gradient container with the same shapes as the model parameters.
ParamSet zero_grads(const ModelState& state);

// Forward pass with everything backward() needs cached.
struct ForwardOut {
  Mat class_logits;  // B x num_classes
  Mat class_probs;   // softmax of class_logits
  Mat embedding;     // B x proj_dim, rows unit norm
  Mat proto_sim;     // embedding * prototypes^T, cosine similarities
  Mat proto_scores;  // proto_sim / temp_proto
  Mat proto_probs;   // softmax of proto_scores

  // cache
  Mat input;
  std::vector<Mat> hidden;  // post-tanh activations per trunk layer
  Mat proj_raw;             // pre-normalization projection
  Vec proj_norm;            // row norms of proj_raw, floored at kEps
};

ForwardOut forward(const ModelState& state, const Mat& x);

// Accumulate parameter gradients given upstream gradients at the two heads.
// d_class_logits is B x num_classes (or empty to skip that head) and
// d_proto_scores is B x prototypes w.r.t. the temperature-scaled scores
// (or empty). Rows of exact zeros contribute exact zeros.
void backward(const ModelState& state, const ForwardOut& fo,
              const Mat& d_class_logits, const Mat& d_proto_scores,
              ParamSet& grads);

// Confidence gate over class probabilities: gate row i iff
// max_c probs(i, c) >= thresholds(argmax). Thresholds above 1 never gate.
struct ConfidentPrediction {
  std::vector<int> gate;   // 0/1 per row
  std::vector<int> label;  // argmax class per row
  Vec max_prob;

  int gated_count() const;
};

ConfidentPrediction gate_rows(const Mat& class_probs, const Vec& thresholds);
ConfidentPrediction predict_confident(const ModelState& state, const Mat& x,
                                      const Vec& thresholds);

// Momentum SGD with weight decay; prototypes are renormalized to unit rows
// after the step. Throws NumericError naming the parameter on non-finite
// gradients.
void sgd_step(ModelState& state, const ParamSet& grads, double lr);

// Binary checkpoint of spec, optimizer config, parameters, and momentum;
// load(save(state)) is bit exact.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace lesslab
