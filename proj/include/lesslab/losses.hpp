#pragma once

#include "lesslab/assign.hpp"
#include "lesslab/data.hpp"
#include "lesslab/model.hpp"

namespace lesslab {

struct SinkhornConfig {
  double eps = 0.05;
  int iters = 3;
};

// Per-step loss report. `composite` is the value of whichever unlabeled
// objective a method trains on (gated distillation terms plus clustering
// consistency terms, each averaged over the full unlabeled batch), so
// total = supervised + lambda_u * composite holds for every method.
struct LossBreakdown {
  double supervised = 0.0;
  double distill = 0.0;    // gated terms / batch
  double coreg = 0.0;      // ungated terms / batch
  double composite = 0.0;  // distill + coreg
  double total = 0.0;
  int gated_count = 0;
  int coreg_count = 0;
  // every clustering target equals its prediction exactly; the consistency
  // gradient vanishes and the term can no longer teach anything
  bool coreg_degenerate = false;
};

// ------------------------------------------------------------- targets
//
// Unlabeled losses train against frozen targets: the gate decision, the
// pseudo-label, and the balanced assignments are computed once from the
// current parameters and then treated as constants (stop-gradient). With
// targets frozen, every loss below is a plain differentiable function of
// the parameters, which is what the finite-difference checks probe.

struct UnlabeledTargets {
  ConfidentPrediction gates;   // from the weak-view class probabilities
  Mat distill_targets;         // B_u x num_classes, one-hot rows where gated, zero otherwise
  std::vector<int> ungated;    // row indices with gate == 0
  Mat qa_weak;                 // |ungated| x prototypes, balanced assignment of the weak view
  Mat qa_strong;               // same for the strong view
};

// Targets for pure distillation (no clustering assignments).
UnlabeledTargets make_distill_targets(const ModelState& state, const Mat& weak_x,
                                      const Vec& thresholds);

// Targets for the composite loss: distillation targets plus balanced
// assignments over the ungated rows of both views.
UnlabeledTargets make_composite_targets(const ModelState& state, const Mat& weak_x,
                                        const Mat& strong_x, const Vec& thresholds,
                                        const SinkhornConfig& sk);

// Assignments over every row of both views (clustering-only training).
struct CoregTargets {
  Mat qa_u;  // batch x prototypes
  Mat qa_v;
};

CoregTargets make_coreg_targets(const ModelState& state, const Mat& x_u,
                                const Mat& x_v, const SinkhornConfig& sk);

// -------------------------------------------------------------- losses
//
// Each evaluator returns the loss value and, when grads is non-null,
// accumulates unscaled parameter gradients into it.

// Mean cross-entropy of true labels under weak views of labeled samples.
double l_supervised(const ModelState& state, const Mat& x,
                    const std::vector<int>& labels, ParamSet* grads);

// Pseudo-label distillation: cross-entropy of the frozen weak-view
// pseudo-label against the strong-view prediction, gated rows only,
// averaged over the full unlabeled batch. All-masked batches give loss 0
// and exactly zero gradients.
double l_distill(const ModelState& state, const Mat& strong_x,
                 const UnlabeledTargets& targets, ParamSet* grads);

// Swapped clustering consistency: each view's cluster softmax is trained
// toward the other view's frozen balanced assignment; per-sample value is
// the average of the two swapped terms.
double l_coreg(const ModelState& state, const Mat& x_u, const Mat& x_v,
               const CoregTargets& targets, ParamSet* grads);

// Confidence-gated composite: gated rows contribute distillation terms,
// ungated rows contribute clustering-consistency terms; the two branches
// are exclusive per sample.
LossBreakdown l_composite(const ModelState& state, const Mat& weak_x,
                          const Mat& strong_x, const UnlabeledTargets& targets,
                          ParamSet* grads);

// ------------------------------------------------------------ training

enum class UnlabeledObjective { none, distill, coreg, composite };

// One optimization step's loss: optional supervised term plus lambda_u times
// the chosen unlabeled objective, with targets built fresh from the current
// parameters. gates_out (if non-null) receives the weak-view gates for
// threshold adaptation and history recording.
LossBreakdown training_loss(const ModelState& state, const Batch& batch,
                            const Vec& thresholds, UnlabeledObjective objective,
                            bool with_supervised, double lambda_u,
                            const SinkhornConfig& sk, ParamSet* grads,
                            ConfidentPrediction* gates_out = nullptr);

// The full barely-supervised objective: supervised + lambda_u * composite.
LossBreakdown total_objective(const ModelState& state, const Batch& batch,
                              const Vec& thresholds, double lambda_u,
                              const SinkhornConfig& sk, ParamSet* grads,
                              ConfidentPrediction* gates_out = nullptr);

}  // namespace lesslab
