#pragma once

#include <vector>

#include "lesslab/data.hpp"
#include "lesslab/model.hpp"

namespace lesslab {

// Read-only measurements of a model against a pool; nothing here may touch
// parameters or labels used for training. Rngs are taken by value so a
// diagnostic never perturbs the caller's stream.

// Pseudo-label quality over the unlabeled pool, one weak view per sample,
// scored against oracle labels. The three fractions partition U.
struct LedgerRecord {
  double confident_correct = 0.0;
  double confident_incorrect = 0.0;
  double unconfident = 0.0;
  double test_accuracy = 0.0;
  int unlabeled_total = 0;
};

LedgerRecord ledger(const ModelState& state, const DataPool& pool,
                    const Vec& thresholds, const AugmentationFamily& weak,
                    Rng rng, const Mat& test_x, const std::vector<int>& test_y);

double test_accuracy(const ModelState& state, const Mat& x,
                     const std::vector<int>& y);

// Fraction of weak draws over the unlabeled pool whose max class probability
// stays below tau: how much of U the distillation loss cannot see.
double signal_scarcity(const ModelState& state, const DataPool& pool, double tau,
                       const AugmentationFamily& weak, Rng rng, int n_draws);

struct DriftEstimate {
  double p_event = 0.0;
  int n_draws = 0;
};

// P(confident and wrong) for one sample: the probability that a weak view
// gates through while the predicted class disagrees with the oracle label.
DriftEstimate error_drift_rate(const ModelState& state,
                               const Eigen::Ref<const Vec>& x, int oracle_label,
                               double tau, const std::vector<AugOp>& ops);
DriftEstimate error_drift_rate(const ModelState& state,
                               const Eigen::Ref<const Vec>& x, int oracle_label,
                               double tau, const AugmentationFamily& weak,
                               Rng rng, int n_draws);

// Expected calibration error over equal-width confidence bins:
// sum_b (n_b / n) * |accuracy_b - mean_confidence_b|.
double calibration_gap(const Vec& confidence, const std::vector<int>& correct,
                       int n_bins);
double calibration_gap(const ModelState& state, const Mat& x,
                       const std::vector<int>& y, int n_bins);

}  // namespace lesslab
