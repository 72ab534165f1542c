#pragma once

#include <map>
#include <vector>

#include "lesslab/data.hpp"
#include "lesslab/numerics.hpp"

namespace lesslab {

// ------------------------------------------------- adaptive thresholds

// Per-class confidence thresholds driven toward target gating rates: each
// update moves tau_c one epsilon step toward making the EMA of the gated
// fraction match the class prior.
struct ThresholdState {
  Vec tau;     // per-class thresholds
  Vec p_conf;  // EMA of the per-class confident fraction
  Vec priors;  // target rates r_c
  double alpha = 0.9;
  double epsilon = 0.001;
  double tau_min = 0.6;
  double tau_max = 0.9999;
};

// tau_init entries must exceed chance (1/k); they may start outside the
// clamp range, which static-threshold runs rely on.
ThresholdState make_thresholds(const Vec& tau_init, const Vec& priors,
                               double alpha = 0.9, double epsilon = 0.001,
                               double tau_min = 0.6, double tau_max = 0.9999);

// batch_counts[c] = unlabeled samples gated into class c this step, out of
// batch_unlabeled draws. batch_unlabeled == 0 is a no-op. Every tau moves by
// at most epsilon and stays inside [tau_min, tau_max].
void update_thresholds(ThresholdState& ts, const std::vector<int>& batch_counts,
                       int batch_unlabeled);

// ------------------------------------------------- prediction history

// Rolling window of the last `capacity` predictions for one sample.
class SampleHistory {
 public:
  SampleHistory() = default;
  SampleHistory(int num_classes, int capacity);

  void record(int predicted_class, bool confident);
  int total() const { return size_; }
  int capacity() const { return static_cast<int>(ring_.size()); }
  int class_count(int c) const;
  int confident_count() const { return confident_; }
  int num_classes() const { return static_cast<int>(counts_.size()); }

 private:
  std::vector<std::pair<int, bool>> ring_;
  int head_ = 0;
  int size_ = 0;
  std::vector<int> counts_;  // per-class tallies of the window
  int confident_ = 0;
};

// Histories for every unlabeled id; record() rejects unknown ids so
// promoted-and-removed samples cannot silently re-enter.
class PredictionHistory {
 public:
  PredictionHistory() = default;
  PredictionHistory(const std::vector<int>& unlabeled_ids, int num_classes,
                    int capacity);

  void record(int id, int predicted_class, bool confident);
  const SampleHistory& at(int id) const;
  const std::vector<int>& ids() const { return ids_; }

 private:
  std::vector<int> ids_;
  std::map<int, SampleHistory> by_id_;
};

// ------------------------------------------------------- promotion

struct RefinerConfig {
  int n_min = 30;        // rule-of-three validity region
  double lambda = 0.95;  // required lower bound on the modal frequency
  int n_cap = 64;        // history window
  bool reevaluate = false;  // re-test previously promoted ids each epoch
};

void validate_refiner(const RefinerConfig& cfg);

// Promote iff the modal class is unique, the window holds at least n_min
// predictions, and mu_hat - 3/N >= lambda (one-sided rule-of-three bound).
struct PromotionTest {
  bool accept = false;
  int label = -1;           // modal class, -1 on a tie
  double lower_bound = 0.0; // mu_hat - 3/N
};

PromotionTest rule_of_three_test(const SampleHistory& h, const RefinerConfig& cfg);

// Run the test over every tracked id and write accepted labels into
// pool.promoted. Already-promoted ids are skipped (their label is frozen)
// unless cfg.reevaluate, in which case the promoted set is rebuilt from
// scratch. Returns the ids whose promotion state is new or changed.
std::vector<std::pair<int, int>> epoch_end_promote(const PredictionHistory& history,
                                                   const RefinerConfig& cfg,
                                                   DataPool& pool);

}  // namespace lesslab
