#include "lesslab/diagnostics.hpp"

#include <cmath>

namespace lesslab {

namespace {

Mat weak_views_over_pool(const DataPool& pool, const AugmentationFamily& weak,
                         Rng& rng) {
  const int d = pool.dim();
  Mat views(static_cast<Eigen::Index>(pool.unlabeled_ids.size()), d);
  for (size_t t = 0; t < pool.unlabeled_ids.size(); ++t) {
    const AugOp op = sample_op(weak, d, rng);
    views.row(static_cast<Eigen::Index>(t)) =
        apply(op, pool.features.row(pool.unlabeled_ids[t]).transpose()).transpose();
  }
  return views;
}

}  // namespace

double test_accuracy(const ModelState& state, const Mat& x,
                     const std::vector<int>& y) {
  if (x.rows() == 0) throw ContractError("test_accuracy: empty evaluation set");
  if (static_cast<Eigen::Index>(y.size()) != x.rows())
    throw ShapeError("test_accuracy: label count mismatch");
  const ForwardOut fo = forward(state, x);
  int hits = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (argmax_row(fo.class_probs.row(i)) == y[static_cast<size_t>(i)]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(x.rows());
}

LedgerRecord ledger(const ModelState& state, const DataPool& pool,
                    const Vec& thresholds, const AugmentationFamily& weak,
                    Rng rng, const Mat& test_x, const std::vector<int>& test_y) {
  if (pool.unlabeled_ids.empty())
    throw ContractError("ledger: pool has no unlabeled samples");
  const Mat views = weak_views_over_pool(pool, weak, rng);
  const ConfidentPrediction cp = predict_confident(state, views, thresholds);

  LedgerRecord rec;
  rec.unlabeled_total = static_cast<int>(pool.unlabeled_ids.size());
  int cc = 0, ci = 0, uc = 0;
  for (size_t t = 0; t < pool.unlabeled_ids.size(); ++t) {
    if (!cp.gate[t]) {
      ++uc;
    } else if (cp.label[t] == pool.oracle_label(pool.unlabeled_ids[t])) {
      ++cc;
    } else {
      ++ci;
    }
  }
  const auto n = static_cast<double>(rec.unlabeled_total);
  rec.confident_correct = cc / n;
  rec.confident_incorrect = ci / n;
  rec.unconfident = uc / n;
  rec.test_accuracy = test_accuracy(state, test_x, test_y);
  return rec;
}

double signal_scarcity(const ModelState& state, const DataPool& pool, double tau,
                       const AugmentationFamily& weak, Rng rng, int n_draws) {
  if (n_draws < 1) throw ContractError("signal_scarcity: n_draws must be positive");
  if (!(tau > 0.0)) throw ContractError("signal_scarcity: tau must be positive");
  if (pool.unlabeled_ids.empty())
    throw ContractError("signal_scarcity: pool has no unlabeled samples");
  long scarce = 0;
  for (int d = 0; d < n_draws; ++d) {
    const Mat views = weak_views_over_pool(pool, weak, rng);
    const ForwardOut fo = forward(state, views);
    for (Eigen::Index i = 0; i < views.rows(); ++i)
      if (fo.class_probs.row(i).maxCoeff() < tau) ++scarce;
  }
  return static_cast<double>(scarce) /
         (static_cast<double>(n_draws) * static_cast<double>(pool.unlabeled_ids.size()));
}

DriftEstimate error_drift_rate(const ModelState& state,
                               const Eigen::Ref<const Vec>& x, int oracle_label,
                               double tau, const std::vector<AugOp>& ops) {
  if (ops.empty()) throw ContractError("error_drift_rate: no ops to evaluate");
  if (oracle_label < 0 || oracle_label >= state.spec.num_classes)
    throw ContractError("error_drift_rate: oracle label out of range");
  Mat views(static_cast<Eigen::Index>(ops.size()), x.size());
  for (size_t t = 0; t < ops.size(); ++t)
    views.row(static_cast<Eigen::Index>(t)) = apply(ops[t], x).transpose();
  const ForwardOut fo = forward(state, views);
  int events = 0;
  for (Eigen::Index i = 0; i < views.rows(); ++i) {
    const int label = argmax_row(fo.class_probs.row(i));
    if (fo.class_probs(i, label) >= tau && label != oracle_label) ++events;
  }
  DriftEstimate est;
  est.n_draws = static_cast<int>(ops.size());
  est.p_event = static_cast<double>(events) / static_cast<double>(est.n_draws);
  return est;
}

DriftEstimate error_drift_rate(const ModelState& state,
                               const Eigen::Ref<const Vec>& x, int oracle_label,
                               double tau, const AugmentationFamily& weak,
                               Rng rng, int n_draws) {
  if (n_draws < 1) throw ContractError("error_drift_rate: n_draws must be positive");
  std::vector<AugOp> ops;
  ops.reserve(static_cast<size_t>(n_draws));
  for (int d = 0; d < n_draws; ++d)
    ops.push_back(sample_op(weak, static_cast<int>(x.size()), rng));
  return error_drift_rate(state, x, oracle_label, tau, ops);
}

double calibration_gap(const Vec& confidence, const std::vector<int>& correct,
                       int n_bins) {
  if (confidence.size() == 0) throw ContractError("calibration_gap: empty sample");
  if (static_cast<Eigen::Index>(correct.size()) != confidence.size())
    throw ShapeError("calibration_gap: length mismatch");
  if (n_bins < 1) throw ContractError("calibration_gap: n_bins must be positive");

  std::vector<double> conf_sum(static_cast<size_t>(n_bins), 0.0);
  std::vector<double> hit_sum(static_cast<size_t>(n_bins), 0.0);
  std::vector<int> count(static_cast<size_t>(n_bins), 0);
  for (Eigen::Index i = 0; i < confidence.size(); ++i) {
    const double c = confidence(i);
    if (c < 0.0 || c > 1.0)
      throw ContractError("calibration_gap: confidence outside [0, 1]");
    const int b = std::min(n_bins - 1, static_cast<int>(c * n_bins));
    conf_sum[static_cast<size_t>(b)] += c;
    hit_sum[static_cast<size_t>(b)] += correct[static_cast<size_t>(i)] ? 1.0 : 0.0;
    ++count[static_cast<size_t>(b)];
  }
  double gap = 0.0;
  const auto n = static_cast<double>(confidence.size());
  for (int b = 0; b < n_bins; ++b) {
    if (count[static_cast<size_t>(b)] == 0) continue;
    const auto nb = static_cast<double>(count[static_cast<size_t>(b)]);
    gap += (nb / n) * std::abs(hit_sum[static_cast<size_t>(b)] / nb -
                               conf_sum[static_cast<size_t>(b)] / nb);
  }
  return gap;
}

double calibration_gap(const ModelState& state, const Mat& x,
                       const std::vector<int>& y, int n_bins) {
  if (x.rows() == 0) throw ContractError("calibration_gap: empty sample");
  if (static_cast<Eigen::Index>(y.size()) != x.rows())
    throw ShapeError("calibration_gap: label count mismatch");
  const ForwardOut fo = forward(state, x);
  Vec conf(x.rows());
  std::vector<int> correct(static_cast<size_t>(x.rows()), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int label = argmax_row(fo.class_probs.row(i));
    conf(i) = fo.class_probs(i, label);
    correct[static_cast<size_t>(i)] = label == y[static_cast<size_t>(i)] ? 1 : 0;
  }
  return calibration_gap(conf, correct, n_bins);
}

}  // namespace lesslab
