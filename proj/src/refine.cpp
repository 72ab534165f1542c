#include "lesslab/refine.hpp"

#include <algorithm>
#include <cmath>

namespace lesslab {

ThresholdState make_thresholds(const Vec& tau_init, const Vec& priors,
                               double alpha, double epsilon, double tau_min,
                               double tau_max) {
  const auto k = tau_init.size();
  if (k < 2) throw ConfigError("thresholds: need at least 2 classes");
  if (priors.size() != k) throw ShapeError("thresholds: priors length mismatch");
  const double chance = 1.0 / static_cast<double>(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    if (!(tau_init(c) > chance))
      throw ConfigError("thresholds: tau_init must exceed chance level 1/k");
    if (priors(c) < 0.0) throw ConfigError("thresholds: negative prior");
  }
  if (alpha < 0.0 || alpha >= 1.0) throw ConfigError("thresholds: alpha must lie in [0, 1)");
  if (epsilon <= 0.0) throw ConfigError("thresholds: epsilon must be positive");
  if (!(tau_min < tau_max)) throw ConfigError("thresholds: tau_min must be < tau_max");

  ThresholdState ts;
  ts.tau = tau_init;
  ts.p_conf = Vec::Zero(k);
  ts.priors = priors;
  ts.alpha = alpha;
  ts.epsilon = epsilon;
  ts.tau_min = tau_min;
  ts.tau_max = tau_max;
  return ts;
}

void update_thresholds(ThresholdState& ts, const std::vector<int>& batch_counts,
                       int batch_unlabeled) {
  if (static_cast<Eigen::Index>(batch_counts.size()) != ts.tau.size())
    throw ShapeError("update_thresholds: counts length mismatch");
  if (batch_unlabeled < 0)
    throw ContractError("update_thresholds: negative batch size");
  if (batch_unlabeled == 0) return;
  int sum = 0;
  for (int c : batch_counts) {
    if (c < 0) throw ContractError("update_thresholds: negative count");
    sum += c;
  }
  if (sum > batch_unlabeled)
    throw ContractError("update_thresholds: counts exceed batch size");

  for (Eigen::Index c = 0; c < ts.tau.size(); ++c) {
    const double p_batch =
        static_cast<double>(batch_counts[static_cast<size_t>(c)]) / batch_unlabeled;
    ts.p_conf(c) = ts.alpha * ts.p_conf(c) + (1.0 - ts.alpha) * p_batch;
    const double gap = ts.p_conf(c) - ts.priors(c);
    if (gap > 0.0)
      ts.tau(c) += ts.epsilon;
    else if (gap < 0.0)
      ts.tau(c) -= ts.epsilon;
    ts.tau(c) = std::clamp(ts.tau(c), ts.tau_min, ts.tau_max);
  }
}

SampleHistory::SampleHistory(int num_classes, int capacity)
    : ring_(static_cast<size_t>(capacity)),
      counts_(static_cast<size_t>(num_classes), 0) {
  if (num_classes < 2) throw ContractError("history: need at least 2 classes");
  if (capacity < 1) throw ContractError("history: capacity must be positive");
}

void SampleHistory::record(int predicted_class, bool confident) {
  if (predicted_class < 0 || predicted_class >= num_classes())
    throw ContractError("history: predicted class out of range");
  if (size_ == capacity()) {
    const auto& [old_class, old_conf] = ring_[static_cast<size_t>(head_)];
    --counts_[static_cast<size_t>(old_class)];
    if (old_conf) --confident_;
  } else {
    ++size_;
  }
  ring_[static_cast<size_t>(head_)] = {predicted_class, confident};
  ++counts_[static_cast<size_t>(predicted_class)];
  if (confident) ++confident_;
  head_ = (head_ + 1) % capacity();
}

int SampleHistory::class_count(int c) const {
  if (c < 0 || c >= num_classes())
    throw ContractError("history: class out of range");
  return counts_[static_cast<size_t>(c)];
}

PredictionHistory::PredictionHistory(const std::vector<int>& unlabeled_ids,
                                     int num_classes, int capacity)
    : ids_(unlabeled_ids) {
  for (int id : ids_) by_id_.emplace(id, SampleHistory(num_classes, capacity));
  if (by_id_.size() != ids_.size())
    throw ContractError("history: duplicate unlabeled ids");
}

void PredictionHistory::record(int id, int predicted_class, bool confident) {
  const auto it = by_id_.find(id);
  if (it == by_id_.end())
    throw ContractError("history: unknown sample id " + std::to_string(id));
  it->second.record(predicted_class, confident);
}

const SampleHistory& PredictionHistory::at(int id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end())
    throw ContractError("history: unknown sample id " + std::to_string(id));
  return it->second;
}

void validate_refiner(const RefinerConfig& cfg) {
  if (cfg.n_min < 30)
    throw ConfigError("refiner: n_min below 30 leaves the rule-of-three regime");
  if (cfg.lambda <= 0.0 || cfg.lambda >= 1.0)
    throw ConfigError("refiner: lambda must lie in (0, 1)");
  if (cfg.n_cap < cfg.n_min)
    throw ConfigError("refiner: n_cap below n_min can never promote");
}

PromotionTest rule_of_three_test(const SampleHistory& h, const RefinerConfig& cfg) {
  validate_refiner(cfg);
  PromotionTest out;
  const int n = h.total();
  if (n == 0) return out;

  int best = 0, best_count = -1;
  bool tie = false;
  for (int c = 0; c < h.num_classes(); ++c) {
    const int count = h.class_count(c);
    if (count > best_count) {
      best = c;
      best_count = count;
      tie = false;
    } else if (count == best_count) {
      tie = true;
    }
  }
  const double mu_hat = static_cast<double>(best_count) / n;
  out.lower_bound = mu_hat - 3.0 / n;
  out.label = tie ? -1 : best;
  out.accept = !tie && n >= cfg.n_min && out.lower_bound >= cfg.lambda;
  return out;
}

std::vector<std::pair<int, int>> epoch_end_promote(const PredictionHistory& history,
                                                   const RefinerConfig& cfg,
                                                   DataPool& pool) {
  validate_refiner(cfg);
  const std::map<int, int> before = pool.promoted;
  if (cfg.reevaluate) pool.promoted.clear();

  std::vector<std::pair<int, int>> changed;
  for (int id : history.ids()) {
    if (!pool.is_unlabeled(id))
      throw ContractError("promote: tracked id is not unlabeled");
    if (pool.promoted.count(id)) continue;  // label frozen at first promotion
    const PromotionTest t = rule_of_three_test(history.at(id), cfg);
    if (!t.accept) continue;
    pool.promoted[id] = t.label;
    const auto it = before.find(id);
    if (it == before.end() || it->second != t.label) changed.emplace_back(id, t.label);
  }
  return changed;
}

}  // namespace lesslab
