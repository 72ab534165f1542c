#include "lesslab/losses.hpp"

namespace lesslab {

namespace {

void check_views(const Mat& a, const Mat& b, const char* who) {
  if (a.rows() != b.rows())
    throw ShapeError(std::string(who) + ": paired views have different row counts");
}

Mat gather_rows(const Mat& m, const std::vector<int>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t t = 0; t < rows.size(); ++t)
    out.row(static_cast<Eigen::Index>(t)) = m.row(rows[t]);
  return out;
}

}  // namespace

UnlabeledTargets make_distill_targets(const ModelState& state, const Mat& weak_x,
                                      const Vec& thresholds) {
  const ForwardOut fo = forward(state, weak_x);
  UnlabeledTargets tg;
  tg.gates = gate_rows(fo.class_probs, thresholds);
  tg.distill_targets = Mat::Zero(weak_x.rows(), state.spec.num_classes);
  for (Eigen::Index i = 0; i < weak_x.rows(); ++i) {
    if (tg.gates.gate[static_cast<size_t>(i)])
      tg.distill_targets(i, tg.gates.label[static_cast<size_t>(i)]) = 1.0;
    else
      tg.ungated.push_back(static_cast<int>(i));
  }
  return tg;
}

UnlabeledTargets make_composite_targets(const ModelState& state, const Mat& weak_x,
                                        const Mat& strong_x, const Vec& thresholds,
                                        const SinkhornConfig& sk) {
  check_views(weak_x, strong_x, "make_composite_targets");
  UnlabeledTargets tg = make_distill_targets(state, weak_x, thresholds);
  if (!tg.ungated.empty()) {
    const ForwardOut fo_w = forward(state, weak_x);
    const ForwardOut fo_s = forward(state, strong_x);
    tg.qa_weak =
        sinkhorn_knopp(gather_rows(fo_w.proto_sim, tg.ungated), sk.eps, sk.iters).q;
    tg.qa_strong =
        sinkhorn_knopp(gather_rows(fo_s.proto_sim, tg.ungated), sk.eps, sk.iters).q;
  }
  return tg;
}

CoregTargets make_coreg_targets(const ModelState& state, const Mat& x_u,
                                const Mat& x_v, const SinkhornConfig& sk) {
  check_views(x_u, x_v, "make_coreg_targets");
  if (x_u.rows() == 0) throw ContractError("make_coreg_targets: empty batch");
  CoregTargets tg;
  tg.qa_u = sinkhorn_knopp(forward(state, x_u).proto_sim, sk.eps, sk.iters).q;
  tg.qa_v = sinkhorn_knopp(forward(state, x_v).proto_sim, sk.eps, sk.iters).q;
  return tg;
}

double l_supervised(const ModelState& state, const Mat& x,
                    const std::vector<int>& labels, ParamSet* grads) {
  if (x.rows() == 0) throw ContractError("l_supervised: empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != x.rows())
    throw ShapeError("l_supervised: label count mismatch");
  Mat targets = Mat::Zero(x.rows(), state.spec.num_classes);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= state.spec.num_classes)
      throw ContractError("l_supervised: label out of range");
    targets(i, y) = 1.0;
  }
  const ForwardOut fo = forward(state, x);
  const double value = cross_entropy_rows(targets, safe_log(fo.class_probs));
  if (grads) {
    const Mat d_logits =
        (fo.class_probs - targets) / static_cast<double>(x.rows());
    backward(state, fo, d_logits, Mat(), *grads);
  }
  return value;
}

double l_distill(const ModelState& state, const Mat& strong_x,
                 const UnlabeledTargets& targets, ParamSet* grads) {
  const Eigen::Index batch = strong_x.rows();
  if (batch == 0) return 0.0;
  if (targets.distill_targets.rows() != batch ||
      targets.distill_targets.cols() != state.spec.num_classes)
    throw ShapeError("l_distill: target shape mismatch");
  const ForwardOut fo = forward(state, strong_x);
  const double value =
      cross_entropy_rows(targets.distill_targets, safe_log(fo.class_probs));
  if (grads) {
    // zero target rows produce exactly zero gradient rows
    const Vec row_mask = targets.distill_targets.rowwise().sum();
    Mat d_logits =
        (fo.class_probs.array().colwise() * row_mask.array()).matrix() -
        targets.distill_targets;
    d_logits /= static_cast<double>(batch);
    backward(state, fo, d_logits, Mat(), *grads);
  }
  return value;
}

double l_coreg(const ModelState& state, const Mat& x_u, const Mat& x_v,
               const CoregTargets& targets, ParamSet* grads) {
  check_views(x_u, x_v, "l_coreg");
  const Eigen::Index batch = x_u.rows();
  if (batch == 0) return 0.0;
  if (targets.qa_u.rows() != batch || targets.qa_v.rows() != batch)
    throw ShapeError("l_coreg: assignment shape mismatch");
  const ForwardOut fo_u = forward(state, x_u);
  const ForwardOut fo_v = forward(state, x_v);
  // swapped prediction: each view learns the other's assignment
  const double value =
      0.5 * (cross_entropy_rows(targets.qa_v, safe_log(fo_u.proto_probs)) +
             cross_entropy_rows(targets.qa_u, safe_log(fo_v.proto_probs)));
  if (grads) {
    const double scale = 2.0 * static_cast<double>(batch);
    backward(state, fo_u, Mat(), (fo_u.proto_probs - targets.qa_v) / scale, *grads);
    backward(state, fo_v, Mat(), (fo_v.proto_probs - targets.qa_u) / scale, *grads);
  }
  return value;
}

LossBreakdown l_composite(const ModelState& state, const Mat& weak_x,
                          const Mat& strong_x, const UnlabeledTargets& targets,
                          ParamSet* grads) {
  check_views(weak_x, strong_x, "l_composite");
  const Eigen::Index batch = weak_x.rows();
  LossBreakdown bd;
  if (batch == 0) return bd;
  if (targets.distill_targets.rows() != batch)
    throw ShapeError("l_composite: target shape mismatch");
  const auto n_ungated = static_cast<Eigen::Index>(targets.ungated.size());
  if (targets.qa_weak.rows() != n_ungated || targets.qa_strong.rows() != n_ungated)
    throw ShapeError("l_composite: assignment row count mismatch");

  const ForwardOut fo_s = forward(state, strong_x);
  bd.distill = cross_entropy_rows(targets.distill_targets, safe_log(fo_s.class_probs));

  ForwardOut fo_w;
  if (n_ungated > 0 || grads) fo_w = forward(state, weak_x);

  double coreg_sum = 0.0;
  double max_gap = 0.0;
  const int k = state.spec.prototypes();
  Mat d_scores_w, d_scores_s;
  if (grads) {
    d_scores_w = Mat::Zero(batch, k);
    d_scores_s = Mat::Zero(batch, k);
  }
  const Mat log_qw = n_ungated > 0 ? Mat(safe_log(fo_w.proto_probs)) : Mat();
  const Mat log_qs = n_ungated > 0 ? Mat(safe_log(fo_s.proto_probs)) : Mat();
  for (Eigen::Index t = 0; t < n_ungated; ++t) {
    const int r = targets.ungated[static_cast<size_t>(t)];
    coreg_sum += 0.5 * (-targets.qa_weak.row(t).dot(log_qs.row(r)) -
                        targets.qa_strong.row(t).dot(log_qw.row(r)));
    max_gap = std::max(
        max_gap,
        std::max((fo_s.proto_probs.row(r) - targets.qa_weak.row(t)).cwiseAbs().maxCoeff(),
                 (fo_w.proto_probs.row(r) - targets.qa_strong.row(t)).cwiseAbs().maxCoeff()));
    if (grads) {
      const double scale = 2.0 * static_cast<double>(batch);
      d_scores_s.row(r) = (fo_s.proto_probs.row(r) - targets.qa_weak.row(t)) / scale;
      d_scores_w.row(r) = (fo_w.proto_probs.row(r) - targets.qa_strong.row(t)) / scale;
    }
  }
  bd.coreg = coreg_sum / static_cast<double>(batch);
  bd.composite = bd.distill + bd.coreg;
  bd.total = bd.composite;
  bd.gated_count = targets.gates.gated_count();
  bd.coreg_count = static_cast<int>(n_ungated);
  bd.coreg_degenerate = n_ungated > 0 && max_gap == 0.0;

  if (grads) {
    const Vec row_mask = targets.distill_targets.rowwise().sum();
    Mat d_logits =
        (fo_s.class_probs.array().colwise() * row_mask.array()).matrix() -
        targets.distill_targets;
    d_logits /= static_cast<double>(batch);
    backward(state, fo_s, d_logits, d_scores_s, *grads);
    backward(state, fo_w, Mat(), d_scores_w, *grads);
  }
  return bd;
}

LossBreakdown training_loss(const ModelState& state, const Batch& batch,
                            const Vec& thresholds, UnlabeledObjective objective,
                            bool with_supervised, double lambda_u,
                            const SinkhornConfig& sk, ParamSet* grads,
                            ConfidentPrediction* gates_out) {
  LossBreakdown bd;
  if (gates_out) *gates_out = ConfidentPrediction{};
  if (with_supervised)
    bd.supervised = l_supervised(state, batch.labeled_x, batch.labels, grads);

  const int b_u = batch.unlabeled_count();
  if (b_u > 0 && objective != UnlabeledObjective::none) {
    ParamSet unlabeled_grads;
    const bool want_grads = grads != nullptr && lambda_u != 0.0;
    if (want_grads) unlabeled_grads = zero_grads(state);
    ParamSet* up = want_grads ? &unlabeled_grads : nullptr;

    switch (objective) {
      case UnlabeledObjective::distill: {
        const UnlabeledTargets tg = make_distill_targets(state, batch.weak_x, thresholds);
        bd.distill = l_distill(state, batch.strong_x, tg, up);
        bd.composite = bd.distill;
        bd.gated_count = tg.gates.gated_count();
        if (gates_out) *gates_out = tg.gates;
        break;
      }
      case UnlabeledObjective::coreg: {
        const CoregTargets tg = make_coreg_targets(state, batch.weak_x, batch.strong_x, sk);
        bd.coreg = l_coreg(state, batch.weak_x, batch.strong_x, tg, up);
        bd.composite = bd.coreg;
        bd.coreg_count = b_u;
        if (gates_out) *gates_out = predict_confident(state, batch.weak_x, thresholds);
        break;
      }
      case UnlabeledObjective::composite: {
        const UnlabeledTargets tg =
            make_composite_targets(state, batch.weak_x, batch.strong_x, thresholds, sk);
        const LossBreakdown cbd = l_composite(state, batch.weak_x, batch.strong_x, tg, up);
        bd.distill = cbd.distill;
        bd.coreg = cbd.coreg;
        bd.composite = cbd.composite;
        bd.gated_count = cbd.gated_count;
        bd.coreg_count = cbd.coreg_count;
        bd.coreg_degenerate = cbd.coreg_degenerate;
        if (gates_out) *gates_out = tg.gates;
        break;
      }
      case UnlabeledObjective::none:
        break;
    }
    if (want_grads) grads->add_scaled(unlabeled_grads, lambda_u);
  }
  bd.total = bd.supervised + lambda_u * bd.composite;
  return bd;
}

LossBreakdown total_objective(const ModelState& state, const Batch& batch,
                              const Vec& thresholds, double lambda_u,
                              const SinkhornConfig& sk, ParamSet* grads,
                              ConfidentPrediction* gates_out) {
  return training_loss(state, batch, thresholds, UnlabeledObjective::composite,
                       true, lambda_u, sk, grads, gates_out);
}

}  // namespace lesslab
