#include "lesslab/assign.hpp"

namespace lesslab {

SoftAssignment sinkhorn_knopp(const Mat& scores, double eps, int iters) {
  if (scores.rows() == 0 || scores.cols() == 0)
    throw ShapeError("sinkhorn_knopp: empty score matrix");
  if (eps <= 0.0) throw ConfigError("sinkhorn_knopp: eps must be positive");
  if (iters < 0) throw ConfigError("sinkhorn_knopp: iters must be nonnegative");
  require_finite(scores, "sinkhorn scores");

  const auto b = static_cast<double>(scores.rows());
  const auto k = static_cast<double>(scores.cols());
  const double col_mass = b / k;

  // global max subtraction keeps exp in range without changing the result
  Mat m = ((scores.array() - scores.maxCoeff()) / eps).exp();

  auto normalize_rows = [&m] {
    const Vec rs = m.rowwise().sum();
    m.array().colwise() /= rs.array();
  };
  for (int it = 0; it < iters; ++it) {
    const Eigen::RowVectorXd cs = m.colwise().sum();
    m.array().rowwise() /= cs.array();
    m *= col_mass;
    normalize_rows();
  }
  if (iters == 0) normalize_rows();

  require_finite(m, "sinkhorn assignment");
  return SoftAssignment{std::move(m)};
}

double balance_deficit(const SoftAssignment& a) {
  if (a.batch() == 0) throw ShapeError("balance_deficit: empty assignment");
  const double target = static_cast<double>(a.batch()) / a.clusters();
  const Eigen::RowVectorXd cs = a.q.colwise().sum();
  return (cs.array() - target).abs().maxCoeff() / target;
}

}  // namespace lesslab
