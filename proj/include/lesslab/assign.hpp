#pragma once

#include "lesslab/numerics.hpp"

namespace lesslab {

// Soft balanced assignment of a batch to clusters; rows sum to 1, column
// masses are pushed toward batch_size / clusters.
struct SoftAssignment {
  Mat q;  // batch x clusters, row-stochastic

  int batch() const { return static_cast<int>(q.rows()); }
  int clusters() const { return static_cast<int>(q.cols()); }
};

// Sinkhorn-Knopp on exp(scores / eps). One sweep normalizes columns to the
// balanced mass batch/clusters and then rows to 1; the last operation is
// always a row normalization so the result is row-stochastic even at
// iters = 0. Smaller eps sharpens the assignment.
SoftAssignment sinkhorn_knopp(const Mat& scores, double eps, int iters);

// max_c |colsum_c - batch/clusters| / (batch/clusters): worst relative
// deviation from perfectly balanced column mass.
double balance_deficit(const SoftAssignment& a);

}  // namespace lesslab
