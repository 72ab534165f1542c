#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string_view>
#include <utility>

#include "lesslab/errors.hpp"

namespace lesslab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Stability floor applied inside logs and norm divisions.
inline constexpr double kEps = 1e-12;

// ------------------------------------------------------------------ rng

// Counter-based generator: each output is a splitmix64-style finalizer of
// key + counter, so the stream depends only on the 64-bit seed and never on
// platform library internals. split() derives an independent substream from
// a tag, which lets every module own its randomness; two experiment variants
// that share a seed then consume identical draws for identical purposes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng split(std::string_view tag) const;
  Rng split(std::string_view tag, std::uint64_t a) const;
  Rng split(std::string_view tag, std::uint64_t a, std::uint64_t b) const;

  std::uint64_t next_u64();
  double uniform01();                   // draw from [0, 1)
  double uniform(double lo, double hi);
  double normal();                      // standard normal via Box-Muller
  int uniform_int(int n);               // unbiased draw from [0, n)
  Mat gaussian(int rows, int cols);     // i.i.d. standard normals, row-major fill

 private:
  Rng(std::uint64_t key, std::uint64_t counter);

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ------------------------------------------------------------------ ops

// Throws NumericError naming `what` if m has a NaN or infinity.
void require_finite(const Mat& m, const char* what);

Mat matmul(const Mat& a, const Mat& b);

// Gradients w.r.t. both factors of c = a * b given dL/dc.
std::pair<Mat, Mat> matmul_backward(const Mat& a, const Mat& b, const Mat& grad_out);

// Row-wise softmax with max subtraction; every output row sums to 1.
Mat softmax_rows(const Mat& z);

// dL/dz given the softmax output and dL/dprobs.
Mat softmax_rows_backward(const Mat& probs, const Mat& grad_out);

// Elementwise log with the stability floor applied first.
Mat safe_log(const Mat& m);

// Mean over rows of -sum_j targets(i,j) * log_probs(i,j). Target rows may be
// soft or all-zero (masked-out rows contribute nothing).
double cross_entropy_rows(const Mat& targets, const Mat& log_probs);

// dL/dlog_probs for cross_entropy_rows: -targets / rows.
Mat cross_entropy_rows_backward(const Mat& targets);

// First max index in a row vector, scanning left to right.
int argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row);

// Central finite differences of f at x with step h, entry by entry.
Mat finite_difference_grad(const std::function<double(const Mat&)>& f,
                           const Mat& x, double h);

// ||a - b|| / max(||b||, eps): relative error of a gradient against an oracle.
double relative_error(const Mat& a, const Mat& b);

}  // namespace lesslab
