#include "lesslab/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace lesslab {

namespace {

// splitmix64 finalizer; full-period mixer over 64-bit counters.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x5851f42d4c957f2dull)) {}

Rng::Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

Rng Rng::split(std::string_view tag) const {
  return Rng(mix64(key_ ^ fnv1a(tag)), 0);
}

Rng Rng::split(std::string_view tag, std::uint64_t a) const {
  return Rng(mix64(mix64(key_ ^ fnv1a(tag)) + a), 0);
}

Rng Rng::split(std::string_view tag, std::uint64_t a, std::uint64_t b) const {
  return Rng(mix64(mix64(mix64(key_ ^ fnv1a(tag)) + a) + b), 0);
}

std::uint64_t Rng::next_u64() { return mix64(key_ + ++counter_); }

double Rng::uniform01() {
  // 53 mantissa bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u keeps the log argument in (0, 1]
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw ContractError("uniform_int: n must be positive");
  const auto un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % un;
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return static_cast<int>(v % un);
  }
}

Mat Rng::gaussian(int rows, int cols) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite())
    throw NumericError(std::string("non-finite values in ") + what);
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()) + " differ");
  return a * b;
}

std::pair<Mat, Mat> matmul_backward(const Mat& a, const Mat& b, const Mat& grad_out) {
  if (grad_out.rows() != a.rows() || grad_out.cols() != b.cols())
    throw ShapeError("matmul_backward: grad_out shape mismatch");
  if (a.cols() != b.rows())
    throw ShapeError("matmul_backward: inner dimensions differ");
  return {grad_out * b.transpose(), a.transpose() * grad_out};
}

Mat softmax_rows(const Mat& z) {
  Mat out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    out.row(i) = (z.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Mat softmax_rows_backward(const Mat& probs, const Mat& grad_out) {
  if (probs.rows() != grad_out.rows() || probs.cols() != grad_out.cols())
    throw ShapeError("softmax_rows_backward: shape mismatch");
  const Vec dot = (probs.array() * grad_out.array()).rowwise().sum();
  Mat shifted = grad_out;
  shifted.colwise() -= dot;
  return probs.cwiseProduct(shifted);
}

Mat safe_log(const Mat& m) { return m.array().max(kEps).log(); }

double cross_entropy_rows(const Mat& targets, const Mat& log_probs) {
  if (targets.rows() != log_probs.rows() || targets.cols() != log_probs.cols())
    throw ShapeError("cross_entropy_rows: shape mismatch");
  if (targets.rows() == 0) throw ContractError("cross_entropy_rows: empty batch");
  if (targets.minCoeff() < 0.0)
    throw ContractError("cross_entropy_rows: negative target weight");
  return -targets.cwiseProduct(log_probs).sum() / static_cast<double>(targets.rows());
}

Mat cross_entropy_rows_backward(const Mat& targets) {
  if (targets.rows() == 0) throw ContractError("cross_entropy_rows_backward: empty batch");
  return -targets / static_cast<double>(targets.rows());
}

int argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (row.size() == 0) throw ContractError("argmax_row: empty row");
  int best = 0;
  for (int j = 1; j < row.size(); ++j)
    if (row(j) > row(best)) best = j;
  return best;
}

Mat finite_difference_grad(const std::function<double(const Mat&)>& f,
                           const Mat& x, double h) {
  if (h <= 0.0) throw ContractError("finite_difference_grad: h must be positive");
  Mat g(x.rows(), x.cols());
  Mat probe = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double saved = probe(i, j);
      probe(i, j) = saved + h;
      const double up = f(probe);
      probe(i, j) = saved - h;
      const double down = f(probe);
      probe(i, j) = saved;
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

double relative_error(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("relative_error: shape mismatch");
  return (a - b).norm() / std::max(b.norm(), kEps);
}

}  // namespace lesslab
