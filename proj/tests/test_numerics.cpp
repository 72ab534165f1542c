#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lesslab/numerics.hpp"

using namespace lesslab;

TEST_CASE("matmul computes products and rejects bad shapes") {
  Mat a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  Mat b(3, 1);
  b << 1, 0, -1;
  const Mat c = matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c(0, 0) == doctest::Approx(-2.0));
  CHECK(c(1, 0) == doctest::Approx(-2.0));
  CHECK(matmul(a, Mat::Identity(3, 3)) == a);
  CHECK_THROWS_AS(matmul(a, Mat::Zero(2, 2)), ShapeError);
  CHECK_THROWS_AS(matmul_backward(a, b, Mat::Zero(3, 3)), ShapeError);
}

TEST_CASE("matmul gradients match finite differences over random trials") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + rng.uniform_int(4);
    const int k = 1 + rng.uniform_int(4);
    const int n = 1 + rng.uniform_int(4);
    Mat a(m, k), b(k, n), r(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) a(i, j) = rng.uniform(-2.0, 2.0);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j) b(i, j) = rng.uniform(-2.0, 2.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) r(i, j) = rng.uniform(-2.0, 2.0);

    const auto [ga, gb] = matmul_backward(a, b, r);
    const Mat fa = finite_difference_grad(
        [&](const Mat& x) { return matmul(x, b).cwiseProduct(r).sum(); }, a, 1e-5);
    const Mat fb = finite_difference_grad(
        [&](const Mat& x) { return matmul(a, x).cwiseProduct(r).sum(); }, b, 1e-5);
    CHECK(relative_error(ga, fa) < 1e-5);
    CHECK(relative_error(gb, fb) < 1e-5);
  }
}

TEST_CASE("softmax rows are normalized and overflow-proof") {
  Mat z(3, 2);
  z << 1000.0, 0.0, -1e4, 1e4, 3.0, 3.0;
  const Mat p = softmax_rows(z);
  CHECK(p.allFinite());
  for (int i = 0; i < 3; ++i) CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p(0, 0) == doctest::Approx(1.0));
  CHECK(p(1, 1) == doctest::Approx(1.0));
  CHECK(p(2, 0) == doctest::Approx(0.5));
}

TEST_CASE("softmax matches direct exp-normalize on a plain row") {
  Mat z(1, 3);
  z << 1.0, 2.0, 3.0;
  const Mat p = softmax_rows(z);
  // independent reference at extended precision
  long double e[3], sum = 0.0L;
  for (int j = 0; j < 3; ++j) {
    e[j] = expl(static_cast<long double>(z(0, j)));
    sum += e[j];
  }
  for (int j = 0; j < 3; ++j)
    CHECK(p(0, j) == doctest::Approx(static_cast<double>(e[j] / sum)).epsilon(1e-14));
}

TEST_CASE("softmax backward matches finite differences") {
  Rng rng(7);
  const Mat z = rng.gaussian(4, 6);
  const Mat g = rng.gaussian(4, 6);
  const Mat analytic = softmax_rows_backward(softmax_rows(z), g);
  const Mat fd = finite_difference_grad(
      [&](const Mat& x) { return softmax_rows(x).cwiseProduct(g).sum(); }, z, 1e-6);
  CHECK(relative_error(analytic, fd) < 1e-5);
}

TEST_CASE("cross entropy hits its analytic anchor points") {
  // a perfectly predicted one-hot target costs nothing
  Mat t = Mat::Zero(2, 3);
  t(0, 1) = 1.0;
  t(1, 2) = 1.0;
  Mat p = Mat::Zero(2, 3);
  p(0, 1) = 1.0;
  p(1, 2) = 1.0;
  CHECK(cross_entropy_rows(t, safe_log(p)) == doctest::Approx(0.0).epsilon(1e-15));

  // uniform prediction over k classes costs log k
  const int k = 4;
  Mat tu = Mat::Zero(1, k);
  tu(0, 2) = 1.0;
  const Mat pu = Mat::Constant(1, k, 1.0 / k);
  CHECK(cross_entropy_rows(tu, safe_log(pu)) == doctest::Approx(std::log(double(k))));

  CHECK_THROWS_AS(cross_entropy_rows(t, Mat::Zero(3, 3)), ShapeError);
  Mat neg = t;
  neg(0, 0) = -0.1;
  CHECK_THROWS_AS(cross_entropy_rows(neg, safe_log(p)), ContractError);
}

TEST_CASE("fused softmax cross-entropy gradient matches finite differences") {
  Rng rng(19);
  const int b = 5, k = 7;
  const Mat logits = rng.gaussian(b, k);
  Mat targets = Mat::Zero(b, k);
  for (int i = 0; i < b; ++i) targets(i, rng.uniform_int(k)) = 1.0;

  // the identity every loss gradient in the lab leans on
  const Mat analytic = (softmax_rows(logits) - targets) / static_cast<double>(b);
  const Mat fd = finite_difference_grad(
      [&](const Mat& z) {
        return cross_entropy_rows(targets, safe_log(softmax_rows(z)));
      },
      logits, 1e-6);
  CHECK(relative_error(analytic, fd) < 1e-6);
}

TEST_CASE("finite differences recover simple derivatives") {
  Mat x(1, 2);
  x << 3.0, -2.0;
  const Mat g = finite_difference_grad(
      [](const Mat& m) { return m.squaredNorm(); }, x, 1e-5);
  CHECK(g(0, 0) == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(g(0, 1) == doctest::Approx(-4.0).epsilon(1e-6));

  const Mat zero = finite_difference_grad([](const Mat&) { return 42.0; }, x, 1e-5);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(finite_difference_grad([](const Mat&) { return 0.0; }, x, 0.0),
                  ContractError);
}

TEST_CASE("argmax takes the first maximum") {
  Eigen::RowVectorXd r(3);
  r << 1.0, 3.0, 3.0;
  CHECK(argmax_row(r) == 1);
  Eigen::RowVectorXd one(1);
  one << 5.0;
  CHECK(argmax_row(one) == 0);
}

TEST_CASE("safe log floors tiny values") {
  Mat m(1, 2);
  m << 0.0, 1.0;
  const Mat l = safe_log(m);
  CHECK(l(0, 0) == doctest::Approx(std::log(1e-12)));
  CHECK(l(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("require_finite flags NaN and infinity") {
  Mat ok = Mat::Ones(2, 2);
  CHECK_NOTHROW(require_finite(ok, "ok"));
  ok(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(require_finite(ok, "bad"), NumericError);
  ok(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(require_finite(ok, "bad"), NumericError);
}

TEST_CASE("rng streams are reproducible and seed-sensitive") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 10000; ++i) {
    const auto va = a.next_u64();
    if (va != b.next_u64()) all_equal = false;
    if (va != c.next_u64()) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);

  Rng d(55);
  d.next_u64();
  Rng copy = d;  // value semantics: a copy continues the same stream
  CHECK(d.next_u64() == copy.next_u64());
}

TEST_CASE("rng stream matches frozen reference values") {
  Rng r(42);
  CHECK(r.next_u64() == 10195296356170428139ull);
  CHECK(r.next_u64() == 16415884369028128667ull);
  CHECK(r.next_u64() == 6452834751435481704ull);
  CHECK(r.next_u64() == 7150132388077386143ull);
}

TEST_CASE("rng split derives independent stable substreams") {
  const Rng root(9);
  Rng a1 = root.split("alpha");
  Rng a2 = root.split("alpha");
  Rng b = root.split("beta");
  CHECK(a1.next_u64() == a2.next_u64());
  CHECK(a1.next_u64() != b.next_u64());
  CHECK(root.split("x", 1).next_u64() != root.split("x", 2).next_u64());
  CHECK(root.split("x", 1, 2).next_u64() != root.split("x", 2, 1).next_u64());

  // consuming the parent does not move the children
  Rng parent(77);
  const auto before = parent.split("child").next_u64();
  parent.next_u64();
  CHECK(parent.split("child").next_u64() == before);
}

TEST_CASE("rng uniforms and normals have sane statistics") {
  Rng rng(2024);
  const int n = 100000;
  double su = 0, su2 = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    su += u;
    su2 += u * u;
    const double g = rng.normal();
    sn += g;
    sn2 += g * g;
  }
  const double mu = su / n, mn = sn / n;
  CHECK(mu == doctest::Approx(0.5).epsilon(0.02));
  CHECK(su2 / n - mu * mu == doctest::Approx(1.0 / 12.0).epsilon(0.05));
  CHECK(std::abs(mn) < 0.02);
  CHECK(sn2 / n - mn * mn == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("rng uniform_int is bounded and roughly uniform") {
  Rng rng(5);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const int v = rng.uniform_int(7);
    CHECK(v >= 0);
    CHECK(v < 7);
    ++hist[static_cast<size_t>(v)];
  }
  for (int c : hist) CHECK(std::abs(c - 10000) < 500);
  for (int i = 0; i < 100; ++i) CHECK(rng.uniform_int(1) == 0);
  CHECK_THROWS_AS(rng.uniform_int(0), ContractError);
}

TEST_CASE("relative error is safe at a zero oracle") {
  CHECK(relative_error(Mat::Zero(2, 2), Mat::Zero(2, 2)) == 0.0);
  CHECK(relative_error(Mat::Ones(1, 1), Mat::Ones(1, 1)) == 0.0);
}
