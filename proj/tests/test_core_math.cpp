#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "seqae/core_math.hpp"
#include "seqae/error.hpp"
#include "seqae/random.hpp"

using namespace seqae;

namespace {

MatrixXd random_matrix(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd m(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
  VectorXd x = VectorXd::Zero(4);
  const VectorXd p = softmax_row(x);
  for (int i = 0; i < 4; ++i) CHECK(p(i) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("softmax is shift invariant") {
  for (double c : {-50.0, 0.0, 3.5, 700.0}) {
    VectorXd x(2);
    x << c, c + std::log(3.0);
    const VectorXd p = softmax_row(x);
    CHECK(std::abs(p(0) - 0.25) < 1e-12);
    CHECK(std::abs(p(1) - 0.75) < 1e-12);
  }
}

TEST_CASE("softmax handles large logits") {
  VectorXd x(2);
  x << 1000.0, 1000.0;
  const VectorXd p = softmax_row(x);
  CHECK(p(0) == 0.5);
  CHECK(p(1) == 0.5);
}

TEST_CASE("softmax rejects non-finite and empty input") {
  VectorXd x(2);
  x << 1.0, std::nan("");
  CHECK_THROWS_AS(softmax_row(x), Error);
  x << 1.0, INFINITY;
  CHECK_THROWS_AS(softmax_row(x), Error);
  CHECK_THROWS_AS(softmax_row(VectorXd(0)), Error);
}

TEST_CASE("softmax is a probability vector preserving argmax") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd x(7);
    for (int i = 0; i < 7; ++i) x(i) = rng.uniform(-300.0, 300.0);
    const VectorXd p = softmax_row(x);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK((p.array() >= 0.0).all());
    CHECK((p.array() <= 1.0).all());
    Eigen::Index ax = 0, ap = 0;
    x.maxCoeff(&ax);
    p.maxCoeff(&ap);
    CHECK(ax == ap);
  }
}

TEST_CASE("sigmoid is stable at the extremes") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(sigmoid(-3.0) + sigmoid(3.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pca of axis-aligned data") {
  MatrixXd d(6, 2);
  d << 1, 0, -1, 0, 1, 0, -1, 0, 1, 0, -1, 0;
  const auto r = pca(d);
  CHECK(std::abs(std::abs(r.components(0, 0)) - 1.0) < 1e-12);
  CHECK(std::abs(r.components(1, 0)) < 1e-12);
  CHECK(r.variances(0) == doctest::Approx(6.0 / 5.0));
  CHECK(r.variances(1) == 0.0);
}

TEST_CASE("pca of identical rows has zero variances and scores") {
  MatrixXd d(5, 3);
  for (int i = 0; i < 5; ++i) d.row(i) << 1.5, -2.0, 0.25;
  const auto r = pca(d);
  CHECK((r.variances.array() == 0.0).all());
  CHECK(r.scores.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("pca needs two rows") {
  CHECK_THROWS_AS(pca(MatrixXd(1, 3)), Error);
  try {
    pca(MatrixXd::Zero(1, 3));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
}

TEST_CASE("pca matches a Jacobi eigendecomposition of the covariance") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    MatrixXd d = random_matrix(50, 4, seed);
    d.col(1) += 2.0 * d.col(0);  // correlated cloud
    d.col(3) -= 0.5 * d.col(2);
    const auto r = pca(d);
    const auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(oracle::to_rows(d)));
    for (int j = 0; j < 4; ++j) {
      CHECK(std::abs(r.variances(j) - values[static_cast<std::size_t>(j)]) < 1e-6);
      double dot = 0;
      for (int i = 0; i < 4; ++i) dot += r.components(i, j) * vectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      CHECK(std::abs(std::abs(dot) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("pca invariants") {
  const MatrixXd d = random_matrix(40, 5, 9) * random_matrix(5, 5, 10);
  const auto r = pca(d);
  CHECK((r.components.transpose() * r.components - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
  for (int j = 1; j < 5; ++j) CHECK(r.variances(j) <= r.variances(j - 1));
  CHECK((r.variances.array() >= 0.0).all());
  const double total = sample_covariance(d).trace();
  CHECK(std::abs(r.variances.sum() - total) <= 1e-6 * total);
  CHECK(r.scores.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
  const MatrixXd sc = sample_covariance(r.scores);
  for (int j = 0; j < 5; ++j) CHECK(std::abs(sc(j, j) - r.variances(j)) <= 1e-8 * r.variances(0));
  for (int j = 0; j < 5; ++j) {
    Eigen::Index arg = 0;
    r.components.col(j).cwiseAbs().maxCoeff(&arg);
    CHECK(r.components(arg, j) > 0.0);
  }
}

TEST_CASE("pearson matches the direct formula") {
  const MatrixXd d = random_matrix(30, 2, 21);
  const VectorXd a = d.col(0), b = d.col(1) + 0.3 * d.col(0);
  const double expected = oracle::pearson({a.data(), a.data() + a.size()}, {b.data(), b.data() + b.size()});
  CHECK(std::abs(pearson(a, b) - expected) < 1e-12);
  CHECK(std::isnan(pearson(a, VectorXd::Constant(30, 2.0))));
  CHECK(pearson(a, a) == doctest::Approx(1.0));
  CHECK(pearson(a, (-3.0 * a.array() + 1.0).matrix().eval()) == doctest::Approx(-1.0));
}

TEST_CASE("derived seeds are deterministic and distinct") {
  CHECK(derive_seed(5, {1, 2}) == derive_seed(5, {1, 2}));
  CHECK(derive_seed(5, {1, 2}) != derive_seed(5, {2, 1}));
  CHECK(derive_seed(5, {1}) != derive_seed(6, {1}));
  Rng a(3), b(3);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());
  Rng c(4);
  auto perm = c.permutation(100);
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < 100; ++i) CHECK(perm[i] == i);
}
