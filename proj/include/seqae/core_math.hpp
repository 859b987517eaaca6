#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "seqae/error.hpp"

namespace seqae {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Mat<double>;
using VectorXd = Vec<double>;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.derived().array().isFinite().all();
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  // Branching keeps exp() from overflowing for large |x|.
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::log;
  const Scalar hi = logits.maxCoeff();
  return hi + log((logits.array() - hi).exp().sum());
}

/// Numerically stable softmax of a single logit vector.
template <typename Derived>
Vec<typename Derived::Scalar> softmax_row(const Eigen::MatrixBase<Derived>& logits) {
  require(logits.size() >= 1, ErrorKind::InvalidInput, "softmax_row: empty logit vector");
  require(all_finite(logits), ErrorKind::InvalidInput, "softmax_row: non-finite logit");
  const auto hi = logits.maxCoeff();
  Vec<typename Derived::Scalar> out = (logits.array() - hi).exp().matrix();
  out /= out.sum();
  return out;
}

/// Sample (n-1) covariance of the columns of `data`.
template <typename Derived>
Mat<typename Derived::Scalar> sample_covariance(const Eigen::MatrixBase<Derived>& data) {
  using Scalar = typename Derived::Scalar;
  const auto n = data.rows();
  require(n >= 2, ErrorKind::InsufficientData, "covariance needs at least two rows");
  const Vec<Scalar> mean = data.colwise().mean().transpose();
  const Mat<Scalar> centered = data.rowwise() - mean.transpose();
  return (centered.transpose() * centered) / Scalar(n - 1);
}

/// Pearson correlation; returns NaN when either input has zero variance.
template <typename DA, typename DB>
typename DA::Scalar pearson(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  require(a.size() == b.size() && a.size() >= 2, ErrorKind::InvalidInput,
          "pearson: inputs must have equal length >= 2");
  const Scalar ma = a.mean();
  const Scalar mb = b.mean();
  const auto da = (a.array() - ma);
  const auto db = (b.array() - mb);
  const Scalar sab = (da * db).sum();
  const Scalar saa = da.square().sum();
  const Scalar sbb = db.square().sum();
  if (saa <= Scalar(0) || sbb <= Scalar(0)) return std::numeric_limits<Scalar>::quiet_NaN();
  const Scalar r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

template <typename Scalar>
struct PcaResult {
  Vec<Scalar> mean;        // column means of the input
  Mat<Scalar> components;  // columns are principal directions, by decreasing variance
  Vec<Scalar> variances;   // non-increasing, clamped at zero
  Mat<Scalar> scores;      // (data - mean) * components
};

/// Flip each column so that its largest-magnitude entry is positive.
template <typename Scalar>
void canonicalize_signs(Mat<Scalar>& components) {
  for (Eigen::Index j = 0; j < components.cols(); ++j) {
    Eigen::Index arg = 0;
    components.col(j).cwiseAbs().maxCoeff(&arg);
    if (components(arg, j) < Scalar(0)) components.col(j) *= Scalar(-1);
  }
}

/// Principal component analysis of the rows of `data` (centered, not scaled).
template <typename Derived>
PcaResult<typename Derived::Scalar> pca(const Eigen::MatrixBase<Derived>& data) {
  using Scalar = typename Derived::Scalar;
  require(data.rows() >= 2, ErrorKind::InsufficientData, "pca needs at least two rows");
  require(data.cols() >= 1, ErrorKind::InvalidInput, "pca needs at least one column");
  require(all_finite(data), ErrorKind::InvalidInput, "pca: non-finite input");

  const Eigen::Index k = data.cols();
  PcaResult<Scalar> out;
  out.mean = data.colwise().mean().transpose();
  const Mat<Scalar> centered = data.rowwise() - out.mean.transpose();
  const Mat<Scalar> cov = (centered.transpose() * centered) / Scalar(data.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(cov);
  require(solver.info() == Eigen::Success, ErrorKind::ConvergenceFailure,
          "pca: eigendecomposition failed");

  // Eigen sorts ascending; reverse into decreasing order.
  out.components.resize(k, k);
  out.variances.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    out.components.col(j) = solver.eigenvectors().col(k - 1 - j);
    out.variances(j) = std::max(solver.eigenvalues()(k - 1 - j), Scalar(0));
  }
  canonicalize_signs(out.components);
  out.scores = centered * out.components;
  return out;
}

}  // namespace seqae
