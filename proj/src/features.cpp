#include "seqae/features.hpp"

#include <cmath>

#include "seqae/parallel.hpp"

namespace seqae {

MatrixXd PcaTransform::apply(const MatrixXd& raw) const {
  require(raw.cols() == mean.size() && components.rows() == mean.size(), ErrorKind::InvalidInput,
          "PCA transform width does not match features");
  return (raw.rowwise() - mean.transpose()) * components;
}

MatrixXd raw_features(const AutoencoderParams<double>& params,
                      const std::vector<ActionSequence>& seqs, unsigned threads) {
  MatrixXd raw(static_cast<Eigen::Index>(seqs.size()), params.latent);
  parallel_for(seqs.size(), threads, [&](std::size_t i) {
    const auto& s = seqs[i];
    for (int a : s.steps)
      require(a >= 0 && a < params.actions, ErrorKind::VocabularyMismatch,
              "sequence '" + s.id + "' does not match the model vocabulary");
    raw.row(static_cast<Eigen::Index>(i)) = encode(params, s).transpose();
  });
  return raw;
}

namespace {

std::vector<std::string> ids_of(const std::vector<ActionSequence>& seqs) {
  std::vector<std::string> ids;
  ids.reserve(seqs.size());
  for (const auto& s : seqs) ids.push_back(s.id);
  return ids;
}

}  // namespace

FeatureMatrix extract_features(const AutoencoderParams<double>& params,
                               const std::vector<ActionSequence>& seqs, unsigned threads) {
  FeatureMatrix out;
  out.ids = ids_of(seqs);
  out.raw = raw_features(params, seqs, threads);
  auto fit = pca(out.raw);
  out.principal = std::move(fit.scores);
  out.pca = {std::move(fit.mean), std::move(fit.components), std::move(fit.variances)};
  return out;
}

FeatureMatrix extract_features(const AutoencoderParams<double>& params,
                               const std::vector<ActionSequence>& seqs,
                               const PcaTransform& transform, unsigned threads) {
  FeatureMatrix out;
  out.ids = ids_of(seqs);
  out.raw = raw_features(params, seqs, threads);
  out.pca = transform;
  out.principal = transform.apply(out.raw);
  return out;
}

VectorXd feature_correlation(const FeatureMatrix& features, const VectorXd& covariate) {
  require(covariate.size() == features.principal.rows(), ErrorKind::InvalidInput,
          "covariate length does not match the number of sequences");
  require(all_finite(covariate), ErrorKind::InvalidInput, "covariate must be finite");
  require(covariate.size() >= 2 && (covariate.array() != covariate(0)).any(),
          ErrorKind::UndefinedMetric, "correlation with a constant covariate is undefined");
  VectorXd r(features.principal.cols());
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    const double v = pearson(features.principal.col(k), covariate);
    r(k) = std::isnan(v) ? 0.0 : v;
  }
  return r;
}

double align_feature_sign(FeatureMatrix& features, Eigen::Index column, const VectorXd& covariate) {
  require(column >= 0 && column < features.principal.cols(), ErrorKind::InvalidInput,
          "feature column out of range");
  const double r = feature_correlation(features, covariate)(column);
  if (r >= 0.0) return 1.0;
  features.principal.col(column) *= -1.0;
  features.pca.components.col(column) *= -1.0;
  return -1.0;
}

VectorXd log_lengths(const std::vector<ActionSequence>& seqs) {
  VectorXd out(static_cast<Eigen::Index>(seqs.size()));
  for (std::size_t i = 0; i < seqs.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = std::log(static_cast<double>(seqs[i].steps.size()));
  return out;
}

}  // namespace seqae
