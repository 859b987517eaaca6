#pragma once

#include <string>
#include <vector>

#include "seqae/autoencoder.hpp"
#include "seqae/core_math.hpp"

namespace seqae {

/// Frozen PCA transform: fit once on a training set, apply to any later data.
struct PcaTransform {
  VectorXd mean;
  MatrixXd components;
  VectorXd variances;

  MatrixXd apply(const MatrixXd& raw) const;
};

struct FeatureMatrix {
  std::vector<std::string> ids;
  MatrixXd raw;        // n x K, row i = encoder output for sequence i
  MatrixXd principal;  // n x K principal feature scores
  PcaTransform pca;

  Eigen::Index rows() const { return raw.rows(); }
  Eigen::Index latent() const { return raw.cols(); }
};

/// Encoder outputs stacked by row, in input order.
MatrixXd raw_features(const AutoencoderParams<double>& params,
                      const std::vector<ActionSequence>& seqs, unsigned threads = 1);

/// Raw features plus a PCA fitted on them (needs at least two sequences).
FeatureMatrix extract_features(const AutoencoderParams<double>& params,
                               const std::vector<ActionSequence>& seqs, unsigned threads = 1);

/// Raw features projected with an existing transform instead of refitting PCA.
FeatureMatrix extract_features(const AutoencoderParams<double>& params,
                               const std::vector<ActionSequence>& seqs,
                               const PcaTransform& transform, unsigned threads = 1);

/// Pearson correlation of each principal feature with `covariate`. Principal
/// columns with zero variance report 0.
VectorXd feature_correlation(const FeatureMatrix& features, const VectorXd& covariate);

/// Flips principal feature `column` (and its PCA direction) so that its
/// correlation with `covariate` is non-negative. Returns the sign applied.
double align_feature_sign(FeatureMatrix& features, Eigen::Index column, const VectorXd& covariate);

/// log(T_i) for each sequence; the usual covariate for the length-related feature.
VectorXd log_lengths(const std::vector<ActionSequence>& seqs);

}  // namespace seqae
