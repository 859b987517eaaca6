#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "seqae/autoencoder.hpp"
#include "seqae/core_math.hpp"
#include "seqae/features.hpp"
#include "seqae/simulation.hpp"

namespace seqae {

// ---------------------------------------------------------------------------
// Derived variables

struct DerivedVariable {
  enum class Kind { Action, Pair };
  Kind kind = Kind::Action;
  int first = 0;
  int second = -1;  // Pair only: the action immediately following `first`

  bool operator==(const DerivedVariable&) const = default;
  std::string name(const ActionVocabulary& vocab) const;
};

/// 1 if the action occurs anywhere in `seq`, or if the ordered pair occurs at
/// adjacent positions.
bool indicator(const ActionSequence& seq, const DerivedVariable& v);

struct DerivedVariableSet {
  std::vector<DerivedVariable> definitions;
  MatrixXd indicators;  // n x d, entries 0/1
};

/// Every action and adjacent ordered pair that occurs in at least
/// `threshold * n` sequences. Actions come first (by index), then pairs
/// (lexicographic).
DerivedVariableSet derive_variables(const std::vector<ActionSequence>& seqs, int actions,
                                    double threshold = 0.05);

// ---------------------------------------------------------------------------
// Generalized linear models

enum class Link { Logit, Identity };

/// Intercept-augmented GLM. The fitted objective is
///   logit:    -loglik(beta) + (lambda/2) |beta_slopes|^2
///   identity: (1/2) |y - D beta|^2 + (lambda/2) |beta_slopes|^2
/// with D = [1 X]. The intercept is unpenalized, except for a logit fit whose
/// response has a single class, where the penalty covers the intercept too.
struct GlmModel {
  Link link = Link::Logit;
  VectorXd coefficients;  // intercept first
  double lambda = 0.0;
  bool intercept_penalized = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;

  Eigen::Index predictors() const { return coefficients.size() - 1; }
  VectorXd linear_predictor(const MatrixXd& X) const;
  /// Fitted mean: probability for logit, value for identity.
  VectorXd predict(const MatrixXd& X) const;
  /// Logit only: 1 iff the fitted probability is strictly greater than 0.5.
  Eigen::VectorXi predict_class(const MatrixXd& X) const;
};

struct LogisticOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
};

/// Penalized logistic regression by Newton / IRLS with step halving.
GlmModel fit_logistic(const MatrixXd& X, const VectorXd& y, double lambda,
                      const LogisticOptions& options = {});

/// Ridge regression with unpenalized intercept, solved in closed form.
GlmModel fit_linear(const MatrixXd& X, const VectorXd& y, double lambda);

GlmModel fit_glm(Link link, const MatrixXd& X, const VectorXd& y, double lambda);

/// Log-likelihood of a fitted model on (X, y). Identity link uses the Gaussian
/// likelihood with the maximum-likelihood variance RSS/n.
double log_likelihood(const GlmModel& model, const MatrixXd& X, const VectorXd& y);

/// 2 * parameters - 2 * loglik. Identity link counts the variance as a parameter.
double aic(const GlmModel& model, const MatrixXd& X, const VectorXd& y);

double accuracy(const Eigen::VectorXi& predicted, const VectorXd& truth);

/// Squared Pearson correlation between predictions and truth.
double osr2(const VectorXd& predicted, const VectorXd& truth);

/// Accuracy for a logit model, OSR^2 for an identity model.
double evaluate_prediction(const GlmModel& model, const MatrixXd& X, const VectorXd& y);

/// Column standardization fitted on one split and applied to others.
struct Standardizer {
  VectorXd mean;
  VectorXd scale;

  static Standardizer fit(const MatrixXd& X);
  MatrixXd apply(const MatrixXd& X) const;
};

inline const std::vector<double> kDefaultPenaltyGrid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};

struct PenaltySelection {
  double lambda = 0.0;
  double score = 0.0;
  std::vector<double> scores;  // per grid value
  GlmModel model;
};

/// Fits one model per grid value on the training split and keeps the best
/// validation score (first grid value wins ties).
PenaltySelection select_penalty(Link link, const MatrixXd& X_train, const VectorXd& y_train,
                                const MatrixXd& X_val, const VectorXd& y_val,
                                const std::vector<double>& grid = kDefaultPenaltyGrid);

/// Covariates for predicting a variable from one item's outcome z and
/// features theta: (z), (theta), or (z, theta, z*theta).
struct CovariateSchema {
  bool outcome = true;
  bool features = false;
  bool interaction = false;

  static CovariateSchema baseline() { return {true, false, false}; }
  static CovariateSchema process() { return {true, true, true}; }
};

MatrixXd build_covariates(const CovariateSchema& schema, const VectorXd& outcome,
                          const MatrixXd& features);

/// Random partition of [0, n) into train / validation / test index sets.
struct SplitRatios {
  double train = 0.8;
  double validation = 0.0;

  static SplitRatios simulation() { return {0.8, 0.0}; }            // 4:1 train/test
  static SplitRatios prediction() { return {2.0 / 3.0, 1.0 / 6.0}; }  // rest is test
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Set sizes are llround(ratio * n); the test set takes the remainder and must
/// be non-empty.
SplitIndices split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Evaluations

struct ScenarioOptions {
  double train_fraction = 0.8;
  double lambda = 1e-2;
  double threshold = 0.05;
  std::uint64_t seed = 1;
};

struct ScenarioReport {
  double reconstruction_accuracy = 0.0;  // mean over derived variables
  double group_accuracy = 0.0;
  std::vector<DerivedVariable> variables;
  std::vector<double> variable_accuracy;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

/// Logistic reconstruction of every derived variable and of the group label
/// from standardized principal features, fitted on a random training split
/// and scored on the held-out rest.
ScenarioReport scenario_evaluation(const LabeledDataset& dataset, const FeatureMatrix& features,
                                   const ScenarioOptions& options = {});

/// Best single-feature threshold accuracy for a two-group label.
struct ThresholdSplit {
  Eigen::Index column = 0;
  double threshold = 0.0;
  double accuracy = 0.0;
};
ThresholdSplit best_threshold_split(const MatrixXd& features, const std::vector<int>& labels);

struct AicPath {
  std::vector<Eigen::Index> order;  // columns in the order they were added
  std::vector<double> aic;          // AIC after each addition
  double intercept_only_aic = 0.0;
};

/// Greedy forward selection over the columns of `outcomes`, adding at each
/// step the column that gives the smallest AIC. Runs until every column is in.
AicPath forward_aic_order(const MatrixXd& outcomes, const VectorXd& target, Link link,
                          double lambda = 0.0);

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int degrees_of_freedom = 1;
};

/// Pearson chi-square test of independence for a 2x2 table, without
/// continuity correction.
ChiSquareResult chi_square_independence(const std::array<std::array<double, 2>, 2>& table);

}  // namespace seqae
