#include "seqae/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

namespace seqae {

std::string DerivedVariable::name(const ActionVocabulary& vocab) const {
  if (kind == Kind::Action) return vocab.label(first);
  return vocab.label(first) + "->" + vocab.label(second);
}

bool indicator(const ActionSequence& seq, const DerivedVariable& v) {
  const auto& s = seq.steps;
  if (v.kind == DerivedVariable::Kind::Action)
    return std::find(s.begin(), s.end(), v.first) != s.end();
  for (std::size_t t = 1; t < s.size(); ++t)
    if (s[t - 1] == v.first && s[t] == v.second) return true;
  return false;
}

DerivedVariableSet derive_variables(const std::vector<ActionSequence>& seqs, int actions,
                                    double threshold) {
  require(!seqs.empty(), ErrorKind::InsufficientData, "derive_variables: empty corpus");
  require(actions >= 1, ErrorKind::InvalidInput, "derive_variables: empty vocabulary");
  require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::InvalidInput,
          "derive_variables: threshold must lie in [0, 1]");

  // Document frequency of every action and every adjacent ordered pair.
  std::vector<int> action_count(static_cast<std::size_t>(actions), 0);
  std::map<std::pair<int, int>, int> pair_count;
  for (const auto& seq : seqs) {
    std::vector<char> seen(static_cast<std::size_t>(actions), 0);
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t t = 0; t < seq.steps.size(); ++t) {
      const int a = seq.steps[t];
      require(a >= 0 && a < actions, ErrorKind::VocabularyMismatch,
              "sequence '" + seq.id + "' has an action outside the vocabulary");
      seen[static_cast<std::size_t>(a)] = 1;
      if (t > 0) pairs.emplace_back(seq.steps[t - 1], a);
    }
    for (int a = 0; a < actions; ++a) action_count[static_cast<std::size_t>(a)] += seen[static_cast<std::size_t>(a)];
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    for (const auto& p : pairs) ++pair_count[p];
  }

  const double cutoff = threshold * static_cast<double>(seqs.size());
  DerivedVariableSet out;
  for (int a = 0; a < actions; ++a) {
    const int c = action_count[static_cast<std::size_t>(a)];
    if (c > 0 && static_cast<double>(c) >= cutoff)
      out.definitions.push_back({DerivedVariable::Kind::Action, a, -1});
  }
  for (const auto& [pair, c] : pair_count)
    if (static_cast<double>(c) >= cutoff)
      out.definitions.push_back({DerivedVariable::Kind::Pair, pair.first, pair.second});

  out.indicators = MatrixXd::Zero(static_cast<Eigen::Index>(seqs.size()),
                                  static_cast<Eigen::Index>(out.definitions.size()));
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t v = 0; v < out.definitions.size(); ++v)
      out.indicators(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) =
          indicator(seqs[i], out.definitions[v]) ? 1.0 : 0.0;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

MatrixXd with_intercept(const MatrixXd& X) {
  MatrixXd D(X.rows(), X.cols() + 1);
  D.col(0).setOnes();
  D.rightCols(X.cols()) = X;
  return D;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic_loglik(const VectorXd& eta, const VectorXd& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
  return ll;
}

void check_design(const MatrixXd& X, const VectorXd& y) {
  require(X.rows() > 0, ErrorKind::InsufficientData, "GLM fit: no observations");
  require(y.size() == X.rows(), ErrorKind::InvalidInput, "GLM fit: response length mismatch");
  require(all_finite(X) && all_finite(y), ErrorKind::InvalidInput, "GLM fit: non-finite data");
}

}  // namespace

VectorXd GlmModel::linear_predictor(const MatrixXd& X) const {
  require(X.cols() == predictors(), ErrorKind::InvalidInput,
          "model expects " + std::to_string(predictors()) + " predictors");
  return (X * coefficients.tail(predictors())).array() + coefficients(0);
}

VectorXd GlmModel::predict(const MatrixXd& X) const {
  VectorXd eta = linear_predictor(X);
  if (link == Link::Logit) eta = eta.unaryExpr([](double v) { return sigmoid(v); });
  return eta;
}

Eigen::VectorXi GlmModel::predict_class(const MatrixXd& X) const {
  require(link == Link::Logit, ErrorKind::InvalidInput, "class prediction needs a logit model");
  const VectorXd p = predict(X);
  return (p.array() > 0.5).cast<int>();
}

GlmModel fit_logistic(const MatrixXd& X, const VectorXd& y, double lambda,
                      const LogisticOptions& options) {
  check_design(X, y);
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::InvalidInput, "penalty must be >= 0");
  require(((y.array() == 0.0) || (y.array() == 1.0)).all(), ErrorKind::InvalidInput,
          "logistic response must be 0/1");

  const double positives = y.sum();
  const bool single_class = positives == 0.0 || positives == static_cast<double>(y.size());
  if (single_class && lambda == 0.0)
    fail(ErrorKind::ConvergenceFailure,
         "response has a single class, so the unpenalized fit diverges; use a positive penalty");

  const MatrixXd D = with_intercept(X);
  const Eigen::Index p = D.cols();
  VectorXd penalty = VectorXd::Constant(p, lambda);
  penalty(0) = single_class ? lambda : 0.0;

  auto objective = [&](const VectorXd& beta) {
    return -logistic_loglik(D * beta, y) + 0.5 * (penalty.array() * beta.array().square()).sum();
  };

  GlmModel m;
  m.link = Link::Logit;
  m.lambda = lambda;
  m.intercept_penalized = single_class;
  VectorXd beta = VectorXd::Zero(p);
  double obj = objective(beta);
  bool converged = false;
  for (int it = 0; it <= options.max_iterations; ++it) {
    const VectorXd eta = D * beta;
    const VectorXd prob = eta.unaryExpr([](double v) { return sigmoid(v); });
    const VectorXd grad = D.transpose() * (y - prob) - penalty.cwiseProduct(beta);
    m.gradient_norm = grad.norm();
    m.iterations = it;
    if (m.gradient_norm < options.gradient_tolerance) {
      converged = true;
      break;
    }
    if (it == options.max_iterations) break;
    const VectorXd w = prob.array() * (1.0 - prob.array());
    MatrixXd H = D.transpose() * w.asDiagonal() * D;
    H.diagonal() += penalty;
    const Eigen::LDLT<MatrixXd> ldlt(H);
    VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !all_finite(step))
      fail(ErrorKind::ConvergenceFailure,
           "logistic fit: singular Hessian at iteration " + std::to_string(it) +
               "; collinear predictors or separation, try a positive penalty");
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(obj));
    double t = 1.0;
    double next = objective(beta + step);
    while (!(next <= obj + slack) && t > 1e-12) {
      t *= 0.5;
      next = objective(beta + t * step);
    }
    if (!(next <= obj + slack)) {
      // No descent left at working precision.
      converged = m.gradient_norm < 1e3 * options.gradient_tolerance;
      break;
    }
    beta += t * step;
    obj = next;
  }
  if (!converged)
    fail(ErrorKind::ConvergenceFailure,
         "logistic fit did not converge after " + std::to_string(m.iterations) +
             " iterations (gradient norm " + std::to_string(m.gradient_norm) + ", lambda " +
             std::to_string(lambda) + ")");

  m.coefficients = beta;
  const VectorXd eta = D * beta;
  m.log_likelihood = logistic_loglik(eta, y);
  if (lambda == 0.0) {
    const VectorXd prob = eta.unaryExpr([](double v) { return sigmoid(v); });
    if ((prob - y).cwiseAbs().maxCoeff() < 1e-6)
      fail(ErrorKind::ConvergenceFailure,
           "training data are perfectly separated, so the unpenalized fit diverges; use a "
           "positive penalty");
  }
  return m;
}

GlmModel fit_linear(const MatrixXd& X, const VectorXd& y, double lambda) {
  check_design(X, y);
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::InvalidInput, "penalty must be >= 0");
  const MatrixXd D = with_intercept(X);
  if (lambda == 0.0) {
    const Eigen::ColPivHouseholderQR<MatrixXd> qr(D);
    require(qr.rank() == D.cols(), ErrorKind::InvalidInput,
            "least-squares system is singular; use a positive penalty");
  }
  MatrixXd A = D.transpose() * D;
  A.diagonal().tail(D.cols() - 1).array() += lambda;
  const Eigen::LDLT<MatrixXd> ldlt(A);
  GlmModel m;
  m.link = Link::Identity;
  m.lambda = lambda;
  m.coefficients = ldlt.solve(D.transpose() * y);
  require(ldlt.info() == Eigen::Success && all_finite(m.coefficients), ErrorKind::InvalidInput,
          "least-squares system is singular; use a positive penalty");
  const VectorXd resid = y - D * m.coefficients;
  VectorXd grad = D.transpose() * resid;
  grad.tail(D.cols() - 1) -= lambda * m.coefficients.tail(D.cols() - 1);
  m.gradient_norm = grad.norm();
  const double rss = resid.squaredNorm();
  const double n = static_cast<double>(y.size());
  m.log_likelihood = rss > 0.0 ? -0.5 * n * (std::log(2.0 * M_PI * rss / n) + 1.0)
                               : std::numeric_limits<double>::infinity();
  return m;
}

GlmModel fit_glm(Link link, const MatrixXd& X, const VectorXd& y, double lambda) {
  return link == Link::Logit ? fit_logistic(X, y, lambda) : fit_linear(X, y, lambda);
}

double log_likelihood(const GlmModel& model, const MatrixXd& X, const VectorXd& y) {
  require(y.size() == X.rows(), ErrorKind::InvalidInput, "log_likelihood: length mismatch");
  const VectorXd eta = model.linear_predictor(X);
  if (model.link == Link::Logit) return logistic_loglik(eta, y);
  const double rss = (y - eta).squaredNorm();
  const double n = static_cast<double>(y.size());
  require(rss > 0.0, ErrorKind::UndefinedMetric, "Gaussian log-likelihood of an exact fit");
  return -0.5 * n * (std::log(2.0 * M_PI * rss / n) + 1.0);
}

double aic(const GlmModel& model, const MatrixXd& X, const VectorXd& y) {
  const double k = static_cast<double>(model.coefficients.size()) +
                   (model.link == Link::Identity ? 1.0 : 0.0);
  return 2.0 * k - 2.0 * log_likelihood(model, X, y);
}

double accuracy(const Eigen::VectorXi& predicted, const VectorXd& truth) {
  require(predicted.size() == truth.size() && truth.size() > 0, ErrorKind::InvalidInput,
          "accuracy: empty or mismatched inputs");
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    correct += (static_cast<double>(predicted(i)) == truth(i)) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double osr2(const VectorXd& predicted, const VectorXd& truth) {
  require(predicted.size() == truth.size() && truth.size() >= 2, ErrorKind::InvalidInput,
          "OSR2: need at least two matched values");
  const double r = pearson(predicted, truth);
  require(!std::isnan(r), ErrorKind::UndefinedMetric,
          "OSR2 is undefined for constant predictions or constant truth");
  return r * r;
}

double evaluate_prediction(const GlmModel& model, const MatrixXd& X, const VectorXd& y) {
  require(X.rows() > 0, ErrorKind::InsufficientData, "empty test set");
  if (model.link == Link::Logit) return accuracy(model.predict_class(X), y);
  return osr2(model.predict(X), y);
}

Standardizer Standardizer::fit(const MatrixXd& X) {
  Standardizer s;
  s.mean = X.colwise().mean().transpose();
  s.scale = VectorXd::Ones(X.cols());
  if (X.rows() >= 2) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double sd = std::sqrt((X.col(j).array() - s.mean(j)).square().sum() /
                                  static_cast<double>(X.rows() - 1));
      if (sd > 0.0) s.scale(j) = sd;
    }
  }
  return s;
}

MatrixXd Standardizer::apply(const MatrixXd& X) const {
  require(X.cols() == mean.size(), ErrorKind::InvalidInput, "standardizer width mismatch");
  return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

PenaltySelection select_penalty(Link link, const MatrixXd& X_train, const VectorXd& y_train,
                                const MatrixXd& X_val, const VectorXd& y_val,
                                const std::vector<double>& grid) {
  require(!grid.empty(), ErrorKind::InvalidConfig, "empty penalty grid");
  PenaltySelection best;
  best.score = -std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    GlmModel m = fit_glm(link, X_train, y_train, lambda);
    double score = -std::numeric_limits<double>::infinity();
    try {
      score = evaluate_prediction(m, X_val, y_val);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedMetric) throw;
    }
    best.scores.push_back(score);
    if (score > best.score) {
      best.score = score;
      best.lambda = lambda;
      best.model = std::move(m);
    }
  }
  require(std::isfinite(best.score), ErrorKind::UndefinedMetric,
          "no penalty value produced a defined validation score");
  return best;
}

MatrixXd build_covariates(const CovariateSchema& schema, const VectorXd& outcome,
                          const MatrixXd& features) {
  const Eigen::Index n = outcome.size();
  require(!schema.features && !schema.interaction ? true : features.rows() == n,
          ErrorKind::InvalidInput, "outcome and feature rows differ");
  const Eigen::Index k = features.cols();
  const Eigen::Index cols = (schema.outcome ? 1 : 0) + (schema.features ? k : 0) +
                            (schema.interaction ? k : 0);
  MatrixXd out(n, cols);
  Eigen::Index c = 0;
  if (schema.outcome) out.col(c++) = outcome;
  if (schema.features) {
    out.middleCols(c, k) = features;
    c += k;
  }
  if (schema.interaction) out.middleCols(c, k) = features.array().colwise() * outcome.array();
  return out;
}

// ---------------------------------------------------------------------------

SplitIndices split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed) {
  require(ratios.train > 0.0 && ratios.validation >= 0.0 && ratios.train + ratios.validation < 1.0,
          ErrorKind::InvalidConfig, "split ratios must be positive and sum to less than 1");
  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(ratios.validation * static_cast<double>(n)));
  require(n_train >= 1 && n_train + n_val < n && (ratios.validation == 0.0 || n_val >= 1),
          ErrorKind::InsufficientData, "too few rows for the requested split");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                      perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return s;
}

ScenarioReport scenario_evaluation(const LabeledDataset& dataset, const FeatureMatrix& features,
                                   const ScenarioOptions& options) {
  const std::size_t n = dataset.sequences.size();
  require(n >= 2 && dataset.labels.size() == n, ErrorKind::InvalidInput,
          "scenario evaluation: dataset needs labels for every sequence");
  require(features.ids.size() == static_cast<std::size_t>(features.principal.rows()),
          ErrorKind::InvalidInput, "feature ids and rows differ");

  std::unordered_map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < features.ids.size(); ++i)
    row_of.emplace(features.ids[i], static_cast<Eigen::Index>(i));
  require(row_of.size() == n, ErrorKind::InvalidInput,
          "scenario evaluation: features and dataset have different sizes");
  MatrixXd X(static_cast<Eigen::Index>(n), features.principal.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto it = row_of.find(dataset.sequences[i].id);
    require(it != row_of.end(), ErrorKind::InvalidInput,
            "no features for sequence '" + dataset.sequences[i].id + "'");
    X.row(static_cast<Eigen::Index>(i)) = features.principal.row(it->second);
  }

  const auto derived = derive_variables(dataset.sequences, dataset.vocab.size(), options.threshold);

  const auto n_train = static_cast<std::size_t>(
      std::llround(options.train_fraction * static_cast<double>(n)));
  require(n_train >= 1 && n_train < n, ErrorKind::InvalidConfig,
          "train fraction leaves an empty split");
  Rng rng(options.seed);
  const auto perm = rng.permutation(n);
  auto take_rows = [&](const MatrixXd& M, std::size_t from, std::size_t to) {
    MatrixXd out(static_cast<Eigen::Index>(to - from), M.cols());
    for (std::size_t i = from; i < to; ++i)
      out.row(static_cast<Eigen::Index>(i - from)) = M.row(static_cast<Eigen::Index>(perm[i]));
    return out;
  };

  const MatrixXd X_train_raw = take_rows(X, 0, n_train);
  const Standardizer scaler = Standardizer::fit(X_train_raw);
  const MatrixXd X_train = scaler.apply(X_train_raw);
  const MatrixXd X_test = scaler.apply(take_rows(X, n_train, n));

  auto score = [&](const VectorXd& target) {
    const MatrixXd t = target;
    const VectorXd y_train = take_rows(t, 0, n_train).col(0);
    const VectorXd y_test = take_rows(t, n_train, n).col(0);
    const GlmModel m = fit_logistic(X_train, y_train, options.lambda);
    return accuracy(m.predict_class(X_test), y_test);
  };

  ScenarioReport rep;
  rep.train_size = n_train;
  rep.test_size = n - n_train;
  rep.variables = derived.definitions;
  double sum = 0.0;
  for (Eigen::Index v = 0; v < derived.indicators.cols(); ++v) {
    const double acc = score(derived.indicators.col(v));
    rep.variable_accuracy.push_back(acc);
    sum += acc;
  }
  rep.reconstruction_accuracy =
      rep.variable_accuracy.empty() ? 0.0 : sum / static_cast<double>(rep.variable_accuracy.size());

  VectorXd group(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) group(static_cast<Eigen::Index>(i)) = dataset.labels[i] == 2 ? 1.0 : 0.0;
  rep.group_accuracy = score(group);
  return rep;
}

ThresholdSplit best_threshold_split(const MatrixXd& features, const std::vector<int>& labels) {
  const auto n = features.rows();
  require(n >= 2 && static_cast<std::size_t>(n) == labels.size(), ErrorKind::InvalidInput,
          "threshold split: labels must match feature rows");
  ThresholdSplit best;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < features.cols(); ++k) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return features(a, k) < features(b, k);
    });
    const Eigen::Index total_pos =
        std::count(labels.begin(), labels.end(), 2);
    // Sweep thresholds; "below" counts rows at or under the cut.
    Eigen::Index below_pos = 0;
    for (Eigen::Index i = 0; i <= n; ++i) {
      if (i > 0) below_pos += labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i - 1)])] == 2;
      if (i > 0 && i < n &&
          features(order[static_cast<std::size_t>(i - 1)], k) == features(order[static_cast<std::size_t>(i)], k))
        continue;
      const Eigen::Index below_neg = i - below_pos;
      const Eigen::Index above_pos = total_pos - below_pos;
      // Orientation 1: below -> group 1; orientation 2: below -> group 2.
      const double acc1 = static_cast<double>(below_neg + above_pos) / static_cast<double>(n);
      const double acc = std::max(acc1, 1.0 - acc1);
      if (acc > best.accuracy) {
        best.accuracy = acc;
        best.column = k;
        if (i == 0)
          best.threshold = features(order[0], k) - 1.0;
        else if (i == n)
          best.threshold = features(order[static_cast<std::size_t>(n - 1)], k);
        else
          best.threshold = 0.5 * (features(order[static_cast<std::size_t>(i - 1)], k) +
                                  features(order[static_cast<std::size_t>(i)], k));
      }
    }
  }
  return best;
}

AicPath forward_aic_order(const MatrixXd& outcomes, const VectorXd& target, Link link,
                          double lambda) {
  const Eigen::Index J = outcomes.cols();
  require(J >= 1, ErrorKind::InvalidInput, "forward selection needs at least one item");
  require(outcomes.rows() == target.size(), ErrorKind::InvalidInput,
          "outcome rows and target length differ");

  AicPath path;
  const MatrixXd none(outcomes.rows(), 0);
  path.intercept_only_aic = aic(fit_glm(link, none, target, lambda), none, target);

  std::vector<Eigen::Index> remaining(static_cast<std::size_t>(J));
  std::iota(remaining.begin(), remaining.end(), Eigen::Index{0});
  while (!remaining.empty()) {
    double best_aic = std::numeric_limits<double>::infinity();
    std::size_t best_pos = 0;
    for (std::size_t r = 0; r < remaining.size(); ++r) {
      MatrixXd X(outcomes.rows(), static_cast<Eigen::Index>(path.order.size() + 1));
      for (std::size_t c = 0; c < path.order.size(); ++c)
        X.col(static_cast<Eigen::Index>(c)) = outcomes.col(path.order[c]);
      X.col(X.cols() - 1) = outcomes.col(remaining[r]);
      const double a = aic(fit_glm(link, X, target, lambda), X, target);
      if (a < best_aic) {
        best_aic = a;
        best_pos = r;
      }
    }
    path.order.push_back(remaining[best_pos]);
    path.aic.push_back(best_aic);
    remaining.erase(remaining.begin() + static_cast<long>(best_pos));
  }
  return path;
}

ChiSquareResult chi_square_independence(const std::array<std::array<double, 2>, 2>& table) {
  double total = 0.0;
  std::array<double, 2> rows{0.0, 0.0}, cols{0.0, 0.0};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double v = table[i][j];
      require(std::isfinite(v) && v >= 0.0, ErrorKind::InvalidTable,
              "contingency counts must be finite and non-negative");
      rows[i] += v;
      cols[j] += v;
      total += v;
    }
  require(rows[0] > 0 && rows[1] > 0 && cols[0] > 0 && cols[1] > 0, ErrorKind::InvalidTable,
          "contingency table has a zero marginal");
  ChiSquareResult out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double expected = rows[i] * cols[j] / total;
      const double d = table[i][j] - expected;
      out.statistic += d * d / expected;
    }
  // Upper tail of chi-square with one degree of freedom.
  out.p_value = std::erfc(std::sqrt(out.statistic / 2.0));
  return out;
}

}  // namespace seqae
