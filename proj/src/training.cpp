#include "seqae/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "seqae/parallel.hpp"
#include "seqae/random.hpp"

namespace seqae {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kSplitStream = 3;
constexpr std::uint64_t kOrderStream = 4;
constexpr std::uint64_t kFoldStream = 5;
constexpr std::uint64_t kCandidateStream = 6;

void check_dataset(const std::vector<ActionSequence>& seqs, const ActionVocabulary& vocab) {
  require(!seqs.empty(), ErrorKind::InsufficientData, "empty dataset");
  for (const auto& s : seqs) {
    require(!s.steps.empty(), ErrorKind::EmptySequence, "sequence '" + s.id + "' is empty");
    for (int a : s.steps)
      require(a >= 0 && a < vocab.size(), ErrorKind::VocabularyMismatch,
              "sequence '" + s.id + "' has an action outside the vocabulary");
  }
}

class Updater {
 public:
  Updater(const TrainConfig& config, const AutoencoderParams<double>& like)
      : config_(config), adam_(AdamState<AutoencoderParams<double>>::zeros(like)) {}

  double step(AutoencoderParams<double>& params, const ActionSequence& seq) {
    auto lg = autoencoder_grad(params, seq);
    if (config_.optimizer == OptimizerKind::Adam)
      adam_step(adam_, params, lg.grads, config_.step_size, config_.adam);
    else
      sgd_step(params, lg.grads, config_.step_size);
    return lg.loss;
  }

 private:
  const TrainConfig& config_;
  AdamState<AutoencoderParams<double>> adam_;
};

}  // namespace

void TrainConfig::validate() const {
  require(std::isfinite(step_size) && step_size >= 0.0, ErrorKind::InvalidConfig,
          "step size must be a finite non-negative number");
  require(epochs >= 1, ErrorKind::InvalidConfig, "epochs must be >= 1");
  require(validation_fraction > 0.0 && validation_fraction < 1.0, ErrorKind::InvalidConfig,
          "validation fraction must lie in (0, 1)");
  require(latent >= 1, ErrorKind::InvalidConfig, "K must be >= 1");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 &&
              adam.epsilon > 0.0,
          ErrorKind::InvalidConfig, "invalid Adam hyperparameters");
}

double mean_loss(const AutoencoderParams<double>& params, const std::vector<ActionSequence>& seqs,
                 const std::vector<std::size_t>& indices) {
  double total = 0.0;
  if (indices.empty()) {
    require(!seqs.empty(), ErrorKind::InsufficientData, "mean_loss: no sequences");
    for (const auto& s : seqs) total += sequence_loss(params, s);
    return total / static_cast<double>(seqs.size());
  }
  for (auto i : indices) total += sequence_loss(params, seqs.at(i));
  return total / static_cast<double>(indices.size());
}

TrainResult train_plain(const std::vector<ActionSequence>& seqs, const ActionVocabulary& vocab,
                        const TrainConfig& config, const EpochObserver& observer) {
  config.validate();
  check_dataset(seqs, vocab);

  Rng init_rng(derive_seed(config.seed, {kInitStream}));
  Rng sample_rng(derive_seed(config.seed, {kSampleStream}));
  TrainResult out{make_autoencoder<double>(config.cell, vocab.size(), config.latent, init_rng), {}};
  Updater updater(config, out.params);

  const std::size_t n = seqs.size();
  out.report.training_indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.report.training_indices[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      total += updater.step(out.params, seqs[sample_rng.below(n)]);
    out.report.epochs.push_back({epoch, total / static_cast<double>(n),
                                 std::numeric_limits<double>::quiet_NaN(), false});
    if (observer) observer(epoch, out.params, std::numeric_limits<double>::quiet_NaN());
  }
  out.report.best_epoch = config.epochs;
  return out;
}

TrainResult train_early_stopping(const std::vector<ActionSequence>& seqs,
                                 const ActionVocabulary& vocab, const TrainConfig& config,
                                 const EpochObserver& observer) {
  config.validate();
  check_dataset(seqs, vocab);

  const std::size_t n = seqs.size();
  const auto n_val = static_cast<std::size_t>(
      std::llround(config.validation_fraction * static_cast<double>(n)));
  require(n_val >= 1, ErrorKind::InvalidConfig,
          "validation split is empty (n=" + std::to_string(n) + ")");
  require(n_val < n, ErrorKind::InvalidConfig, "training split is empty");

  Rng split_rng(derive_seed(config.seed, {kSplitStream}));
  const auto perm = split_rng.permutation(n);
  TrainReport report;
  report.validation_indices.assign(perm.begin(), perm.begin() + static_cast<long>(n_val));
  report.training_indices.assign(perm.begin() + static_cast<long>(n_val), perm.end());

  Rng init_rng(derive_seed(config.seed, {kInitStream}));
  auto params = make_autoencoder<double>(config.cell, vocab.size(), config.latent, init_rng);
  Updater updater(config, params);

  report.initial_validation_loss = mean_loss(params, seqs, report.validation_indices);
  report.best_validation_loss = report.initial_validation_loss;
  report.best_epoch = 0;
  AutoencoderParams<double> best = params;

  Rng order_rng(derive_seed(config.seed, {kOrderStream}));
  std::vector<std::size_t> order = report.training_indices;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double total = 0.0;
    for (auto i : order) total += updater.step(params, seqs[i]);
    const double val = mean_loss(params, seqs, report.validation_indices);
    EpochRecord rec{epoch, total / static_cast<double>(order.size()), val, false};
    if (val < report.best_validation_loss) {
      report.best_validation_loss = val;
      report.best_epoch = epoch;
      best = params;
      rec.best = true;
    }
    report.epochs.push_back(rec);
    if (observer) observer(epoch, params, val);
  }
  return {std::move(best), std::move(report)};
}

std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int folds, std::uint64_t seed) {
  require(folds >= 2, ErrorKind::InvalidConfig, "need at least two folds");
  require(n >= static_cast<std::size_t>(folds), ErrorKind::InsufficientData,
          "fewer sequences than folds");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < n; ++i) out[i % out.size()].push_back(perm[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

CrossValidationResult cross_validate_latent(const std::vector<ActionSequence>& seqs,
                                            const ActionVocabulary& vocab,
                                            const std::vector<int>& candidates, int folds,
                                            const TrainConfig& config, unsigned threads) {
  require(!candidates.empty(), ErrorKind::InvalidConfig, "no candidate K values");
  require(folds >= 2, ErrorKind::InvalidConfig, "need at least two folds");
  require(seqs.size() >= static_cast<std::size_t>(folds), ErrorKind::InsufficientData,
          "fewer sequences than folds");
  check_dataset(seqs, vocab);

  const auto parts = fold_partition(seqs.size(), folds, derive_seed(config.seed, {kFoldStream}));
  CrossValidationResult out;
  out.candidates = candidates;
  out.fold_loss.assign(candidates.size(), std::vector<double>(static_cast<std::size_t>(folds)));

  const std::size_t jobs = candidates.size() * static_cast<std::size_t>(folds);
  parallel_for(jobs, threads, [&](std::size_t job) {
    const std::size_t c = job / static_cast<std::size_t>(folds);
    const std::size_t f = job % static_cast<std::size_t>(folds);
    std::vector<ActionSequence> train, held;
    for (std::size_t g = 0; g < parts.size(); ++g)
      for (auto i : parts[g]) (g == f ? held : train).push_back(seqs[i]);
    TrainConfig cfg = config;
    cfg.latent = candidates[c];
    cfg.seed = derive_seed(config.seed, {kCandidateStream, f, static_cast<std::uint64_t>(cfg.latent)});
    const auto fit = train_early_stopping(train, vocab, cfg);
    out.fold_loss[c][f] = mean_loss(fit.params, held);
  });

  out.mean_loss.resize(candidates.size());
  std::size_t best = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double sum = 0.0;
    for (double v : out.fold_loss[c]) sum += v;
    out.mean_loss[c] = sum / static_cast<double>(folds);
    const bool better = out.mean_loss[c] < out.mean_loss[best] ||
                        (out.mean_loss[c] == out.mean_loss[best] && candidates[c] < candidates[best]);
    if (better) best = c;
  }
  out.chosen_latent = candidates[best];
  return out;
}

void write_training_log(std::ostream& os, const TrainReport& report) {
  char buf[128];
  os << "epoch,train_loss,validation_loss,best\n";
  for (const auto& e : report.epochs) {
    if (std::isnan(e.validation_loss))
      std::snprintf(buf, sizeof buf, "%d,%.17g,,%d\n", e.epoch, e.train_loss, e.best ? 1 : 0);
    else
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d\n", e.epoch, e.train_loss,
                    e.validation_loss, e.best ? 1 : 0);
    os << buf;
  }
}

}  // namespace seqae
