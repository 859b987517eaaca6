#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include "seqae/autoencoder.hpp"
#include "seqae/error.hpp"

namespace seqae {

enum class OptimizerKind { Sgd, Adam };

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double step_size = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamSettings adam;
  int epochs = 100;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  CellKind cell = CellKind::Gru;
  int latent = 10;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = std::numeric_limits<double>::quiet_NaN();
  bool best = false;
};

/// Losses are mean per-sequence reconstruction losses.
struct TrainReport {
  std::vector<EpochRecord> epochs;
  double initial_validation_loss = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = 0;  // 0 = the initial parameters
  double best_validation_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> training_indices;
  std::vector<std::size_t> validation_indices;
};

struct TrainResult {
  AutoencoderParams<double> params;
  TrainReport report;
};

/// Called after every epoch with the current parameters and validation loss.
using EpochObserver =
    std::function<void(int epoch, const AutoencoderParams<double>& params, double validation_loss)>;

// Plain dense vectors and matrices are a single parameter block.
template <typename F, typename First, typename... Rest>
  requires requires { First::RowsAtCompileTime; }
void for_each_block(F&& f, First& first, Rest&... rest) {
  f(first, rest...);
}

template <typename Params>
Params zeros_like(const Params& like) {
  Params out = like;
  for_each_block([](auto& b) { b.setZero(); }, out);
  return out;
}

template <typename Params>
bool all_finite_blocks(const Params& p) {
  bool ok = true;
  for_each_block([&](const auto& b) { ok = ok && all_finite(b); }, p);
  return ok;
}

template <typename Params>
struct AdamState {
  Params first_moment;
  Params second_moment;
  long step = 0;

  static AdamState zeros(const Params& like) { return {zeros_like(like), zeros_like(like), 0}; }
};

/// Bias-corrected Adam update, in place.
template <typename Params>
void adam_step(AdamState<Params>& state, Params& params, const Params& grads, double step_size,
               const AdamSettings& s = {}) {
  require(all_finite_blocks(grads), ErrorKind::TrainingDiverged, "non-finite gradient");
  ++state.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
  for_each_block(
      [&](auto& p, const auto& g, auto& m, auto& v) {
        m = s.beta1 * m + (1.0 - s.beta1) * g;
        v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseAbs2();
        p.array() -= step_size * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
      },
      params, grads, state.first_moment, state.second_moment);
}

template <typename Params>
void sgd_step(Params& params, const Params& grads, double step_size) {
  require(all_finite_blocks(grads), ErrorKind::TrainingDiverged, "non-finite gradient");
  for_each_block([&](auto& p, const auto& g) { p -= step_size * g; }, params, grads);
}

/// Mean reconstruction loss over the listed sequences (all of them when empty).
double mean_loss(const AutoencoderParams<double>& params, const std::vector<ActionSequence>& seqs,
                 const std::vector<std::size_t>& indices = {});

/// Single-sequence SGD/Adam for a fixed epoch budget, sampling with replacement.
TrainResult train_plain(const std::vector<ActionSequence>& seqs, const ActionVocabulary& vocab,
                        const TrainConfig& config, const EpochObserver& observer = {});

/// Training with a random validation split; returns the snapshot with the
/// smallest validation loss seen after initialization or any epoch.
TrainResult train_early_stopping(const std::vector<ActionSequence>& seqs,
                                 const ActionVocabulary& vocab, const TrainConfig& config,
                                 const EpochObserver& observer = {});

/// Disjoint folds covering [0, n); fold sizes differ by at most one.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int folds, std::uint64_t seed);

struct CrossValidationResult {
  int chosen_latent = 0;
  std::vector<int> candidates;
  std::vector<double> mean_loss;               // per candidate
  std::vector<std::vector<double>> fold_loss;  // [candidate][fold]
};

/// k-fold selection of the latent dimension by held-out reconstruction loss.
/// Ties go to the smaller K.
CrossValidationResult cross_validate_latent(const std::vector<ActionSequence>& seqs,
                                            const ActionVocabulary& vocab,
                                            const std::vector<int>& candidates, int folds,
                                            const TrainConfig& config, unsigned threads = 1);

/// CSV: epoch,train_loss,validation_loss,best
void write_training_log(std::ostream& os, const TrainReport& report);

}  // namespace seqae
