#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqae/downstream.hpp"
#include "seqae/simulation.hpp"
#include "seqae/training.hpp"

namespace seqae {

/// One simulation grid cell: scenario x n, repeated over replications and
/// cell kinds. The two Markov chains depend only on `seed`, so every
/// replication under one seed shares them.
struct ExperimentSpec {
  Scenario scenario = Scenario::I;
  int n = 500;
  int replications = 1;
  std::vector<CellKind> cells{CellKind::Lstm, CellKind::Gru};
  std::vector<int> latent_candidates{10, 20, 30, 40, 50};
  int folds = 5;
  std::uint64_t seed = 1;
  int actions = 26;
  bool paired_reversal = false;

  int epochs = 100;
  int cv_epochs = 0;  // 0 = same as epochs
  double step_size = 1e-3;
  double validation_fraction = 0.1;

  double train_fraction = 0.8;
  double lambda = 1e-2;
  double threshold = 0.05;

  std::string output_dir;
  unsigned threads = 1;

  void validate() const;
  /// Canonical JSON of every field that affects results.
  std::string canonical_json() const;
  std::string hash() const;
};

struct ReplicationRow {
  Scenario scenario = Scenario::I;
  int n = 0;
  CellKind cell = CellKind::Gru;
  int replication = 0;
  int latent = 0;
  double reconstruction_accuracy = 0.0;
  double group_accuracy = 0.0;
  int best_epoch = 0;
  std::string status = "ok";  // "ok" or "<error-category>: message"
};

struct SummaryRow {
  Scenario scenario = Scenario::I;
  int n = 0;
  CellKind cell = CellKind::Gru;
  int completed = 0;
  int requested = 0;
  double reconstruction_mean = 0.0;
  double reconstruction_sd = 0.0;
  double group_mean = 0.0;
  double group_sd = 0.0;
};

struct ExperimentResult {
  std::string spec_hash;
  std::vector<MarkovChain> chains;
  std::vector<ReplicationRow> rows;  // replication-major, then cell order
  std::vector<SummaryRow> summary;   // one per cell kind
};

/// The Markov chains used by every replication of `spec`.
std::vector<MarkovChain> experiment_chains(const ExperimentSpec& spec);

/// Dataset for one replication.
LabeledDataset experiment_dataset(const ExperimentSpec& spec, const std::vector<MarkovChain>& chains,
                                  int replication);

/// simulate -> choose K -> train with early stopping -> features -> evaluate,
/// for every replication and cell kind. Stage failures are recorded in the
/// row status. Writes reports when `spec.output_dir` is set.
ExperimentResult run_experiment(const ExperimentSpec& spec);

std::string replication_csv(const ExperimentResult& result, const ExperimentSpec& spec);
std::string summary_csv(const ExperimentResult& result, const ExperimentSpec& spec);

inline std::string to_string(Scenario s) { return s == Scenario::I ? "I" : "II"; }
Scenario parse_scenario(const std::string& s);

/// "mean (sd)" with the given number of decimals, as in a results table.
std::string mean_sd_cell(double mean, double sd, int decimals);

}  // namespace seqae
