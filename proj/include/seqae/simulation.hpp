#pragma once

#include <cstdint>
#include <vector>

#include "seqae/autoencoder.hpp"
#include "seqae/core_math.hpp"
#include "seqae/random.hpp"

namespace seqae {

/// Transition matrix over a vocabulary whose first action is the start state
/// and whose last action is the absorbing end state.
struct MarkovChain {
  ActionVocabulary vocab;
  MatrixXd transitions;  // N x N, rows sum to 1

  int size() const { return vocab.size(); }
  int start() const { return 0; }
  int end() const { return vocab.size() - 1; }

  /// Throws InvalidInput unless rows are distributions, no row enters the
  /// start state, and the end state is absorbing.
  void validate() const;
};

/// Builds a chain from an (N-1) x (N-1) score matrix: row i of the free block
/// (rows 1..N-1, columns 2..N) is softmax(scores.row(i)).
MarkovChain chain_from_scores(const ActionVocabulary& vocab, const MatrixXd& scores);

/// Scores uniform on [-10, 10], passed through chain_from_scores.
MarkovChain sample_transition_matrix(int actions, Rng& rng);
MarkovChain sample_transition_matrix(const ActionVocabulary& vocab, Rng& rng);

inline constexpr int kDefaultMaxLength = 1000;

/// Walks the chain from the start state until the end state appears. Throws
/// ErrorKind::Truncation if that takes more than `max_length` actions.
ActionSequence generate_sequence(const MarkovChain& chain, Rng& rng,
                                 int max_length = kDefaultMaxLength);

/// Reverses the actions strictly between the first and last position.
ActionSequence reverse_interior(const ActionSequence& seq, int start_action, int end_action);

enum class Scenario { I, II };

struct DatasetOptions {
  int max_length = kDefaultMaxLength;
  /// Scenario II only: reverse copies of the group-1 sequences instead of
  /// fresh draws from the same chain.
  bool paired_reversal = false;
};

struct LabeledDataset {
  Scenario scenario = Scenario::I;
  std::uint64_t seed = 0;
  ActionVocabulary vocab;
  std::vector<ActionSequence> sequences;
  std::vector<int> labels;  // 1 or 2
  int truncated_draws = 0;  // redrawn because max_length was exceeded
};

/// n/2 sequences per group. Scenario I: group 1 from chains[0], group 2 from
/// chains[1]. Scenario II: group 1 from chains[0], group 2 interior-reversed.
LabeledDataset make_dataset(Scenario scenario, int n, const std::vector<MarkovChain>& chains,
                            std::uint64_t seed, const DatasetOptions& options = {});

}  // namespace seqae
