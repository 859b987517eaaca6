#include "seqae/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace seqae {

void MarkovChain::validate() const {
  const int n = vocab.size();
  require(n >= 2, ErrorKind::InvalidInput, "chain needs at least two actions");
  require(transitions.rows() == n && transitions.cols() == n, ErrorKind::InvalidInput,
          "transition matrix shape does not match vocabulary");
  require(all_finite(transitions) && (transitions.array() >= 0.0).all(), ErrorKind::InvalidInput,
          "transition probabilities must be finite and non-negative");
  for (int i = 0; i < n; ++i) {
    require(std::abs(transitions.row(i).sum() - 1.0) <= 1e-12, ErrorKind::InvalidInput,
            "transition row " + std::to_string(i) + " does not sum to 1");
    require(transitions(i, 0) == 0.0, ErrorKind::InvalidInput, "transition into the start state");
  }
  require(transitions(n - 1, n - 1) == 1.0, ErrorKind::InvalidInput, "end state is not absorbing");
}

MarkovChain chain_from_scores(const ActionVocabulary& vocab, const MatrixXd& scores) {
  const int n = vocab.size();
  require(n >= 2, ErrorKind::InvalidInput, "chain needs at least two actions");
  require(scores.rows() == n - 1 && scores.cols() == n - 1, ErrorKind::InvalidInput,
          "score matrix must be (N-1) x (N-1)");
  MarkovChain chain{vocab, MatrixXd::Zero(n, n)};
  for (int i = 0; i < n - 1; ++i) {
    const VectorXd row = softmax_row(scores.row(i).transpose());
    chain.transitions.block(i, 1, 1, n - 1) = row.transpose();
    chain.transitions.row(i) /= chain.transitions.row(i).sum();
  }
  chain.transitions(n - 1, n - 1) = 1.0;
  return chain;
}

MarkovChain sample_transition_matrix(const ActionVocabulary& vocab, Rng& rng) {
  const int n = vocab.size();
  require(n >= 2, ErrorKind::InvalidInput, "chain needs at least two actions");
  MatrixXd scores(n - 1, n - 1);
  for (int i = 0; i < n - 1; ++i)
    for (int j = 0; j < n - 1; ++j) scores(i, j) = rng.uniform(-10.0, 10.0);
  return chain_from_scores(vocab, scores);
}

MarkovChain sample_transition_matrix(int actions, Rng& rng) {
  require(actions >= 2, ErrorKind::InvalidInput, "chain needs at least two actions");
  return sample_transition_matrix(ActionVocabulary::letters(actions), rng);
}

namespace {

int draw_next(const MarkovChain& chain, int from, Rng& rng) {
  const double u = rng.uniform();
  const auto row = chain.transitions.row(from);
  double cum = 0.0;
  int last_positive = from;
  for (int j = 0; j < row.size(); ++j) {
    if (row(j) <= 0.0) continue;
    last_positive = j;
    cum += row(j);
    if (u < cum) return j;
  }
  return last_positive;
}

}  // namespace

ActionSequence generate_sequence(const MarkovChain& chain, Rng& rng, int max_length) {
  require(max_length >= 2, ErrorKind::InvalidInput, "max_length must be >= 2");
  ActionSequence seq;
  seq.steps.push_back(chain.start());
  while (seq.steps.back() != chain.end()) {
    if (static_cast<int>(seq.steps.size()) >= max_length)
      fail(ErrorKind::Truncation,
           "end state not reached within " + std::to_string(max_length) + " actions");
    seq.steps.push_back(draw_next(chain, seq.steps.back(), rng));
  }
  return seq;
}

ActionSequence reverse_interior(const ActionSequence& seq, int start_action, int end_action) {
  require(seq.steps.size() >= 2 && seq.steps.front() == start_action &&
              seq.steps.back() == end_action,
          ErrorKind::InvalidInput, "sequence '" + seq.id + "' does not run from start to end");
  ActionSequence out = seq;
  std::reverse(out.steps.begin() + 1, out.steps.end() - 1);
  return out;
}

namespace {

ActionSequence draw_with_retry(const MarkovChain& chain, Rng& rng, int max_length, int& truncated) {
  for (;;) {
    try {
      return generate_sequence(chain, rng, max_length);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Truncation) throw;
      ++truncated;
    }
  }
}

std::string sequence_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06d", i + 1);
  return buf;
}

}  // namespace

LabeledDataset make_dataset(Scenario scenario, int n, const std::vector<MarkovChain>& chains,
                            std::uint64_t seed, const DatasetOptions& options) {
  require(n >= 2 && n % 2 == 0, ErrorKind::InvalidInput, "n must be even and >= 2");
  const std::size_t needed = scenario == Scenario::I ? 2 : 1;
  require(chains.size() >= needed, ErrorKind::InvalidInput,
          scenario == Scenario::I ? "scenario I needs two chains" : "scenario II needs one chain");
  for (std::size_t c = 0; c < needed; ++c) chains[c].validate();
  if (needed == 2)
    require(chains[0].vocab == chains[1].vocab, ErrorKind::InvalidInput,
            "both chains must share one vocabulary");

  LabeledDataset ds;
  ds.scenario = scenario;
  ds.seed = seed;
  ds.vocab = chains[0].vocab;
  const int half = n / 2;
  const int start = chains[0].start();
  const int end = chains[0].end();

  for (int i = 0; i < n; ++i) {
    const int group = i < half ? 1 : 2;
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    ActionSequence seq;
    if (scenario == Scenario::I) {
      seq = draw_with_retry(chains[static_cast<std::size_t>(group - 1)], rng, options.max_length,
                            ds.truncated_draws);
    } else if (group == 1) {
      seq = draw_with_retry(chains[0], rng, options.max_length, ds.truncated_draws);
    } else if (options.paired_reversal) {
      seq = reverse_interior(ds.sequences[static_cast<std::size_t>(i - half)], start, end);
    } else {
      seq = reverse_interior(draw_with_retry(chains[0], rng, options.max_length, ds.truncated_draws),
                             start, end);
    }
    seq.id = sequence_id(i);
    ds.sequences.push_back(std::move(seq));
    ds.labels.push_back(group);
  }
  return ds;
}

}  // namespace seqae
