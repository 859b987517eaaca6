#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "seqae/autoencoder.hpp"
#include "seqae/features.hpp"
#include "seqae/simulation.hpp"

namespace seqae {

/// Provenance stamped into every artifact.
struct Provenance {
  std::string spec_hash;
  std::uint64_t seed = 0;
};

/// 64-bit FNV-1a, printed as 16 lower-case hex digits.
std::string fnv1a_hex(const std::string& text);

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Sequences (JSON lines: {"id": ..., "label": ..., "actions": [...]})

struct LoadOptions {
  /// Labels always included in the vocabulary.
  std::optional<ActionVocabulary> vocabulary;
  /// Use `vocabulary` exactly as given and reject unknown actions.
  bool fixed_vocabulary = false;
};

struct SequenceData {
  ActionVocabulary vocab;
  std::vector<ActionSequence> sequences;
  std::vector<int> labels;  // 0 when a record has no label
};

SequenceData read_sequences(std::istream& in, const LoadOptions& options = {});
SequenceData load_sequences(const std::string& path, const LoadOptions& options = {});

void write_sequences(std::ostream& out, const ActionVocabulary& vocab,
                     const std::vector<ActionSequence>& seqs, const std::vector<int>& labels = {});

/// One label per line.
ActionVocabulary load_vocabulary(const std::string& path);

/// Writes `<dir>/dataset.jsonl` and `<dir>/manifest.json`.
void export_dataset(const std::string& dir, const LabeledDataset& ds,
                    const std::vector<MarkovChain>& chains, const Provenance& provenance);

LabeledDataset labeled_dataset(const SequenceData& data, Scenario scenario = Scenario::I,
                               std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Model file

inline constexpr int kModelFormatVersion = 1;

void write_model(std::ostream& out, const AutoencoderParams<double>& params,
                 const ActionVocabulary& vocab, const Provenance& provenance);
void save_model(const std::string& path, const AutoencoderParams<double>& params,
                const ActionVocabulary& vocab, const Provenance& provenance);

struct LoadedModel {
  AutoencoderParams<double> params;
  ActionVocabulary vocab;
  Provenance provenance;
};

LoadedModel read_model(std::istream& in);
LoadedModel load_model(const std::string& path);

// ---------------------------------------------------------------------------
// Features

/// Optional line `# spec_hash=<hex>,seed=<n>`, then header `id,pf1,...,pfK`
/// and one row per sequence.
void write_features_csv(std::ostream& out, const std::vector<std::string>& ids,
                        const MatrixXd& values, const std::string& prefix = "pf",
                        const std::optional<Provenance>& provenance = std::nullopt);

struct FeatureTable {
  std::vector<std::string> ids;
  MatrixXd values;
  std::optional<Provenance> provenance;
};
FeatureTable read_features_csv(std::istream& in);
FeatureTable load_features_csv(const std::string& path);

void write_pca_sidecar(std::ostream& out, const PcaTransform& pca, const Provenance& provenance);
PcaTransform read_pca_sidecar(std::istream& in);
PcaTransform load_pca_sidecar(const std::string& path);

// ---------------------------------------------------------------------------

/// Writes `content` to `path`, creating parent directories.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace seqae
