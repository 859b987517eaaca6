#pragma once

// Action-sequence autoencoder.
//
//   encoder:  theta = last output of RNN_enc(S E)
//   decoder:  Y = RNN_dec(1_T theta^T), row t of the reconstruction is the
//             multinomial logit of y_t with the last action as reference
//             category (logit fixed at 0)
//   loss:     -(1/T) sum_t log p_t(s_t)
//
// Actions are 0-based indices into the vocabulary throughout the library.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqae/core_math.hpp"
#include "seqae/error.hpp"
#include "seqae/random.hpp"
#include "seqae/recurrent.hpp"

namespace seqae {

/// Lower bound applied to a probability inside the log of the loss.
inline constexpr double kProbabilityFloor = 1e-12;

class ActionVocabulary {
 public:
  ActionVocabulary() = default;

  explicit ActionVocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
    require(labels_.size() >= 2, ErrorKind::InvalidInput, "vocabulary needs at least two actions");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      require(!labels_[i].empty(), ErrorKind::InvalidInput, "empty action label");
      const bool inserted = index_.emplace(labels_[i], static_cast<int>(i)).second;
      require(inserted, ErrorKind::InvalidInput, "duplicate action label '" + labels_[i] + "'");
    }
  }

  /// A..Z style vocabulary of `n` single upper-case letters, with the last
  /// label forced to "Z" when n < 26.
  static ActionVocabulary letters(int n) {
    require(n >= 2 && n <= 26, ErrorKind::InvalidInput, "letter vocabulary supports 2..26 actions");
    std::vector<std::string> labels;
    for (int i = 0; i < n - 1; ++i) labels.emplace_back(1, static_cast<char>('A' + i));
    labels.emplace_back("Z");
    return ActionVocabulary(std::move(labels));
  }

  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int index) const { return labels_.at(static_cast<std::size_t>(index)); }

  bool contains(const std::string& label) const { return index_.count(label) != 0; }

  int index(const std::string& label) const {
    auto it = index_.find(label);
    require(it != index_.end(), ErrorKind::VocabularyMismatch, "unknown action '" + label + "'");
    return it->second;
  }

  bool operator==(const ActionVocabulary& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

struct ActionSequence {
  std::string id;
  std::vector<int> steps;

  Eigen::Index length() const { return static_cast<Eigen::Index>(steps.size()); }
  bool operator==(const ActionSequence&) const = default;
};

/// Binary T x N indicator view of a sequence (one 1 per row).
inline MatrixXd one_hot(const ActionSequence& seq, int vocab_size) {
  MatrixXd s = MatrixXd::Zero(seq.length(), vocab_size);
  for (Eigen::Index t = 0; t < seq.length(); ++t) {
    const int a = seq.steps[static_cast<std::size_t>(t)];
    require(a >= 0 && a < vocab_size, ErrorKind::VocabularyMismatch,
            "sequence '" + seq.id + "' has action index out of range");
    s(t, a) = 1.0;
  }
  return s;
}

template <typename Scalar>
struct AutoencoderParams {
  CellKind kind = CellKind::Gru;
  int actions = 0;  // N
  int latent = 0;   // K
  Mat<Scalar> embedding;     // N x K
  RnnParams<Scalar> encoder;
  RnnParams<Scalar> decoder;
  Vec<Scalar> mlm_bias;      // N-1
  Mat<Scalar> mlm_weights;   // (N-1) x K

  static AutoencoderParams zeros(CellKind kind, int actions, int latent) {
    require(actions >= 2, ErrorKind::InvalidInput, "autoencoder needs at least two actions");
    require(latent >= 1, ErrorKind::InvalidInput, "latent dimension must be >= 1");
    AutoencoderParams p;
    p.kind = kind;
    p.actions = actions;
    p.latent = latent;
    p.embedding = Mat<Scalar>::Zero(actions, latent);
    p.encoder = RnnParams<Scalar>::zeros(kind, latent);
    p.decoder = RnnParams<Scalar>::zeros(kind, latent);
    p.mlm_bias = Vec<Scalar>::Zero(actions - 1);
    p.mlm_weights = Mat<Scalar>::Zero(actions - 1, latent);
    return p;
  }

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(embedding.size() + mlm_bias.size() + mlm_weights.size()) +
           encoder.parameter_count() + decoder.parameter_count();
  }

  template <typename Other>
  AutoencoderParams<Other> cast() const {
    AutoencoderParams<Other> out;
    out.kind = kind;
    out.actions = actions;
    out.latent = latent;
    out.embedding = embedding.template cast<Other>();
    out.encoder = encoder.template cast<Other>();
    out.decoder = decoder.template cast<Other>();
    out.mlm_bias = mlm_bias.template cast<Other>();
    out.mlm_weights = mlm_weights.template cast<Other>();
    return out;
  }
};

template <typename F, typename First, typename... Rest>
  requires requires(First& p) { p.embedding; p.mlm_weights; }
void for_each_block(F&& f, First& first, Rest&... rest) {
  f(first.embedding, rest.embedding...);
  for_each_block(f, first.encoder, rest.encoder...);
  for_each_block(f, first.decoder, rest.decoder...);
  f(first.mlm_bias, rest.mlm_bias...);
  f(first.mlm_weights, rest.mlm_weights...);
}

/// Embedding uniform on [-0.05, 0.05]; recurrent weights per `initialize(RnnParams&)`;
/// logit head zero so the first reconstructions are uniform.
template <typename Scalar>
void initialize(AutoencoderParams<Scalar>& p, Rng& rng) {
  for (Eigen::Index j = 0; j < p.embedding.cols(); ++j)
    for (Eigen::Index i = 0; i < p.embedding.rows(); ++i)
      p.embedding(i, j) = Scalar(rng.uniform(-0.05, 0.05));
  initialize(p.encoder, rng);
  initialize(p.decoder, rng);
  p.mlm_bias.setZero();
  p.mlm_weights.setZero();
}

template <typename Scalar>
AutoencoderParams<Scalar> make_autoencoder(CellKind kind, int actions, int latent, Rng& rng) {
  auto p = AutoencoderParams<Scalar>::zeros(kind, actions, latent);
  initialize(p, rng);
  return p;
}

/// Rows of the embedding matrix for each step: X = S E.
template <typename Scalar>
RowMat<Scalar> embed(const AutoencoderParams<Scalar>& p, const ActionSequence& seq) {
  require(seq.length() >= 1, ErrorKind::EmptySequence, "sequence '" + seq.id + "' is empty");
  RowMat<Scalar> x(seq.length(), p.latent);
  for (Eigen::Index t = 0; t < seq.length(); ++t) {
    const int a = seq.steps[static_cast<std::size_t>(t)];
    require(a >= 0 && a < p.actions, ErrorKind::VocabularyMismatch,
            "sequence '" + seq.id + "' has action index " + std::to_string(a) +
                " outside vocabulary of size " + std::to_string(p.actions));
    x.row(t) = p.embedding.row(a);
  }
  return x;
}

template <typename Scalar>
Vec<Scalar> encode(const AutoencoderParams<Scalar>& p, const ActionSequence& seq) {
  return rnn_forward(p.encoder, embed(p, seq)).last_output();
}

/// Logits of the multinomial head for each row of `outputs`; the last column
/// is the reference category and is always 0.
template <typename Scalar>
RowMat<Scalar> mlm_logits(const AutoencoderParams<Scalar>& p, const RowMat<Scalar>& outputs) {
  const Eigen::Index T = outputs.rows();
  RowMat<Scalar> logits(T, p.actions);
  logits.leftCols(p.actions - 1) = outputs * p.mlm_weights.transpose();
  logits.leftCols(p.actions - 1).rowwise() += p.mlm_bias.transpose();
  logits.col(p.actions - 1).setZero();
  return logits;
}

template <typename Scalar>
RowMat<Scalar> row_softmax(const RowMat<Scalar>& logits) {
  RowMat<Scalar> probs(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t)
    probs.row(t) = softmax_row(logits.row(t).transpose()).transpose();
  return probs;
}

template <typename Scalar>
RowMat<Scalar> repeat_rows(const Vec<Scalar>& theta, Eigen::Index steps) {
  return theta.transpose().replicate(steps, 1);
}

/// Per-step action distributions (T x N) reconstructed from a latent vector.
template <typename Scalar>
RowMat<Scalar> decode(const AutoencoderParams<Scalar>& p, const Vec<Scalar>& theta,
                      Eigen::Index steps) {
  require(steps >= 1, ErrorKind::EmptySequence, "decode: T must be >= 1");
  require(theta.size() == p.latent, ErrorKind::InvalidInput, "decode: latent size mismatch");
  const auto trace = rnn_forward(p.decoder, repeat_rows(theta, steps));
  return row_softmax(mlm_logits(p, trace.outputs()));
}

template <typename Derived>
typename Derived::Scalar reconstruction_loss(const ActionSequence& seq,
                                             const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  using std::log;
  require(seq.length() >= 1, ErrorKind::EmptySequence, "reconstruction_loss: empty sequence");
  require(probs.rows() == seq.length(), ErrorKind::InvalidInput,
          "reconstruction_loss: probability rows do not match sequence length");
  Scalar total(0);
  for (Eigen::Index t = 0; t < seq.length(); ++t) {
    const int a = seq.steps[static_cast<std::size_t>(t)];
    require(a >= 0 && a < probs.cols(), ErrorKind::VocabularyMismatch,
            "reconstruction_loss: action index out of range");
    total -= log(std::max(probs(t, a), Scalar(kProbabilityFloor)));
  }
  return total / Scalar(seq.length());
}

/// Loss of reconstructing `seq` through the full autoencoder.
template <typename Scalar>
Scalar sequence_loss(const AutoencoderParams<Scalar>& p, const ActionSequence& seq) {
  return reconstruction_loss(seq, decode(p, encode(p, seq), seq.length()));
}

template <typename Scalar>
struct LossAndGradient {
  Scalar loss;
  AutoencoderParams<Scalar> grads;
};

/// Loss and its exact gradient w.r.t. every parameter, for one sequence.
template <typename Scalar>
LossAndGradient<Scalar> autoencoder_grad(const AutoencoderParams<Scalar>& p,
                                         const ActionSequence& seq) {
  using std::log;
  const Eigen::Index T = seq.length();
  const auto enc = rnn_forward(p.encoder, embed(p, seq));
  const Vec<Scalar> theta = enc.last_output();
  const auto dec = rnn_forward(p.decoder, repeat_rows(theta, T));
  const RowMat<Scalar> probs = row_softmax(mlm_logits(p, dec.outputs()));

  LossAndGradient<Scalar> out{Scalar(0), AutoencoderParams<Scalar>::zeros(p.kind, p.actions, p.latent)};

  // dL/dlogits = (p_t - e_{s_t}) / T, except where the floor is active.
  RowMat<Scalar> dlogits = probs / Scalar(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const int a = seq.steps[static_cast<std::size_t>(t)];
    const Scalar pa = probs(t, a);
    if (pa < Scalar(kProbabilityFloor)) {
      out.loss -= log(Scalar(kProbabilityFloor));
      dlogits.row(t).setZero();
    } else {
      out.loss -= log(pa);
      dlogits(t, a) -= Scalar(1) / Scalar(T);
    }
  }
  out.loss /= Scalar(T);

  const auto dhead = dlogits.leftCols(p.actions - 1);
  out.grads.mlm_bias = dhead.colwise().sum().transpose();
  out.grads.mlm_weights = dhead.transpose() * dec.outputs();
  const RowMat<Scalar> dy = dhead * p.mlm_weights;

  auto dec_grads = rnn_backward(p.decoder, dec, dy);
  out.grads.decoder = std::move(dec_grads.params);
  const Vec<Scalar> dtheta = dec_grads.inputs.colwise().sum().transpose();

  RowMat<Scalar> denc = RowMat<Scalar>::Zero(T, p.latent);
  denc.row(T - 1) = dtheta.transpose();
  auto enc_grads = rnn_backward(p.encoder, enc, denc);
  out.grads.encoder = std::move(enc_grads.params);
  for (Eigen::Index t = 0; t < T; ++t)
    out.grads.embedding.row(seq.steps[static_cast<std::size_t>(t)]) += enc_grads.inputs.row(t);
  return out;
}

}  // namespace seqae
