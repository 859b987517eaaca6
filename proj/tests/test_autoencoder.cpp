#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "seqae/autoencoder.hpp"

using namespace seqae;

namespace {

AutoencoderParams<double> random_params(CellKind kind, int n, int k, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  auto p = AutoencoderParams<double>::zeros(kind, n, k);
  for_each_block(
      [&](auto& b) {
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-scale, scale);
      },
      p);
  return p;
}

ActionSequence random_sequence(int n, int t, std::uint64_t seed) {
  Rng rng(seed);
  ActionSequence s;
  for (int i = 0; i < t; ++i) s.steps.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
  return s;
}

double autoencoder_gradient_error(CellKind kind, int n, int k, int t, std::uint64_t seed) {
  const auto p = random_params(kind, n, k, seed);
  const auto s = random_sequence(n, t, seed + 99);
  const auto g = autoencoder_grad(p, s);
  CHECK(std::abs(g.loss - sequence_loss(p, s)) < 1e-12);
  return oracle::max_gradient_error(p, g.grads,
                                    [&](const AutoencoderParams<double>& q) { return sequence_loss(q, s); });
}

}  // namespace

TEST_CASE("vocabulary") {
  const auto v = ActionVocabulary::letters(26);
  CHECK(v.size() == 26);
  CHECK(v.label(0) == "A");
  CHECK(v.label(25) == "Z");
  CHECK(v.index("C") == 2);
  CHECK_THROWS_AS(v.index("?"), Error);
  const auto small = ActionVocabulary::letters(4);
  CHECK(small.labels() == std::vector<std::string>{"A", "B", "C", "Z"});
  CHECK_THROWS_AS(ActionVocabulary({"A"}), Error);
  CHECK_THROWS_AS(ActionVocabulary({"A", "A"}), Error);
  CHECK_THROWS_AS(ActionVocabulary({"A", ""}), Error);
}

TEST_CASE("one-hot view has exactly one 1 per row") {
  const auto s = random_sequence(5, 9, 3);
  const MatrixXd S = one_hot(s, 5);
  CHECK(S.rows() == 9);
  for (int t = 0; t < 9; ++t) {
    CHECK(S.row(t).sum() == 1.0);
    CHECK(S(t, s.steps[static_cast<std::size_t>(t)]) == 1.0);
  }
}

TEST_CASE("single-step encode is one recurrent step on an embedding row") {
  for (auto kind : {CellKind::Gru, CellKind::Lstm}) {
    const auto p = random_params(kind, 4, 3, 5);
    const ActionSequence s{"x", {2}};
    const auto expected = oracle::recurrence(p.encoder, {{p.embedding(2, 0), p.embedding(2, 1), p.embedding(2, 2)}});
    const auto theta = encode(p, s);
    for (int a = 0; a < 3; ++a) CHECK(std::abs(theta(a) - expected[0][static_cast<std::size_t>(a)]) < 1e-15);
  }
}

TEST_CASE("zero GRU encoder maps everything to zero") {
  auto p = random_params(CellKind::Gru, 5, 3, 6);
  p.encoder = RnnParams<double>::zeros(CellKind::Gru, 3);
  CHECK(encode(p, random_sequence(5, 7, 1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encode matches a straight-line composition") {
  for (auto kind : {CellKind::Gru, CellKind::Lstm}) {
    const auto p = random_params(kind, 6, 3, 7);
    const auto s = random_sequence(6, 5, 8);
    oracle::Matrix rows;
    for (int a : s.steps) rows.push_back({p.embedding(a, 0), p.embedding(a, 1), p.embedding(a, 2)});
    const auto expected = oracle::recurrence(p.encoder, rows).back();
    const auto theta = encode(p, s);
    for (int a = 0; a < 3; ++a) CHECK(std::abs(theta(a) - expected[static_cast<std::size_t>(a)]) < 1e-14);
  }
}

TEST_CASE("encode rejects out-of-range actions") {
  const auto p = random_params(CellKind::Gru, 3, 2, 1);
  try {
    encode(p, ActionSequence{"bad", {0, 3}});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::VocabularyMismatch);
  }
}

TEST_CASE("zero decoder side gives uniform rows") {
  auto p = random_params(CellKind::Lstm, 5, 3, 9);
  p.decoder = RnnParams<double>::zeros(CellKind::Lstm, 3);
  p.mlm_bias.setZero();
  p.mlm_weights.setZero();
  const auto probs = decode(p, encode(p, random_sequence(5, 4, 2)), 4);
  CHECK((probs.array() - 0.2).abs().maxCoeff() < 1e-15);
}

TEST_CASE("bias-only decoder evaluates the logit head") {
  auto p = AutoencoderParams<double>::zeros(CellKind::Gru, 2, 3);
  p.mlm_bias(0) = std::log(3.0);
  const auto probs = decode(p, VectorXd::Constant(3, 0.4).eval(), 3);
  for (int t = 0; t < 3; ++t) {
    CHECK(std::abs(probs(t, 0) - 0.75) < 1e-15);
    CHECK(std::abs(probs(t, 1) - 0.25) < 1e-15);
  }
}

TEST_CASE("decode matches straight-line evaluation") {
  for (auto kind : {CellKind::Gru, CellKind::Lstm}) {
    const auto p = random_params(kind, 3, 2, 10);
    const auto s = random_sequence(3, 2, 11);
    const auto expected = oracle::reconstruction(p, s);
    const auto probs = decode(p, encode(p, s), 2);
    for (int t = 0; t < 2; ++t)
      for (int j = 0; j < 3; ++j) CHECK(std::abs(probs(t, j) - expected[t][j]) < 1e-12);
  }
}

TEST_CASE("decode rejects T = 0") {
  const auto p = random_params(CellKind::Gru, 3, 2, 1);
  CHECK_THROWS_AS(decode(p, VectorXd::Zero(2).eval(), 0), Error);
}

TEST_CASE("reconstruction loss examples") {
  const ActionSequence s{"s", {0, 1}};
  MatrixXd exact = MatrixXd::Zero(2, 3);
  exact(0, 0) = exact(1, 1) = 1.0;
  CHECK(reconstruction_loss(s, exact) == 0.0);
  CHECK(std::abs(reconstruction_loss(s, MatrixXd::Constant(2, 3, 1.0 / 3.0)) - std::log(3.0)) < 1e-15);
  MatrixXd probs(2, 3);
  probs << 0.5, 0.3, 0.2, 0.1, 0.8, 0.1;
  const double expected = -(std::log(0.5) + std::log(0.8)) / 2.0;
  CHECK(std::abs(reconstruction_loss(s, probs) - expected) < 1e-15);
  CHECK(std::abs(expected - 0.458145) < 1e-6);
  MatrixXd zero = MatrixXd::Zero(2, 3);
  const double clamped = reconstruction_loss(s, zero);
  CHECK(std::isfinite(clamped));
  CHECK(std::abs(clamped + std::log(kProbabilityFloor)) < 1e-12);
}

TEST_CASE("decoded rows are probability vectors and losses are bounded") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto kind = seed % 2 ? CellKind::Gru : CellKind::Lstm;
    const auto p = random_params(kind, 6, 4, seed, 5.0);
    const auto s = random_sequence(6, 1 + static_cast<int>(seed % 7), seed + 3);
    const auto probs = decode(p, encode(p, s), s.length());
    CHECK((probs.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
    CHECK((probs.array() > 0.0).all());
    const double loss = sequence_loss(p, s);
    CHECK(loss >= 0.0);
    CHECK(loss <= -std::log(kProbabilityFloor));
  }
}

TEST_CASE("embedding rows of absent actions get no gradient") {
  const auto p = random_params(CellKind::Gru, 5, 3, 12);
  const ActionSequence s{"s", {0, 2, 2, 4}};
  const auto g = autoencoder_grad(p, s);
  CHECK(g.grads.embedding.row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.grads.embedding.row(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.grads.embedding.row(2).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("time-invariant decoder makes repeated actions cost the same") {
  auto p = random_params(CellKind::Gru, 4, 3, 13);
  p.decoder = RnnParams<double>::zeros(CellKind::Gru, 3);
  const double one = sequence_loss(p, ActionSequence{"a", {1}});
  const double two = sequence_loss(p, ActionSequence{"b", {1, 1}});
  CHECK(std::abs(one - two) < 1e-15);
}

TEST_CASE("autoencoder gradient matches central differences, K = 2, N = 4, T = 3") {
  for (auto kind : {CellKind::Gru, CellKind::Lstm}) {
    CAPTURE(to_string(kind));
    for (std::uint64_t seed = 1; seed <= 3; ++seed) CHECK(autoencoder_gradient_error(kind, 4, 2, 3, seed) < 1e-5);
  }
}

TEST_CASE("encode is order sensitive") {
  for (auto kind : {CellKind::Gru, CellKind::Lstm}) {
    const auto p = random_params(kind, 4, 3, 14);
    const auto abz = encode(p, ActionSequence{"", {0, 1, 3}});
    const auto acz = encode(p, ActionSequence{"", {0, 2, 3}});
    CHECK((abz - acz).cwiseAbs().maxCoeff() > 1e-6);
  }
}

TEST_CASE("initialization") {
  Rng rng(1);
  const auto p = make_autoencoder<double>(CellKind::Lstm, 26, 10, rng);
  CHECK(p.embedding.cwiseAbs().maxCoeff() <= 0.05);
  CHECK(p.mlm_bias.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.mlm_weights.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.parameter_count() == 26u * 10 + 2u * 4 * (10 + 200) + 25u + 25u * 10);
  const auto probs = decode(p, encode(p, ActionSequence{"", {0, 5, 25}}), 3);
  CHECK((probs.array() - 1.0 / 26.0).abs().maxCoeff() < 1e-15);
}
