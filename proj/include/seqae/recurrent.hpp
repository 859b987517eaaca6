#pragma once

// GRU and LSTM cells with forward evaluation and full backpropagation through
// time. Every cell reads its input at step t as row t of a T x K matrix and
// emits its hidden state as the output (y_t = m_t).
//
// The LSTM variant follows the gate layout
//
//   z_t = sigma(q1 + W1 x_t + U1 m_{t-1})          forget gate
//   r_t = sigma(q2 + W2 x_t + U2 m_{t-1})          input gate
//   cc_t = tanh(q3 + W3 x_t + U3 m_{t-1})          candidate cell
//   c_t = z_t * c_{t-1} + r_t * cc_t
//   v_t = sigma(q4 + W4 x_t + r_t * (U4 m_{t-1}))  output gate
//   m_t = v_t * tanh(c_t)
//
// Note that the output gate's recurrent term is scaled by the input gate r_t.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "seqae/core_math.hpp"
#include "seqae/error.hpp"
#include "seqae/random.hpp"

namespace seqae {

enum class CellKind { Gru, Lstm };

constexpr int gate_count(CellKind kind) { return kind == CellKind::Gru ? 3 : 4; }

inline std::string_view to_string(CellKind kind) {
  return kind == CellKind::Gru ? "gru" : "lstm";
}

inline CellKind parse_cell_kind(std::string_view s) {
  if (s == "gru" || s == "GRU") return CellKind::Gru;
  if (s == "lstm" || s == "LSTM") return CellKind::Lstm;
  fail(ErrorKind::InvalidInput, "unknown cell kind '" + std::string(s) + "'");
}

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct GateParams {
  Vec<Scalar> bias;               // q_i
  Mat<Scalar> input_weights;      // W_i
  Mat<Scalar> recurrent_weights;  // U_i
};

template <typename Scalar>
struct RnnParams {
  CellKind kind = CellKind::Gru;
  int hidden = 0;
  std::vector<GateParams<Scalar>> gates;

  static RnnParams zeros(CellKind kind, int hidden) {
    require(hidden >= 1, ErrorKind::InvalidInput, "hidden dimension must be >= 1");
    RnnParams p;
    p.kind = kind;
    p.hidden = hidden;
    p.gates.resize(gate_count(kind));
    for (auto& g : p.gates) {
      g.bias = Vec<Scalar>::Zero(hidden);
      g.input_weights = Mat<Scalar>::Zero(hidden, hidden);
      g.recurrent_weights = Mat<Scalar>::Zero(hidden, hidden);
    }
    return p;
  }

  std::size_t parameter_count() const {
    const auto k = static_cast<std::size_t>(hidden);
    return gates.size() * (k + 2 * k * k);
  }

  template <typename Other>
  RnnParams<Other> cast() const {
    RnnParams<Other> out;
    out.kind = kind;
    out.hidden = hidden;
    for (const auto& g : gates)
      out.gates.push_back({g.bias.template cast<Other>(), g.input_weights.template cast<Other>(),
                           g.recurrent_weights.template cast<Other>()});
    return out;
  }
};

/// Applies f to corresponding parameter blocks of each argument, in a fixed order.
template <typename F, typename First, typename... Rest>
  requires requires(First& p) { p.gates; p.hidden; }
void for_each_block(F&& f, First& first, Rest&... rest) {
  for (std::size_t i = 0; i < first.gates.size(); ++i) {
    f(first.gates[i].bias, rest.gates[i].bias...);
    f(first.gates[i].input_weights, rest.gates[i].input_weights...);
    f(first.gates[i].recurrent_weights, rest.gates[i].recurrent_weights...);
  }
}

/// Weights uniform on [-1/sqrt(K), 1/sqrt(K)], biases zero.
template <typename Scalar>
void initialize(RnnParams<Scalar>& p, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(p.hidden));
  auto fill = [&](Mat<Scalar>& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = Scalar(rng.uniform(-a, a));
  };
  for (auto& g : p.gates) {
    g.bias.setZero();
    fill(g.input_weights);
    fill(g.recurrent_weights);
  }
}

template <typename Scalar>
struct RnnTrace {
  CellKind kind = CellKind::Gru;
  RowMat<Scalar> inputs;     // x_t
  Vec<Scalar> initial;       // m_0
  RowMat<Scalar> hidden;     // m_t; also the outputs y_t
  RowMat<Scalar> update;     // z_t
  RowMat<Scalar> reset;      // r_t
  RowMat<Scalar> candidate;  // GRU: m~_t, LSTM: c~_t
  RowMat<Scalar> cell;       // LSTM only: c_t
  RowMat<Scalar> output;     // LSTM only: v_t

  Eigen::Index steps() const { return inputs.rows(); }
  const RowMat<Scalar>& outputs() const { return hidden; }
  Vec<Scalar> last_output() const { return hidden.row(hidden.rows() - 1).transpose(); }
};

template <typename Scalar>
struct RnnGradients {
  RnnParams<Scalar> params;
  RowMat<Scalar> inputs;
};

namespace detail {

template <typename Derived>
auto sigmoid_array(const Eigen::ArrayBase<Derived>& a) {
  return a.unaryExpr([](auto v) { return sigmoid(v); });
}

template <typename Scalar>
void check_shapes(const RnnParams<Scalar>& p, Eigen::Index input_cols) {
  require(static_cast<int>(p.gates.size()) == gate_count(p.kind), ErrorKind::InvalidInput,
          "rnn: gate count does not match cell kind");
  require(input_cols == p.hidden, ErrorKind::InvalidInput,
          "rnn: input width " + std::to_string(input_cols) + " != hidden dimension " +
              std::to_string(p.hidden));
}

/// Rows of m_{t-1}: m_0 followed by hidden rows 0..T-2.
template <typename Scalar>
RowMat<Scalar> previous_hidden(const RnnTrace<Scalar>& tr) {
  const auto T = tr.steps();
  RowMat<Scalar> prev(T, tr.hidden.cols());
  prev.row(0) = tr.initial.transpose();
  if (T > 1) prev.bottomRows(T - 1) = tr.hidden.topRows(T - 1);
  return prev;
}

}  // namespace detail

template <typename Scalar>
RnnTrace<Scalar> rnn_forward(const RnnParams<Scalar>& p, const RowMat<Scalar>& inputs,
                             const Vec<Scalar>& initial) {
  using V = Vec<Scalar>;
  const Eigen::Index T = inputs.rows();
  require(T >= 1, ErrorKind::EmptySequence, "rnn_forward: empty input sequence");
  detail::check_shapes(p, inputs.cols());
  require(initial.size() == p.hidden, ErrorKind::InvalidInput, "rnn_forward: bad initial state");
  require(all_finite(inputs) && all_finite(initial), ErrorKind::InvalidInput,
          "rnn_forward: non-finite input");

  const Eigen::Index K = p.hidden;
  RnnTrace<Scalar> tr;
  tr.kind = p.kind;
  tr.inputs = inputs;
  tr.initial = initial;
  tr.hidden.resize(T, K);
  tr.update.resize(T, K);
  tr.reset.resize(T, K);
  tr.candidate.resize(T, K);

  // Input projections for every step at once: row t = (q_i + W_i x_t)^T.
  std::vector<RowMat<Scalar>> proj(p.gates.size());
  for (std::size_t i = 0; i < p.gates.size(); ++i) {
    proj[i] = inputs * p.gates[i].input_weights.transpose();
    proj[i].rowwise() += p.gates[i].bias.transpose();
  }
  const auto& U1 = p.gates[0].recurrent_weights;
  const auto& U2 = p.gates[1].recurrent_weights;
  const auto& U3 = p.gates[2].recurrent_weights;

  V prev = initial;
  if (p.kind == CellKind::Gru) {
    for (Eigen::Index t = 0; t < T; ++t) {
      const V z = detail::sigmoid_array((proj[0].row(t).transpose() + U1 * prev).array()).matrix();
      const V r = detail::sigmoid_array((proj[1].row(t).transpose() + U2 * prev).array()).matrix();
      const V h = (proj[2].row(t).transpose() + U3 * r.cwiseProduct(prev)).array().tanh().matrix();
      V m = (V::Ones(K) - z).cwiseProduct(prev) + z.cwiseProduct(h);
      tr.update.row(t) = z.transpose();
      tr.reset.row(t) = r.transpose();
      tr.candidate.row(t) = h.transpose();
      tr.hidden.row(t) = m.transpose();
      prev = std::move(m);
    }
  } else {
    const auto& U4 = p.gates[3].recurrent_weights;
    tr.cell.resize(T, K);
    tr.output.resize(T, K);
    V prev_cell = V::Zero(K);
    for (Eigen::Index t = 0; t < T; ++t) {
      const V z = detail::sigmoid_array((proj[0].row(t).transpose() + U1 * prev).array()).matrix();
      const V r = detail::sigmoid_array((proj[1].row(t).transpose() + U2 * prev).array()).matrix();
      const V cc = (proj[2].row(t).transpose() + U3 * prev).array().tanh().matrix();
      V c = z.cwiseProduct(prev_cell) + r.cwiseProduct(cc);
      const V v = detail::sigmoid_array(
                      (proj[3].row(t).transpose() + r.cwiseProduct(U4 * prev)).array())
                      .matrix();
      V m = v.cwiseProduct(c.array().tanh().matrix());
      tr.update.row(t) = z.transpose();
      tr.reset.row(t) = r.transpose();
      tr.candidate.row(t) = cc.transpose();
      tr.cell.row(t) = c.transpose();
      tr.output.row(t) = v.transpose();
      tr.hidden.row(t) = m.transpose();
      prev = std::move(m);
      prev_cell = std::move(c);
    }
  }
  return tr;
}

template <typename Scalar>
RnnTrace<Scalar> rnn_forward(const RnnParams<Scalar>& p, const RowMat<Scalar>& inputs) {
  return rnn_forward(p, inputs, Vec<Scalar>(Vec<Scalar>::Zero(p.hidden)));
}

/// Exact gradients of a scalar loss whose gradient w.r.t. output y_t is row t
/// of `output_grads`.
template <typename Scalar>
RnnGradients<Scalar> rnn_backward(const RnnParams<Scalar>& p, const RnnTrace<Scalar>& tr,
                                  const RowMat<Scalar>& output_grads) {
  using V = Vec<Scalar>;
  const Eigen::Index T = tr.steps();
  const Eigen::Index K = p.hidden;
  detail::check_shapes(p, tr.inputs.cols());
  require(tr.kind == p.kind, ErrorKind::InvalidInput, "rnn_backward: trace from another cell kind");
  require(output_grads.rows() == T && output_grads.cols() == K, ErrorKind::InvalidInput,
          "rnn_backward: output gradient shape does not match trace");

  const RowMat<Scalar> prev_hidden = detail::previous_hidden(tr);
  const std::size_t G = p.gates.size();
  std::vector<RowMat<Scalar>> dpre(G, RowMat<Scalar>::Zero(T, K));  // dL/d(pre-activation)

  const auto& U1 = p.gates[0].recurrent_weights;
  const auto& U2 = p.gates[1].recurrent_weights;
  const auto& U3 = p.gates[2].recurrent_weights;

  RnnGradients<Scalar> out;
  out.params = RnnParams<Scalar>::zeros(p.kind, p.hidden);

  const Scalar one(1);
  V carry = V::Zero(K);
  if (p.kind == CellKind::Gru) {
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const V dm = output_grads.row(t).transpose() + carry;
      const auto z = tr.update.row(t).transpose().array();
      const auto r = tr.reset.row(t).transpose().array();
      const auto h = tr.candidate.row(t).transpose().array();
      const auto mp = prev_hidden.row(t).transpose().array();

      const V dz = (dm.array() * (h - mp)).matrix();
      const V da3 = (dm.array() * z * (one - h * h)).matrix();
      const V drm = U3.transpose() * da3;
      const V da1 = (dz.array() * z * (one - z)).matrix();
      const V da2 = (drm.array() * mp * r * (one - r)).matrix();
      carry = (dm.array() * (one - z) + drm.array() * r).matrix() + U1.transpose() * da1 +
              U2.transpose() * da2;
      dpre[0].row(t) = da1.transpose();
      dpre[1].row(t) = da2.transpose();
      dpre[2].row(t) = da3.transpose();
    }
    const RowMat<Scalar> reset_prev = tr.reset.cwiseProduct(prev_hidden);
    out.params.gates[0].recurrent_weights = dpre[0].transpose() * prev_hidden;
    out.params.gates[1].recurrent_weights = dpre[1].transpose() * prev_hidden;
    out.params.gates[2].recurrent_weights = dpre[2].transpose() * reset_prev;
  } else {
    const auto& U4 = p.gates[3].recurrent_weights;
    RowMat<Scalar> scaled_out(T, K);  // dL/d(U4 m_{t-1}) = da4 * r
    V carry_cell = V::Zero(K);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const V dm = output_grads.row(t).transpose() + carry;
      const auto z = tr.update.row(t).transpose().array();
      const auto r = tr.reset.row(t).transpose().array();
      const auto cc = tr.candidate.row(t).transpose().array();
      const auto v = tr.output.row(t).transpose().array();
      const V c = tr.cell.row(t).transpose();
      const V cp = t > 0 ? V(tr.cell.row(t - 1).transpose()) : V(V::Zero(K));
      const V mp = prev_hidden.row(t).transpose();

      const auto tc = c.array().tanh();
      const V dc = (carry_cell.array() + dm.array() * v * (one - tc * tc)).matrix();
      const V da4 = (dm.array() * tc * v * (one - v)).matrix();
      const V u4m = U4 * mp;
      const V s4 = (da4.array() * r).matrix();
      const V dr = (da4.array() * u4m.array() + dc.array() * cc).matrix();
      const V da1 = (dc.array() * cp.array() * z * (one - z)).matrix();
      const V da2 = (dr.array() * r * (one - r)).matrix();
      const V da3 = (dc.array() * r * (one - cc * cc)).matrix();
      carry_cell = (dc.array() * z).matrix();
      carry = U1.transpose() * da1 + U2.transpose() * da2 + U3.transpose() * da3 +
              U4.transpose() * s4;
      dpre[0].row(t) = da1.transpose();
      dpre[1].row(t) = da2.transpose();
      dpre[2].row(t) = da3.transpose();
      dpre[3].row(t) = da4.transpose();
      scaled_out.row(t) = s4.transpose();
    }
    for (std::size_t i = 0; i < 3; ++i)
      out.params.gates[i].recurrent_weights = dpre[i].transpose() * prev_hidden;
    out.params.gates[3].recurrent_weights = scaled_out.transpose() * prev_hidden;
  }

  out.inputs = RowMat<Scalar>::Zero(T, K);
  for (std::size_t i = 0; i < G; ++i) {
    out.params.gates[i].bias = dpre[i].colwise().sum().transpose();
    out.params.gates[i].input_weights = dpre[i].transpose() * tr.inputs;
    out.inputs.noalias() += dpre[i] * p.gates[i].input_weights;
  }
  return out;
}

}  // namespace seqae
