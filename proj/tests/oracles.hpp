// Independent reference implementations used only by the tests. Loops over
// plain std::vector where practical so they share no code path with the
// vectorized library.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "seqae/autoencoder.hpp"
#include "seqae/training.hpp"

namespace oracle {

using Vector = std::vector<double>;
using Matrix = std::vector<Vector>;  // row-major

inline Matrix to_rows(const seqae::MatrixXd& m) {
  Matrix out(static_cast<std::size_t>(m.rows()), Vector(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues in
/// descending order; eigenvectors are the columns of the returned matrix.
inline std::pair<Vector, Matrix> jacobi_eigen(Matrix a) {
  const std::size_t n = a.size();
  Matrix v(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a[x][x] > a[y][y]; });
  Vector values(n);
  Matrix vectors(n, Vector(n));
  for (std::size_t j = 0; j < n; ++j) {
    values[j] = a[order[j]][order[j]];
    for (std::size_t i = 0; i < n; ++i) vectors[i][j] = v[i][order[j]];
  }
  return {values, vectors};
}

/// Sample covariance with divisor n - 1, by explicit sums.
inline Matrix covariance(const Matrix& x) {
  const std::size_t n = x.size(), k = x[0].size();
  Vector mean(k, 0.0);
  for (const auto& row : x)
    for (std::size_t j = 0; j < k; ++j) mean[j] += row[j] / static_cast<double>(n);
  Matrix c(k, Vector(k, 0.0));
  for (const auto& row : x)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) c[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
  for (auto& r : c)
    for (auto& e : r) e /= static_cast<double>(n - 1);
  return c;
}

inline double pearson(const Vector& a, const Vector& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// Gauss-Jordan elimination with partial pivoting.
inline Vector solve(Matrix a, Vector b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

/// Ridge with unpenalized intercept: (D'D + lambda*I_slopes) beta = D'y, D = [1 X].
inline Vector ridge_closed_form(const Matrix& x, const Vector& y, double lambda) {
  const std::size_t n = x.size(), p = x[0].size() + 1;
  Matrix a(p, Vector(p, 0.0));
  Vector b(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Vector d(p);
    d[0] = 1.0;
    for (std::size_t j = 1; j < p; ++j) d[j] = x[i][j - 1];
    for (std::size_t r = 0; r < p; ++r) {
      b[r] += d[r] * y[i];
      for (std::size_t c = 0; c < p; ++c) a[r][c] += d[r] * d[c];
    }
  }
  for (std::size_t j = 1; j < p; ++j) a[j][j] += lambda;
  return solve(a, b);
}

/// Penalized logistic negative log-likelihood and its gradient.
inline double logistic_objective(const Matrix& x, const Vector& y, double lambda, const Vector& beta,
                                 Vector* grad) {
  const std::size_t p = beta.size();
  double f = 0.0;
  if (grad) grad->assign(p, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double eta = beta[0];
    for (std::size_t j = 1; j < p; ++j) eta += beta[j] * x[i][j - 1];
    // log(1 + e^eta) - y*eta, evaluated stably
    const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    f += softplus - y[i] * eta;
    if (grad) {
      const double mu = 1.0 / (1.0 + std::exp(-eta));
      (*grad)[0] += mu - y[i];
      for (std::size_t j = 1; j < p; ++j) (*grad)[j] += (mu - y[i]) * x[i][j - 1];
    }
  }
  for (std::size_t j = 1; j < p; ++j) {
    f += 0.5 * lambda * beta[j] * beta[j];
    if (grad) (*grad)[j] += lambda * beta[j];
  }
  return f;
}

/// BFGS with Armijo backtracking on a smooth convex function.
inline Vector bfgs(const std::function<double(const Vector&, Vector*)>& f, Vector x, double tol = 1e-12,
                   int max_iter = 2000) {
  const std::size_t n = x.size();
  Matrix h(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) h[i][i] = 1.0;
  Vector g;
  double fx = f(x, &g);
  for (int it = 0; it < max_iter; ++it) {
    double gn = 0;
    for (double v : g) gn += v * v;
    if (std::sqrt(gn) < tol) break;
    Vector d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i] -= h[i][j] * g[j];
    double slope = 0;
    for (std::size_t i = 0; i < n; ++i) slope += d[i] * g[i];
    if (slope >= 0) {  // reset to steepest descent
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) h[i][j] = i == j ? 1.0 : 0.0;
        d[i] = -g[i];
      }
      slope = -gn;
    }
    double t = 1.0;
    Vector xn(n), gnew;
    double fn = 0;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + t * d[i];
      fn = f(xn, &gnew);
      if (fn <= fx + 1e-4 * t * slope) break;
      t *= 0.5;
    }
    Vector s(n), yv(n);
    double sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xn[i] - x[i];
      yv[i] = gnew[i] - g[i];
      sy += s[i] * yv[i];
    }
    x = xn;
    g = gnew;
    fx = fn;
    if (sy <= 1e-300) continue;
    Vector hy(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) hy[i] += h[i][j] * yv[j];
    double yhy = 0;
    for (std::size_t i = 0; i < n; ++i) yhy += yv[i] * hy[i];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
  }
  return x;
}

inline double chi_square(const std::array<std::array<double, 2>, 2>& t) {
  double total = 0;
  std::array<double, 2> row{0, 0}, col{0, 0};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      row[i] += t[i][j];
      col[j] += t[i][j];
      total += t[i][j];
    }
  double stat = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double e = row[i] * col[j] / total;
      stat += (t[i][j] - e) * (t[i][j] - e) / e;
    }
  return stat;
}

// ---------------------------------------------------------------------------
// Recurrent cells, one scalar at a time.

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Gate i pre-activation: q_i + W_i x + U_i m (all scalar loops).
inline Vector affine(const seqae::GateParams<double>& g, const Vector& x, const Vector& m) {
  const std::size_t k = m.size();
  Vector out(k);
  for (std::size_t a = 0; a < k; ++a) {
    double s = g.bias(static_cast<Eigen::Index>(a));
    for (std::size_t b = 0; b < k; ++b) {
      s += g.input_weights(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * x[b];
      s += g.recurrent_weights(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * m[b];
    }
    out[a] = s;
  }
  return out;
}

inline Vector matvec(const seqae::Mat<double>& w, const Vector& v) {
  Vector out(v.size(), 0.0);
  for (std::size_t a = 0; a < v.size(); ++a)
    for (std::size_t b = 0; b < v.size(); ++b)
      out[a] += w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * v[b];
  return out;
}

/// Hidden states m_1..m_T for the given inputs, starting from m0 = c0 = 0.
inline Matrix recurrence(const seqae::RnnParams<double>& p, const Matrix& inputs) {
  const std::size_t k = static_cast<std::size_t>(p.hidden);
  Vector m(k, 0.0), c(k, 0.0);
  Matrix out;
  for (const auto& x : inputs) {
    const auto& G = p.gates;
    if (p.kind == seqae::CellKind::Gru) {
      const Vector az = affine(G[0], x, m), ar = affine(G[1], x, m);
      Vector z(k), r(k), rm(k);
      for (std::size_t a = 0; a < k; ++a) {
        z[a] = sig(az[a]);
        r[a] = sig(ar[a]);
        rm[a] = r[a] * m[a];
      }
      const Vector zero(k, 0.0);
      Vector cand = affine(G[2], x, zero);
      const Vector urm = matvec(G[2].recurrent_weights, rm);
      for (std::size_t a = 0; a < k; ++a) m[a] = (1 - z[a]) * m[a] + z[a] * std::tanh(cand[a] + urm[a]);
    } else {
      const Vector az = affine(G[0], x, m), ar = affine(G[1], x, m), ac = affine(G[2], x, m);
      const Vector zero(k, 0.0);
      const Vector av = affine(G[3], x, zero);
      const Vector u4m = matvec(G[3].recurrent_weights, m);
      for (std::size_t a = 0; a < k; ++a) {
        const double z = sig(az[a]), r = sig(ar[a]);
        c[a] = z * c[a] + r * std::tanh(ac[a]);
        const double v = sig(av[a] + r * u4m[a]);
        m[a] = v * std::tanh(c[a]);
      }
    }
    out.push_back(m);
  }
  return out;
}

/// Straight-line autoencoder: reconstruction probabilities T x N.
inline Matrix reconstruction(const seqae::AutoencoderParams<double>& p, const seqae::ActionSequence& s) {
  Matrix embedded;
  for (int idx : s.steps) {
    Vector row(static_cast<std::size_t>(p.latent));
    for (int k = 0; k < p.latent; ++k) row[static_cast<std::size_t>(k)] = p.embedding(idx, k);
    embedded.push_back(row);
  }
  const Vector theta = recurrence(p.encoder, embedded).back();
  const Matrix dec = recurrence(p.decoder, Matrix(s.steps.size(), theta));
  Matrix probs;
  for (const auto& y : dec) {
    Vector logits(static_cast<std::size_t>(p.actions), 0.0);
    double mx = 0.0;
    for (int j = 0; j + 1 < p.actions; ++j) {
      double v = p.mlm_bias(j);
      for (int k = 0; k < p.latent; ++k) v += p.mlm_weights(j, k) * y[static_cast<std::size_t>(k)];
      logits[static_cast<std::size_t>(j)] = v;
      mx = std::max(mx, v);
    }
    double z = 0;
    for (auto& v : logits) z += std::exp(v - mx);
    for (auto& v : logits) v = std::exp(v - mx) / z;
    probs.push_back(logits);
  }
  return probs;
}

// ---------------------------------------------------------------------------
// Finite differences over every scalar parameter of a parameter set.

/// Max over parameters of |analytic - numeric| / max(floor, |analytic|, |numeric|)
/// with central differences of step h.
template <typename Params, typename Loss>
double max_gradient_error(Params params, const Params& analytic, Loss loss, double h = 1e-5,
                          double floor = 1e-4) {
  std::vector<double*> slots;
  std::vector<double> grads;
  seqae::for_each_block(
      [&](auto& block, const auto& g) {
        for (Eigen::Index i = 0; i < block.size(); ++i) {
          slots.push_back(block.data() + i);
          grads.push_back(g.data()[i]);
        }
      },
      params, analytic);
  double worst = 0.0;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const double saved = *slots[s];
    *slots[s] = saved + h;
    const double up = loss(params);
    *slots[s] = saved - h;
    const double down = loss(params);
    *slots[s] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({floor, std::abs(numeric), std::abs(grads[s])});
    worst = std::max(worst, std::abs(numeric - grads[s]) / scale);
  }
  return worst;
}

}  // namespace oracle
