#pragma once

// Test-only reference implementations. Nothing here calls into the autodiff
// engine's op kernels; they are straight loops over the definitions.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dnagen/gradcore/graph.hpp"

namespace oracle {

using dnagen::ad::Graph;
using dnagen::ad::Shape;
using dnagen::ad::Tensor;
using dnagen::ad::Var;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// out[o] = sum_i x[i] w[i,o] + b[o]
inline std::vector<double> linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t din = w.dim(0), dout = w.dim(1);
  std::vector<double> out(dout);
  for (std::size_t o = 0; o < dout; ++o) {
    double s = b[o];
    for (std::size_t i = 0; i < din; ++i) s += x[i] * w[i * dout + o];
    out[o] = s;
  }
  return out;
}

// Direct cross-correlation with constant padding, single sequence [L, C].
inline Tensor conv1d(const Tensor& x, const Tensor& f, const Tensor* bias, std::size_t left,
                     std::size_t right, double pad_value) {
  const std::size_t l = x.dim(0), c = x.dim(1);
  const std::size_t k = f.dim(0), co = f.dim(2);
  const std::size_t lp = l + left + right;
  const std::size_t lo = lp - k + 1;
  auto at = [&](std::size_t q, std::size_t ch) {
    if (q < left || q >= left + l) return pad_value;
    return x.at(q - left, ch);
  };
  Tensor out({lo, co});
  for (std::size_t p = 0; p < lo; ++p)
    for (std::size_t o = 0; o < co; ++o) {
      double s = bias ? (*bias)[o] : 0.0;
      for (std::size_t kk = 0; kk < k; ++kk)
        for (std::size_t ch = 0; ch < c; ++ch) s += at(p + kk, ch) * f.at(kk, ch, o);
      out.at(p, o) = s;
    }
  return out;
}

inline double pwm_score(const std::vector<std::array<double, 4>>& x,
                        const std::vector<std::array<double, 4>>& pwm) {
  double best = -1e300;
  for (std::size_t p = 0; p + pwm.size() <= x.size(); ++p) {
    double s = 0.0;
    for (std::size_t k = 0; k < pwm.size(); ++k)
      for (int c = 0; c < 4; ++c) s += x[p + k][c] * pwm[k][c];
    best = std::max(best, s);
  }
  return best;
}

// Full-matrix Levenshtein recurrence.
inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

// Fractional ranks by sorting; ties get the average of their positions.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// A scalar function of several tensors, evaluated by building a fresh graph.
using GraphFn = std::function<Var(Graph&, const std::vector<Var>&)>;

inline double evaluate(const GraphFn& f, const std::vector<Tensor>& inputs) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.input(t));
  return f(g, vars).item();
}

// Central finite differences of f with respect to inputs[which].
inline Tensor numeric_grad(const GraphFn& f, std::vector<Tensor> inputs, std::size_t which,
                           double h = 1e-4) {
  Tensor out(inputs[which].shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x0 = inputs[which][i];
    inputs[which][i] = x0 + h;
    const double fp = evaluate(f, inputs);
    inputs[which][i] = x0 - h;
    const double fm = evaluate(f, inputs);
    inputs[which][i] = x0;
    out[i] = (fp - fm) / (2.0 * h);
  }
  return out;
}

// ||a - b|| / max(||a||, ||b||), with a floor so all-zero gradients compare equal.
inline double relative_error(const Tensor& a, const Tensor& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

// Worst relative error over all inputs between engine and finite-difference gradients.
inline double gradient_check(const GraphFn& f, const std::vector<Tensor>& inputs,
                             double h = 1e-4, bool allow_unused = false) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.input(t));
  Var y = f(g, vars);
  const auto grads = g.grad(y, vars, allow_unused);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    worst = std::max(worst, relative_error(grads[i].value(), numeric_grad(f, inputs, i, h)));
  }
  return worst;
}

}  // namespace oracle
