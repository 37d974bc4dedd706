#include "dnagen/gradcore/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "dnagen/error.hpp"

namespace dnagen::ad {

namespace {

void require_same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw GraphError("operands belong to different graphs");
}

void require_same_shape(Var a, Var b, const char* op) {
  require_same_graph(a, b);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
  }
}

Node unary(Op op, Var x, Tensor value) {
  Node n;
  n.op = op;
  n.arity = 1;
  n.inputs[0] = x.id();
  n.value = std::move(value);
  return n;
}

Node binary(Op op, Var a, Var b, Tensor value) {
  Node n;
  n.op = op;
  n.arity = 2;
  n.inputs = {a.id(), b.id()};
  n.value = std::move(value);
  return n;
}

IndexMap make_index(std::vector<std::int32_t> idx) {
  return std::make_shared<const std::vector<std::int32_t>>(std::move(idx));
}

Tensor transposed(const Tensor& t) {
  const std::size_t r = t.dim(0), c = t.dim(1);
  constexpr std::size_t kBlock = 16;
  Tensor out({c, r});
  const double* src = t.data().data();
  double* dst = out.data().data();
  for (std::size_t i0 = 0; i0 < r; i0 += kBlock)
    for (std::size_t j0 = 0; j0 < c; j0 += kBlock)
      for (std::size_t i = i0; i < std::min(r, i0 + kBlock); ++i)
        for (std::size_t j = j0; j < std::min(c, j0 + kBlock); ++j) dst[j * r + i] = src[i * c + j];
  return out;
}

}  // namespace

const Tensor& Var::value() const { return graph_->value(*this); }

namespace {

// A is read as a(r, kk) = TA ? a[kk * lda + r] : a[r * lda + kk].
template <bool TA>
inline double a_at(const double* a, std::size_t r, std::size_t kk, std::size_t lda) {
  return TA ? a[kk * lda + r] : a[r * lda + kk];
}

// Accumulates a 4 x NB tile of C in registers; every element still sums over
// k in ascending order.
template <bool TA, std::size_t NB>
void gemm_tile4(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
                std::size_t lda) {
  double acc[4][NB] = {};
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* br = b + kk * n;
    const double x0 = a_at<TA>(a, 0, kk, lda), x1 = a_at<TA>(a, 1, kk, lda),
                 x2 = a_at<TA>(a, 2, kk, lda), x3 = a_at<TA>(a, 3, kk, lda);
    for (std::size_t j = 0; j < NB; ++j) {
      acc[0][j] = std::fma(x0, br[j], acc[0][j]);
      acc[1][j] = std::fma(x1, br[j], acc[1][j]);
      acc[2][j] = std::fma(x2, br[j], acc[2][j]);
      acc[3][j] = std::fma(x3, br[j], acc[3][j]);
    }
  }
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < NB; ++j) c[r * n + j] = acc[r][j];
}

template <bool TA, std::size_t NB>
void gemm_tile1(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
                std::size_t lda) {
  double acc[NB] = {};
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* br = b + kk * n;
    const double x0 = a_at<TA>(a, 0, kk, lda);
    for (std::size_t j = 0; j < NB; ++j) acc[j] = std::fma(x0, br[j], acc[j]);
  }
  for (std::size_t j = 0; j < NB; ++j) c[j] = acc[j];
}

template <bool TA>
void gemm_tail(const double* a, const double* b, double* c, std::size_t rows, std::size_t k,
               std::size_t n, std::size_t lda, std::size_t j0) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = j0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc = std::fma(a_at<TA>(a, r, kk, lda), b[kk * n + j], acc);
      c[r * n + j] = acc;
    }
}

template <bool TA>
void gemm_impl(const double* ap, const double* bp, double* cp, std::size_t m, std::size_t k,
               std::size_t n) {
  const std::size_t lda = TA ? m : k;
  auto row_ptr = [&](std::size_t i) { return TA ? ap + i : ap + i * k; };
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* ai = row_ptr(i);
    double* ci = cp + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) gemm_tile4<TA, 16>(ai, bp + j, ci + j, k, n, lda);
    for (; j + 8 <= n; j += 8) gemm_tile4<TA, 8>(ai, bp + j, ci + j, k, n, lda);
    gemm_tail<TA>(ai, bp, ci, 4, k, n, lda, j);
  }
  for (; i < m; ++i) {
    const double* ai = row_ptr(i);
    double* ci = cp + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) gemm_tile1<TA, 16>(ai, bp + j, ci + j, k, n, lda);
    for (; j + 8 <= n; j += 8) gemm_tile1<TA, 8>(ai, bp + j, ci + j, k, n, lda);
    gemm_tail<TA>(ai, bp, ci, 1, k, n, lda, j);
  }
}

}  // namespace

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n) {
  gemm_impl<false>(a.data(), b.data(), c.data(), m, k, n);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  gemm_impl<true>(a.data(), b.data(), c.data(), m, k, n);
}

Var Graph::input(Tensor value) {
  if (!value.all_finite()) throw NumericError("non-finite value entering graph");
  Node n;
  n.value = std::move(value);
  return emit(std::move(n));
}

Var Graph::emit(Node node) {
  if (nodes_.size() >= std::numeric_limits<NodeId>::max()) throw GraphError("graph too large");
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Var Graph::grad(Var objective, Var wrt, bool allow_unused) {
  const Var w[] = {wrt};
  return grad(objective, w, allow_unused).front();
}

std::vector<Var> Graph::grad(Var objective, std::span<const Var> wrt, bool allow_unused) {
  if (&objective.graph() != this) throw GraphError("objective belongs to another graph");
  if (objective.size() != 1) {
    throw DimensionError("grad needs a scalar objective, got shape " +
                         to_string(objective.shape()));
  }
  if (!objective.value().all_finite()) throw NumericError("non-finite objective");

  const NodeId top = objective.id();
  const std::size_t n = static_cast<std::size_t>(top) + 1;
  std::vector<char> live(n, 0);
  NodeId lowest = top;
  for (const Var& w : wrt) {
    if (&w.graph() != this) throw GraphError("wrt tensor belongs to another graph");
    if (w.id() > top) {
      if (allow_unused) continue;
      throw GraphError("wrt tensor is not reachable from the objective");
    }
    live[w.id()] = 1;
    lowest = std::min(lowest, w.id());
  }
  // Forward: nodes depending on some wrt tensor.
  for (std::size_t i = lowest; i < n; ++i) {
    const Node& nd = nodes_[i];
    for (std::uint8_t k = 0; k < nd.arity; ++k)
      if (live[nd.inputs[k]]) live[i] = 1;
  }
  // Backward: keep only those that also feed the objective.
  std::vector<char> needed(n, 0);
  if (live[top]) needed[top] = 1;
  for (std::size_t i = n; i-- > lowest;) {
    if (!needed[i]) continue;
    const Node& nd = nodes_[i];
    for (std::uint8_t k = 0; k < nd.arity; ++k)
      if (live[nd.inputs[k]]) needed[nd.inputs[k]] = 1;
  }
  if (!allow_unused) {
    for (const Var& w : wrt) {
      if (!needed[w.id()]) throw GraphError("wrt tensor is not reachable from the objective");
    }
  }

  std::vector<Var> grads(n);
  grads[top] = input(Tensor::filled(objective.shape(), 1.0));
  for (std::size_t i = n; i-- > lowest;) {
    if (!needed[i] || !grads[i].valid()) continue;
    if (nodes_[i].op == Op::Leaf) continue;
    backward_node(static_cast<NodeId>(i), grads[i], grads, needed);
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() <= top && grads[w.id()].valid()) {
      out.push_back(grads[w.id()]);
    } else {
      out.push_back(input(Tensor(w.shape())));
    }
  }
  return out;
}

void Graph::backward_node(NodeId id, Var g, std::vector<Var>& grads,
                          const std::vector<char>& live) {
  // Fields are copied out because backward rules emit new nodes.
  const Op op = nodes_[id].op;
  const auto inputs = nodes_[id].inputs;
  const std::uint8_t arity = nodes_[id].arity;
  const double pa = nodes_[id].a;
  const bool ta = nodes_[id].trans_a, tb = nodes_[id].trans_b;
  const IndexMap index = nodes_[id].index;
  const Var y(this, id);
  const Var x(this, inputs[0]);
  const Var x2 = arity > 1 ? Var(this, inputs[1]) : Var();

  auto accumulate = [&](int slot, Var contribution) {
    const NodeId target = inputs[slot];
    if (!grads[target].valid()) {
      grads[target] = contribution;
    } else {
      grads[target] = add(grads[target], contribution);
    }
  };
  auto wants = [&](int slot) { return slot < arity && live[inputs[slot]] != 0; };

  switch (op) {
    case Op::Leaf:
      break;
    case Op::Gather:
      if (wants(0)) accumulate(0, scatter_add(g, index, x.shape()));
      break;
    case Op::ScatterAdd:
      if (wants(0)) accumulate(0, gather(g, index, x.shape(), 0.0));
      break;
    case Op::Reshape:
      if (wants(0)) accumulate(0, reshape(g, x.shape()));
      break;
    case Op::MatMul:
      // C = op(A) op(B): dop(A) = dC op(B)^T, dop(B) = op(A)^T dC.
      if (wants(0)) accumulate(0, ta ? matmul(x2, g, tb, true) : matmul(g, x2, false, !tb));
      if (wants(1)) accumulate(1, tb ? matmul(g, x, true, ta) : matmul(x, g, !ta, false));
      break;
    case Op::Add:
      if (wants(0)) accumulate(0, g);
      if (wants(1)) accumulate(1, g);
      break;
    case Op::Sub:
      if (wants(0)) accumulate(0, g);
      if (wants(1)) accumulate(1, neg(g));
      break;
    case Op::Mul:
      if (wants(0)) accumulate(0, mul(g, x2));
      if (wants(1)) accumulate(1, mul(g, x));
      break;
    case Op::Affine:
      if (wants(0)) accumulate(0, scale(g, pa));
      break;
    case Op::LeakyRelu: {
      if (!wants(0)) break;
      Tensor mask(x.shape());
      const auto xv = x.value().data();
      for (std::size_t i = 0; i < xv.size(); ++i) mask[i] = xv[i] > 0.0 ? 1.0 : pa;
      accumulate(0, mul(g, input(std::move(mask))));
      break;
    }
    case Op::Sigmoid:
      if (wants(0)) accumulate(0, mul(g, mul(y, affine(y, -1.0, 1.0))));
      break;
    case Op::Softmax: {
      if (!wants(0)) break;
      const std::size_t c = y.shape().back();
      accumulate(0, mul(y, sub(g, expand_last(sum_last(mul(g, y)), c))));
      break;
    }
    case Op::LogSumExp: {
      if (!wants(0)) break;
      const Shape& xs = x.shape();
      Shape lead(xs.begin(), xs.end() - 1);
      accumulate(0, mul(expand_last(reshape(g, lead), xs.back()), softmax_last(x)));
      break;
    }
    case Op::Sqrt:
      if (wants(0)) accumulate(0, mul(g, scale(safe_recip(y), 0.5)));
      break;
    case Op::SafeRecip:
      if (wants(0)) accumulate(0, mul(g, neg(square(y))));
      break;
    case Op::Log:
      if (wants(0)) accumulate(0, mul(g, safe_recip(x)));
      break;
  }
}

Var gather(Var x, IndexMap index, Shape out_shape, double fill) {
  const auto& idx = *index;
  if (idx.size() != numel(out_shape)) throw DimensionError("gather: index/shape mismatch");
  const auto xv = x.value().data();
  Tensor out(std::move(out_shape));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto j = idx[i];
    if (j >= 0 && static_cast<std::size_t>(j) >= xv.size())
      throw DimensionError("gather: index out of range");
    out[i] = j < 0 ? fill : xv[static_cast<std::size_t>(j)];
  }
  Node n = unary(Op::Gather, x, std::move(out));
  n.index = std::move(index);
  n.a = fill;
  return x.graph().emit(std::move(n));
}

Var scatter_add(Var x, IndexMap index, Shape out_shape) {
  const auto& idx = *index;
  if (idx.size() != x.size()) throw DimensionError("scatter_add: index/input mismatch");
  const auto xv = x.value().data();
  Tensor out(std::move(out_shape));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto j = idx[i];
    if (j < 0) continue;
    if (static_cast<std::size_t>(j) >= out.size())
      throw DimensionError("scatter_add: index out of range");
    out[static_cast<std::size_t>(j)] += xv[i];
  }
  Node n = unary(Op::ScatterAdd, x, std::move(out));
  n.index = std::move(index);
  return x.graph().emit(std::move(n));
}

Var reshape(Var x, Shape shape) {
  if (shape == x.shape()) return x;
  return x.graph().emit(unary(Op::Reshape, x, x.value().reshaped(std::move(shape))));
}

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  require_same_graph(a, b);
  if (a.value().rank() != 2 || b.value().rank() != 2)
    throw DimensionError("matmul needs rank-2 operands");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = trans_a ? av.dim(1) : av.dim(0);
  const std::size_t k = trans_a ? av.dim(0) : av.dim(1);
  const std::size_t kb = trans_b ? bv.dim(1) : bv.dim(0);
  const std::size_t n = trans_b ? bv.dim(0) : bv.dim(1);
  if (k != kb) {
    throw DimensionError("matmul: inner dimensions differ " + to_string(av.shape()) + " x " +
                         to_string(bv.shape()));
  }
  Tensor out({m, n});
  const Tensor bt = trans_b ? transposed(bv) : Tensor();
  if (trans_a) {
    gemm_tn(av.data(), trans_b ? bt.data() : bv.data(), out.data(), m, k, n);
  } else {
    gemm(av.data(), trans_b ? bt.data() : bv.data(), out.data(), m, k, n);
  }
  Node node = binary(Op::MatMul, a, b, std::move(out));
  node.trans_a = trans_a;
  node.trans_b = trans_b;
  return a.graph().emit(std::move(node));
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.graph().emit(binary(Op::Add, a, b, std::move(out)));
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.graph().emit(binary(Op::Sub, a, b, std::move(out)));
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.graph().emit(binary(Op::Mul, a, b, std::move(out)));
}

Var affine(Var x, double s, double shift) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = s * v + shift;
  Node n = unary(Op::Affine, x, std::move(out));
  n.a = s;
  n.b = shift;
  return x.graph().emit(std::move(n));
}

Var leaky_relu(Var x, double alpha) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : alpha * v;
  Node n = unary(Op::LeakyRelu, x, std::move(out));
  n.a = alpha;
  return x.graph().emit(std::move(n));
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  return x.graph().emit(unary(Op::Sigmoid, x, std::move(out)));
}

Var softmax_last(Var x) {
  if (x.value().rank() == 0) throw DimensionError("softmax of a scalar");
  Tensor out = x.value();
  const std::size_t c = out.shape().back();
  auto d = out.data();
  for (std::size_t r = 0; r + c <= d.size(); r += c) {
    double m = d[r];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, d[r + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      d[r + j] = std::exp(d[r + j] - m);
      s += d[r + j];
    }
    for (std::size_t j = 0; j < c; ++j) d[r + j] /= s;
  }
  return x.graph().emit(unary(Op::Softmax, x, std::move(out)));
}

Var logsumexp_last(Var x) {
  if (x.value().rank() == 0) throw DimensionError("logsumexp of a scalar");
  const Tensor& xv = x.value();
  const std::size_t c = xv.shape().back();
  Shape shape = xv.shape();
  shape.back() = 1;
  Tensor out(shape);
  for (std::size_t r = 0; r < out.size(); ++r) {
    double m = xv[r * c];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, xv[r * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(xv[r * c + j] - m);
    out[r] = m + std::log(s);
  }
  return x.graph().emit(unary(Op::LogSumExp, x, std::move(out)));
}

Var sqrt(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) {
    if (v < 0.0) throw NumericError("sqrt of a negative value");
    v = std::sqrt(v);
  }
  return x.graph().emit(unary(Op::Sqrt, x, std::move(out)));
}

Var safe_recip(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v == 0.0 ? 0.0 : 1.0 / v;
  return x.graph().emit(unary(Op::SafeRecip, x, std::move(out)));
}

Var log(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) {
    if (!(v > 0.0)) throw NumericError("log of a non-positive value");
    v = std::log(v);
  }
  return x.graph().emit(unary(Op::Log, x, std::move(out)));
}

Var sum_all(Var x) {
  return scatter_add(x, make_index(std::vector<std::int32_t>(x.size(), 0)), {});
}

Var mean_all(Var x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.size())); }

Var sum_last(Var x) {
  const Shape& s = x.shape();
  if (s.empty()) throw DimensionError("sum_last of a scalar");
  const std::size_t c = s.back();
  std::vector<std::int32_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int32_t>(i / c);
  return scatter_add(x, make_index(std::move(idx)), Shape(s.begin(), s.end() - 1));
}

Var expand_last(Var x, std::size_t n) {
  Shape s = x.shape();
  s.push_back(n);
  std::vector<std::int32_t> idx(x.size() * n);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int32_t>(i / n);
  return gather(x, make_index(std::move(idx)), std::move(s));
}

Var broadcast_rows(Var x, std::size_t rows) {
  if (x.value().rank() != 1) throw DimensionError("broadcast_rows needs a vector");
  const std::size_t n = x.size();
  thread_local std::map<std::pair<std::size_t, std::size_t>, IndexMap> cache;
  auto it = cache.find({rows, n});
  if (it == cache.end()) {
    std::vector<std::int32_t> idx(rows * n);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int32_t>(i % n);
    if (cache.size() >= 64) cache.clear();
    it = cache.emplace(std::pair{rows, n}, make_index(std::move(idx))).first;
  }
  return gather(x, it->second, {rows, n});
}

Var slice_last(Var x, std::size_t begin, std::size_t end) {
  Shape s = x.shape();
  if (s.empty() || begin > end || end > s.back()) throw DimensionError("slice_last out of range");
  const std::size_t c = s.back();
  const std::size_t rows = x.size() / c;
  const std::size_t w = end - begin;
  std::vector<std::int32_t> idx(rows * w);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j)
      idx[r * w + j] = static_cast<std::int32_t>(r * c + begin + j);
  s.back() = w;
  return gather(x, make_index(std::move(idx)), std::move(s));
}

Var concat_last(Var a, Var b) {
  require_same_graph(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.empty() || sa.size() != sb.size() ||
      !std::equal(sa.begin(), sa.end() - 1, sb.begin()))
    throw DimensionError("concat_last: leading shapes differ");
  const std::size_t na = sa.back(), nb = sb.back(), n = na + nb;
  const std::size_t rows = a.size() / std::max<std::size_t>(na, 1);
  Shape out = sa;
  out.back() = n;
  std::vector<std::int32_t> ia(a.size()), ib(b.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < na; ++j) ia[r * na + j] = static_cast<std::int32_t>(r * n + j);
    for (std::size_t j = 0; j < nb; ++j) ib[r * nb + j] = static_cast<std::int32_t>(r * n + na + j);
  }
  return add(scatter_add(a, make_index(std::move(ia)), out),
             scatter_add(b, make_index(std::move(ib)), out));
}

Var select(Var x, std::span<const std::size_t> flat_indices, Shape out_shape) {
  std::vector<std::int32_t> idx(flat_indices.begin(), flat_indices.end());
  return gather(x, make_index(std::move(idx)), std::move(out_shape));
}

}  // namespace dnagen::ad
