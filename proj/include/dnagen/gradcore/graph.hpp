#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <vector>

#include "dnagen/gradcore/tensor.hpp"

namespace dnagen::ad {

using NodeId = std::uint32_t;
using IndexMap = std::shared_ptr<const std::vector<std::int32_t>>;

enum class Op : std::uint8_t {
  Leaf,
  Gather,      // out[i] = idx[i] < 0 ? fill : in[idx[i]]
  ScatterAdd,  // out[idx[i]] += in[i], negative idx dropped
  Reshape,
  MatMul,
  Add,
  Sub,
  Mul,
  Affine,  // a * x + b
  LeakyRelu,
  Sigmoid,
  Softmax,    // over the last axis
  LogSumExp,  // over the last axis, keeps a trailing 1
  Sqrt,
  SafeRecip,  // 1 / x, with 0 mapped to 0
  Log,        // natural log, positive inputs only
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid as long as its graph.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  NodeId id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }

 private:
  friend class Graph;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

struct Node {
  Op op = Op::Leaf;
  std::uint8_t arity = 0;
  bool trans_a = false;
  bool trans_b = false;
  std::array<NodeId, 2> inputs{};
  double a = 0.0;  // affine scale, leaky slope, gather fill
  double b = 0.0;  // affine shift
  IndexMap index;
  Tensor value;
};

// Append-only computation graph. Nodes are created in topological order, so
// every node's inputs have smaller ids. Backward passes append new nodes built
// from the same op set, which makes gradients themselves differentiable.
//
// A graph is confined to one thread; independent graphs may run concurrently.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves. Non-finite values are rejected.
  Var input(Tensor value);
  Var scalar(double value) { return input(Tensor::scalar(value)); }

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse-mode gradients of a scalar objective. The returned gradients are
  // ordinary graph nodes and can be differentiated again.
  // Throws GraphError when some wrt node does not influence the objective,
  // unless allow_unused is set, in which case its gradient is a zero leaf.
  std::vector<Var> grad(Var objective, std::span<const Var> wrt, bool allow_unused = false);
  Var grad(Var objective, Var wrt, bool allow_unused = false);

  // Used by op constructors.
  Var emit(Node node);

 private:
  void backward_node(NodeId id, Var upstream, std::vector<Var>& grads,
                     const std::vector<char>& live);

  std::deque<Node> nodes_;  // stable references across emits
};

// Primitive ops. All of them have backward rules expressed with these same
// primitives.
Var gather(Var x, IndexMap index, Shape out_shape, double fill = 0.0);
Var scatter_add(Var x, IndexMap index, Shape out_shape);
Var reshape(Var x, Shape shape);
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var affine(Var x, double scale, double shift);
Var leaky_relu(Var x, double alpha);
Var sigmoid(Var x);
Var softmax_last(Var x);
Var logsumexp_last(Var x);
Var sqrt(Var x);
Var safe_recip(Var x);
Var log(Var x);

// Composites.
inline Var scale(Var x, double s) { return affine(x, s, 0.0); }
inline Var neg(Var x) { return affine(x, -1.0, 0.0); }
inline Var square(Var x) { return mul(x, x); }
Var sum_all(Var x);   // rank-0 result
Var mean_all(Var x);  // rank-0 result
Var sum_last(Var x);  // drops the last axis
Var expand_last(Var x, std::size_t n);  // appends an axis of length n
Var broadcast_rows(Var x, std::size_t rows);  // [N] -> [rows, N]
Var slice_last(Var x, std::size_t begin, std::size_t end);
Var concat_last(Var a, Var b);
Var select(Var x, std::span<const std::size_t> flat_indices, Shape out_shape);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

// C[M,N] = A[M,K] * B[K,N]. Each output element accumulates over k in
// ascending order, so a row of C depends only on the matching row of A and
// batched evaluation is bit-identical to row-by-row evaluation.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n);
// C[M,N] = A^T * B with A stored as [K,M]; same accumulation order as gemm.
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

}  // namespace dnagen::ad
