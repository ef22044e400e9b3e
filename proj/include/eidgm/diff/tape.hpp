#pragma once

// Recorded computation graph with reverse-mode gradients and forward
// tangents that are themselves recorded on the tape.
//
// Node values are dense matrices; elementwise nodes act independently on
// each entry, so a B x 1 node is simply B scalar lanes evaluated together.
// The fused affine nodes implement dense layers (shared weights, or one
// weight set per row group) with the same differentiation contract as the
// equivalent composition of scalar multiplies and adds.
//
// Because forward_tangent appends ordinary nodes, reverse_gradients of any
// function of a tangent yields mixed second derivatives (forward over
// reverse). Nodes only reference earlier nodes, so the node list is its own
// topological order.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "eidgm/kernels.hpp"
#include "eidgm/matrix.hpp"

namespace eidgm::diff {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
  Leaf,
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Scale,
  AddScalar,
  Tanh,
  TanhGrad,  // 1 - x^2
  Square,
  Sqrt,
  Affine,
  GroupedAffine,
  ScaleCols,
  SliceCols,
  ConcatCols,
  GatherRows,
  BroadcastRows,
  RowSumBlocks,
  Sum,
  Mean,
};

struct TangentPair {
  NodeId primal;
  NodeId tangent;
};

/// Per-leaf gradients produced by one reverse sweep.
class Gradients {
 public:
  Gradients(std::vector<Matrix> per_leaf, std::vector<NodeId> leaves)
      : per_leaf_(std::move(per_leaf)), leaves_(std::move(leaves)) {}

  const Matrix& wrt(NodeId leaf) const;
  const std::vector<Matrix>& all() const { return per_leaf_; }
  std::vector<Matrix> take() && { return std::move(per_leaf_); }

 private:
  std::vector<Matrix> per_leaf_;
  std::vector<NodeId> leaves_;  // ascending
};

class Tape {
 public:
  explicit Tape(kernels::Backend backend = kernels::Backend::Parallel);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  /// Differentiable input (a root of the graph).
  NodeId leaf(Matrix value);
  /// Non-differentiable input: never receives a gradient or a tangent seed.
  NodeId constant(Matrix value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId add_scalar(NodeId a, double c);
  NodeId tanh(NodeId a);
  NodeId tanh_grad(NodeId a);
  NodeId square(NodeId a);
  NodeId sqrt(NodeId a);

  /// x [B x in] through the layer read from row 0 of theta [1 x P].
  NodeId affine(NodeId x, NodeId theta, const kernels::AffineLayout& layout);
  /// Row b of x goes through the layer stored in theta row groups[b].
  NodeId grouped_affine(NodeId x, NodeId theta, const kernels::AffineLayout& layout,
                        std::shared_ptr<const kernels::GroupIndex> groups);

  /// y[:, c] = x[:, c] * mul[c] + add[c] with constant coefficients.
  NodeId scale_cols(NodeId x, std::vector<double> mul, std::vector<double> add);
  NodeId slice_cols(NodeId x, std::size_t first, std::size_t count);
  NodeId concat_cols(std::span<const NodeId> parts);
  /// y[b, :] = x[index[b], :].
  NodeId gather_rows(NodeId x, std::shared_ptr<const std::vector<std::uint32_t>> index);
  /// Repeats a 1 x n row `rows` times.
  NodeId broadcast_rows(NodeId x, std::size_t rows);
  /// y[b, k] = sum of x[b, k*block .. (k+1)*block).
  NodeId row_sum_blocks(NodeId x, std::size_t block);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);

  const Matrix& value(NodeId id) const;
  Op op(NodeId id) const;
  bool is_leaf(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeId>& leaves() const { return leaves_; }
  kernels::Backend backend() const { return backend_; }

  /// Re-evaluates the whole graph from new leaf values (one per leaf, in
  /// creation order) without touching the stored primals.
  std::vector<Matrix> forward_eval(std::span<const Matrix> leaf_values,
                                   std::span<const NodeId> outputs) const;

  /// d(output)/d(leaf) for every leaf; output must be 1 x 1.
  Gradients reverse_gradients(NodeId output) const;

  /// Records tangent nodes for the directional derivative along `seed`
  /// placed on `seed_leaf` (all other leaves held fixed).
  std::vector<TangentPair> forward_tangent(NodeId seed_leaf, const Matrix& seed,
                                           std::span<const NodeId> outputs);
  /// Seed of all ones.
  std::vector<TangentPair> forward_tangent(NodeId seed_leaf, std::span<const NodeId> outputs);

  struct Node;

 private:
  NodeId push(Node node);
  const Node& node(NodeId id) const;
  void check(NodeId id) const;
  NodeId zeros_like(NodeId id);

  kernels::Backend backend_;
  const kernels::KernelSet* kernels_;
  std::vector<Node> nodes_;
  std::vector<NodeId> leaves_;
};

struct Tape::Node {
  Op op = Op::Constant;
  bool needs_grad = false;
  std::vector<NodeId> args;
  Matrix value;
  double scalar = 0.0;
  std::size_t first = 0;
  std::size_t count = 0;
  kernels::AffineLayout layout;
  std::shared_ptr<const kernels::GroupIndex> groups;
  std::shared_ptr<const std::vector<std::uint32_t>> index;
  std::vector<double> col_mul;
  std::vector<double> col_add;
};

}  // namespace eidgm::diff
