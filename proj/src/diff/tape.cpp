#include "eidgm/diff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eidgm/errors.hpp"

namespace eidgm::diff {
namespace {

using Node = Tape::Node;

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
  }
}

// Evaluates one node from its operand values. Shared by recording and
// forward_eval so replays reproduce stored primals bit for bit.
Matrix compute(const Node& n, std::span<const Matrix* const> in, const kernels::KernelSet& k) {
  auto unary = [&](auto&& f) {
    Matrix out(in[0]->rows, in[0]->cols);
    const auto& a = in[0]->data;
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = f(a[i]);
    return out;
  };
  auto binary = [&](auto&& f) {
    Matrix out(in[0]->rows, in[0]->cols);
    const auto& a = in[0]->data;
    const auto& b = in[1]->data;
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = f(a[i], b[i]);
    return out;
  };

  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
      return n.value;
    case Op::Add:
      return binary([](double a, double b) { return a + b; });
    case Op::Sub:
      return binary([](double a, double b) { return a - b; });
    case Op::Mul:
      return binary([](double a, double b) { return a * b; });
    case Op::Div:
      return binary([](double a, double b) { return a / b; });
    case Op::Scale: {
      const double c = n.scalar;
      return unary([c](double a) { return c * a; });
    }
    case Op::AddScalar: {
      const double c = n.scalar;
      return unary([c](double a) { return a + c; });
    }
    case Op::Tanh: {
      Matrix out(in[0]->rows, in[0]->cols);
      k.tanh(in[0]->data, out.data);
      return out;
    }
    case Op::TanhGrad:
      return unary([](double a) { return 1.0 - a * a; });
    case Op::Square:
      return unary([](double a) { return a * a; });
    case Op::Sqrt:
      return unary([](double a) { return std::sqrt(a); });
    case Op::Affine: {
      Matrix out(in[0]->rows, n.layout.out);
      k.affine(in[0]->data, in[0]->rows, in[1]->data, n.layout, out.data);
      return out;
    }
    case Op::GroupedAffine: {
      Matrix out(in[0]->rows, n.layout.out);
      k.grouped_affine(in[0]->data, in[0]->rows, in[1]->data, in[1]->cols, *n.groups, n.layout,
                       out.data);
      return out;
    }
    case Op::ScaleCols: {
      const Matrix& x = *in[0];
      Matrix out(x.rows, x.cols);
      for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t c = 0; c < x.cols; ++c) out(r, c) = x(r, c) * n.col_mul[c] + n.col_add[c];
      }
      return out;
    }
    case Op::SliceCols: {
      const Matrix& x = *in[0];
      Matrix out(x.rows, n.count);
      for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t c = 0; c < n.count; ++c) out(r, c) = x(r, n.first + c);
      }
      return out;
    }
    case Op::ConcatCols: {
      std::size_t cols = 0;
      for (const Matrix* p : in) cols += p->cols;
      Matrix out(in[0]->rows, cols);
      std::size_t c0 = 0;
      for (const Matrix* p : in) {
        for (std::size_t r = 0; r < p->rows; ++r) {
          for (std::size_t c = 0; c < p->cols; ++c) out(r, c0 + c) = (*p)(r, c);
        }
        c0 += p->cols;
      }
      return out;
    }
    case Op::GatherRows: {
      const Matrix& x = *in[0];
      const auto& idx = *n.index;
      Matrix out(idx.size(), x.cols);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        std::copy_n(x.data.begin() + idx[r] * x.cols, x.cols, out.data.begin() + r * x.cols);
      }
      return out;
    }
    case Op::BroadcastRows: {
      const Matrix& x = *in[0];
      Matrix out(n.count, x.cols);
      for (std::size_t r = 0; r < n.count; ++r) std::copy(x.data.begin(), x.data.end(), out.row(r).begin());
      return out;
    }
    case Op::RowSumBlocks: {
      const Matrix& x = *in[0];
      const std::size_t blocks = x.cols / n.count;
      Matrix out(x.rows, blocks);
      for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t b = 0; b < blocks; ++b) {
          double acc = 0.0;
          for (std::size_t c = 0; c < n.count; ++c) acc += x(r, b * n.count + c);
          out(r, b) = acc;
        }
      }
      return out;
    }
    case Op::Sum:
    case Op::Mean: {
      double acc = 0.0;
      for (double v : in[0]->data) acc += v;
      if (n.op == Op::Mean) acc /= static_cast<double>(in[0]->size());
      return Matrix::scalar(acc);
    }
  }
  throw ContractError("unknown op");
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

const Matrix& Gradients::wrt(NodeId leaf) const {
  auto it = std::lower_bound(leaves_.begin(), leaves_.end(), leaf);
  if (it == leaves_.end() || *it != leaf) {
    throw ContractError("node " + std::to_string(leaf) + " is not a leaf");
  }
  return per_leaf_[static_cast<std::size_t>(it - leaves_.begin())];
}

Tape::Tape(kernels::Backend backend)
    : backend_(backend), kernels_(&kernels::kernel_set(backend)) {}

const Tape::Node& Tape::node(NodeId id) const {
  check(id);
  return nodes_[id];
}

void Tape::check(NodeId id) const {
  if (id >= nodes_.size()) throw ContractError("node id " + std::to_string(id) + " not on tape");
}

NodeId Tape::push(Node n) {
  std::vector<const Matrix*> in;
  in.reserve(n.args.size());
  for (NodeId a : n.args) {
    check(a);
    in.push_back(&nodes_[a].value);
    if (nodes_[a].needs_grad) n.needs_grad = true;
  }
  if (n.op != Op::Leaf && n.op != Op::Constant) n.value = compute(n, in, *kernels_);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Matrix value) {
  Node n;
  n.op = Op::Leaf;
  n.needs_grad = true;
  n.value = std::move(value);
  const NodeId id = push(std::move(n));
  leaves_.push_back(id);
  return id;
}

NodeId Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

namespace {
Node make(Op op, std::vector<NodeId> args) {
  Node n;
  n.op = op;
  n.args = std::move(args);
  return n;
}
}  // namespace

NodeId Tape::add(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "add");
  return push(make(Op::Add, {a, b}));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "sub");
  return push(make(Op::Sub, {a, b}));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "mul");
  return push(make(Op::Mul, {a, b}));
}

NodeId Tape::div(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "div");
  return push(make(Op::Div, {a, b}));
}

NodeId Tape::scale(NodeId a, double c) {
  check(a);
  Node n = make(Op::Scale, {a});
  n.scalar = c;
  return push(std::move(n));
}

NodeId Tape::add_scalar(NodeId a, double c) {
  check(a);
  Node n = make(Op::AddScalar, {a});
  n.scalar = c;
  return push(std::move(n));
}

NodeId Tape::tanh(NodeId a) {
  check(a);
  return push(make(Op::Tanh, {a}));
}

NodeId Tape::tanh_grad(NodeId a) {
  check(a);
  return push(make(Op::TanhGrad, {a}));
}

NodeId Tape::square(NodeId a) {
  check(a);
  return push(make(Op::Square, {a}));
}

NodeId Tape::sqrt(NodeId a) {
  check(a);
  return push(make(Op::Sqrt, {a}));
}

NodeId Tape::affine(NodeId x, NodeId theta, const kernels::AffineLayout& layout) {
  const Matrix& xv = value(x);
  const Matrix& tv = value(theta);
  if (xv.cols != layout.in) {
    throw ShapeError("affine: input has " + std::to_string(xv.cols) + " columns, layer expects " +
                     std::to_string(layout.in));
  }
  if (tv.rows != 1 || layout.offset + layout.span() > tv.cols) {
    throw ShapeError("affine: parameter row " + shape_str(tv) + " too small for layer");
  }
  Node n = make(Op::Affine, {x, theta});
  n.layout = layout;
  return push(std::move(n));
}

NodeId Tape::grouped_affine(NodeId x, NodeId theta, const kernels::AffineLayout& layout,
                            std::shared_ptr<const kernels::GroupIndex> groups) {
  const Matrix& xv = value(x);
  const Matrix& tv = value(theta);
  if (!groups) throw ContractError("grouped_affine: null group index");
  if (xv.cols != layout.in) {
    throw ShapeError("grouped_affine: input has " + std::to_string(xv.cols) +
                     " columns, layer expects " + std::to_string(layout.in));
  }
  if (groups->group_of_row.size() != xv.rows) {
    throw ShapeError("grouped_affine: group index covers " +
                     std::to_string(groups->group_of_row.size()) + " rows, input has " +
                     std::to_string(xv.rows));
  }
  if (groups->group_count != tv.rows || layout.offset + layout.span() > tv.cols) {
    throw ShapeError("grouped_affine: parameter matrix " + shape_str(tv) +
                     " does not match groups/layer");
  }
  Node n = make(Op::GroupedAffine, {x, theta});
  n.layout = layout;
  n.groups = std::move(groups);
  return push(std::move(n));
}

NodeId Tape::scale_cols(NodeId x, std::vector<double> mul, std::vector<double> add) {
  const Matrix& xv = value(x);
  if (mul.size() != xv.cols || add.size() != xv.cols) {
    throw ShapeError("scale_cols: coefficient count does not match columns");
  }
  Node n = make(Op::ScaleCols, {x});
  n.col_mul = std::move(mul);
  n.col_add = std::move(add);
  return push(std::move(n));
}

NodeId Tape::slice_cols(NodeId x, std::size_t first, std::size_t count) {
  const Matrix& xv = value(x);
  if (count == 0 || first + count > xv.cols) throw ShapeError("slice_cols: range out of bounds");
  Node n = make(Op::SliceCols, {x});
  n.first = first;
  n.count = count;
  return push(std::move(n));
}

NodeId Tape::concat_cols(std::span<const NodeId> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t rows = value(parts[0]).rows;
  for (NodeId p : parts) {
    if (value(p).rows != rows) throw ShapeError("concat_cols: row counts differ");
  }
  return push(make(Op::ConcatCols, std::vector<NodeId>(parts.begin(), parts.end())));
}

NodeId Tape::gather_rows(NodeId x, std::shared_ptr<const std::vector<std::uint32_t>> index) {
  const Matrix& xv = value(x);
  if (!index) throw ContractError("gather_rows: null index");
  for (auto r : *index) {
    if (r >= xv.rows) throw ShapeError("gather_rows: index out of range");
  }
  Node n = make(Op::GatherRows, {x});
  n.index = std::move(index);
  return push(std::move(n));
}

NodeId Tape::broadcast_rows(NodeId x, std::size_t rows) {
  if (value(x).rows != 1) throw ShapeError("broadcast_rows: operand must have one row");
  Node n = make(Op::BroadcastRows, {x});
  n.count = rows;
  return push(std::move(n));
}

NodeId Tape::row_sum_blocks(NodeId x, std::size_t block) {
  const Matrix& xv = value(x);
  if (block == 0 || xv.cols % block != 0) throw ShapeError("row_sum_blocks: bad block width");
  Node n = make(Op::RowSumBlocks, {x});
  n.count = block;
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  check(a);
  return push(make(Op::Sum, {a}));
}

NodeId Tape::mean(NodeId a) {
  if (value(a).size() == 0) throw ShapeError("mean of an empty node");
  return push(make(Op::Mean, {a}));
}

const Matrix& Tape::value(NodeId id) const { return node(id).value; }
Op Tape::op(NodeId id) const { return node(id).op; }
bool Tape::is_leaf(NodeId id) const { return node(id).op == Op::Leaf; }

std::vector<Matrix> Tape::forward_eval(std::span<const Matrix> leaf_values,
                                       std::span<const NodeId> outputs) const {
  if (leaf_values.size() != leaves_.size()) {
    throw ShapeError("forward_eval: expected " + std::to_string(leaves_.size()) +
                     " leaf values, got " + std::to_string(leaf_values.size()));
  }
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    require_same_shape(nodes_[leaves_[i]].value, leaf_values[i], "forward_eval leaf");
  }
  for (NodeId o : outputs) check(o);

  std::vector<Matrix> values(nodes_.size());
  std::size_t next_leaf = 0;
  std::vector<const Matrix*> in;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (n.op == Op::Leaf) {
      values[id] = leaf_values[next_leaf++];
      continue;
    }
    in.clear();
    for (NodeId a : n.args) in.push_back(&values[a]);
    values[id] = compute(n, in, *kernels_);
  }
  std::vector<Matrix> result;
  result.reserve(outputs.size());
  for (NodeId o : outputs) result.push_back(values[o]);
  return result;
}

Gradients Tape::reverse_gradients(NodeId output) const {
  const Node& out = node(output);
  if (out.value.rows != 1 || out.value.cols != 1) {
    throw ContractError("reverse_gradients: output must be a scalar node, got " +
                        shape_str(out.value));
  }
  std::vector<Matrix> adj(output + 1);
  adj[output] = Matrix::scalar(1.0);

  auto acc = [&](NodeId a) -> Matrix* {
    if (!nodes_[a].needs_grad) return nullptr;
    if (adj[a].size() == 0 && nodes_[a].value.size() != 0) {
      adj[a] = Matrix(nodes_[a].value.rows, nodes_[a].value.cols);
    }
    return &adj[a];
  };

  for (std::size_t k = output + 1; k-- > 0;) {
    const Node& n = nodes_[k];
    if (!n.needs_grad || adj[k].size() == 0 || n.args.empty()) continue;
    const Matrix& g = adj[k];
    const Matrix& y = n.value;
    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Add:
        if (auto* da = acc(n.args[0])) add_into(*da, g);
        if (auto* db = acc(n.args[1])) add_into(*db, g);
        break;
      case Op::Sub:
        if (auto* da = acc(n.args[0])) add_into(*da, g);
        if (auto* db = acc(n.args[1])) {
          for (std::size_t i = 0; i < g.size(); ++i) db->data[i] -= g.data[i];
        }
        break;
      case Op::Mul: {
        const Matrix& a = nodes_[n.args[0]].value;
        const Matrix& b = nodes_[n.args[1]].value;
        if (auto* da = acc(n.args[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) da->data[i] += g.data[i] * b.data[i];
        }
        if (auto* db = acc(n.args[1])) {
          for (std::size_t i = 0; i < g.size(); ++i) db->data[i] += g.data[i] * a.data[i];
        }
        break;
      }
      case Op::Div: {
        const Matrix& b = nodes_[n.args[1]].value;
        if (auto* da = acc(n.args[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) da->data[i] += g.data[i] / b.data[i];
        }
        if (auto* db = acc(n.args[1])) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            db->data[i] -= g.data[i] * y.data[i] / b.data[i];
          }
        }
        break;
      }
      case Op::Scale:
        if (auto* da = acc(n.args[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) da->data[i] += n.scalar * g.data[i];
        }
        break;
      case Op::AddScalar:
        if (auto* da = acc(n.args[0])) add_into(*da, g);
        break;
      case Op::Tanh:
        if (auto* da = acc(n.args[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            da->data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
          }
        }
        break;
      case Op::TanhGrad: {
        const Matrix& a = nodes_[n.args[0]].value;
        if (auto* da = acc(n.args[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) da->data[i] -= 2.0 * a.data[i] * g.data[i];
        }
        break;
      }
      case Op::Square: {
        const Matrix& a = nodes_[n.args[0]].value;
        if (auto* da = acc(n.args[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) da->data[i] += 2.0 * a.data[i] * g.data[i];
        }
        break;
      }
      case Op::Sqrt:
        // Zero subgradient at the origin keeps norms of vanishing vectors finite.
        if (auto* da = acc(n.args[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (y.data[i] > 0.0) da->data[i] += g.data[i] / (2.0 * y.data[i]);
          }
        }
        break;
      case Op::Affine: {
        const Matrix& x = nodes_[n.args[0]].value;
        const Matrix& theta = nodes_[n.args[1]].value;
        if (auto* dx = acc(n.args[0])) {
          kernels_->affine_backward_input(g.data, x.rows, theta.data, n.layout, dx->data);
        }
        if (auto* dt = acc(n.args[1])) {
          kernels_->affine_backward_theta(x.data, g.data, x.rows, n.layout, dt->data);
        }
        break;
      }
      case Op::GroupedAffine: {
        const Matrix& x = nodes_[n.args[0]].value;
        const Matrix& theta = nodes_[n.args[1]].value;
        if (auto* dx = acc(n.args[0])) {
          kernels_->grouped_backward_input(g.data, x.rows, theta.data, theta.cols, *n.groups,
                                           n.layout, dx->data);
        }
        if (auto* dt = acc(n.args[1])) {
          kernels_->grouped_backward_theta(x.data, g.data, x.rows, theta.cols, *n.groups,
                                           n.layout, dt->data);
        }
        break;
      }
      case Op::ScaleCols:
        if (auto* da = acc(n.args[0])) {
          for (std::size_t r = 0; r < g.rows; ++r) {
            for (std::size_t c = 0; c < g.cols; ++c) (*da)(r, c) += g(r, c) * n.col_mul[c];
          }
        }
        break;
      case Op::SliceCols:
        if (auto* da = acc(n.args[0])) {
          for (std::size_t r = 0; r < g.rows; ++r) {
            for (std::size_t c = 0; c < n.count; ++c) (*da)(r, n.first + c) += g(r, c);
          }
        }
        break;
      case Op::ConcatCols: {
        std::size_t c0 = 0;
        for (NodeId a : n.args) {
          const std::size_t w = nodes_[a].value.cols;
          if (auto* da = acc(a)) {
            for (std::size_t r = 0; r < g.rows; ++r) {
              for (std::size_t c = 0; c < w; ++c) (*da)(r, c) += g(r, c0 + c);
            }
          }
          c0 += w;
        }
        break;
      }
      case Op::GatherRows:
        if (auto* da = acc(n.args[0])) {
          const auto& idx = *n.index;
          for (std::size_t r = 0; r < idx.size(); ++r) {
            for (std::size_t c = 0; c < g.cols; ++c) (*da)(idx[r], c) += g(r, c);
          }
        }
        break;
      case Op::BroadcastRows:
        if (auto* da = acc(n.args[0])) {
          for (std::size_t r = 0; r < g.rows; ++r) {
            for (std::size_t c = 0; c < g.cols; ++c) da->data[c] += g(r, c);
          }
        }
        break;
      case Op::RowSumBlocks:
        if (auto* da = acc(n.args[0])) {
          for (std::size_t r = 0; r < g.rows; ++r) {
            for (std::size_t b = 0; b < g.cols; ++b) {
              for (std::size_t c = 0; c < n.count; ++c) (*da)(r, b * n.count + c) += g(r, b);
            }
          }
        }
        break;
      case Op::Sum:
      case Op::Mean:
        if (auto* da = acc(n.args[0])) {
          double s = g.data[0];
          if (n.op == Op::Mean) s /= static_cast<double>(da->size());
          for (double& v : da->data) v += s;
        }
        break;
    }
  }

  std::vector<Matrix> per_leaf;
  per_leaf.reserve(leaves_.size());
  for (NodeId l : leaves_) {
    if (l <= output && adj[l].size() != 0) {
      per_leaf.push_back(std::move(adj[l]));
    } else {
      per_leaf.emplace_back(nodes_[l].value.rows, nodes_[l].value.cols);
    }
  }
  return Gradients(std::move(per_leaf), leaves_);
}

NodeId Tape::zeros_like(NodeId id) {
  const Matrix& v = value(id);
  return constant(Matrix(v.rows, v.cols));
}

std::vector<TangentPair> Tape::forward_tangent(NodeId seed_leaf, std::span<const NodeId> outputs) {
  const Matrix& v = value(seed_leaf);
  return forward_tangent(seed_leaf, Matrix(v.rows, v.cols, 1.0), outputs);
}

std::vector<TangentPair> Tape::forward_tangent(NodeId seed_leaf, const Matrix& seed,
                                               std::span<const NodeId> outputs) {
  check(seed_leaf);
  if (nodes_[seed_leaf].op != Op::Leaf) {
    throw ContractError("forward_tangent: node " + std::to_string(seed_leaf) +
                        " is not a leaf variable");
  }
  require_same_shape(nodes_[seed_leaf].value, seed, "forward_tangent seed");
  for (NodeId o : outputs) check(o);

  constexpr NodeId kNone = ~NodeId{0};
  // Nodes past the last output cannot influence it.
  std::size_t end = seed_leaf + 1;
  for (NodeId o : outputs) end = std::max<std::size_t>(end, o + 1);
  std::vector<NodeId> tan(end, kNone);
  tan[seed_leaf] = constant(seed);

  auto plus = [&](NodeId a, NodeId b) {
    if (a == kNone) return b;
    if (b == kNone) return a;
    return add(a, b);
  };

  for (std::size_t k = seed_leaf + 1; k < end; ++k) {
    // Copy what is needed up front: recording new nodes may reallocate nodes_.
    const Op op = nodes_[k].op;
    if (op == Op::Leaf || op == Op::Constant) continue;
    const std::vector<NodeId> args = nodes_[k].args;
    bool any = false;
    for (NodeId a : args) any = any || tan[a] != kNone;
    if (!any) continue;
    const NodeId y = static_cast<NodeId>(k);
    const NodeId a0 = args[0];
    const NodeId ta = tan[a0];
    const NodeId tb = args.size() > 1 ? tan[args[1]] : kNone;

    NodeId t = kNone;
    switch (op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Add:
        t = plus(ta, tb);
        break;
      case Op::Sub:
        t = ta == kNone ? scale(tb, -1.0) : (tb == kNone ? ta : sub(ta, tb));
        break;
      case Op::Mul:
        t = plus(ta == kNone ? kNone : mul(ta, args[1]), tb == kNone ? kNone : mul(a0, tb));
        break;
      case Op::Div: {
        // (ta - y * tb) / b
        const NodeId lhs = ta == kNone ? kNone : div(ta, args[1]);
        const NodeId rhs = tb == kNone ? kNone : scale(div(mul(y, tb), args[1]), -1.0);
        t = plus(lhs, rhs);
        break;
      }
      case Op::Scale:
        t = scale(ta, nodes_[k].scalar);
        break;
      case Op::AddScalar:
        t = ta;
        break;
      case Op::Tanh:
        t = mul(tanh_grad(y), ta);
        break;
      case Op::TanhGrad:
        t = mul(scale(a0, -2.0), ta);
        break;
      case Op::Square:
        t = mul(scale(a0, 2.0), ta);
        break;
      case Op::Sqrt:
        t = div(ta, scale(y, 2.0));
        break;
      case Op::Affine:
      case Op::GroupedAffine: {
        const bool grouped = op == Op::GroupedAffine;
        kernels::AffineLayout through_input = nodes_[k].layout;
        through_input.bias = false;
        const kernels::AffineLayout layout = nodes_[k].layout;
        auto groups = nodes_[k].groups;
        const NodeId via_x =
            ta == kNone ? kNone
                        : (grouped ? grouped_affine(ta, args[1], through_input, groups)
                                   : affine(ta, args[1], through_input));
        const NodeId via_theta =
            tb == kNone ? kNone
                        : (grouped ? grouped_affine(a0, tb, layout, groups)
                                   : affine(a0, tb, layout));
        t = plus(via_x, via_theta);
        break;
      }
      case Op::ScaleCols: {
        std::vector<double> m = nodes_[k].col_mul;
        t = scale_cols(ta, m, std::vector<double>(m.size(), 0.0));
        break;
      }
      case Op::SliceCols:
        t = slice_cols(ta, nodes_[k].first, nodes_[k].count);
        break;
      case Op::ConcatCols: {
        std::vector<NodeId> parts;
        for (NodeId a : args) parts.push_back(tan[a] == kNone ? zeros_like(a) : tan[a]);
        t = concat_cols(parts);
        break;
      }
      case Op::GatherRows:
        t = gather_rows(ta, nodes_[k].index);
        break;
      case Op::BroadcastRows:
        t = broadcast_rows(ta, nodes_[k].count);
        break;
      case Op::RowSumBlocks:
        t = row_sum_blocks(ta, nodes_[k].count);
        break;
      case Op::Sum:
        t = sum(ta);
        break;
      case Op::Mean:
        t = mean(ta);
        break;
    }
    tan[k] = t;
  }

  std::vector<TangentPair> result;
  result.reserve(outputs.size());
  for (NodeId o : outputs) {
    NodeId t = o < end ? tan[o] : kNone;
    if (t == kNone) t = zeros_like(o);
    result.push_back({o, t});
  }
  return result;
}

}  // namespace eidgm::diff
