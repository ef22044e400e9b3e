#pragma once

// Random small tape graphs and finite-difference checks shared by the unit
// and acceptance suites.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "eidgm/diff/var.hpp"

namespace testsupport {

using eidgm::Matrix;
using eidgm::diff::NodeId;
using eidgm::diff::Tape;
using eidgm::diff::Var;

struct RandomGraph {
  explicit RandomGraph(eidgm::kernels::Backend backend = eidgm::kernels::Backend::Parallel)
      : tape(backend) {}
  Tape tape;
  std::vector<NodeId> leaves;
  std::vector<Matrix> leaf_values;
  NodeId output = 0;  // 1 x 1
  NodeId vector_output = 0;
};

inline Matrix uniform_matrix(std::size_t r, std::size_t c, std::mt19937_64& g, double lo = -2.0,
                             double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data) v = u(g);
  return m;
}

// A graph over a few 3 x 1 lane leaves plus one dense layer, mixing every
// elementwise op. Divisions and square roots get strictly positive
// arguments so central differences stay well defined.
inline void build_random_graph(RandomGraph& rg, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  Tape& t = rg.tape;
  const std::size_t lanes = 3;
  const std::size_t n_leaves = 2 + g() % 3;
  std::vector<Var> pool;
  for (std::size_t k = 0; k < n_leaves; ++k) {
    rg.leaf_values.push_back(uniform_matrix(lanes, 1, g));
    rg.leaves.push_back(t.leaf(rg.leaf_values.back()));
    pool.push_back({&t, rg.leaves.back()});
  }
  const eidgm::kernels::AffineLayout layout{0, 1, 1, true};
  rg.leaf_values.push_back(uniform_matrix(1, layout.span(), g, -1.0, 1.0));
  rg.leaves.push_back(t.leaf(rg.leaf_values.back()));
  const Var theta{&t, rg.leaves.back()};

  const std::size_t steps = 4 + g() % 5;
  for (std::size_t s = 0; s < steps; ++s) {
    const Var a = pool[g() % pool.size()];
    const Var b = pool[g() % pool.size()];
    Var out;
    switch (g() % 9) {
      case 0: out = a + b; break;
      case 1: out = a - b; break;
      case 2: out = a * b; break;
      case 3: out = a / (square(b) + 1.0); break;
      case 4: out = tanh(a); break;
      case 5: out = square(a) * 0.5; break;
      case 6: out = sqrt(square(a) + 0.5); break;
      case 7: out = {&t, t.affine(a.id, theta.id, layout)}; break;
      default: out = tanh(a * 1.5 + b); break;
    }
    pool.push_back(out);
  }
  Var acc = pool.back();
  for (std::size_t k = pool.size() - 3; k + 1 < pool.size(); ++k) acc = acc + pool[k] * 0.25;
  rg.vector_output = acc.id;
  rg.output = sum(tanh(acc)).id;
}

inline double eval_scalar(const RandomGraph& rg, const std::vector<Matrix>& leaves) {
  const NodeId out[] = {rg.output};
  return rg.tape.forward_eval(leaves, out)[0].item();
}

// Relative error with a floor on the denominator so near-zero derivatives
// are judged on absolute error.
inline double rel_err(double got, double want, double floor = 1e-3) {
  return std::fabs(got - want) / std::max(std::fabs(want), floor);
}

struct GraphCheck {
  double max_reverse_err = 0.0;
  double max_tangent_err = 0.0;
};

inline GraphCheck check_graph(std::uint64_t seed, double h = 1e-5) {
  RandomGraph rg;
  build_random_graph(rg, seed);
  GraphCheck out;
  const auto grads = rg.tape.reverse_gradients(rg.output);
  for (std::size_t l = 0; l < rg.leaves.size(); ++l) {
    const Matrix& g = grads.wrt(rg.leaves[l]);
    Matrix fd_dir(rg.leaf_values[l].rows, rg.leaf_values[l].cols, 0.0);
    double dir_fd = 0.0;
    for (std::size_t e = 0; e < rg.leaf_values[l].data.size(); ++e) {
      auto plus = rg.leaf_values, minus = rg.leaf_values;
      plus[l].data[e] += h;
      minus[l].data[e] -= h;
      const double fd = (eval_scalar(rg, plus) - eval_scalar(rg, minus)) / (2 * h);
      out.max_reverse_err = std::max(out.max_reverse_err, rel_err(g.data[e], fd));
      dir_fd += fd;
    }
    // tangent along the all-ones direction on this leaf
    const NodeId outs[] = {rg.output};
    const auto tp = rg.tape.forward_tangent(rg.leaves[l], outs);
    const double tangent = rg.tape.value(tp[0].tangent).item();
    out.max_tangent_err = std::max(out.max_tangent_err, rel_err(tangent, dir_fd));
  }
  return out;
}

// tanh(x) through its continued fraction, in long double.
inline long double tanh_series(long double x, int terms = 40) {
  long double acc = 2.0L * terms + 1.0L;
  for (int k = terms; k >= 1; --k) acc = (2.0L * k - 1.0L) + x * x / acc;
  return x / acc;
}

}  // namespace testsupport
