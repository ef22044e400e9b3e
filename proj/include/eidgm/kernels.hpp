#pragma once

// Dense-layer kernels behind the tape's fused affine nodes.
//
// Two implementations share one signature set: `serial` is the plain
// reference loop nest kept for testing, `parallel` is the OpenMP/SIMD
// version the tape uses by default. Both compute every output element as
// a sum in a fixed order that does not depend on the thread count, so a
// run is reproducible regardless of OMP_NUM_THREADS.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace eidgm::kernels {

/// Rows grouped by an integer label; used when each row of a batch is
/// pushed through its own weight set (one main network per parameter).
struct GroupIndex {
  std::vector<std::uint32_t> group_of_row;
  std::size_t group_count = 0;
  std::vector<std::size_t> offsets;  // group g owns rows[offsets[g] .. offsets[g+1])
  std::vector<std::uint32_t> rows;   // row ids sorted by group, ascending within group

  static std::shared_ptr<const GroupIndex> build(std::vector<std::uint32_t> group_of_row,
                                                 std::size_t group_count);
};

/// Where a layer's weights live inside a flat parameter row: an in x out
/// row-major weight block at `offset`, optionally followed by `out` biases.
struct AffineLayout {
  std::size_t offset = 0;
  std::size_t in = 0;
  std::size_t out = 0;
  bool bias = true;

  std::size_t span() const { return in * out + (bias ? out : 0); }
};

enum class Backend { Serial, Parallel };

// All functions take row-major buffers. Backward functions accumulate (+=).
struct KernelSet {
  // Y[B x out] = X[B x in] * W + b, with W, b read from `theta` (one row).
  void (*affine)(std::span<const double> x, std::size_t batch, std::span<const double> theta,
                 const AffineLayout& layout, std::span<double> y);
  void (*affine_backward_input)(std::span<const double> dy, std::size_t batch,
                                std::span<const double> theta, const AffineLayout& layout,
                                std::span<double> dx);
  void (*affine_backward_theta)(std::span<const double> x, std::span<const double> dy,
                                std::size_t batch, const AffineLayout& layout,
                                std::span<double> dtheta);
  // Row b uses weights from theta row groups.group_of_row[b]; theta is G x stride.
  void (*grouped_affine)(std::span<const double> x, std::size_t batch,
                         std::span<const double> theta, std::size_t stride,
                         const GroupIndex& groups, const AffineLayout& layout,
                         std::span<double> y);
  void (*grouped_backward_input)(std::span<const double> dy, std::size_t batch,
                                 std::span<const double> theta, std::size_t stride,
                                 const GroupIndex& groups, const AffineLayout& layout,
                                 std::span<double> dx);
  void (*grouped_backward_theta)(std::span<const double> x, std::span<const double> dy,
                                 std::size_t batch, std::size_t stride,
                                 const GroupIndex& groups, const AffineLayout& layout,
                                 std::span<double> dtheta);
  void (*tanh)(std::span<const double> x, std::span<double> y);
};

const KernelSet& kernel_set(Backend backend);

namespace serial {
extern const KernelSet kSet;
}
namespace parallel {
extern const KernelSet kSet;
}

}  // namespace eidgm::kernels
