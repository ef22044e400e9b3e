// OpenMP/SIMD kernels. Every layer op is phrased as a small GEMM
// C = init + A * B evaluated by a register-blocked micro-kernel; each output
// element is summed over k in ascending order by a single thread, so
// results do not depend on the thread count. Grouped ops gather the rows of
// one group into contiguous scratch first.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "eidgm/kernels.hpp"

namespace eidgm::kernels::parallel {
namespace {

using v8 = double __attribute__((vector_size(64)));
using v8u = double __attribute__((vector_size(64), aligned(8)));
constexpr std::size_t kLanes = 8;
constexpr std::size_t kParallelWork = 1 << 16;

inline v8 load(const double* p) { return *reinterpret_cast<const v8u*>(p); }
inline void store(double* p, v8 v) { *reinterpret_cast<v8u*>(p) = v; }

enum class Init { Zero, Bias, Accumulate };

// A is read as A[r * rs + k * ks]; B row k starts at B + k * ldb.
struct Operand {
  const double* a;
  std::size_t rs;
  std::size_t ks;
  const double* b;
  std::size_t ldb;
  double* c;
  std::size_t ldc;
  Init init;
  const double* bias;
};

template <int R, int V>
inline void micro(const Operand& op, std::size_t K, std::size_t r0, std::size_t n0) {
  v8 acc[R][V];
#pragma GCC unroll 4
  for (int r = 0; r < R; ++r) {
#pragma GCC unroll 4
    for (int v = 0; v < V; ++v) {
      const std::size_t n = n0 + v * kLanes;
      if (op.init == Init::Zero) {
        acc[r][v] = v8{};
      } else if (op.init == Init::Bias) {
        acc[r][v] = load(op.bias + n);
      } else {
        acc[r][v] = load(op.c + (r0 + r) * op.ldc + n);
      }
    }
  }
  const double* a = op.a + r0 * op.rs;
  const std::size_t rs = op.rs, ks = op.ks, ldb = op.ldb;
  const double* bk = op.b + n0;
  for (std::size_t k = 0; k < K; ++k, bk += ldb) {
    v8 bv[V];
#pragma GCC unroll 4
    for (int v = 0; v < V; ++v) bv[v] = load(bk + v * kLanes);
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r) {
      const double av = a[r * rs + k * ks];
#pragma GCC unroll 4
      for (int v = 0; v < V; ++v) acc[r][v] += av * bv[v];
    }
  }
#pragma GCC unroll 4
  for (int r = 0; r < R; ++r) {
#pragma GCC unroll 4
    for (int v = 0; v < V; ++v) store(op.c + (r0 + r) * op.ldc + n0 + v * kLanes, acc[r][v]);
  }
}

inline void scalar_tail(const Operand& op, std::size_t K, std::size_t r, std::size_t n) {
  double acc = op.init == Init::Zero   ? 0.0
               : op.init == Init::Bias ? op.bias[n]
                                       : op.c[r * op.ldc + n];
  const double* a = op.a + r * op.rs;
  for (std::size_t k = 0; k < K; ++k) acc += a[k * op.ks] * op.b[k * op.ldb + n];
  op.c[r * op.ldc + n] = acc;
}

template <int R>
inline void row_block(const Operand& op, std::size_t N, std::size_t K, std::size_t r0) {
  std::size_t n = 0;
  for (; n + 4 * kLanes <= N; n += 4 * kLanes) micro<R, 4>(op, K, r0, n);
  for (; n + kLanes <= N; n += kLanes) micro<R, 1>(op, K, r0, n);
  for (; n < N; ++n) {
    for (int r = 0; r < R; ++r) scalar_tail(op, K, r0 + r, n);
  }
}

// Rows [m0, m1) of C.
void gemm_rows(const Operand& op, std::size_t m0, std::size_t m1, std::size_t N, std::size_t K) {
  std::size_t m = m0;
  for (; m + 4 <= m1; m += 4) row_block<4>(op, N, K, m);
  for (; m < m1; ++m) row_block<1>(op, N, K, m);
}

void gemm(const Operand& op, std::size_t M, std::size_t N, std::size_t K) {
  const std::size_t blocks = (M + 3) / 4;
  if (M * N * K <= kParallelWork || blocks < 2) {
    gemm_rows(op, 0, M, N, K);
    return;
  }
  const long nb = static_cast<long>(blocks);
#pragma omp parallel for schedule(static)
  for (long blk = 0; blk < nb; ++blk) {
    const std::size_t m0 = static_cast<std::size_t>(blk) * 4;
    gemm_rows(op, m0, std::min(M, m0 + 4), N, K);
  }
}

// in x out -> out x in.
void transpose(const double* w, std::size_t in, std::size_t out, double* wt) {
  for (std::size_t i = 0; i < in; ++i) {
    for (std::size_t o = 0; o < out; ++o) wt[o * in + i] = w[i * out + o];
  }
}

std::vector<double>& scratch(int slot) {
  thread_local std::vector<double> buffers[4];
  return buffers[slot];
}

void affine(std::span<const double> x, std::size_t batch, std::span<const double> theta,
            const AffineLayout& L, std::span<double> y) {
  const double* w = theta.data() + L.offset;
  const Operand op{x.data(), L.in, 1, w, L.out, y.data(), L.out,
                   L.bias ? Init::Bias : Init::Zero, w + L.in * L.out};
  gemm(op, batch, L.out, L.in);
}

void affine_backward_input(std::span<const double> dy, std::size_t batch,
                           std::span<const double> theta, const AffineLayout& L,
                           std::span<double> dx) {
  auto& wt = scratch(0);
  wt.resize(L.in * L.out);
  transpose(theta.data() + L.offset, L.in, L.out, wt.data());
  auto& tmp = scratch(1);
  tmp.resize(batch * L.in);
  const Operand op{dy.data(), L.out, 1, wt.data(), L.in, tmp.data(), L.in, Init::Zero, nullptr};
  gemm(op, batch, L.in, L.out);
  for (std::size_t k = 0; k < tmp.size(); ++k) dx[k] += tmp[k];
}

// dW (in x out) += X^T dY over rows; bias row += column sums of dY.
void theta_update(const double* x, const double* dy, std::size_t rows, const AffineLayout& L,
                  double* dw) {
  const Operand op{x, 1, L.in, dy, L.out, dw, L.out, Init::Accumulate, nullptr};
  gemm(op, L.in, L.out, rows);
  if (L.bias) {
    double* db = dw + L.in * L.out;
    for (std::size_t b = 0; b < rows; ++b) {
      const double* d = dy + b * L.out;
#pragma omp simd
      for (std::size_t o = 0; o < L.out; ++o) db[o] += d[o];
    }
  }
}

void affine_backward_theta(std::span<const double> x, std::span<const double> dy,
                           std::size_t batch, const AffineLayout& L, std::span<double> dtheta) {
  theta_update(x.data(), dy.data(), batch, L, dtheta.data() + L.offset);
}

// Copies the rows of group g from src (width cols) into dst.
void gather_group(const GroupIndex& groups, std::size_t g, const double* src, std::size_t cols,
                  std::vector<double>& dst) {
  const std::size_t begin = groups.offsets[g], end = groups.offsets[g + 1];
  dst.resize((end - begin) * cols);
  for (std::size_t k = begin; k < end; ++k) {
    std::memcpy(dst.data() + (k - begin) * cols, src + groups.rows[k] * cols,
                cols * sizeof(double));
  }
}

void check_groups(const GroupIndex& groups, std::size_t batch) {
  if (groups.group_of_row.size() != batch) {
    throw std::invalid_argument("group index does not cover the batch");
  }
}

void grouped_affine(std::span<const double> x, std::size_t batch, std::span<const double> theta,
                    std::size_t stride, const GroupIndex& groups, const AffineLayout& L,
                    std::span<double> y) {
  check_groups(groups, batch);
  const long G = static_cast<long>(groups.group_count);
#pragma omp parallel for schedule(dynamic, 4) if (batch * L.in * L.out > kParallelWork)
  for (long g = 0; g < G; ++g) {
    const std::size_t n = groups.offsets[g + 1] - groups.offsets[g];
    if (n == 0) continue;
    auto& xs = scratch(0);
    auto& ys = scratch(1);
    gather_group(groups, g, x.data(), L.in, xs);
    ys.resize(n * L.out);
    const double* w = theta.data() + g * stride + L.offset;
    const Operand op{xs.data(), L.in, 1, w, L.out, ys.data(), L.out,
                     L.bias ? Init::Bias : Init::Zero, w + L.in * L.out};
    gemm_rows(op, 0, n, L.out, L.in);
    for (std::size_t k = 0; k < n; ++k) {
      std::memcpy(y.data() + groups.rows[groups.offsets[g] + k] * L.out, ys.data() + k * L.out,
                  L.out * sizeof(double));
    }
  }
}

void grouped_backward_input(std::span<const double> dy, std::size_t batch,
                            std::span<const double> theta, std::size_t stride,
                            const GroupIndex& groups, const AffineLayout& L,
                            std::span<double> dx) {
  check_groups(groups, batch);
  const long G = static_cast<long>(groups.group_count);
#pragma omp parallel for schedule(dynamic, 4) if (batch * L.in * L.out > kParallelWork)
  for (long g = 0; g < G; ++g) {
    const std::size_t n = groups.offsets[g + 1] - groups.offsets[g];
    if (n == 0) continue;
    auto& ds = scratch(0);
    auto& wt = scratch(1);
    auto& out = scratch(2);
    gather_group(groups, g, dy.data(), L.out, ds);
    wt.resize(L.in * L.out);
    transpose(theta.data() + g * stride + L.offset, L.in, L.out, wt.data());
    out.resize(n * L.in);
    const Operand op{ds.data(), L.out, 1, wt.data(), L.in, out.data(), L.in, Init::Zero, nullptr};
    gemm_rows(op, 0, n, L.in, L.out);
    for (std::size_t k = 0; k < n; ++k) {
      double* target = dx.data() + groups.rows[groups.offsets[g] + k] * L.in;
      const double* src = out.data() + k * L.in;
      for (std::size_t i = 0; i < L.in; ++i) target[i] += src[i];
    }
  }
}

void grouped_backward_theta(std::span<const double> x, std::span<const double> dy,
                            std::size_t batch, std::size_t stride, const GroupIndex& groups,
                            const AffineLayout& L, std::span<double> dtheta) {
  check_groups(groups, batch);
  const long G = static_cast<long>(groups.group_count);
#pragma omp parallel for schedule(dynamic, 4) if (batch * L.in * L.out > kParallelWork)
  for (long g = 0; g < G; ++g) {
    const std::size_t n = groups.offsets[g + 1] - groups.offsets[g];
    if (n == 0) continue;
    auto& xs = scratch(0);
    auto& ds = scratch(1);
    gather_group(groups, g, x.data(), L.in, xs);
    gather_group(groups, g, dy.data(), L.out, ds);
    double* dw = dtheta.data() + g * stride + L.offset;
    const Operand op{xs.data(), 1, L.in, ds.data(), L.out, dw, L.out, Init::Accumulate, nullptr};
    gemm_rows(op, 0, L.in, L.out, n);
    if (L.bias) {
      double* db = dw + L.in * L.out;
      for (std::size_t b = 0; b < n; ++b) {
        const double* d = ds.data() + b * L.out;
        for (std::size_t o = 0; o < L.out; ++o) db[o] += d[o];
      }
    }
  }
}

// Branch-free tanh within a few ulp of libm. Small |x| uses a rational
// approximation in x^2; otherwise 1 - 2 / (exp(2|x|) + 1) with exp built
// from a Pade kernel and an exponent-bit scale so the loop vectorizes.
inline double tanh_lane(double x) {
  const double a = std::fabs(x);

  const double s = x * x;
  const double num = (-9.64399179425052238628e-1 * s - 9.92877231001918586564e1) * s -
                     1.61468768441708447952e3;
  const double den = ((s + 1.12811678491632931402e2) * s + 2.23548839060100448583e3) * s +
                     4.84406305325125486048e3;
  const double small = x + x * s * (num / den);

  const double y = std::fmin(2.0 * a, 60.0);
  constexpr double kShifter = 6755399441055744.0;  // 1.5 * 2^52
  const double shifted = y * 1.4426950408889634074 + kShifter;
  const double n = shifted - kShifter;
  double r = y - n * 6.93145751953125e-1;
  r = r - n * 1.42860682030941723212e-6;
  const double rr = r * r;
  const double px = r * ((1.26177193074810590878e-4 * rr + 3.02994407707441961300e-2) * rr +
                         9.99999999999999999910e-1);
  const double qx = ((3.00198505138664455042e-6 * rr + 2.52448340349684104192e-3) * rr +
                     2.27265548208155028766e-1) * rr + 2.00000000000000000009e0;
  const double er = 1.0 + 2.0 * (px / (qx - px));
  std::int64_t bits;
  std::memcpy(&bits, &shifted, sizeof bits);
  const std::int64_t scale_bits = (bits - 0x4338000000000000LL + 1023) << 52;
  double scale;
  std::memcpy(&scale, &scale_bits, sizeof scale);
  const double large = std::copysign(1.0 - 2.0 / (er * scale + 1.0), x);

  return a <= 0.625 ? small : large;
}

void tanh_kernel(std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const double* in = x.data();
  double* out = y.data();
#pragma omp simd
  for (std::size_t k = 0; k < n; ++k) out[k] = tanh_lane(in[k]);
}

}  // namespace

const KernelSet kSet{&affine,         &affine_backward_input,  &affine_backward_theta,
                     &grouped_affine, &grouped_backward_input, &grouped_backward_theta,
                     &tanh_kernel};

}  // namespace eidgm::kernels::parallel

namespace eidgm::kernels {

const KernelSet& kernel_set(Backend backend) {
  return backend == Backend::Serial ? serial::kSet : parallel::kSet;
}

std::shared_ptr<const GroupIndex> GroupIndex::build(std::vector<std::uint32_t> group_of_row,
                                                    std::size_t group_count) {
  auto index = std::make_shared<GroupIndex>();
  index->group_count = group_count;
  index->offsets.assign(group_count + 1, 0);
  for (auto g : group_of_row) {
    if (g >= group_count) throw std::out_of_range("group label out of range");
    ++index->offsets[g + 1];
  }
  for (std::size_t g = 0; g < group_count; ++g) index->offsets[g + 1] += index->offsets[g];
  index->rows.resize(group_of_row.size());
  std::vector<std::size_t> cursor(index->offsets.begin(), index->offsets.end() - 1);
  for (std::size_t b = 0; b < group_of_row.size(); ++b) {
    index->rows[cursor[group_of_row[b]]++] = static_cast<std::uint32_t>(b);
  }
  index->group_of_row = std::move(group_of_row);
  return index;
}

}  // namespace eidgm::kernels
