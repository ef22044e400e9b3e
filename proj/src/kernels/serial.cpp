// Reference kernels: textbook loop nests, one output element at a time.

#include <cmath>

#include "eidgm/kernels.hpp"

namespace eidgm::kernels::serial {
namespace {

void affine_rows(std::span<const double> x, std::size_t b, const double* base,
                 const AffineLayout& L, std::span<double> y) {
  const double* w = base + L.offset;
  const double* bias = w + L.in * L.out;
  for (std::size_t o = 0; o < L.out; ++o) {
    double acc = L.bias ? bias[o] : 0.0;
    for (std::size_t i = 0; i < L.in; ++i) acc += x[b * L.in + i] * w[i * L.out + o];
    y[b * L.out + o] = acc;
  }
}

void backward_input_row(std::span<const double> dy, std::size_t b, const double* base,
                        const AffineLayout& L, std::span<double> dx) {
  const double* w = base + L.offset;
  for (std::size_t i = 0; i < L.in; ++i) {
    double acc = 0.0;
    for (std::size_t o = 0; o < L.out; ++o) acc += dy[b * L.out + o] * w[i * L.out + o];
    dx[b * L.in + i] += acc;
  }
}

void backward_theta_row(std::span<const double> x, std::span<const double> dy, std::size_t b,
                        double* base, const AffineLayout& L) {
  double* dw = base + L.offset;
  for (std::size_t i = 0; i < L.in; ++i) {
    for (std::size_t o = 0; o < L.out; ++o) dw[i * L.out + o] += x[b * L.in + i] * dy[b * L.out + o];
  }
  if (L.bias) {
    double* db = dw + L.in * L.out;
    for (std::size_t o = 0; o < L.out; ++o) db[o] += dy[b * L.out + o];
  }
}

void affine(std::span<const double> x, std::size_t batch, std::span<const double> theta,
            const AffineLayout& layout, std::span<double> y) {
  for (std::size_t b = 0; b < batch; ++b) affine_rows(x, b, theta.data(), layout, y);
}

void affine_backward_input(std::span<const double> dy, std::size_t batch,
                           std::span<const double> theta, const AffineLayout& layout,
                           std::span<double> dx) {
  for (std::size_t b = 0; b < batch; ++b) backward_input_row(dy, b, theta.data(), layout, dx);
}

void affine_backward_theta(std::span<const double> x, std::span<const double> dy,
                           std::size_t batch, const AffineLayout& layout,
                           std::span<double> dtheta) {
  for (std::size_t b = 0; b < batch; ++b) backward_theta_row(x, dy, b, dtheta.data(), layout);
}

void grouped_affine(std::span<const double> x, std::size_t batch, std::span<const double> theta,
                    std::size_t stride, const GroupIndex& groups, const AffineLayout& layout,
                    std::span<double> y) {
  for (std::size_t b = 0; b < batch; ++b) {
    affine_rows(x, b, theta.data() + groups.group_of_row[b] * stride, layout, y);
  }
}

void grouped_backward_input(std::span<const double> dy, std::size_t batch,
                            std::span<const double> theta, std::size_t stride,
                            const GroupIndex& groups, const AffineLayout& layout,
                            std::span<double> dx) {
  for (std::size_t b = 0; b < batch; ++b) {
    backward_input_row(dy, b, theta.data() + groups.group_of_row[b] * stride, layout, dx);
  }
}

void grouped_backward_theta(std::span<const double> x, std::span<const double> dy,
                            std::size_t batch, std::size_t stride, const GroupIndex& groups,
                            const AffineLayout& layout, std::span<double> dtheta) {
  for (std::size_t b = 0; b < batch; ++b) {
    backward_theta_row(x, dy, b, dtheta.data() + groups.group_of_row[b] * stride, layout);
  }
}

void tanh_kernel(std::span<const double> x, std::span<double> y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] = std::tanh(x[k]);
}

}  // namespace

const KernelSet kSet{&affine,         &affine_backward_input,  &affine_backward_theta,
                     &grouped_affine, &grouped_backward_input, &grouped_backward_theta,
                     &tanh_kernel};

}  // namespace eidgm::kernels::serial
