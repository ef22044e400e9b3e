#include "eidgm/nets.hpp"

#include <cmath>

#include "eidgm/errors.hpp"

namespace eidgm::nn {

DenseNetSpec DenseNetSpec::uniform(std::size_t input, std::size_t output, std::size_t width,
                                   std::size_t depth) {
  DenseNetSpec spec;
  spec.input_dim = input;
  spec.output_dim = output;
  spec.hidden_widths.assign(depth, width);
  return spec;
}

std::vector<std::size_t> DenseNetSpec::layer_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(hidden_widths.size() + 2);
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), hidden_widths.begin(), hidden_widths.end());
  sizes.push_back(output_dim);
  return sizes;
}

std::vector<kernels::AffineLayout> DenseNetSpec::layouts(std::size_t base) const {
  const auto sizes = layer_sizes();
  std::vector<kernels::AffineLayout> out;
  std::size_t offset = base;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    kernels::AffineLayout l{offset, sizes[i], sizes[i + 1], true};
    offset += l.span();
    out.push_back(l);
  }
  return out;
}

std::size_t DenseNetSpec::param_count() const {
  const auto sizes = layer_sizes();
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) count += sizes[i] * sizes[i + 1] + sizes[i + 1];
  return count;
}

void DenseNetSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ShapeError("network dimensions must be positive");
  for (auto w : hidden_widths) {
    if (w == 0) throw ShapeError("hidden widths must be positive");
  }
  if (activation != Activation::Tanh) throw ContractError("unsupported activation");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
  }
  return "unknown";
}

std::vector<double> init_weights(const DenseNetSpec& spec, Rng& rng, double output_layer_scale) {
  spec.validate();
  std::vector<double> theta(spec.param_count());
  const auto layouts = spec.layouts();
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    const auto& l = layouts[li];
    double bound = std::sqrt(1.0 / static_cast<double>(l.in));
    if (li + 1 == layouts.size()) bound *= output_layer_scale;
    for (std::size_t k = 0; k < l.span(); ++k) theta[l.offset + k] = rng.uniform(-bound, bound);
  }
  return theta;
}

diff::Var dense_forward(const DenseNetSpec& spec, diff::Var theta, diff::Var x,
                        std::size_t offset) {
  const auto layouts = spec.layouts(offset);
  diff::Var h = x;
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    h = {h.tape, h.tape->affine(h.id, theta.id, layouts[li])};
    if (li + 1 < layouts.size()) h = diff::tanh(h);
  }
  return h;
}

diff::Var grouped_dense_forward(const DenseNetSpec& spec, diff::Var theta, diff::Var x,
                                std::shared_ptr<const kernels::GroupIndex> groups) {
  const auto layouts = spec.layouts();
  diff::Var h = x;
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    h = {h.tape, h.tape->grouped_affine(h.id, theta.id, layouts[li], groups)};
    if (li + 1 < layouts.size()) h = diff::tanh(h);
  }
  return h;
}

Matrix dense_apply(const DenseNetSpec& spec, std::span<const double> theta, const Matrix& x,
                   kernels::Backend backend) {
  if (theta.size() != spec.param_count()) {
    throw ShapeError("dense_apply: expected " + std::to_string(spec.param_count()) +
                     " parameters, got " + std::to_string(theta.size()));
  }
  if (x.cols != spec.input_dim) throw ShapeError("dense_apply: input width mismatch");
  const auto& k = kernels::kernel_set(backend);
  const auto layouts = spec.layouts();
  Matrix h = x;
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    Matrix next(h.rows, layouts[li].out);
    k.affine(h.data, h.rows, theta, layouts[li], next.data);
    if (li + 1 < layouts.size()) k.tanh(next.data, next.data);
    h = std::move(next);
  }
  return h;
}

Adam::Adam(AdamConfig config, std::size_t n) : config_(config), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ShapeError("Adam::step: size mismatch");
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double step = config_.lr / correction1;
  const double root2 = std::sqrt(correction2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) / root2 + config_.eps);
  }
}

}  // namespace eidgm::nn
