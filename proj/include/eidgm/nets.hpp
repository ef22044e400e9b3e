#pragma once

// Fully connected tanh networks stored as one flat parameter row, plus the
// Adam optimizer used for every network in the pipeline.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "eidgm/diff/var.hpp"
#include "eidgm/kernels.hpp"
#include "eidgm/matrix.hpp"
#include "eidgm/rng.hpp"

namespace eidgm::nn {

enum class Activation : std::uint32_t { Tanh = 1 };

/// Layer sizes g_1 .. g_{k+1}: input, hidden widths, output. Hidden layers
/// use the activation; the output layer is linear.
struct DenseNetSpec {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::vector<std::size_t> hidden_widths;
  Activation activation = Activation::Tanh;

  /// `depth` hidden layers, all of width `width`.
  static DenseNetSpec uniform(std::size_t input, std::size_t output, std::size_t width,
                              std::size_t depth);

  std::vector<std::size_t> layer_sizes() const;
  /// Offsets of each layer inside the flat row, starting at `base`.
  std::vector<kernels::AffineLayout> layouts(std::size_t base = 0) const;
  /// Sum over consecutive layers of g_i * g_{i+1} + g_{i+1}.
  std::size_t param_count() const;
  void validate() const;

  friend bool operator==(const DenseNetSpec&, const DenseNetSpec&) = default;
};

std::string to_string(Activation a);

/// Uniform on +-sqrt(1/fan_in) for weights and biases; the output layer's
/// range is multiplied by `output_layer_scale`.
std::vector<double> init_weights(const DenseNetSpec& spec, Rng& rng,
                                 double output_layer_scale = 1.0);

/// Network with one weight row shared by every input row. `theta` is 1 x P
/// and the network's parameters start at column `offset`.
diff::Var dense_forward(const DenseNetSpec& spec, diff::Var theta, diff::Var x,
                        std::size_t offset = 0);

/// Row b of x uses the network stored in theta row groups[b] (theta is G x P).
diff::Var grouped_dense_forward(const DenseNetSpec& spec, diff::Var theta, diff::Var x,
                                std::shared_ptr<const kernels::GroupIndex> groups);

/// Plain evaluation (no tape) with shared weights.
Matrix dense_apply(const DenseNetSpec& spec, std::span<const double> theta, const Matrix& x,
                   kernels::Backend backend = kernels::Backend::Parallel);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(AdamConfig config, std::size_t n);

  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

}  // namespace eidgm::nn
