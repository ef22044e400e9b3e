#pragma once

// Parametric ODE solution emulators: the hypernetwork PINN (a hypernetwork
// h(p) emits the weights of a small main network m(t)) and a DeepONet
// comparator, trained with a data loss against solver trajectories plus a
// physics residual loss.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "eidgm/diff/var.hpp"
#include "eidgm/kernels.hpp"
#include "eidgm/matrix.hpp"
#include "eidgm/nets.hpp"
#include "eidgm/odes.hpp"
#include "eidgm/param_range.hpp"

namespace eidgm::emulator {

using nn::DenseNetSpec;

using eidgm::ParamRange;

enum class EmulatorKind : std::uint32_t { HyperPinn = 1, DeepOnet = 2 };

std::string to_string(EmulatorKind kind);
EmulatorKind kind_from_string(const std::string& name);

/// A batch of (time, parameter) pairs presented to an emulator graph.
/// `params` is N x n_p, `times` is U x 1; pair b uses parameter row
/// param_index[b] and time row time_index[b].
struct PairBatch {
  diff::Var weights;
  diff::Var params;
  diff::Var times;
  std::shared_ptr<const kernels::GroupIndex> groups;  // groups == param_index
  std::shared_ptr<const std::vector<std::uint32_t>> param_index;
  std::shared_ptr<const std::vector<std::uint32_t>> time_index;

  std::size_t size() const { return param_index->size(); }
};

/// Pair indices for every parameter crossed with every time, parameter-major
/// (pair i * T + r is parameter i at time r).
struct PairIndex {
  std::shared_ptr<const kernels::GroupIndex> groups;
  std::shared_ptr<const std::vector<std::uint32_t>> param_index;
  std::shared_ptr<const std::vector<std::uint32_t>> time_index;

  static PairIndex grid(std::size_t n_params, std::size_t n_times);
  static PairIndex from(std::vector<std::uint32_t> param_index,
                        std::vector<std::uint32_t> time_index, std::size_t n_params);
};

PairBatch make_batch(diff::Tape& tape, diff::Var weights, const Matrix& params,
                     std::span<const double> times, const PairIndex& pairs,
                     bool times_as_leaf = false);

/// State shared by both emulator families: the flat weight row, the
/// parameter box it was trained on, the time interval, and the fixed
/// input/output normalization wrapped around the networks.
class Emulator {
 public:
  virtual ~Emulator() = default;

  virtual EmulatorKind kind() const = 0;
  virtual std::size_t weight_count() const = 0;
  /// Predictions for each pair, B x n_y, in native state units.
  virtual diff::Var forward(const PairBatch& batch) const = 0;

  std::size_t param_dim() const { return range_.dim(); }
  std::size_t state_dim() const { return out_shift_.size(); }
  const ParamRange& param_range() const { return range_; }
  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }
  const std::vector<double>& output_shift() const { return out_shift_; }
  const std::vector<double>& output_scale() const { return out_scale_; }
  void set_output_normalization(std::vector<double> shift, std::vector<double> scale);

  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& mutable_weights() { return weights_; }
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }
  const std::vector<double>& loss_history() const { return loss_history_; }
  std::vector<double>& mutable_loss_history() { return loss_history_; }

  /// Plain evaluation: rows i * T + r hold parameter i at times[r].
  Matrix predict(const Matrix& params, std::span<const double> times) const;
  std::vector<double> predict(std::span<const double> p, double t) const;

 protected:
  Emulator(ParamRange range, double t_begin, double t_end, std::size_t state_dim);

  diff::Var normalized_params(diff::Var params) const;
  diff::Var normalized_times(diff::Var times) const;
  diff::Var denormalized_outputs(diff::Var out) const;

  ParamRange range_;
  double t_begin_;
  double t_end_;
  std::vector<double> out_shift_;
  std::vector<double> out_scale_;
  std::vector<double> weights_;
  std::uint64_t seed_ = 0;
  std::vector<double> loss_history_;
};

class HyperPinn final : public Emulator {
 public:
  /// Throws ShapeError unless hyper_spec.output_dim equals the main
  /// network's parameter count and the input/output dims line up.
  HyperPinn(DenseNetSpec hyper_spec, DenseNetSpec main_spec, ParamRange range, double t_begin,
            double t_end);

  EmulatorKind kind() const override { return EmulatorKind::HyperPinn; }
  std::size_t weight_count() const override { return hyper_spec_.param_count(); }
  diff::Var forward(const PairBatch& batch) const override;

  const DenseNetSpec& hyper_spec() const { return hyper_spec_; }
  const DenseNetSpec& main_spec() const { return main_spec_; }

  /// Main-network weights theta_m(p) emitted by the hypernetwork.
  std::vector<double> hyper_forward(std::span<const double> p) const;
  /// True when p lies outside the training box (evaluation still proceeds).
  bool out_of_range(std::span<const double> p) const { return !range_.contains(p); }

  void init_weights(std::uint64_t seed);

 private:
  DenseNetSpec hyper_spec_;
  DenseNetSpec main_spec_;
};

/// Flat weight row layout: branch | trunk | per-state-dimension output bias.
class DeepOnet final : public Emulator {
 public:
  DeepOnet(DenseNetSpec branch_spec, DenseNetSpec trunk_spec, std::size_t latent_dim,
           ParamRange range, double t_begin, double t_end, std::size_t state_dim);

  EmulatorKind kind() const override { return EmulatorKind::DeepOnet; }
  std::size_t weight_count() const override;
  diff::Var forward(const PairBatch& batch) const override;

  const DenseNetSpec& branch_spec() const { return branch_spec_; }
  const DenseNetSpec& trunk_spec() const { return trunk_spec_; }
  std::size_t latent_dim() const { return latent_dim_; }

  void init_weights(std::uint64_t seed);

 private:
  DenseNetSpec branch_spec_;
  DenseNetSpec trunk_spec_;
  std::size_t latent_dim_;
};

/// Exact flat parameter count of a dense network.
std::size_t main_param_count(const DenseNetSpec& spec);

/// Pure main-network evaluation m(t; theta_m) with no normalization.
std::vector<double> main_forward(std::span<const double> theta_m, double t,
                                 const DenseNetSpec& main_spec);

// ---- losses --------------------------------------------------------------

/// Mean over pairs of the squared Euclidean error. `targets` is B x n_y.
diff::Var loss_data_disc(diff::Var predictions, const Matrix& targets);

/// Mean over pairs of |d/dt m - f(m, p, t)|^2. `batch.times` must be a leaf;
/// the time derivative is a forward tangent recorded on the tape.
diff::Var loss_physics_disc(const Emulator& em, const PairBatch& batch,
                            const odes::OdeSystem& system);

struct LossTerms {
  diff::Var total;
  double data = 0.0;
  double physics = 0.0;
  bool physics_evaluated = false;
};

/// alpha * data + beta * physics; the physics pass is skipped when beta == 0.
LossTerms total_loss(const Emulator& em, const odes::OdeSystem& system,
                     const PairBatch& data_batch, const Matrix& data_targets,
                     const PairBatch* collocation_batch, double alpha, double beta);

// ---- training ------------------------------------------------------------

struct Architecture {
  EmulatorKind kind = EmulatorKind::HyperPinn;
  std::size_t hyper_width = 64;
  std::size_t hyper_depth = 4;
  std::size_t main_width = 32;
  std::size_t main_depth = 4;
  std::size_t branch_width = 128;
  std::size_t branch_depth = 3;
  std::size_t trunk_width = 128;
  std::size_t trunk_depth = 3;
  std::size_t latent_dim = 128;
};

struct EmulatorTrainingConfig {
  std::size_t n_params = 100;
  std::size_t t_obs = 100;
  std::size_t t_col = 100;
  double alpha = 1.0;
  double beta = 1e-2;
  nn::AdamConfig adam{5e-5, 0.9, 0.999, 1e-8};
  /// Cosine decay from adam.lr to adam.lr * lr_final_factor over the run;
  /// 1 keeps the rate constant.
  double lr_final_factor = 1.0;
  std::size_t batch_size = 10'000;
  std::size_t epochs = 10'000;
  std::uint64_t seed = 0;
  double t_begin = 0.0;
  double t_end = 1.0;
  std::vector<double> y0;
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  Architecture architecture;

  void validate() const;
};

std::unique_ptr<Emulator> make_emulator(const Architecture& arch, const ParamRange& range,
                                        std::size_t state_dim, double t_begin, double t_end,
                                        std::uint64_t seed);

struct EpochReport {
  std::size_t epoch;
  double loss;
  double data_loss;
  double physics_loss;
};

using EpochCallback = std::function<void(const EpochReport&, const Emulator&)>;

/// Adam on the flat weight row. Reference trajectories for N_p parameters
/// drawn uniformly from `range` are solved once; each epoch visits every
/// (time, parameter) pair once in mini-batches of `batch_size`.
std::unique_ptr<Emulator> train_emulator(const odes::OdeSystem& system,
                                         const EmulatorTrainingConfig& config,
                                         const ParamRange& range,
                                         const EpochCallback& on_epoch = {});

// ---- persistence ---------------------------------------------------------

void save_emulator(const Emulator& em, std::ostream& out);
void save_emulator(const Emulator& em, const std::string& path);
std::unique_ptr<Emulator> load_emulator(std::istream& in);
std::unique_ptr<Emulator> load_emulator(const std::string& path);

// ---- sample-count advisory -----------------------------------------------

struct SampleCountBound {
  double term1;        // (64/eps^2) * P * log(eps * T_col / (4 L L_h delta P))
  double term2;        // 16 / eps^2
  double n_p_bound;    // max(term1, term2)
  bool vacuous;        // log argument <= 1: term1 carries no information
  std::size_t weight_count;  // P
};

/// Trajectory-count bound for the discretized physics loss given the
/// hypernetwork layer sizes and Lipschitz constants L (loss) and L_h
/// (hypernetwork).
SampleCountBound required_sample_count(double eps, double delta, std::size_t t_col,
                                       std::span<const std::size_t> hyper_layer_sizes,
                                       double lipschitz_loss, double lipschitz_hyper);

}  // namespace eidgm::emulator
