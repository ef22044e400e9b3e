#pragma once

// WGAN-GP parameter estimator. The generator maps Gaussian latents to
// parameter vectors inside the emulator's range; fake snapshots are the
// frozen emulator evaluated at the dataset's observation times; the critic
// scores standardized (t, y) points.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "eidgm/diff/var.hpp"
#include "eidgm/emulator.hpp"
#include "eidgm/matrix.hpp"
#include "eidgm/nets.hpp"
#include "eidgm/param_range.hpp"
#include "eidgm/rcsdata.hpp"
#include "eidgm/rng.hpp"

namespace eidgm::estimator {

using nn::DenseNetSpec;

struct WganConfig {
  std::size_t noise_dim = 16;
  std::size_t generator_width = 64;
  std::size_t generator_depth = 4;
  std::size_t critic_width = 64;
  std::size_t critic_depth = 4;
  double lambda = 10.0;
  nn::AdamConfig adam{1e-4, 0.0, 0.9, 1e-8};
  std::size_t epochs = 50'000;
  std::size_t critic_steps = 5;
  /// Fake trajectories per draw; 0 picks the smallest N with N * T >= |Y|.
  std::size_t fake_count = 0;
  /// Fresh latents for every critic step (otherwise once per outer iteration).
  bool redraw_each_critic_step = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossHistory {
  std::vector<double> critic;     // L_D at the last critic step of each iteration
  std::vector<double> generator;  // -mean D(fake) at the generator step
  std::vector<double> gap;        // mean D(real) - mean D(fake) at the last critic step
};

struct WganPair {
  std::size_t noise_dim = 0;
  DenseNetSpec generator_spec;
  DenseNetSpec critic_spec;
  std::vector<double> theta_g;
  std::vector<double> theta_d;
  ParamRange param_range;
  rcs::ScalingInfo scaling;
  std::uint64_t seed = 0;
  LossHistory history;

  std::size_t param_dim() const { return param_range.dim(); }
};

/// Untrained pair with seeded weights.
WganPair make_pair(const WganConfig& config, const ParamRange& range,
                   const rcs::ScalingInfo& scaling);

/// Critic on the tape: maps an M x d point matrix to M x 1 scores.
using Critic = std::function<diff::Var(diff::Var points)>;
Critic tape_critic(const DenseNetSpec& spec, diff::Var theta_d);

/// Generator on the tape: z (N x noise_dim) -> parameters (N x n_p); the
/// final tanh is mapped affinely onto the range.
diff::Var generator_forward(const WganPair& pair, diff::Var theta_g, diff::Var z);
/// Plain evaluation for one latent vector.
std::vector<double> generator_forward(const WganPair& pair, std::span<const double> z);

/// Standard normal latents, N x noise_dim.
Matrix draw_latents(std::size_t n, std::size_t noise_dim, Rng& rng);

/// Observation layout of a fake set: N trajectories at each of the dataset
/// times, ordered slot-major (row r * N + i is trajectory i at time r).
struct FakeLayout {
  std::vector<double> times;
  std::size_t trajectories = 0;
  emulator::PairIndex pairs;

  std::size_t size() const { return times.size() * trajectories; }
};
FakeLayout fake_layout(std::span<const double> times, std::size_t trajectories);

/// Standardized fake points (t_r, m(t_r; p_i)) with params given on the tape.
diff::Var assemble_fake(const WganPair& pair, const emulator::Emulator& em, diff::Var params,
                        const FakeLayout& layout);
/// Draws N latents and returns the fake point matrix (|Y~| = N * T rows).
Matrix assemble_fake(const WganPair& pair, const emulator::Emulator& em, std::size_t n,
                     std::span<const double> times, std::uint64_t seed);

/// Mean over k of (|grad D(x_k)| - 1)^2 at x_k = e_k fake_k + (1 - e_k) real_k,
/// e_k ~ U[0, 1]. When fake has more rows than real a random subset of
/// fake rows of size |real| is paired; fewer rows is a ShapeError.
diff::Var gradient_penalty(diff::Tape& tape, const Critic& critic, const Matrix& real,
                           const Matrix& fake, Rng& rng);

/// Per-row |grad_x D| at the given points.
std::vector<double> critic_gradient_norms(const DenseNetSpec& spec, std::span<const double> theta_d,
                                          const Matrix& points);

struct CriticLoss {
  diff::Var total;
  double mean_real = 0.0;
  double mean_fake = 0.0;
  double penalty = 0.0;
};

/// -mean D(real) + mean D(fake) + lambda * gradient_penalty.
CriticLoss loss_discriminator(diff::Tape& tape, const Critic& critic, const Matrix& real,
                              const Matrix& fake, double lambda, Rng& rng);

/// -mean D(fake).
diff::Var loss_generator(const Critic& critic, diff::Var fake);

struct IterationReport {
  std::size_t epoch;
  double critic_loss;
  double generator_loss;
  double gap;
};
using IterationCallback = std::function<void(const IterationReport&)>;

/// Alternating full-batch training against a frozen emulator. The dataset
/// is given in native units; it is standardized internally and observations
/// inside each time slot are put in a canonical order first.
WganPair train_estimator(const rcs::RcsDataset& dataset, const emulator::Emulator& em,
                         const WganConfig& config, const IterationCallback& on_iteration = {});

/// n generator draws in native parameter units (n x n_p).
Matrix sample_posterior(const WganPair& pair, std::size_t n, std::uint64_t seed);

/// |grad D| at `count` random interpolates between real points and fresh fakes.
std::vector<double> interpolated_gradient_norms(const WganPair& pair, const emulator::Emulator& em,
                                                const rcs::RcsDataset& dataset,
                                                std::size_t count, std::uint64_t seed);

void save_pair(const WganPair& pair, std::ostream& out);
void save_pair(const WganPair& pair, const std::string& path);
WganPair load_pair(std::istream& in);
WganPair load_pair(const std::string& path);

}  // namespace eidgm::estimator
