#include "eidgm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"
#include "eidgm/errors.hpp"

namespace eidgm::estimator {
namespace {

using diff::Var;

constexpr char kMagic[9] = "EIDGMGAN";
constexpr std::uint32_t kVersion = 1;

// Rows of each slot sorted lexicographically, so the order observations were
// listed in cannot affect training.
rcs::RcsDataset canonical(const rcs::RcsDataset& data) {
  rcs::RcsDataset out = data;
  for (auto& obs : out.observations) {
    std::vector<std::size_t> order(obs.rows);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      for (std::size_t k = 0; k < obs.cols; ++k) {
        if (obs(a, k) != obs(b, k)) return obs(a, k) < obs(b, k);
      }
      return false;
    });
    Matrix sorted(obs.rows, obs.cols);
    for (std::size_t j = 0; j < order.size(); ++j) {
      for (std::size_t k = 0; k < obs.cols; ++k) sorted(j, k) = obs(order[j], k);
    }
    obs = std::move(sorted);
  }
  return out;
}

Var scores_of(const DenseNetSpec& spec, Var theta, Var x) {
  return nn::dense_forward(spec, theta, x);
}

// Seeds one tangent per input column and returns sum_c (dD/dx_c)^2 per row.
Var squared_input_gradient(diff::Tape& tape, diff::NodeId x_leaf, diff::NodeId scores) {
  // copy the shape: forward_tangent grows the tape and may move node storage
  const std::size_t rows = tape.value(x_leaf).rows, cols = tape.value(x_leaf).cols;
  Var total{};
  for (std::size_t c = 0; c < cols; ++c) {
    Matrix seed(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) seed(r, c) = 1.0;
    const diff::NodeId outs[1] = {scores};
    Var tangent{&tape, tape.forward_tangent(x_leaf, seed, outs)[0].tangent};
    total = c == 0 ? square(tangent) : total + square(tangent);
  }
  return total;
}

std::size_t parity_fake_count(std::size_t points, std::size_t times) {
  return (points + times - 1) / times;
}

Matrix fake_points(const WganPair& pair, const emulator::Emulator& em, const Matrix& z,
                   const FakeLayout& layout) {
  diff::Tape tape;
  Var theta{&tape, tape.constant(Matrix::row_vector(pair.theta_g))};
  Var zv{&tape, tape.constant(z)};
  return assemble_fake(pair, em, generator_forward(pair, theta, zv), layout).value();
}

void check_emulator(const WganPair& pair, const emulator::Emulator& em) {
  if (em.param_dim() != pair.param_dim() || em.state_dim() + 1 != pair.scaling.width()) {
    throw ShapeError("emulator dimensions do not match the estimator");
  }
}

}  // namespace

void WganConfig::validate() const {
  if (noise_dim == 0 || epochs == 0 || critic_steps == 0) {
    throw ConfigError("wgan config: noise_dim, epochs and critic_steps must be >= 1");
  }
  if (!(lambda > 0.0)) throw ConfigError("wgan config: lambda must be positive");
  if (!(adam.lr > 0.0)) throw ConfigError("wgan config: learning rate must be positive");
  if (generator_width == 0 || critic_width == 0) {
    throw ConfigError("wgan config: network widths must be positive");
  }
}

WganPair make_pair(const WganConfig& config, const ParamRange& range,
                   const rcs::ScalingInfo& scaling) {
  config.validate();
  range.validate();
  if (scaling.width() < 2) throw ShapeError("scaling must cover t and at least one state");
  WganPair pair;
  pair.noise_dim = config.noise_dim;
  pair.generator_spec = DenseNetSpec::uniform(config.noise_dim, range.dim(),
                                              config.generator_width, config.generator_depth);
  pair.critic_spec =
      DenseNetSpec::uniform(scaling.width(), 1, config.critic_width, config.critic_depth);
  pair.param_range = range;
  pair.scaling = scaling;
  pair.seed = config.seed;
  Rng g_rng(substream_seed(config.seed, 0));
  Rng d_rng(substream_seed(config.seed, 1));
  pair.theta_g = nn::init_weights(pair.generator_spec, g_rng);
  pair.theta_d = nn::init_weights(pair.critic_spec, d_rng);
  return pair;
}

Critic tape_critic(const DenseNetSpec& spec, Var theta_d) {
  return [spec, theta_d](Var points) { return scores_of(spec, theta_d, points); };
}

Var generator_forward(const WganPair& pair, Var theta_g, Var z) {
  if (z.value().cols != pair.noise_dim) throw ShapeError("latent width differs from noise_dim");
  Var out = tanh(nn::dense_forward(pair.generator_spec, theta_g, z));
  const std::size_t n = pair.param_dim();
  std::vector<double> mul(n), add(n);
  for (std::size_t k = 0; k < n; ++k) {
    mul[k] = 0.5 * (pair.param_range.high[k] - pair.param_range.low[k]);
    add[k] = 0.5 * (pair.param_range.high[k] + pair.param_range.low[k]);
  }
  return {out.tape, out.tape->scale_cols(out.id, mul, add)};
}

std::vector<double> generator_forward(const WganPair& pair, std::span<const double> z) {
  diff::Tape tape;
  Var theta{&tape, tape.constant(Matrix::row_vector(pair.theta_g))};
  Var zv{&tape, tape.constant(Matrix::row_vector(z))};
  return generator_forward(pair, theta, zv).value().data;
}

Matrix draw_latents(std::size_t n, std::size_t noise_dim, Rng& rng) {
  Matrix z(n, noise_dim);
  for (auto& v : z.data) v = rng.normal();
  return z;
}

FakeLayout fake_layout(std::span<const double> times, std::size_t trajectories) {
  if (times.empty() || trajectories == 0) throw ShapeError("fake layout needs times and trajectories");
  FakeLayout layout;
  layout.times.assign(times.begin(), times.end());
  layout.trajectories = trajectories;
  std::vector<std::uint32_t> pi, ti;
  for (std::size_t r = 0; r < times.size(); ++r) {
    for (std::size_t i = 0; i < trajectories; ++i) {
      pi.push_back(static_cast<std::uint32_t>(i));
      ti.push_back(static_cast<std::uint32_t>(r));
    }
  }
  layout.pairs = emulator::PairIndex::from(std::move(pi), std::move(ti), trajectories);
  return layout;
}

Var assemble_fake(const WganPair& pair, const emulator::Emulator& em, Var params,
                  const FakeLayout& layout) {
  check_emulator(pair, em);
  diff::Tape& tape = *params.tape;
  if (params.value().rows != layout.trajectories || params.value().cols != em.param_dim()) {
    throw ShapeError("assemble_fake: parameter matrix does not match the layout");
  }
  emulator::PairBatch batch;
  batch.weights = {&tape, tape.constant(Matrix::row_vector(em.weights()))};
  batch.params = params;
  batch.times = {&tape, tape.constant(Matrix::column(layout.times))};
  batch.groups = layout.pairs.groups;
  batch.param_index = layout.pairs.param_index;
  batch.time_index = layout.pairs.time_index;
  Var y = em.forward(batch);

  const auto& sc = pair.scaling;
  Matrix tcol(layout.size(), 1);
  for (std::size_t k = 0; k < layout.size(); ++k) {
    tcol(k, 0) = (layout.times[(*layout.pairs.time_index)[k]] - sc.shift[0]) / sc.scale[0];
  }
  std::vector<double> mul, add;
  for (std::size_t k = 1; k < sc.width(); ++k) {
    mul.push_back(1.0 / sc.scale[k]);
    add.push_back(-sc.shift[k] / sc.scale[k]);
  }
  const diff::NodeId parts[2] = {tape.constant(std::move(tcol)), tape.scale_cols(y.id, mul, add)};
  return {&tape, tape.concat_cols(parts)};
}

Matrix assemble_fake(const WganPair& pair, const emulator::Emulator& em, std::size_t n,
                     std::span<const double> times, std::uint64_t seed) {
  Rng rng(seed);
  return fake_points(pair, em, draw_latents(n, pair.noise_dim, rng), fake_layout(times, n));
}

Var gradient_penalty(diff::Tape& tape, const Critic& critic, const Matrix& real,
                     const Matrix& fake, Rng& rng) {
  if (real.rows == 0) throw ShapeError("gradient_penalty: empty real batch");
  if (real.cols != fake.cols) throw ShapeError("gradient_penalty: point widths differ");
  if (fake.rows < real.rows) {
    throw ShapeError("gradient_penalty: " + std::to_string(fake.rows) + " fake points for " +
                     std::to_string(real.rows) + " real points");
  }
  std::vector<std::size_t> pick(fake.rows);
  std::iota(pick.begin(), pick.end(), 0);
  if (fake.rows > real.rows) {
    for (std::size_t k = 0; k < real.rows; ++k) {
      std::swap(pick[k], pick[k + rng.index(fake.rows - k)]);
    }
  }
  Matrix mixed(real.rows, real.cols);
  for (std::size_t k = 0; k < real.rows; ++k) {
    const double e = rng.uniform();
    for (std::size_t c = 0; c < real.cols; ++c) {
      mixed(k, c) = e * fake(pick[k], c) + (1.0 - e) * real(k, c);
    }
  }
  const diff::NodeId x = tape.leaf(std::move(mixed));
  Var scores = critic({&tape, x});
  Var norm = sqrt(squared_input_gradient(tape, x, scores.id));
  return mean(square(norm - 1.0));
}

std::vector<double> critic_gradient_norms(const DenseNetSpec& spec,
                                          std::span<const double> theta_d, const Matrix& points) {
  if (points.rows == 0) return {};
  diff::Tape tape;
  Var theta{&tape, tape.constant(Matrix::row_vector(theta_d))};
  const diff::NodeId x = tape.leaf(points);
  Var scores = scores_of(spec, theta, {&tape, x});
  Var sq = squared_input_gradient(tape, x, scores.id);
  std::vector<double> out(points.rows);
  for (std::size_t r = 0; r < points.rows; ++r) out[r] = std::sqrt(sq.value()(r, 0));
  return out;
}

CriticLoss loss_discriminator(diff::Tape& tape, const Critic& critic, const Matrix& real,
                              const Matrix& fake, double lambda, Rng& rng) {
  if (real.rows == 0 || fake.rows == 0) throw ShapeError("loss_discriminator: empty point set");
  Var d_real = mean(critic({&tape, tape.constant(real)}));
  Var d_fake = mean(critic({&tape, tape.constant(fake)}));
  Var penalty = gradient_penalty(tape, critic, real, fake, rng);
  CriticLoss out;
  out.total = d_fake - d_real + penalty * lambda;
  out.mean_real = d_real.value().item();
  out.mean_fake = d_fake.value().item();
  out.penalty = penalty.value().item();
  return out;
}

Var loss_generator(const Critic& critic, Var fake) { return -mean(critic(fake)); }

WganPair train_estimator(const rcs::RcsDataset& dataset, const emulator::Emulator& em,
                         const WganConfig& config, const IterationCallback& on_iteration) {
  config.validate();
  dataset.validate();
  if (dataset.state_dim != em.state_dim()) {
    throw ShapeError("dataset state dimension differs from the emulator");
  }
  const rcs::RcsDataset ordered = canonical(dataset);
  const auto [standardized, scaling] = rcs::standardize(ordered);
  const Matrix real = standardized.pooled_points();
  const std::size_t T = ordered.times.size();
  const std::size_t N =
      config.fake_count > 0 ? config.fake_count : parity_fake_count(real.rows, T);
  if (N * T < real.rows) {
    throw ConfigError("wgan config: fake volume " + std::to_string(N * T) +
                      " is smaller than the " + std::to_string(real.rows) + " real points");
  }

  WganPair pair = make_pair(config, em.param_range(), scaling);
  check_emulator(pair, em);
  const FakeLayout layout = fake_layout(ordered.times, N);
  nn::Adam adam_g(config.adam, pair.theta_g.size());
  nn::Adam adam_d(config.adam, pair.theta_d.size());
  Rng latent_rng(substream_seed(config.seed, 2));
  Rng penalty_rng(substream_seed(config.seed, 3));

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Matrix fake;
    CriticLoss last{};
    double critic_loss = 0.0;
    for (std::size_t step = 0; step < config.critic_steps; ++step) {
      if (step == 0 || config.redraw_each_critic_step) {
        fake = fake_points(pair, em, draw_latents(N, pair.noise_dim, latent_rng), layout);
      }
      diff::Tape tape;
      Var theta{&tape, tape.leaf(Matrix::row_vector(pair.theta_d))};
      last = loss_discriminator(tape, tape_critic(pair.critic_spec, theta), real, fake,
                                config.lambda, penalty_rng);
      critic_loss = last.total.value().item();
      if (!std::isfinite(critic_loss)) throw TrainingError("critic loss is not finite", epoch);
      adam_d.step(pair.theta_d, tape.reverse_gradients(last.total.id).wrt(theta.id).data);
    }

    diff::Tape tape;
    Var theta_g{&tape, tape.leaf(Matrix::row_vector(pair.theta_g))};
    Var theta_d{&tape, tape.constant(Matrix::row_vector(pair.theta_d))};
    Var z{&tape, tape.constant(draw_latents(N, pair.noise_dim, latent_rng))};
    Var fake_var = assemble_fake(pair, em, generator_forward(pair, theta_g, z), layout);
    Var g_loss = loss_generator(tape_critic(pair.critic_spec, theta_d), fake_var);
    const double generator_loss = g_loss.value().item();
    if (!std::isfinite(generator_loss)) throw TrainingError("generator loss is not finite", epoch);
    adam_g.step(pair.theta_g, tape.reverse_gradients(g_loss.id).wrt(theta_g.id).data);

    pair.history.critic.push_back(critic_loss);
    pair.history.generator.push_back(generator_loss);
    pair.history.gap.push_back(last.mean_real - last.mean_fake);
    if (on_iteration) {
      on_iteration({epoch, critic_loss, generator_loss, last.mean_real - last.mean_fake});
    }
  }
  return pair;
}

Matrix sample_posterior(const WganPair& pair, std::size_t n, std::uint64_t seed) {
  if (n == 0) return Matrix(0, pair.param_dim());
  Rng rng(seed);
  diff::Tape tape;
  Var theta{&tape, tape.constant(Matrix::row_vector(pair.theta_g))};
  Var z{&tape, tape.constant(draw_latents(n, pair.noise_dim, rng))};
  return generator_forward(pair, theta, z).value();
}

std::vector<double> interpolated_gradient_norms(const WganPair& pair, const emulator::Emulator& em,
                                                const rcs::RcsDataset& dataset,
                                                std::size_t count, std::uint64_t seed) {
  check_emulator(pair, em);
  const Matrix real = pair.scaling.apply(canonical(dataset)).pooled_points();
  if (real.rows == 0) throw ShapeError("interpolated_gradient_norms: empty dataset");
  Rng rng(seed);
  const std::size_t N = parity_fake_count(real.rows, dataset.times.size());
  const FakeLayout layout = fake_layout(dataset.times, N);
  Matrix points(count, real.cols);
  Matrix fake;
  for (std::size_t k = 0; k < count; ++k) {
    if (k % real.rows == 0) fake = fake_points(pair, em, draw_latents(N, pair.noise_dim, rng), layout);
    const std::size_t j = rng.index(real.rows);
    const std::size_t i = rng.index(fake.rows);
    const double e = rng.uniform();
    for (std::size_t c = 0; c < real.cols; ++c) {
      points(k, c) = e * fake(i, c) + (1.0 - e) * real(j, c);
    }
  }
  return critic_gradient_norms(pair.critic_spec, pair.theta_d, points);
}

// ---- checkpoints -------------------------------------------------------------

void save_pair(const WganPair& pair, std::ostream& out) {
  binio::put_magic(out, kMagic);
  binio::put_u32(out, kVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(nn::Activation::Tanh));
  binio::put_u64(out, pair.seed);
  binio::put_u32(out, pair.noise_dim);
  binio::put_sizes(out, pair.generator_spec.layer_sizes());
  binio::put_sizes(out, pair.critic_spec.layer_sizes());
  binio::put_u32(out, pair.param_dim());
  binio::put_u32(out, pair.scaling.width());
  binio::put_u64(out, pair.history.critic.size());
  binio::put_f64s(out, pair.param_range.low);
  binio::put_f64s(out, pair.param_range.high);
  binio::put_f64s(out, pair.scaling.shift);
  binio::put_f64s(out, pair.scaling.scale);
  binio::put_f64s(out, pair.theta_g);
  binio::put_f64s(out, pair.theta_d);
  binio::put_f64s(out, pair.history.critic);
  binio::put_f64s(out, pair.history.generator);
  binio::put_f64s(out, pair.history.gap);
  if (!out) throw IoError("failed writing estimator checkpoint");
}

void save_pair(const WganPair& pair, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_pair(pair, out);
}

WganPair load_pair(std::istream& in) {
  binio::expect_magic(in, kMagic);
  const auto version = binio::get_u32(in);
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  if (binio::get_u32(in) != static_cast<std::uint32_t>(nn::Activation::Tanh)) {
    throw IoError("unsupported activation in checkpoint");
  }
  WganPair pair;
  pair.seed = binio::get_u64(in);
  pair.noise_dim = binio::get_u32(in);
  auto to_spec = [](const std::vector<std::size_t>& sizes) {
    if (sizes.size() < 2) throw IoError("checkpoint network needs input and output sizes");
    DenseNetSpec s;
    s.input_dim = sizes.front();
    s.output_dim = sizes.back();
    s.hidden_widths.assign(sizes.begin() + 1, sizes.end() - 1);
    return s;
  };
  pair.generator_spec = to_spec(binio::get_sizes(in));
  pair.critic_spec = to_spec(binio::get_sizes(in));
  const std::size_t np = binio::get_u32(in);
  const std::size_t width = binio::get_u32(in);
  const std::size_t history = binio::get_u64(in);
  pair.param_range.low = binio::get_f64s(in, np);
  pair.param_range.high = binio::get_f64s(in, np);
  pair.scaling.shift = binio::get_f64s(in, width);
  pair.scaling.scale = binio::get_f64s(in, width);
  if (pair.generator_spec.input_dim != pair.noise_dim || pair.generator_spec.output_dim != np ||
      pair.critic_spec.input_dim != width || pair.critic_spec.output_dim != 1) {
    throw IoError("checkpoint network shapes are inconsistent");
  }
  pair.theta_g = binio::get_f64s(in, pair.generator_spec.param_count());
  pair.theta_d = binio::get_f64s(in, pair.critic_spec.param_count());
  pair.history.critic = binio::get_f64s(in, history);
  pair.history.generator = binio::get_f64s(in, history);
  pair.history.gap = binio::get_f64s(in, history);
  return pair;
}

WganPair load_pair(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return load_pair(in);
}

}  // namespace eidgm::estimator
