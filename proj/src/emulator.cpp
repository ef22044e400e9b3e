#include "eidgm/emulator.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "eidgm/errors.hpp"

namespace eidgm::emulator {
namespace {

using diff::Var;

DenseNetSpec spec_from_sizes(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) throw IoError("network needs at least input and output sizes");
  DenseNetSpec s;
  s.input_dim = sizes.front();
  s.output_dim = sizes.back();
  s.hidden_widths.assign(sizes.begin() + 1, sizes.end() - 1);
  return s;
}

constexpr char kMagic[9] = "EIDGMEMU";
constexpr std::uint32_t kVersion = 1;

}  // namespace

// ---- ranges, kinds, pairs --------------------------------------------------

std::string to_string(EmulatorKind kind) {
  return kind == EmulatorKind::HyperPinn ? "hyperpinn" : "deeponet";
}

EmulatorKind kind_from_string(const std::string& name) {
  if (name == "hyperpinn") return EmulatorKind::HyperPinn;
  if (name == "deeponet") return EmulatorKind::DeepOnet;
  throw ConfigError("unknown emulator kind '" + name + "'");
}

PairIndex PairIndex::grid(std::size_t n_params, std::size_t n_times) {
  std::vector<std::uint32_t> pi(n_params * n_times), ti(n_params * n_times);
  for (std::size_t i = 0; i < n_params; ++i) {
    for (std::size_t r = 0; r < n_times; ++r) {
      pi[i * n_times + r] = static_cast<std::uint32_t>(i);
      ti[i * n_times + r] = static_cast<std::uint32_t>(r);
    }
  }
  return from(std::move(pi), std::move(ti), n_params);
}

PairIndex PairIndex::from(std::vector<std::uint32_t> param_index,
                          std::vector<std::uint32_t> time_index, std::size_t n_params) {
  if (param_index.size() != time_index.size()) throw ShapeError("pair index length mismatch");
  PairIndex p;
  auto shared_params = std::make_shared<const std::vector<std::uint32_t>>(std::move(param_index));
  p.groups = kernels::GroupIndex::build(*shared_params, n_params);
  p.param_index = std::move(shared_params);
  p.time_index = std::make_shared<const std::vector<std::uint32_t>>(std::move(time_index));
  return p;
}

PairBatch make_batch(diff::Tape& tape, Var weights, const Matrix& params,
                     std::span<const double> times, const PairIndex& pairs, bool times_as_leaf) {
  PairBatch b;
  b.weights = weights;
  b.params = {&tape, tape.constant(params)};
  const Matrix tcol = Matrix::column(times);
  b.times = {&tape, times_as_leaf ? tape.leaf(tcol) : tape.constant(tcol)};
  b.groups = pairs.groups;
  b.param_index = pairs.param_index;
  b.time_index = pairs.time_index;
  return b;
}

// ---- shared emulator behaviour ---------------------------------------------

Emulator::Emulator(ParamRange range, double t_begin, double t_end, std::size_t state_dim)
    : range_(std::move(range)),
      t_begin_(t_begin),
      t_end_(t_end),
      out_shift_(state_dim, 0.0),
      out_scale_(state_dim, 1.0) {
  range_.validate();
  if (!(t_end > t_begin)) throw DomainError("emulator time interval must have t_end > t_begin");
  if (state_dim == 0) throw ShapeError("state dimension must be positive");
}

void Emulator::set_output_normalization(std::vector<double> shift, std::vector<double> scale) {
  if (shift.size() != state_dim() || scale.size() != state_dim()) {
    throw ShapeError("output normalization length mismatch");
  }
  out_shift_ = std::move(shift);
  out_scale_ = std::move(scale);
}

Var Emulator::normalized_params(Var params) const {
  const std::size_t n = range_.dim();
  std::vector<double> mul(n), add(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = range_.high[i] - range_.low[i];
    mul[i] = 2.0 / w;
    add[i] = -(range_.high[i] + range_.low[i]) / w;
  }
  return {params.tape, params.tape->scale_cols(params.id, mul, add)};
}

Var Emulator::normalized_times(Var times) const {
  const double w = t_end_ - t_begin_;
  return {times.tape, times.tape->scale_cols(times.id, {2.0 / w}, {-(t_end_ + t_begin_) / w})};
}

Var Emulator::denormalized_outputs(Var out) const {
  return {out.tape, out.tape->scale_cols(out.id, out_scale_, out_shift_)};
}

Matrix Emulator::predict(const Matrix& params, std::span<const double> times) const {
  if (params.cols != param_dim()) throw ShapeError("predict: parameter width mismatch");
  diff::Tape tape;
  Var w{&tape, tape.constant(Matrix::row_vector(weights_))};
  const PairBatch batch = make_batch(tape, w, params, times, PairIndex::grid(params.rows, times.size()));
  return forward(batch).value();
}

std::vector<double> Emulator::predict(std::span<const double> p, double t) const {
  const double tt[1] = {t};
  const Matrix out = predict(Matrix::row_vector(p), tt);
  return out.data;
}

// ---- HyperPINN ---------------------------------------------------------------

HyperPinn::HyperPinn(DenseNetSpec hyper_spec, DenseNetSpec main_spec, ParamRange range,
                     double t_begin, double t_end)
    : Emulator(std::move(range), t_begin, t_end, main_spec.output_dim),
      hyper_spec_(std::move(hyper_spec)),
      main_spec_(std::move(main_spec)) {
  hyper_spec_.validate();
  main_spec_.validate();
  if (main_spec_.input_dim != 1) throw ShapeError("main network input must be time only");
  if (hyper_spec_.input_dim != range_.dim()) {
    throw ShapeError("hypernetwork input dim " + std::to_string(hyper_spec_.input_dim) +
                     " != parameter dim " + std::to_string(range_.dim()));
  }
  if (hyper_spec_.output_dim != main_param_count(main_spec_)) {
    throw ShapeError("hypernetwork emits " + std::to_string(hyper_spec_.output_dim) +
                     " values but the main network has " +
                     std::to_string(main_param_count(main_spec_)) + " parameters");
  }
  weights_.assign(hyper_spec_.param_count(), 0.0);
}

void HyperPinn::init_weights(std::uint64_t seed) {
  Rng rng(seed);
  // Small final layer: the emitted main network starts close to linear.
  weights_ = nn::init_weights(hyper_spec_, rng, 0.01);
  seed_ = seed;
}

Var HyperPinn::forward(const PairBatch& batch) const {
  Var theta_m = nn::dense_forward(hyper_spec_, batch.weights, normalized_params(batch.params));
  Var tn = normalized_times(batch.times);
  Var x{tn.tape, tn.tape->gather_rows(tn.id, batch.time_index)};
  Var out = nn::grouped_dense_forward(main_spec_, theta_m, x, batch.groups);
  return denormalized_outputs(out);
}

std::vector<double> HyperPinn::hyper_forward(std::span<const double> p) const {
  if (p.size() != param_dim()) throw ShapeError("hyper_forward: parameter dimension mismatch");
  Matrix pn(1, p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double w = range_.high[i] - range_.low[i];
    pn(0, i) = p[i] * (2.0 / w) + (-(range_.high[i] + range_.low[i]) / w);
  }
  return nn::dense_apply(hyper_spec_, weights_, pn).data;
}

std::size_t main_param_count(const DenseNetSpec& spec) { return spec.param_count(); }

std::vector<double> main_forward(std::span<const double> theta_m, double t,
                                 const DenseNetSpec& main_spec) {
  return nn::dense_apply(main_spec, theta_m, Matrix::scalar(t)).data;
}

// ---- DeepONet ----------------------------------------------------------------

DeepOnet::DeepOnet(DenseNetSpec branch_spec, DenseNetSpec trunk_spec, std::size_t latent_dim,
                   ParamRange range, double t_begin, double t_end, std::size_t state_dim)
    : Emulator(std::move(range), t_begin, t_end, state_dim),
      branch_spec_(std::move(branch_spec)),
      trunk_spec_(std::move(trunk_spec)),
      latent_dim_(latent_dim) {
  branch_spec_.validate();
  trunk_spec_.validate();
  if (latent_dim_ == 0) throw ShapeError("DeepONet latent width must be positive");
  if (branch_spec_.input_dim != range_.dim() || trunk_spec_.input_dim != 1) {
    throw ShapeError("DeepONet branch takes parameters, trunk takes time");
  }
  if (branch_spec_.output_dim != latent_dim_ * state_dim ||
      trunk_spec_.output_dim != latent_dim_ * state_dim) {
    throw ShapeError("DeepONet branch/trunk outputs must equal latent_dim x state_dim");
  }
  weights_.assign(weight_count(), 0.0);
}

std::size_t DeepOnet::weight_count() const {
  return branch_spec_.param_count() + trunk_spec_.param_count() + state_dim();
}

void DeepOnet::init_weights(std::uint64_t seed) {
  Rng rng(seed);
  auto branch = nn::init_weights(branch_spec_, rng);
  auto trunk = nn::init_weights(trunk_spec_, rng);
  weights_.clear();
  weights_.insert(weights_.end(), branch.begin(), branch.end());
  weights_.insert(weights_.end(), trunk.begin(), trunk.end());
  weights_.insert(weights_.end(), state_dim(), 0.0);
  seed_ = seed;
}

Var DeepOnet::forward(const PairBatch& batch) const {
  diff::Tape& tape = *batch.weights.tape;
  Var branch = nn::dense_forward(branch_spec_, batch.weights, normalized_params(batch.params), 0);
  Var trunk = nn::dense_forward(trunk_spec_, batch.weights, normalized_times(batch.times),
                                branch_spec_.param_count());
  Var bg{&tape, tape.gather_rows(branch.id, batch.param_index)};
  Var tg{&tape, tape.gather_rows(trunk.id, batch.time_index)};
  Var prod = bg * tg;
  Var inner{&tape, tape.row_sum_blocks(prod.id, latent_dim_)};
  const std::size_t bias_at = branch_spec_.param_count() + trunk_spec_.param_count();
  Var bias{&tape, tape.slice_cols(batch.weights.id, bias_at, state_dim())};
  Var bias_rows{&tape, tape.broadcast_rows(bias.id, batch.size())};
  return denormalized_outputs(inner + bias_rows);
}

// ---- losses --------------------------------------------------------------------

Var loss_data_disc(Var predictions, const Matrix& targets) {
  const Matrix& pv = predictions.value();
  if (!pv.same_shape(targets)) {
    throw ShapeError("loss_data_disc: predictions and targets differ in shape");
  }
  if (pv.rows == 0) throw ShapeError("loss_data_disc: empty batch");
  diff::Tape& tape = *predictions.tape;
  Var target{&tape, tape.constant(targets)};
  return sum(square(predictions - target)) * (1.0 / static_cast<double>(pv.rows));
}

Var loss_physics_disc(const Emulator& em, const PairBatch& batch, const odes::OdeSystem& system) {
  if (!system.has_tape_rhs()) {
    throw ContractError("physics loss requires a system with a tape right-hand side");
  }
  if (system.state_dim != em.state_dim() || system.param_dim != em.param_dim()) {
    throw ShapeError("physics loss: system and emulator dimensions differ");
  }
  diff::Tape& tape = *batch.weights.tape;
  if (!tape.is_leaf(batch.times.id)) {
    throw ContractError("physics loss: collocation times must be a leaf");
  }
  if (batch.size() == 0) throw ShapeError("physics loss: empty batch");

  Var pred = em.forward(batch);
  const diff::NodeId outs[1] = {pred.id};
  Var dpred{&tape, tape.forward_tangent(batch.times.id, outs)[0].tangent};

  Var p_rows{&tape, tape.gather_rows(batch.params.id, batch.param_index)};
  Var t_rows{&tape, tape.gather_rows(batch.times.id, batch.time_index)};
  std::vector<Var> y, p;
  for (std::size_t k = 0; k < system.state_dim; ++k) y.push_back(column(pred, k));
  for (std::size_t k = 0; k < system.param_dim; ++k) p.push_back(column(p_rows, k));
  const std::vector<Var> f = system.tape_rhs(y, p, t_rows);

  Var total = sum(square(column(dpred, 0) - f[0]));
  for (std::size_t k = 1; k < system.state_dim; ++k) {
    total = total + sum(square(column(dpred, k) - f[k]));
  }
  return total * (1.0 / static_cast<double>(batch.size()));
}

LossTerms total_loss(const Emulator& em, const odes::OdeSystem& system,
                     const PairBatch& data_batch, const Matrix& data_targets,
                     const PairBatch* collocation_batch, double alpha, double beta) {
  LossTerms terms;
  Var data = loss_data_disc(em.forward(data_batch), data_targets);
  terms.data = data.value().item();
  terms.total = data * alpha;
  if (beta != 0.0) {
    if (collocation_batch == nullptr) throw ContractError("total_loss: beta > 0 needs collocation pairs");
    Var phys = loss_physics_disc(em, *collocation_batch, system);
    terms.physics = phys.value().item();
    terms.physics_evaluated = true;
    terms.total = terms.total + phys * beta;
  }
  return terms;
}

// ---- training ------------------------------------------------------------------

void EmulatorTrainingConfig::validate() const {
  if (n_params < 1 || t_obs < 1 || t_col < 1 || epochs < 1 || batch_size < 1) {
    throw ConfigError("emulator config: N_p, T_obs, T_col, epochs and batch size must be >= 1");
  }
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("emulator config: loss weights must be >= 0");
  if (!(t_end > t_begin)) throw ConfigError("emulator config: t_end must exceed t_begin");
  if (!(adam.lr > 0.0)) throw ConfigError("emulator config: learning rate must be positive");
  if (!(lr_final_factor > 0.0 && lr_final_factor <= 1.0)) {
    throw ConfigError("emulator config: lr_final_factor must lie in (0, 1]");
  }
}

std::unique_ptr<Emulator> make_emulator(const Architecture& arch, const ParamRange& range,
                                        std::size_t state_dim, double t_begin, double t_end,
                                        std::uint64_t seed) {
  if (arch.kind == EmulatorKind::HyperPinn) {
    auto main = DenseNetSpec::uniform(1, state_dim, arch.main_width, arch.main_depth);
    auto hyper = DenseNetSpec::uniform(range.dim(), main_param_count(main), arch.hyper_width,
                                       arch.hyper_depth);
    auto em = std::make_unique<HyperPinn>(hyper, main, range, t_begin, t_end);
    em->init_weights(seed);
    return em;
  }
  auto branch = DenseNetSpec::uniform(range.dim(), arch.latent_dim * state_dim,
                                      arch.branch_width, arch.branch_depth);
  auto trunk = DenseNetSpec::uniform(1, arch.latent_dim * state_dim, arch.trunk_width,
                                     arch.trunk_depth);
  auto em = std::make_unique<DeepOnet>(branch, trunk, arch.latent_dim, range, t_begin, t_end,
                                       state_dim);
  em->init_weights(seed);
  return em;
}

std::unique_ptr<Emulator> train_emulator(const odes::OdeSystem& system,
                                         const EmulatorTrainingConfig& config,
                                         const ParamRange& range, const EpochCallback& on_epoch) {
  config.validate();
  range.validate();
  if (range.dim() != system.param_dim) throw ShapeError("parameter range does not match system");
  if (config.y0.size() != system.state_dim) throw ShapeError("initial condition length mismatch");
  if (config.beta > 0.0 && !system.has_tape_rhs()) {
    throw ConfigError("physics weight beta > 0 needs a system with a tape right-hand side");
  }

  // Training distribution D: uniform over the full range.
  Rng sampler(substream_seed(config.seed, 0));
  Matrix params(config.n_params, system.param_dim);
  for (std::size_t j = 0; j < config.n_params; ++j) {
    for (std::size_t k = 0; k < system.param_dim; ++k) {
      params(j, k) = sampler.uniform(range.low[k], range.high[k]);
    }
  }
  const auto obs_times = linspace(config.t_begin, config.t_end, config.t_obs);
  const auto col_times = linspace(config.t_begin, config.t_end, config.t_col);

  const auto trajectories = odes::integrate_batch(
      system, config.t_begin, config.y0, params, obs_times,
      odes::IntegratorOptions{config.rel_tol, config.abs_tol, 1'000'000});
  const std::size_t ny = system.state_dim;
  Matrix targets(config.n_params * config.t_obs, ny);
  for (std::size_t j = 0; j < config.n_params; ++j) {
    for (std::size_t r = 0; r < config.t_obs; ++r) {
      for (std::size_t k = 0; k < ny; ++k) {
        targets(j * config.t_obs + r, k) = trajectories[j].states(r, k);
      }
    }
  }

  std::vector<double> shift(ny, 0.0), scale(ny, 0.0);
  for (std::size_t b = 0; b < targets.rows; ++b) {
    for (std::size_t k = 0; k < ny; ++k) shift[k] += targets(b, k);
  }
  for (auto& s : shift) s /= static_cast<double>(targets.rows);
  for (std::size_t b = 0; b < targets.rows; ++b) {
    for (std::size_t k = 0; k < ny; ++k) scale[k] += std::pow(targets(b, k) - shift[k], 2);
  }
  for (auto& s : scale) {
    s = std::sqrt(s / static_cast<double>(targets.rows));
    if (!(s > 0.0)) s = 1.0;
  }

  auto em = make_emulator(config.architecture, range, ny, config.t_begin, config.t_end,
                          substream_seed(config.seed, 1));
  em->set_output_normalization(shift, scale);
  em->mutable_loss_history().clear();

  nn::Adam adam(config.adam, em->weight_count());
  Rng shuffler(substream_seed(config.seed, 2));

  const std::size_t obs_total = config.n_params * config.t_obs;
  const std::size_t col_total = config.n_params * config.t_col;
  const bool use_physics = config.beta != 0.0;
  const std::size_t batches = std::max<std::size_t>(
      (obs_total + config.batch_size - 1) / config.batch_size,
      use_physics ? (col_total + config.batch_size - 1) / config.batch_size : 1);

  const PairIndex full_obs = PairIndex::grid(config.n_params, config.t_obs);
  const PairIndex full_col = PairIndex::grid(config.n_params, config.t_col);
  std::vector<std::size_t> obs_order(obs_total), col_order(col_total);

  auto chunk = [&](const std::vector<std::size_t>& order, std::size_t n_times, std::size_t b,
                   std::size_t total) {
    const std::size_t begin = total * b / batches;
    const std::size_t end = total * (b + 1) / batches;
    std::vector<std::uint32_t> pi, ti;
    for (std::size_t k = begin; k < end; ++k) {
      pi.push_back(static_cast<std::uint32_t>(order[k] / n_times));
      ti.push_back(static_cast<std::uint32_t>(order[k] % n_times));
    }
    return PairIndex::from(std::move(pi), std::move(ti), config.n_params);
  };

  const double pi = std::acos(-1.0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.lr_final_factor != 1.0) {
      const double progress = config.epochs == 1 ? 1.0
                                                 : static_cast<double>(epoch - 1) /
                                                       static_cast<double>(config.epochs - 1);
      const double f = config.lr_final_factor;
      adam.set_lr(config.adam.lr * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(pi * progress))));
    }
    if (batches > 1) {
      std::iota(obs_order.begin(), obs_order.end(), 0);
      std::iota(col_order.begin(), col_order.end(), 0);
      shuffler.shuffle(obs_order);
      shuffler.shuffle(col_order);
    }
    double epoch_loss = 0.0, epoch_data = 0.0, epoch_phys = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const PairIndex obs_pairs =
          batches == 1 ? full_obs : chunk(obs_order, config.t_obs, b, obs_total);
      Matrix batch_targets(obs_pairs.param_index->size(), ny);
      for (std::size_t k = 0; k < obs_pairs.param_index->size(); ++k) {
        const std::size_t row =
            (*obs_pairs.param_index)[k] * config.t_obs + (*obs_pairs.time_index)[k];
        for (std::size_t d = 0; d < ny; ++d) batch_targets(k, d) = targets(row, d);
      }

      diff::Tape tape;
      Var w{&tape, tape.leaf(Matrix::row_vector(em->weights()))};
      const PairBatch data_batch = make_batch(tape, w, params, obs_times, obs_pairs);
      PairBatch col_batch;
      if (use_physics) {
        const PairIndex col_pairs =
            batches == 1 ? full_col : chunk(col_order, config.t_col, b, col_total);
        col_batch = make_batch(tape, w, params, col_times, col_pairs, true);
      }
      const LossTerms terms = total_loss(*em, system, data_batch, batch_targets,
                                         use_physics ? &col_batch : nullptr, config.alpha,
                                         config.beta);
      const double loss = terms.total.value().item();
      if (!std::isfinite(loss)) throw TrainingError("emulator loss is not finite", epoch);
      const auto grads = tape.reverse_gradients(terms.total.id);
      adam.step(em->mutable_weights(), grads.wrt(w.id).data);
      epoch_loss += loss;
      epoch_data += terms.data;
      epoch_phys += terms.physics;
    }
    const double nb = static_cast<double>(batches);
    em->mutable_loss_history().push_back(epoch_loss / nb);
    if (on_epoch) on_epoch({epoch, epoch_loss / nb, epoch_data / nb, epoch_phys / nb}, *em);
  }
  return em;
}

// ---- persistence -----------------------------------------------------------------

void save_emulator(const Emulator& em, std::ostream& out) {
  binio::put_magic(out, kMagic);
  binio::put_u32(out, kVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(em.kind()));
  binio::put_u32(out, static_cast<std::uint32_t>(nn::Activation::Tanh));
  binio::put_u64(out, em.seed());
  binio::put_u32(out, em.param_dim());
  binio::put_u32(out, em.state_dim());
  if (em.kind() == EmulatorKind::HyperPinn) {
    const auto& h = static_cast<const HyperPinn&>(em);
    binio::put_sizes(out, h.hyper_spec().layer_sizes());
    binio::put_sizes(out, h.main_spec().layer_sizes());
    binio::put_u32(out, 0);
  } else {
    const auto& d = static_cast<const DeepOnet&>(em);
    binio::put_sizes(out, d.branch_spec().layer_sizes());
    binio::put_sizes(out, d.trunk_spec().layer_sizes());
    binio::put_u32(out, d.latent_dim());
  }
  binio::put_u64(out, em.loss_history().size());
  binio::put_u64(out, em.weights().size());
  binio::put_f64(out, em.t_begin());
  binio::put_f64(out, em.t_end());
  binio::put_f64s(out, em.param_range().low);
  binio::put_f64s(out, em.param_range().high);
  binio::put_f64s(out, em.output_shift());
  binio::put_f64s(out, em.output_scale());
  binio::put_f64s(out, em.weights());
  binio::put_f64s(out, em.loss_history());
  if (!out) throw IoError("failed writing emulator");
}

void save_emulator(const Emulator& em, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_emulator(em, out);
}

std::unique_ptr<Emulator> load_emulator(std::istream& in) {
  binio::expect_magic(in, kMagic);
  const auto version = binio::get_u32(in);
  if (version != kVersion) throw IoError("unsupported emulator file version " + std::to_string(version));
  const auto kind = static_cast<EmulatorKind>(binio::get_u32(in));
  if (binio::get_u32(in) != static_cast<std::uint32_t>(nn::Activation::Tanh)) {
    throw IoError("unsupported activation in emulator file");
  }
  const auto seed = binio::get_u64(in);
  const std::size_t np = binio::get_u32(in);
  const std::size_t ny = binio::get_u32(in);
  const auto first = spec_from_sizes(binio::get_sizes(in));
  const auto second = spec_from_sizes(binio::get_sizes(in));
  const std::size_t latent = binio::get_u32(in);
  const std::size_t history_len = binio::get_u64(in);
  const std::size_t weight_len = binio::get_u64(in);
  const double t0 = binio::get_f64(in);
  const double t1 = binio::get_f64(in);
  ParamRange range{binio::get_f64s(in, np), binio::get_f64s(in, np)};
  auto shift = binio::get_f64s(in, ny);
  auto scale = binio::get_f64s(in, ny);

  std::unique_ptr<Emulator> em;
  if (kind == EmulatorKind::HyperPinn) {
    em = std::make_unique<HyperPinn>(first, second, range, t0, t1);
  } else if (kind == EmulatorKind::DeepOnet) {
    em = std::make_unique<DeepOnet>(first, second, latent, range, t0, t1, ny);
  } else {
    throw IoError("unknown emulator kind in file");
  }
  if (weight_len != em->weight_count()) throw IoError("emulator weight count does not match architecture");
  em->set_output_normalization(std::move(shift), std::move(scale));
  em->mutable_weights() = binio::get_f64s(in, weight_len);
  em->mutable_loss_history() = binio::get_f64s(in, history_len);
  em->set_seed(seed);
  return em;
}

std::unique_ptr<Emulator> load_emulator(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open emulator file '" + path + "'");
  return load_emulator(in);
}

// ---- sample-count advisory ---------------------------------------------------------

SampleCountBound required_sample_count(double eps, double delta, std::size_t t_col,
                                       std::span<const std::size_t> hyper_layer_sizes,
                                       double lipschitz_loss, double lipschitz_hyper) {
  if (!(eps > 0.0 && eps <= 1.0) || !(delta > 0.0 && delta < 1.0)) {
    throw DomainError("required_sample_count: need eps in (0, 1] and delta in (0, 1)");
  }
  if (t_col == 0 || !(lipschitz_loss > 0.0) || !(lipschitz_hyper > 0.0)) {
    throw DomainError("required_sample_count: T_col and Lipschitz constants must be positive");
  }
  if (hyper_layer_sizes.size() < 2) throw ShapeError("required_sample_count: need >= 2 layer sizes");
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < hyper_layer_sizes.size(); ++i) {
    if (hyper_layer_sizes[i] == 0 || hyper_layer_sizes[i + 1] == 0) {
      throw DomainError("required_sample_count: layer sizes must be positive");
    }
    count += hyper_layer_sizes[i] * hyper_layer_sizes[i + 1] + hyper_layer_sizes[i + 1];
  }
  const double P = static_cast<double>(count);
  const double arg = eps / (4.0 * lipschitz_loss * lipschitz_hyper * delta * P /
                            static_cast<double>(t_col));
  SampleCountBound b;
  b.weight_count = count;
  b.term1 = 64.0 / (eps * eps) * P * std::log(arg);
  b.term2 = 16.0 / (eps * eps);
  b.vacuous = arg <= 1.0;
  b.n_p_bound = std::max(b.term1, b.term2);
  return b;
}

}  // namespace eidgm::emulator
