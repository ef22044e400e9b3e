#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "eidgm/cli.hpp"
#include "eidgm/errors.hpp"
#include "eidgm/rng.hpp"

namespace eidgm::cli {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::size_t scaled(std::size_t n, double s) {
  const auto v = static_cast<long long>(std::llround(static_cast<double>(n) * s));
  return v < 1 ? 1 : static_cast<std::size_t>(v);
}

// Recursive merge that refuses keys absent from the target document.
void merge_strict(ordered_json& target, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw ConfigError("config: expected an object at '" + where + "'");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!target.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
    ordered_json& slot = target[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

template <class T>
T get(const ordered_json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: bad value for '" + where + key + "'");
  }
}

ordered_json adam_json(const nn::AdamConfig& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

nn::AdamConfig adam_from(const ordered_json& j, const std::string& where) {
  return {get<double>(j, "lr", where), get<double>(j, "beta1", where),
          get<double>(j, "beta2", where), get<double>(j, "eps", where)};
}

}  // namespace

std::string ExperimentConfig::model_name() const {
  return system == "custom-csv" ? data.model : system;
}

ParamRange ExperimentConfig::param_range() const { return {data.param_low, data.param_high}; }

void ExperimentConfig::validate() const {
  static const std::vector<std::string> systems{"exponential", "logistic", "lorenz", "custom-csv"};
  if (std::find(systems.begin(), systems.end(), system) == systems.end()) {
    throw ConfigError("config: unknown system '" + system + "'");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("config: scale must be > 0");
  if (output_dir.empty()) throw ConfigError("config: output_dir is empty");
  odes::OdeSystem ode;
  try {
    ode = odes::system_by_name(model_name());
  } catch (const std::exception&) {
    throw ConfigError("config: unknown ODE model '" + model_name() + "'");
  }
  if (system == "custom-csv" && data.csv.empty()) {
    throw ConfigError("config: custom-csv needs data.csv");
  }
  if (data.y0.size() != ode.state_dim) throw ConfigError("config: data.y0 has the wrong length");
  try {
    param_range().validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: parameter range: ") + e.what());
  }
  if (param_range().dim() != ode.param_dim) {
    throw ConfigError("config: parameter range has the wrong dimension");
  }
  if (!(emulator.t_end > data.t0)) throw ConfigError("config: emulator.t_end must exceed data.t0");
  if (system != "custom-csv") {
    if (data.times.empty()) throw ConfigError("config: data.times is empty");
    for (std::size_t k = 0; k < data.times.size(); ++k) {
      if (data.times[k] < data.t0 || data.times[k] > emulator.t_end ||
          (k > 0 && !(data.times[k] > data.times[k - 1]))) {
        throw ConfigError("config: data.times must ascend inside [t0, emulator.t_end]");
      }
    }
    if (data.peaks.empty()) throw ConfigError("config: data.peaks is empty");
    if (!data.half_widths.empty() && data.half_widths.size() != data.peaks.size()) {
      throw ConfigError("config: data.half_widths must match data.peaks");
    }
    if (data.samples_per_peak == 0) throw ConfigError("config: data.samples_per_peak must be >= 1");
    for (std::size_t h = 0; h < data.peaks.size(); ++h) {
      if (data.peaks[h].size() != ode.param_dim) throw ConfigError("config: peak has wrong length");
    }
  }
  try {
    emulator_config().validate();
    wgan_config().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (evaluate.posterior_samples == 0 || evaluate.histogram_bins == 0) {
    throw ConfigError("config: evaluate sample and bin counts must be >= 1");
  }
}

emulator::EmulatorTrainingConfig ExperimentConfig::emulator_config() const {
  emulator::EmulatorTrainingConfig c;
  c.architecture = emulator.architecture;
  c.n_params = scaled(emulator.n_params, scale);
  c.t_obs = emulator.t_obs;
  c.t_col = emulator.t_col;
  c.alpha = emulator.alpha;
  c.beta = emulator.beta;
  c.adam = emulator.adam;
  c.lr_final_factor = emulator.lr_final_factor;
  c.batch_size = emulator.batch_size;
  c.epochs = scaled(emulator.epochs, scale);
  c.seed = substream_seed(seed, 1);
  c.t_begin = data.t0;
  c.t_end = emulator.t_end;
  c.y0 = data.y0;
  return c;
}

estimator::WganConfig ExperimentConfig::wgan_config() const {
  estimator::WganConfig c = wgan;
  c.epochs = scaled(wgan.epochs, scale);
  c.seed = substream_seed(seed, 2);
  return c;
}

ordered_json to_json(const ExperimentConfig& c) {
  const auto& a = c.emulator.architecture;
  ordered_json arch{{"kind", a.kind == emulator::EmulatorKind::HyperPinn ? "hyperpinn" : "deeponet"},
                    {"hyper_width", a.hyper_width},   {"hyper_depth", a.hyper_depth},
                    {"main_width", a.main_width},     {"main_depth", a.main_depth},
                    {"branch_width", a.branch_width}, {"branch_depth", a.branch_depth},
                    {"trunk_width", a.trunk_width},   {"trunk_depth", a.trunk_depth},
                    {"latent_dim", a.latent_dim}};
  ordered_json j;
  j["benchmark"] = c.benchmark;
  j["system"] = c.system;
  j["seed"] = c.seed;
  j["scale"] = c.scale;
  j["output_dir"] = c.output_dir;
  j["data"] = {{"csv", c.data.csv},
               {"model", c.data.model},
               {"y0", c.data.y0},
               {"t0", c.data.t0},
               {"times", c.data.times},
               {"param_low", c.data.param_low},
               {"param_high", c.data.param_high},
               {"peaks", c.data.peaks},
               {"half_widths", c.data.half_widths},
               {"samples_per_peak", c.data.samples_per_peak}};
  j["emulator"] = {{"architecture", arch},
                   {"n_params", c.emulator.n_params},
                   {"t_obs", c.emulator.t_obs},
                   {"t_col", c.emulator.t_col},
                   {"alpha", c.emulator.alpha},
                   {"beta", c.emulator.beta},
                   {"adam", adam_json(c.emulator.adam)},
                   {"lr_final_factor", c.emulator.lr_final_factor},
                   {"batch_size", c.emulator.batch_size},
                   {"epochs", c.emulator.epochs},
                   {"t_end", c.emulator.t_end}};
  j["wgan"] = {{"noise_dim", c.wgan.noise_dim},
               {"generator_width", c.wgan.generator_width},
               {"generator_depth", c.wgan.generator_depth},
               {"critic_width", c.wgan.critic_width},
               {"critic_depth", c.wgan.critic_depth},
               {"lambda", c.wgan.lambda},
               {"adam", adam_json(c.wgan.adam)},
               {"epochs", c.wgan.epochs},
               {"critic_steps", c.wgan.critic_steps},
               {"fake_count", c.wgan.fake_count},
               {"redraw_each_critic_step", c.wgan.redraw_each_critic_step}};
  j["evaluate"] = {{"posterior_samples", c.evaluate.posterior_samples},
                   {"histogram_bins", c.evaluate.histogram_bins},
                   {"predictive_samples", c.evaluate.predictive_samples},
                   {"reference", c.evaluate.reference}};
  return j;
}

ExperimentConfig from_json(const json& patch, const ExperimentConfig& base) {
  ordered_json d = to_json(base);
  merge_strict(d, patch, "");
  ExperimentConfig c;
  c.benchmark = get<std::string>(d, "benchmark", "");
  c.system = get<std::string>(d, "system", "");
  c.seed = get<std::uint64_t>(d, "seed", "");
  c.scale = get<double>(d, "scale", "");
  c.output_dir = get<std::string>(d, "output_dir", "");

  const auto& dj = d["data"];
  c.data.csv = get<std::string>(dj, "csv", "data.");
  c.data.model = get<std::string>(dj, "model", "data.");
  c.data.y0 = get<std::vector<double>>(dj, "y0", "data.");
  c.data.t0 = get<double>(dj, "t0", "data.");
  c.data.times = get<std::vector<double>>(dj, "times", "data.");
  c.data.param_low = get<std::vector<double>>(dj, "param_low", "data.");
  c.data.param_high = get<std::vector<double>>(dj, "param_high", "data.");
  c.data.peaks = get<std::vector<std::vector<double>>>(dj, "peaks", "data.");
  c.data.half_widths = get<std::vector<std::vector<double>>>(dj, "half_widths", "data.");
  c.data.samples_per_peak = get<std::size_t>(dj, "samples_per_peak", "data.");

  const auto& ej = d["emulator"];
  const auto& aj = ej["architecture"];
  auto& a = c.emulator.architecture;
  try {
    a.kind = emulator::kind_from_string(get<std::string>(aj, "kind", "emulator.architecture."));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config: emulator.architecture.kind must be hyperpinn or deeponet");
  }
  const std::string aw = "emulator.architecture.";
  a.hyper_width = get<std::size_t>(aj, "hyper_width", aw);
  a.hyper_depth = get<std::size_t>(aj, "hyper_depth", aw);
  a.main_width = get<std::size_t>(aj, "main_width", aw);
  a.main_depth = get<std::size_t>(aj, "main_depth", aw);
  a.branch_width = get<std::size_t>(aj, "branch_width", aw);
  a.branch_depth = get<std::size_t>(aj, "branch_depth", aw);
  a.trunk_width = get<std::size_t>(aj, "trunk_width", aw);
  a.trunk_depth = get<std::size_t>(aj, "trunk_depth", aw);
  a.latent_dim = get<std::size_t>(aj, "latent_dim", aw);
  c.emulator.n_params = get<std::size_t>(ej, "n_params", "emulator.");
  c.emulator.t_obs = get<std::size_t>(ej, "t_obs", "emulator.");
  c.emulator.t_col = get<std::size_t>(ej, "t_col", "emulator.");
  c.emulator.alpha = get<double>(ej, "alpha", "emulator.");
  c.emulator.beta = get<double>(ej, "beta", "emulator.");
  c.emulator.adam = adam_from(ej["adam"], "emulator.adam.");
  c.emulator.lr_final_factor = get<double>(ej, "lr_final_factor", "emulator.");
  c.emulator.batch_size = get<std::size_t>(ej, "batch_size", "emulator.");
  c.emulator.epochs = get<std::size_t>(ej, "epochs", "emulator.");
  c.emulator.t_end = get<double>(ej, "t_end", "emulator.");

  const auto& wj = d["wgan"];
  c.wgan.noise_dim = get<std::size_t>(wj, "noise_dim", "wgan.");
  c.wgan.generator_width = get<std::size_t>(wj, "generator_width", "wgan.");
  c.wgan.generator_depth = get<std::size_t>(wj, "generator_depth", "wgan.");
  c.wgan.critic_width = get<std::size_t>(wj, "critic_width", "wgan.");
  c.wgan.critic_depth = get<std::size_t>(wj, "critic_depth", "wgan.");
  c.wgan.lambda = get<double>(wj, "lambda", "wgan.");
  c.wgan.adam = adam_from(wj["adam"], "wgan.adam.");
  c.wgan.epochs = get<std::size_t>(wj, "epochs", "wgan.");
  c.wgan.critic_steps = get<std::size_t>(wj, "critic_steps", "wgan.");
  c.wgan.fake_count = get<std::size_t>(wj, "fake_count", "wgan.");
  c.wgan.redraw_each_critic_step = get<bool>(wj, "redraw_each_critic_step", "wgan.");

  const auto& vj = d["evaluate"];
  c.evaluate.posterior_samples = get<std::size_t>(vj, "posterior_samples", "evaluate.");
  c.evaluate.histogram_bins = get<std::size_t>(vj, "histogram_bins", "evaluate.");
  c.evaluate.predictive_samples = get<std::size_t>(vj, "predictive_samples", "evaluate.");
  c.evaluate.reference = get<std::string>(vj, "reference", "evaluate.");
  return c;
}

std::vector<std::string> benchmark_names() {
  std::vector<std::string> names;
  for (const char* s : {"exp", "log", "lorenz"}) {
    for (const char* m : {"uni", "bi", "tri"}) names.push_back(std::string(s) + "-" + m);
  }
  return names;
}

ExperimentConfig preset(const std::string& benchmark) {
  const auto dash = benchmark.find('-');
  const std::string family = benchmark.substr(0, dash);
  const std::string modes = dash == std::string::npos ? "" : benchmark.substr(dash + 1);
  const int h = modes == "uni" ? 1 : modes == "bi" ? 2 : modes == "tri" ? 3 : 0;
  if (h == 0 || (family != "exp" && family != "log" && family != "lorenz")) {
    throw ConfigError("unknown benchmark '" + benchmark + "'");
  }
  ExperimentConfig c;
  c.benchmark = benchmark;
  c.output_dir = "runs/" + benchmark;
  // desk-scale emulator optimizer: higher rate with cosine decay, smaller mini-batches
  c.emulator.adam.lr = 1e-3;
  c.emulator.lr_final_factor = 0.01;
  c.emulator.batch_size = 1250;
  auto& d = c.data;
  if (family == "exp") {
    c.system = "exponential";
    d.y0 = {1.0};
    d.times = {0.0, 0.25, 0.5, 0.75, 1.0};
    d.param_low = {0.5};
    d.param_high = {3.5};
    d.peaks = h == 1 ? std::vector<std::vector<double>>{{1.0}}
              : h == 2 ? std::vector<std::vector<double>>{{1.0}, {3.0}}
                       : std::vector<std::vector<double>>{{1.0}, {2.0}, {3.0}};
    c.emulator.n_params = 100;
    c.emulator.t_end = 1.0;
    c.wgan.epochs = 50'000;
  } else if (family == "log") {
    c.system = "logistic";
    d.y0 = {1e-5};
    d.times = {0.0, 0.5, 1.0, 1.5, 2.0};
    d.param_low = {1.0, 0.2};
    d.param_high = {5.0, 1.5};
    d.peaks = h == 1   ? std::vector<std::vector<double>>{{2.8, 1.0}}
              : h == 2 ? std::vector<std::vector<double>>{{1.6, 0.6}, {4.0, 1.4}}
                       : std::vector<std::vector<double>>{{1.6, 0.6}, {4.0, 0.9}, {2.0, 1.3}};
    c.emulator.n_params = 200;
    c.emulator.t_end = 2.0;
    c.wgan.epochs = 50'000;
  } else {
    c.system = "lorenz";
    d.y0 = {4.67, 5.49, 9.06};
    d.times = linspace(0.0, 1.0, 12);
    d.param_low = {9.0, 0.0, 2.0 / 3.0};
    d.param_high = {11.0, 28.0, 8.0 / 3.0};
    d.peaks = h == 1   ? std::vector<std::vector<double>>{{9.5, 27.0, 5.0 / 3.0}}
              : h == 2 ? std::vector<std::vector<double>>{{10.5, 18.0, 1.0}, {10.0, 24.75, 7.0 / 3.0}}
                       : std::vector<std::vector<double>>{{10.5, 18.0, 1.0},
                                                          {9.5, 27.0, 5.0 / 3.0},
                                                          {11.0, 24.75, 7.0 / 3.0}};
    d.samples_per_peak = 9;
    c.emulator.n_params = 1000;
    c.emulator.t_end = 1.0;
    c.emulator.beta = 0.0;
    c.emulator.architecture.main_width = 64;
    c.wgan.generator_width = 128;
    c.wgan.critic_width = 128;
    c.wgan.noise_dim = 32;
    c.wgan.epochs = 100'000;
    // three times as many fake points as real ones
    c.wgan.fake_count = 3 * d.samples_per_peak * static_cast<std::size_t>(h);
  }
  return c;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("--set: malformed key '" + path + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

ExperimentConfig resolve_config(const std::string& benchmark, const std::string& path,
                                const std::vector<std::string>& overrides) {
  json patch = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    try {
      patch = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
  }
  for (const auto& s : overrides) apply_override(patch, s);
  std::string name = benchmark;
  if (name.empty() && patch.is_object() && patch.contains("benchmark") &&
      patch["benchmark"].is_string()) {
    name = patch["benchmark"].get<std::string>();
  }
  const ExperimentConfig base = name.empty() ? ExperimentConfig{} : preset(name);
  if (!benchmark.empty() && patch.is_object()) patch["benchmark"] = benchmark;
  return from_json(patch, base);
}

std::filesystem::path output_directory(const ExperimentConfig& config) {
  std::filesystem::path dir(config.output_dir);
  const char* root = std::getenv("RCS_INFER_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && dir.is_relative()) return std::filesystem::path(root) / dir;
  return dir;
}

}  // namespace eidgm::cli
