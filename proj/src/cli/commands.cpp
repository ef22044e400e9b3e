#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "eidgm/cli.hpp"
#include "eidgm/errors.hpp"
#include "eidgm/evalkit.hpp"
#include "eidgm/rng.hpp"

namespace eidgm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kData = "data.csv";
constexpr const char* kTruth = "true_params.csv";
constexpr const char* kEmulator = "emulator.bin";
constexpr const char* kEmulatorLoss = "emulator_loss.csv";
constexpr const char* kPair = "wgan.bin";
constexpr const char* kPairLoss = "wgan_loss.csv";
constexpr const char* kPosterior = "posterior.csv";
constexpr const char* kMetrics = "metrics.json";

// Writes through a temporary sibling so a failure never leaves a torn file.
template <class Fn>
void write_atomic(const fs::path& path, Fn&& fill) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    fill(out);
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into '" + path.string() + "': " + ec.message());
}

fs::path prepare(const ExperimentConfig& config) {
  const fs::path dir = output_directory(config);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  write_atomic(dir / "config.json", [&](std::ostream& o) { o << to_json(config).dump(2) << '\n'; });
  return dir;
}

void require_file(const fs::path& path, const char* hint) {
  if (!fs::is_regular_file(path)) {
    throw IoError("missing '" + path.string() + "' (run " + hint + " first)");
  }
}

std::vector<rcs::PeakSpec> peak_specs(const ExperimentConfig& c) {
  auto peaks = rcs::default_peaks(c.data.peaks, c.param_range(), c.data.samples_per_peak);
  for (std::size_t h = 0; h < c.data.half_widths.size(); ++h) {
    peaks[h].half_width = c.data.half_widths[h];
  }
  for (const auto& p : peaks) rcs::validate_peak(p, c.param_range());
  return peaks;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::size_t log_every(std::size_t epochs) { return std::max<std::size_t>(1, epochs / 10); }

}  // namespace

int gen_data(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir = prepare(config);
  if (config.system == "custom-csv") {
    const auto data = rcs::ingest_csv(config.data.csv);
    write_atomic(dir / kData, [&](std::ostream& o) { rcs::write_csv(data, o); });
    log << "gen-data: copied " << data.point_count() << " observations at " << data.time_count()
        << " times\n";
    return kOk;
  }
  const auto system = odes::system_by_name(config.model_name());
  const Matrix params = rcs::generate_parameters(peak_specs(config), substream_seed(config.seed, 0));
  const auto data =
      rcs::generate_rcs(system, params, config.data.y0, config.data.times, config.data.t0);
  write_atomic(dir / kTruth, [&](std::ostream& o) { rcs::write_param_csv(params, o); });
  write_atomic(dir / kData, [&](std::ostream& o) { rcs::write_csv(data, o); });
  log << "gen-data: " << params.rows << " parameter vectors, " << data.point_count()
      << " observations -> " << (dir / kData).string() << '\n';
  return kOk;
}

int train_emulator(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir = prepare(config);
  const auto system = odes::system_by_name(config.model_name());
  const auto tc = config.emulator_config();
  std::vector<emulator::EpochReport> reports;
  Stopwatch clock;
  const std::size_t every = log_every(tc.epochs);
  auto em = emulator::train_emulator(
      system, tc, config.param_range(), [&](const emulator::EpochReport& r, const emulator::Emulator&) {
        reports.push_back(r);
        if (r.epoch % every == 0 || r.epoch == tc.epochs) {
          log << "train-emulator: epoch " << r.epoch << " loss " << r.loss << " data " << r.data_loss
              << " physics " << r.physics_loss << " (" << clock.seconds() << " s)\n";
        }
      });
  write_atomic(dir / kEmulatorLoss, [&](std::ostream& o) {
    o << "epoch,loss,data_loss,physics_loss\n";
    for (const auto& r : reports) {
      o << r.epoch << ',' << rcs::format_double(r.loss) << ',' << rcs::format_double(r.data_loss)
        << ',' << rcs::format_double(r.physics_loss) << '\n';
    }
  });
  write_atomic(dir / kEmulator, [&](std::ostream& o) { emulator::save_emulator(*em, o); });
  return kOk;
}

int estimate(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir = output_directory(config);
  require_file(dir / kEmulator, "train-emulator");
  require_file(dir / kData, "gen-data");
  const auto em = emulator::load_emulator((dir / kEmulator).string());
  const auto system = odes::system_by_name(config.model_name());
  if (em->param_dim() != system.param_dim || em->state_dim() != system.state_dim) {
    throw ConfigError("estimate: emulator dimensions do not match the '" + system.name + "' model");
  }
  const auto data = rcs::ingest_csv((dir / kData).string());
  prepare(config);

  const auto wc = config.wgan_config();
  Stopwatch clock;
  const std::size_t every = log_every(wc.epochs);
  const auto pair = estimator::train_estimator(data, *em, wc, [&](const estimator::IterationReport& r) {
    if (r.epoch % every == 0 || r.epoch == wc.epochs) {
      log << "estimate: epoch " << r.epoch << " critic " << r.critic_loss << " generator "
          << r.generator_loss << " gap " << r.gap << " (" << clock.seconds() << " s)\n";
    }
  });
  const Matrix posterior = estimator::sample_posterior(pair, config.evaluate.posterior_samples,
                                                       substream_seed(config.seed, 3));
  write_atomic(dir / kPairLoss, [&](std::ostream& o) {
    o << "epoch,critic_loss,generator_loss,gap\n";
    for (std::size_t k = 0; k < pair.history.critic.size(); ++k) {
      o << k << ',' << rcs::format_double(pair.history.critic[k]) << ','
        << rcs::format_double(pair.history.generator[k]) << ','
        << rcs::format_double(pair.history.gap[k]) << '\n';
    }
  });
  write_atomic(dir / kPair, [&](std::ostream& o) { estimator::save_pair(pair, o); });
  write_atomic(dir / kPosterior, [&](std::ostream& o) { rcs::write_param_csv(posterior, o); });
  log << "estimate: " << posterior.rows << " posterior draws -> " << (dir / kPosterior).string()
      << '\n';
  return kOk;
}

int evaluate(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir = output_directory(config);
  require_file(dir / kPosterior, "estimate");
  require_file(dir / kData, "gen-data");
  const Matrix posterior = rcs::read_param_csv((dir / kPosterior).string());
  const auto data = rcs::ingest_csv((dir / kData).string());
  fs::path reference = config.evaluate.reference;
  if (reference.empty() && fs::is_regular_file(dir / kTruth)) reference = dir / kTruth;
  prepare(config);

  ordered_json metrics;
  if (!reference.empty()) {
    const Matrix truth = rcs::read_param_csv(reference.string());
    auto report = eval::summed_wasserstein(posterior, truth);
    metrics = ordered_json::parse(report.to_json());
    log << "evaluate: summed W1 " << report.summed_w1 << '\n';
  }
  const auto range = config.param_range();
  for (std::size_t k = 0; k < posterior.cols; ++k) {
    std::vector<double> col(posterior.rows);
    for (std::size_t r = 0; r < posterior.rows; ++r) col[r] = posterior(r, k);
    const auto h = eval::histogram(col, config.evaluate.histogram_bins, range.low[k], range.high[k]);
    write_atomic(dir / ("hist_p" + std::to_string(k + 1) + ".csv"),
                 [&](std::ostream& o) { eval::write_histogram_csv(h, o); });
  }

  const auto system = odes::system_by_name(config.model_name());
  const std::size_t n = std::min(config.evaluate.predictive_samples, posterior.rows);
  Matrix head(n, posterior.cols);
  std::copy_n(posterior.data.begin(), n * posterior.cols, head.data.begin());
  if (n > 0) {
    const auto pred = eval::posterior_predictive(head, system, config.data.y0, data, config.data.t0);
    double sum = 0.0;
    std::size_t cells = 0;
    for (double v : pred.per_time_w1.data) {
      if (std::isfinite(v)) {
        sum += v;
        ++cells;
      }
    }
    metrics["predictive_mean_w1"] = cells ? sum / static_cast<double>(cells) : 0.0;
    metrics["predictive_failures"] = pred.failures;
    write_atomic(dir / "predictive_w1.csv", [&](std::ostream& o) { eval::write_predictive_csv(pred, o); });
    write_atomic(dir / "trajectories.csv",
                 [&](std::ostream& o) { eval::write_trajectories_csv(pred.trajectories, o); });
  }
  metrics["benchmark"] = config.benchmark;
  metrics["system"] = config.system;
  metrics["seed"] = std::to_string(config.seed);
  metrics["scale"] = rcs::format_double(config.scale);
  write_atomic(dir / kMetrics, [&](std::ostream& o) { o << metrics.dump(2) << '\n'; });
  log << "evaluate: metrics -> " << (dir / kMetrics).string() << '\n';
  return kOk;
}

int reproduce(const ExperimentConfig& config, std::ostream& log) {
  for (auto step : {gen_data, train_emulator, estimate, evaluate}) {
    const int rc = step(config, log);
    if (rc != kOk) return rc;
  }
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Parameter distributions of ODE models from repeated cross-sectional data"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  double scale = 0.0;
  std::uint64_t seed = 0;
  std::string benchmark;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment config (JSON)");
    sub->add_option("--set", sets, "Override a config key: dotted.path=value")->take_all();
    sub->add_option("--scale", scale, "Multiplier on epochs and N_p");
    sub->add_option("--seed", seed, "Master seed");
  };
  auto* gen = app.add_subcommand("gen-data", "Write the RCS dataset CSV");
  auto* tre = app.add_subcommand("train-emulator", "Train the solution emulator");
  auto* est = app.add_subcommand("estimate", "Train the WGAN estimator and sample the posterior");
  auto* evl = app.add_subcommand("evaluate", "Metrics, histograms and predictive checks");
  auto* rep = app.add_subcommand("reproduce", "Run all stages for a named benchmark");
  for (auto* s : {gen, tre, est, evl, rep}) add_common(s);
  rep->add_option("benchmark", benchmark, "exp|log|lorenz-uni|bi|tri")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    auto* chosen = app.get_subcommands().front();
    if (chosen != rep && config_path.empty()) throw ConfigError("--config is required");
    ExperimentConfig config = resolve_config(chosen == rep ? benchmark : "", config_path, sets);
    if (chosen->count("--scale") > 0) config.scale = scale;
    if (chosen->count("--seed") > 0) config.seed = seed;
    config.validate();
    if (chosen == gen) return gen_data(config, std::cerr);
    if (chosen == tre) return train_emulator(config, std::cerr);
    if (chosen == est) return estimate(config, std::cerr);
    if (chosen == evl) return evaluate(config, std::cerr);
    return reproduce(config, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "rcs-infer: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const TrainingError& e) {
    std::cerr << "rcs-infer: training failed: " << e.what() << '\n';
    return kTraining;
  } catch (const IoError& e) {
    std::cerr << "rcs-infer: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "rcs-infer: parse error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "rcs-infer: " << e.what() << '\n';
    return kOther;
  }
}

}  // namespace eidgm::cli
