#pragma once

// Config-driven pipeline front end: data generation, emulator training,
// estimation, evaluation and named benchmark reproduction.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "eidgm/emulator.hpp"
#include "eidgm/estimator.hpp"
#include "eidgm/param_range.hpp"
#include "eidgm/rcsdata.hpp"
#include "json.hpp"

namespace eidgm::cli {

enum ExitCode : int { kOk = 0, kOther = 1, kConfig = 2, kTraining = 3, kIo = 4 };

struct DataConfig {
  /// Only for system "custom-csv": dataset path and the ODE model to fit.
  std::string csv;
  std::string model;
  std::vector<double> y0;
  double t0 = 0.0;
  std::vector<double> times;
  std::vector<double> param_low;
  std::vector<double> param_high;
  std::vector<std::vector<double>> peaks;
  /// Per-peak half widths; empty means 5% of each range dimension.
  std::vector<std::vector<double>> half_widths;
  std::size_t samples_per_peak = 12;
};

struct EmulatorSection {
  emulator::Architecture architecture;
  std::size_t n_params = 100;
  std::size_t t_obs = 100;
  std::size_t t_col = 100;
  double alpha = 1.0;
  double beta = 1e-2;
  nn::AdamConfig adam{5e-5, 0.9, 0.999, 1e-8};
  double lr_final_factor = 1.0;
  std::size_t batch_size = 10'000;
  std::size_t epochs = 10'000;
  double t_end = 1.0;
};

struct EvaluateSection {
  std::size_t posterior_samples = 10'000;
  std::size_t histogram_bins = 50;
  std::size_t predictive_samples = 1'000;
  /// Optional reference parameter CSV; synthetic runs use the generating set.
  std::string reference;
};

struct ExperimentConfig {
  std::string benchmark;
  std::string system = "exponential";
  std::uint64_t seed = 0;
  double scale = 1.0;
  std::string output_dir = "runs/default";
  DataConfig data;
  EmulatorSection emulator;
  estimator::WganConfig wgan;
  EvaluateSection evaluate;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
  /// The ODE the data are explained with.
  std::string model_name() const;
  ParamRange param_range() const;
  /// Training configs with the scale factor applied and seeds derived.
  emulator::EmulatorTrainingConfig emulator_config() const;
  estimator::WganConfig wgan_config() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& config);
/// Unknown keys are a ConfigError.
ExperimentConfig from_json(const nlohmann::json& j, const ExperimentConfig& base);

std::vector<std::string> benchmark_names();
/// Default settings for a named benchmark; ConfigError when unknown.
ExperimentConfig preset(const std::string& benchmark);

/// Sets a dotted key path, parsing the value as JSON when possible and as a
/// string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Preset (from the file's "benchmark" key or `benchmark`), then file, then
/// overrides. An empty path skips the file.
ExperimentConfig resolve_config(const std::string& benchmark, const std::string& path,
                                const std::vector<std::string>& overrides);

/// Output directory after the RCS_INFER_OUTPUT_ROOT override.
std::filesystem::path output_directory(const ExperimentConfig& config);

int gen_data(const ExperimentConfig& config, std::ostream& log);
int train_emulator(const ExperimentConfig& config, std::ostream& log);
int estimate(const ExperimentConfig& config, std::ostream& log);
int evaluate(const ExperimentConfig& config, std::ostream& log);
int reproduce(const ExperimentConfig& config, std::ostream& log);

/// Full command-line entry point; returns the process exit status.
int run(int argc, char** argv);

}  // namespace eidgm::cli
