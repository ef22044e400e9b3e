#pragma once

// Exact empirical 1D Wasserstein distances, the per-coordinate summed metric,
// histograms, and posterior-predictive checks against an RCS dataset.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "eidgm/matrix.hpp"
#include "eidgm/odes.hpp"
#include "eidgm/rcsdata.hpp"

namespace eidgm::eval {

/// W1 between two empirical distributions. Equal sizes use sorted order
/// statistics; otherwise the CDF-difference integral.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);
/// Always the CDF-difference integral.
double wasserstein_1d_cdf(std::span<const double> a, std::span<const double> b);

struct MetricReport {
  std::vector<double> per_dimension_w1;
  double summed_w1 = 0.0;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  std::map<std::string, std::string> metadata;

  /// Flat object: summed_w1, w1_p1.., count_a, count_b, then metadata keys.
  std::string to_json() const;
};

/// Rows are samples, columns are parameter coordinates.
MetricReport summed_wasserstein(const Matrix& a, const Matrix& b);

struct Histogram {
  std::vector<double> edges;  // bin_count + 1
  std::vector<std::size_t> counts;
};

/// Bins are [e_k, e_{k+1}) except the last, which is closed. Samples
/// outside [low, high] are not counted.
Histogram histogram(std::span<const double> samples, std::size_t bin_count, double low,
                    double high);
void write_histogram_csv(const Histogram& h, std::ostream& out);

/// Difference of the 75th and 25th percentiles (linear interpolation).
double interquartile_range(std::span<const double> values);

struct PredictiveReport {
  std::vector<double> times;
  Matrix per_time_w1;  // times x state_dim
  std::size_t failures = 0;
  std::vector<odes::Trajectory> trajectories;  // successful samples only
};

/// Solves each parameter row at the dataset times and compares the per-time
/// marginals with the observations. Rows that fail to integrate are counted
/// and left out.
PredictiveReport posterior_predictive(const Matrix& params, const odes::OdeSystem& system,
                                      std::span<const double> y0,
                                      const rcs::RcsDataset& dataset, double t0 = 0.0,
                                      const odes::IntegratorOptions& options = {});

/// Header `sample,t,y1[,...]`.
void write_trajectories_csv(const std::vector<odes::Trajectory>& trajectories, std::ostream& out);
/// Header `t,y1_w1[,...]`.
void write_predictive_csv(const PredictiveReport& report, std::ostream& out);

}  // namespace eidgm::eval
