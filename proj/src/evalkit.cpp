#include "eidgm/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>

#include "eidgm/errors.hpp"
#include "json.hpp"

namespace eidgm::eval {
namespace {

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

void require_nonempty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("wasserstein_1d: both samples must be nonempty");
}

double cdf_integral(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double total = 0.0;
  double prev = std::min(a.front(), b.front());
  while (i < a.size() || j < b.size()) {
    const double next = j == b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    total += std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    while (i < a.size() && a[i] == next) ++i;
    while (j < b.size() && b[j] == next) ++j;
    prev = next;
  }
  return total;
}

}  // namespace

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  if (sa.size() != sb.size()) return cdf_integral(sa, sb);
  double total = 0.0;
  for (std::size_t k = 0; k < sa.size(); ++k) total += std::fabs(sa[k] - sb[k]);
  return total / static_cast<double>(sa.size());
}

double wasserstein_1d_cdf(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  return cdf_integral(sorted_copy(a), sorted_copy(b));
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["summed_w1"] = summed_w1;
  for (std::size_t k = 0; k < per_dimension_w1.size(); ++k) {
    j["w1_p" + std::to_string(k + 1)] = per_dimension_w1[k];
  }
  j["count_a"] = count_a;
  j["count_b"] = count_b;
  for (const auto& [k, v] : metadata) j[k] = v;
  return j.dump(2) + "\n";
}

MetricReport summed_wasserstein(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) {
    throw ShapeError("summed_wasserstein: " + std::to_string(a.cols) + " vs " +
                     std::to_string(b.cols) + " coordinates");
  }
  MetricReport report;
  report.count_a = a.rows;
  report.count_b = b.rows;
  for (std::size_t c = 0; c < a.cols; ++c) {
    std::vector<double> ca(a.rows), cb(b.rows);
    for (std::size_t r = 0; r < a.rows; ++r) ca[r] = a(r, c);
    for (std::size_t r = 0; r < b.rows; ++r) cb[r] = b(r, c);
    report.per_dimension_w1.push_back(wasserstein_1d(ca, cb));
    report.summed_w1 += report.per_dimension_w1.back();
  }
  return report;
}

Histogram histogram(std::span<const double> samples, std::size_t bin_count, double low,
                    double high) {
  if (bin_count == 0) throw DomainError("histogram: bin_count must be >= 1");
  if (!(high > low)) throw DomainError("histogram: range must satisfy low < high");
  Histogram h;
  h.counts.assign(bin_count, 0);
  for (std::size_t k = 0; k <= bin_count; ++k) {
    h.edges.push_back(k == bin_count ? high
                                     : low + (high - low) * static_cast<double>(k) /
                                                 static_cast<double>(bin_count));
  }
  for (double x : samples) {
    if (!(x >= low && x <= high)) continue;
    auto bin = static_cast<std::size_t>((x - low) / (high - low) * static_cast<double>(bin_count));
    h.counts[std::min(bin, bin_count - 1)] += 1;
  }
  return h;
}

void write_histogram_csv(const Histogram& h, std::ostream& out) {
  out << "bin_low,bin_high,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    out << rcs::format_double(h.edges[k]) << ',' << rcs::format_double(h.edges[k + 1]) << ','
        << h.counts[k] << '\n';
  }
}

double interquartile_range(std::span<const double> values) {
  if (values.empty()) throw DomainError("interquartile_range: empty input");
  const auto s = sorted_copy(values);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  return quantile(0.75) - quantile(0.25);
}

PredictiveReport posterior_predictive(const Matrix& params, const odes::OdeSystem& system,
                                      std::span<const double> y0,
                                      const rcs::RcsDataset& dataset, double t0,
                                      const odes::IntegratorOptions& options) {
  dataset.validate();
  if (dataset.state_dim != system.state_dim) {
    throw ShapeError("posterior_predictive: dataset and system state dimensions differ");
  }
  if (params.rows > 0 && params.cols != system.param_dim) {
    throw ShapeError("posterior_predictive: parameter width differs from the system");
  }
  const std::size_t n = params.rows;
  std::vector<odes::Trajectory> solved(n);
  std::vector<char> ok(n, 0);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long j = 0; j < count; ++j) {
    try {
      solved[j] = odes::integrate_from(system, t0, y0, params.row(j), dataset.times, options);
      ok[j] = 1;
    } catch (const std::exception&) {
      ok[j] = 0;
    }
  }

  PredictiveReport report;
  report.times = dataset.times;
  for (std::size_t j = 0; j < n; ++j) {
    if (ok[j]) {
      report.trajectories.push_back(std::move(solved[j]));
    } else {
      ++report.failures;
    }
  }
  if (report.trajectories.empty()) {
    throw IntegrationError("posterior_predictive: no parameter sample could be integrated", t0);
  }
  const std::size_t T = dataset.times.size();
  report.per_time_w1 = Matrix(T, system.state_dim);
  for (std::size_t r = 0; r < T; ++r) {
    const Matrix& obs = dataset.observations[r];
    for (std::size_t k = 0; k < system.state_dim; ++k) {
      if (obs.rows == 0) {
        report.per_time_w1(r, k) = std::nan("");
        continue;
      }
      std::vector<double> pred, seen(obs.rows);
      for (const auto& tr : report.trajectories) pred.push_back(tr.states(r, k));
      for (std::size_t j = 0; j < obs.rows; ++j) seen[j] = obs(j, k);
      report.per_time_w1(r, k) = wasserstein_1d(pred, seen);
    }
  }
  return report;
}

void write_trajectories_csv(const std::vector<odes::Trajectory>& trajectories, std::ostream& out) {
  const std::size_t dim = trajectories.empty() ? 1 : trajectories.front().states.cols;
  out << "sample,t";
  for (std::size_t k = 0; k < dim; ++k) out << ",y" << (k + 1);
  out << '\n';
  for (std::size_t s = 0; s < trajectories.size(); ++s) {
    const auto& tr = trajectories[s];
    for (std::size_t r = 0; r < tr.times.size(); ++r) {
      out << s << ',' << rcs::format_double(tr.times[r]);
      for (std::size_t k = 0; k < dim; ++k) out << ',' << rcs::format_double(tr.states(r, k));
      out << '\n';
    }
  }
}

void write_predictive_csv(const PredictiveReport& report, std::ostream& out) {
  out << "t";
  for (std::size_t k = 0; k < report.per_time_w1.cols; ++k) out << ",y" << (k + 1) << "_w1";
  out << '\n';
  for (std::size_t r = 0; r < report.times.size(); ++r) {
    out << rcs::format_double(report.times[r]);
    for (std::size_t k = 0; k < report.per_time_w1.cols; ++k) {
      out << ',' << rcs::format_double(report.per_time_w1(r, k));
    }
    out << '\n';
  }
}

}  // namespace eidgm::eval
