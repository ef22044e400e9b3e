#pragma once

// Repeated cross-sectional datasets: synthetic generation from peaked
// parameter distributions, CSV exchange, and (t, y) standardization.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "eidgm/matrix.hpp"
#include "eidgm/odes.hpp"
#include "eidgm/param_range.hpp"

namespace eidgm::rcs {

/// Snapshots at ascending times; slot r holds J_r unlinked state vectors
/// (observations(r) is J_r x state_dim).
struct RcsDataset {
  std::vector<double> times;
  std::vector<Matrix> observations;
  std::size_t state_dim = 0;

  std::size_t time_count() const { return times.size(); }
  std::size_t point_count() const;
  /// Checks ascending times, slot count and row widths; throws ShapeError.
  void validate() const;
  /// Every observation as a row (t, y_1, ..., y_n), slot by slot.
  Matrix pooled_points() const;

  friend bool operator==(const RcsDataset&, const RcsDataset&) = default;
};

struct PeakSpec {
  std::vector<double> center;
  std::vector<double> half_width;
  std::size_t samples = 1;
};

/// Peaks with the default half width: 5% of each range dimension.
std::vector<PeakSpec> default_peaks(const std::vector<std::vector<double>>& centers,
                                    const ParamRange& range, std::size_t samples);
/// Throws DomainError when a peak leaves the range or has a negative width.
void validate_peak(const PeakSpec& peak, const ParamRange& range);

/// Affine map of (t, y) coordinates: x' = (x - shift) / scale.
struct ScalingInfo {
  std::vector<double> shift;
  std::vector<double> scale;

  std::size_t width() const { return shift.size(); }
  /// Rows of `points` are (t, y...) in native units.
  Matrix apply(const Matrix& points) const;
  Matrix invert(const Matrix& points) const;
  RcsDataset apply(const RcsDataset& data) const;

  friend bool operator==(const ScalingInfo&, const ScalingInfo&) = default;
};

/// H * S parameter vectors, peak by peak; peak h uses its own sub-seed.
Matrix generate_parameters(const std::vector<PeakSpec>& peaks, std::uint64_t seed);

/// Solves every parameter row from the shared y0 at t0 and keeps only the
/// per-time states.
RcsDataset generate_rcs(const odes::OdeSystem& system, const Matrix& params,
                        std::span<const double> y0, std::span<const double> times,
                        double t0 = 0.0,
                        const odes::IntegratorOptions& options = {});

/// Header `t,y1[,y2,...]`, one observation per row. Rows may come in any
/// time order; equal times are grouped into one slot.
RcsDataset read_csv(std::istream& in);
RcsDataset ingest_csv(const std::string& path);
void write_csv(const RcsDataset& data, std::ostream& out);
void emit_csv(const RcsDataset& data, const std::string& path);

/// Zero mean, unit population variance per coordinate over all pooled
/// points; constant coordinates keep scale 1.
std::pair<RcsDataset, ScalingInfo> standardize(const RcsDataset& data);

/// Parameter sample files, header `p1[,p2,...]`.
void write_param_csv(const Matrix& params, std::ostream& out);
void write_param_csv(const Matrix& params, const std::string& path);
Matrix read_param_csv(std::istream& in);
Matrix read_param_csv(const std::string& path);

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

}  // namespace eidgm::rcs
