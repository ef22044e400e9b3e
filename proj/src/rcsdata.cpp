#include "eidgm/rcsdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "eidgm/errors.hpp"
#include "eidgm/rng.hpp"

namespace eidgm::rcs {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, std::size_t line) {
  const std::string f = trim(field);
  double v = 0.0;
  const char* first = f.data();
  const char* last = f.data() + f.size();
  if (!f.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (f.empty() || ec != std::errc() || ptr != last) {
    throw ParseError("'" + f + "' is not a number", line);
  }
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + f + "'", line);
  return v;
}

// Header fields must read prefix1, prefix2, ...
void check_header(const std::vector<std::string>& fields, std::size_t first_index,
                  const std::string& prefix) {
  for (std::size_t k = first_index; k < fields.size(); ++k) {
    const std::string want = prefix + std::to_string(k - first_index + 1);
    if (trim(fields[k]) != want) {
      throw ParseError("expected header column '" + want + "', found '" + trim(fields[k]) + "'", 1);
    }
  }
}

bool next_line(std::istream& in, std::string& line, std::size_t& number) {
  while (std::getline(in, line)) {
    ++number;
    if (!trim(line).empty()) return true;
  }
  return false;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- dataset -----------------------------------------------------------------

std::size_t RcsDataset::point_count() const {
  std::size_t n = 0;
  for (const auto& m : observations) n += m.rows;
  return n;
}

void RcsDataset::validate() const {
  if (state_dim == 0) throw ShapeError("dataset state dimension must be positive");
  if (observations.size() != times.size()) {
    throw ShapeError("dataset has " + std::to_string(times.size()) + " times but " +
                     std::to_string(observations.size()) + " observation slots");
  }
  for (std::size_t r = 0; r < times.size(); ++r) {
    if (r > 0 && !(times[r] > times[r - 1])) throw ShapeError("dataset times must be strictly ascending");
    if (observations[r].cols != state_dim && observations[r].rows > 0) {
      throw ShapeError("observation width differs from the state dimension");
    }
  }
}

Matrix RcsDataset::pooled_points() const {
  Matrix out(point_count(), 1 + state_dim);
  std::size_t row = 0;
  for (std::size_t r = 0; r < times.size(); ++r) {
    const Matrix& obs = observations[r];
    for (std::size_t j = 0; j < obs.rows; ++j, ++row) {
      out(row, 0) = times[r];
      for (std::size_t k = 0; k < state_dim; ++k) out(row, 1 + k) = obs(j, k);
    }
  }
  return out;
}

// ---- peaks -------------------------------------------------------------------

std::vector<PeakSpec> default_peaks(const std::vector<std::vector<double>>& centers,
                                    const ParamRange& range, std::size_t samples) {
  range.validate();
  std::vector<PeakSpec> peaks;
  for (const auto& c : centers) {
    if (c.size() != range.dim()) throw ShapeError("peak center dimension differs from the range");
    PeakSpec p;
    p.center = c;
    p.samples = samples;
    for (std::size_t k = 0; k < c.size(); ++k) {
      p.half_width.push_back(0.05 * (range.high[k] - range.low[k]));
    }
    peaks.push_back(std::move(p));
  }
  return peaks;
}

void validate_peak(const PeakSpec& peak, const ParamRange& range) {
  if (peak.center.size() != range.dim() || peak.half_width.size() != range.dim()) {
    throw ShapeError("peak dimension differs from the parameter range");
  }
  for (std::size_t k = 0; k < range.dim(); ++k) {
    if (peak.half_width[k] < 0.0) throw DomainError("peak half width must be >= 0");
    if (peak.center[k] - peak.half_width[k] < range.low[k] ||
        peak.center[k] + peak.half_width[k] > range.high[k]) {
      throw DomainError("peak interval leaves the parameter range in dimension " +
                        std::to_string(k + 1));
    }
  }
}

Matrix generate_parameters(const std::vector<PeakSpec>& peaks, std::uint64_t seed) {
  if (peaks.empty()) throw DomainError("generate_parameters: at least one peak is required");
  const std::size_t dim = peaks.front().center.size();
  std::size_t total = 0;
  for (const auto& p : peaks) {
    if (p.center.size() != dim || p.half_width.size() != dim || dim == 0) {
      throw ShapeError("generate_parameters: inconsistent peak dimensions");
    }
    for (double h : p.half_width) {
      if (h < 0.0) throw DomainError("peak half width must be >= 0");
    }
    total += p.samples;
  }
  Matrix out(total, dim);
  std::size_t row = 0;
  for (std::size_t h = 0; h < peaks.size(); ++h) {
    Rng rng(substream_seed(seed, h));
    const PeakSpec& p = peaks[h];
    for (std::size_t s = 0; s < p.samples; ++s, ++row) {
      for (std::size_t k = 0; k < dim; ++k) {
        out(row, k) = p.half_width[k] == 0.0
                          ? p.center[k]
                          : rng.uniform(p.center[k] - p.half_width[k], p.center[k] + p.half_width[k]);
      }
    }
  }
  return out;
}

RcsDataset generate_rcs(const odes::OdeSystem& system, const Matrix& params,
                        std::span<const double> y0, std::span<const double> times, double t0,
                        const odes::IntegratorOptions& options) {
  if (params.rows > 0 && params.cols != system.param_dim) {
    throw ShapeError("generate_rcs: parameter width differs from the system");
  }
  RcsDataset data;
  data.state_dim = system.state_dim;
  data.times.assign(times.begin(), times.end());
  data.observations.assign(times.size(), Matrix(params.rows, system.state_dim));
  data.validate();
  if (params.rows == 0) return data;
  const auto trajectories = odes::integrate_batch(system, t0, y0, params, times, options);
  for (std::size_t j = 0; j < params.rows; ++j) {
    for (std::size_t r = 0; r < times.size(); ++r) {
      for (std::size_t k = 0; k < system.state_dim; ++k) {
        data.observations[r](j, k) = trajectories[j].states(r, k);
      }
    }
  }
  return data;
}

// ---- CSV -----------------------------------------------------------------------

RcsDataset read_csv(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  if (!next_line(in, line, number)) throw ParseError("empty file, expected header 't,y1,...'", 1);
  const auto header = split_fields(line);
  if (header.size() < 2 || trim(header[0]) != "t") {
    throw ParseError("expected header 't,y1[,y2,...]'", number);
  }
  check_header(header, 1, "y");
  const std::size_t dim = header.size() - 1;

  std::map<double, std::vector<std::vector<double>>> slots;
  while (next_line(in, line, number)) {
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       number);
    }
    const double t = parse_number(fields[0], number);
    std::vector<double> y(dim);
    for (std::size_t k = 0; k < dim; ++k) y[k] = parse_number(fields[k + 1], number);
    slots[t].push_back(std::move(y));
  }

  RcsDataset data;
  data.state_dim = dim;
  for (auto& [t, rows] : slots) {
    data.times.push_back(t);
    Matrix m(rows.size(), dim);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      for (std::size_t k = 0; k < dim; ++k) m(j, k) = rows[j][k];
    }
    data.observations.push_back(std::move(m));
  }
  return data;
}

RcsDataset ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  return read_csv(in);
}

void write_csv(const RcsDataset& data, std::ostream& out) {
  data.validate();
  out << "t";
  for (std::size_t k = 0; k < data.state_dim; ++k) out << ",y" << (k + 1);
  out << '\n';
  for (std::size_t r = 0; r < data.times.size(); ++r) {
    const Matrix& obs = data.observations[r];
    const std::string t = format_double(data.times[r]);
    for (std::size_t j = 0; j < obs.rows; ++j) {
      out << t;
      for (std::size_t k = 0; k < data.state_dim; ++k) out << ',' << format_double(obs(j, k));
      out << '\n';
    }
  }
}

void emit_csv(const RcsDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(data, out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

// ---- standardization -------------------------------------------------------------

Matrix ScalingInfo::apply(const Matrix& points) const {
  if (points.cols != width()) throw ShapeError("scaling width differs from the point width");
  Matrix out = points;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) = (out(r, c) - shift[c]) / scale[c];
  }
  return out;
}

Matrix ScalingInfo::invert(const Matrix& points) const {
  if (points.cols != width()) throw ShapeError("scaling width differs from the point width");
  Matrix out = points;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) = out(r, c) * scale[c] + shift[c];
  }
  return out;
}

RcsDataset ScalingInfo::apply(const RcsDataset& data) const {
  if (width() != data.state_dim + 1) throw ShapeError("scaling width differs from the dataset");
  RcsDataset out = data;
  for (auto& t : out.times) t = (t - shift[0]) / scale[0];
  for (auto& obs : out.observations) {
    for (std::size_t j = 0; j < obs.rows; ++j) {
      for (std::size_t k = 0; k < data.state_dim; ++k) {
        obs(j, k) = (obs(j, k) - shift[k + 1]) / scale[k + 1];
      }
    }
  }
  return out;
}

std::pair<RcsDataset, ScalingInfo> standardize(const RcsDataset& data) {
  data.validate();
  const Matrix pts = data.pooled_points();
  if (pts.rows == 0) throw DomainError("standardize: dataset is empty");
  if (pts.rows < 2) throw DomainError("standardize: at least two observations are required");
  ScalingInfo info;
  info.shift.assign(pts.cols, 0.0);
  info.scale.assign(pts.cols, 0.0);
  for (std::size_t r = 0; r < pts.rows; ++r) {
    for (std::size_t c = 0; c < pts.cols; ++c) info.shift[c] += pts(r, c);
  }
  for (auto& s : info.shift) s /= static_cast<double>(pts.rows);
  for (std::size_t r = 0; r < pts.rows; ++r) {
    for (std::size_t c = 0; c < pts.cols; ++c) {
      const double d = pts(r, c) - info.shift[c];
      info.scale[c] += d * d;
    }
  }
  for (auto& s : info.scale) {
    s = std::sqrt(s / static_cast<double>(pts.rows));
    if (!(s > 0.0)) s = 1.0;
  }
  return {info.apply(data), info};
}

// ---- parameter files ---------------------------------------------------------------

void write_param_csv(const Matrix& params, std::ostream& out) {
  for (std::size_t k = 0; k < params.cols; ++k) out << (k ? ",p" : "p") << (k + 1);
  out << '\n';
  for (std::size_t r = 0; r < params.rows; ++r) {
    for (std::size_t k = 0; k < params.cols; ++k) {
      if (k) out << ',';
      out << format_double(params(r, k));
    }
    out << '\n';
  }
}

void write_param_csv(const Matrix& params, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_param_csv(params, out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

Matrix read_param_csv(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  if (!next_line(in, line, number)) throw ParseError("empty file, expected header 'p1,...'", 1);
  const auto header = split_fields(line);
  check_header(header, 0, "p");
  std::vector<double> values;
  std::size_t rows = 0;
  while (next_line(in, line, number)) {
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       number);
    }
    for (const auto& f : fields) values.push_back(parse_number(f, number));
    ++rows;
  }
  return Matrix(rows, header.size(), std::move(values));
}

Matrix read_param_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open parameter file '" + path + "'");
  return read_param_csv(in);
}

}  // namespace eidgm::rcs
