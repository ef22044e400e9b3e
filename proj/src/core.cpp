#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "eidgm/errors.hpp"
#include "eidgm/matrix.hpp"
#include "eidgm/param_range.hpp"
#include "eidgm/rng.hpp"

namespace eidgm {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw ShapeError("matrix data length " + std::to_string(data.size()) + " != " +
                     std::to_string(r) + "x" + std::to_string(c));
  }
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = n == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return v;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

double Matrix::item() const {
  if (rows != 1 || cols != 1) {
    throw ShapeError("item() on a " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " matrix");
  }
  return data[0];
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::index with n = 0");
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = engine_();
    if (x >= threshold) return static_cast<std::size_t>(x % bound);
  }
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

void Rng::shuffle(std::vector<std::size_t>& v) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[index(i)]);
  }
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void ParamRange::validate() const {
  if (low.empty() || low.size() != high.size()) {
    throw ShapeError("parameter range needs matching, nonempty low/high vectors");
  }
  for (std::size_t i = 0; i < low.size(); ++i) {
    if (!(high[i] > low[i])) throw DomainError("parameter range requires high > low");
  }
}

bool ParamRange::contains(std::span<const double> p) const {
  if (p.size() != low.size()) return false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < low[i] || p[i] > high[i]) return false;
  }
  return true;
}

}  // namespace eidgm
