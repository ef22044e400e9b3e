#pragma once

#include <span>
#include <vector>

namespace eidgm {

/// Per-dimension box [low, high] of a parameter distribution.
struct ParamRange {
  std::vector<double> low;
  std::vector<double> high;

  std::size_t dim() const { return low.size(); }
  void validate() const;
  bool contains(std::span<const double> p) const;
  friend bool operator==(const ParamRange&, const ParamRange&) = default;
};

}  // namespace eidgm
