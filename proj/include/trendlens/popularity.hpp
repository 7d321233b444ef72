#pragma once

// Popularity series, decay, rolling percentile thresholds and signal classes.
// Shared by automatically extracted topics and zero-shot topics.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trendlens/common.hpp"

namespace trendlens {

enum class SignalClass { noise, weak, strong };

inline std::string_view to_string(SignalClass c) {
  switch (c) {
    case SignalClass::noise: return "noise";
    case SignalClass::weak: return "weak";
    case SignalClass::strong: return "strong";
  }
  return "noise";
}

inline SignalClass signal_class_from_string(std::string_view s) {
  if (s == "noise") return SignalClass::noise;
  if (s == "weak") return SignalClass::weak;
  if (s == "strong") return SignalClass::strong;
  throw DataError("unknown signal class '" + std::string(s) + "'");
}

/// How the silent-gap length enters the decay exponent.
enum class DecayMode {
  elapsed_gap,  ///< dt = days since the last update (grows each silent slice)
  fixed_step,   ///< dt = granularity for every silent slice
};

/// Contiguous per-slice popularity values starting at `first_slice`.
struct PopularitySeries {
  SliceIndex first_slice = 0;
  std::vector<double> values;
  SliceIndex last_update_slice = 0;

  bool empty() const noexcept { return values.empty(); }
  SliceIndex last_slice() const noexcept { return first_slice + static_cast<SliceIndex>(values.size()) - 1; }
  bool has(SliceIndex s) const noexcept { return !values.empty() && s >= first_slice && s <= last_slice(); }
  double at(SliceIndex s) const {
    if (!has(s)) throw DataError("popularity series has no value at slice " + std::to_string(s));
    return values[static_cast<std::size_t>(s - first_slice)];
  }
  std::optional<double> latest() const {
    if (values.empty()) return std::nullopt;
    return values.back();
  }

  /// Sets the value for slice `s`; `s` must be the last slice or the one after it.
  void set(SliceIndex s, double v) {
    if (values.empty()) {
      first_slice = s;
      values.push_back(v);
    } else if (s == last_slice()) {
      values.back() = v;
    } else if (s == last_slice() + 1) {
      values.push_back(v);
    } else {
      throw OrderingError("popularity series update for slice " + std::to_string(s) + " is not contiguous");
    }
  }

  /// (slice, value) pairs inside [end - window + 1, end].
  std::vector<std::pair<SliceIndex, double>> window(SliceIndex end, SliceIndex window_slices) const {
    std::vector<std::pair<SliceIndex, double>> out;
    if (values.empty()) return out;
    const SliceIndex lo = std::max(first_slice, end - window_slices + 1);
    const SliceIndex hi = std::min(last_slice(), end);
    for (SliceIndex s = lo; s <= hi; ++s) out.emplace_back(s, values[static_cast<std::size_t>(s - first_slice)]);
    return out;
  }

  bool operator==(const PopularitySeries&) const = default;
};

inline double decay_factor(double lambda, double delta_days) {
  return std::exp(-lambda * delta_days * delta_days);
}

/// Gap length in days for a topic silent since `last_update` when slice
/// `slice` is processed.
inline double silent_gap_days(DecayMode mode, SliceIndex slice, SliceIndex last_update, int granularity_days) {
  if (mode == DecayMode::fixed_step) return static_cast<double>(granularity_days);
  return static_cast<double>(slice - last_update) * static_cast<double>(granularity_days);
}

struct Thresholds {
  double p10 = 0.0;
  double p50 = 0.0;
  std::size_t pool_size = 0;

  bool operator==(const Thresholds&) const = default;
};

/// Sorts the pool and reads the 0-based order statistics at floor(0.1 n) and
/// floor(0.5 n), clamped to n - 1. Empty pool -> nullopt.
inline std::optional<Thresholds> percentile_thresholds(std::vector<double> pool) {
  if (pool.empty()) return std::nullopt;
  std::sort(pool.begin(), pool.end());
  const std::size_t n = pool.size();
  const std::size_t i10 = std::min(n / 10, n - 1);
  const std::size_t i50 = std::min(n / 2, n - 1);
  return Thresholds{pool[i10], pool[i50], n};
}

/// Ordinary least-squares slope of value against slice index. nullopt when
/// fewer than `min_points` points are available.
inline std::optional<double> ols_slope(const std::vector<std::pair<SliceIndex, double>>& points, std::size_t min_points) {
  if (points.size() < std::max<std::size_t>(min_points, 2)) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += static_cast<double>(x);
    my += y;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [x, y] : points) {
    const double dx = static_cast<double>(x) - mx;
    sxy += dx * (y - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

/// p < P10 -> noise; P10 <= p <= P50 -> weak iff slope > 0; p > P50 -> strong.
/// Missing thresholds fall back to noise. A missing slope is not positive.
inline SignalClass classify_popularity(double p, const std::optional<Thresholds>& t, const std::optional<double>& slope) {
  if (!t) return SignalClass::noise;
  if (p < t->p10) return SignalClass::noise;
  if (p <= t->p50) return (slope && *slope > 0.0) ? SignalClass::weak : SignalClass::noise;
  return SignalClass::strong;
}

}  // namespace trendlens
