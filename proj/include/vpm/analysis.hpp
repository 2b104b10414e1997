#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "vpm/trajectory.hpp"

namespace vpm {

// Dominant period of a scalar series via overlap-normalized autocorrelation:
//   r(l) = sum_{t<n-l} (x_t - mu)(x_{t+l} - mu) / ((n-l) * var).
// A periodic signal scores ~1 at its period and at every multiple, and when
// the series length is not a whole number of periods the partial windows can
// push a multiple a fraction of a percent above the fundamental. The usual
// fix applies: among the local maxima of r within a small tolerance (0.02)
// of the global maximum, take the smallest lag in [2, n/2]. Returns nullopt
// when the best coefficient is below 0.8 or the series is constant.
inline std::optional<int> detect_period(std::span<const double> series) {
  const int n = static_cast<int>(series.size());
  if (n < 4) throw std::invalid_argument("detect_period needs at least 4 samples");

  double mu = 0.0;
  for (double x : series) mu += x;
  mu /= n;
  double var = 0.0;
  for (double x : series) var += (x - mu) * (x - mu);
  var /= n;
  if (var == 0.0) return std::nullopt;

  const int max_lag = n / 2;
  std::vector<double> r(max_lag + 1, -2.0);
  double best = -2.0;
  for (int lag = 2; lag <= max_lag; ++lag) {
    double num = 0.0;
    for (int t = 0; t + lag < n; ++t) num += (series[t] - mu) * (series[t + lag] - mu);
    r[lag] = num / ((n - lag) * var);
    best = std::max(best, r[lag]);
  }
  if (best < 0.8) return std::nullopt;
  for (int lag = 2; lag <= max_lag; ++lag) {
    const bool local_max = (lag == 2 || r[lag] >= r[lag - 1]) &&
                           (lag == max_lag || r[lag] >= r[lag + 1]);
    if (local_max && r[lag] >= best - 0.02) return lag;
  }
  return std::nullopt;  // unreachable: the argmax is a local maximum
}

// Circular offset in [0, period) by which b lags a, i.e. the shift s
// maximizing the correlation of a(t) with b(t+s).
inline int phase_difference(std::span<const double> a, std::span<const double> b, int period) {
  if (period < 1) throw std::invalid_argument("phase_difference: period must be positive");
  const int n = static_cast<int>(a.size());
  if (n != static_cast<int>(b.size()))
    throw std::invalid_argument("phase_difference: series lengths differ");
  if (n < 2 * period)
    throw std::invalid_argument("phase_difference: series must cover two periods");

  double mu_a = 0.0, mu_b = 0.0;
  for (int t = 0; t < n; ++t) {
    mu_a += a[t];
    mu_b += b[t];
  }
  mu_a /= n;
  mu_b /= n;

  int best_shift = 0;
  double best = -1e300;
  for (int s = 0; s < period; ++s) {
    double num = 0.0;
    for (int t = 0; t + s < n; ++t) num += (a[t] - mu_a) * (b[t + s] - mu_b);
    const double score = num / (n - s);
    if (score > best + 1e-12) {
      best = score;
      best_shift = s;
    }
  }
  return best_shift;
}

// sin(theta_t) of one agent's position about the map center, theta measured
// by atan2(row - center_row, col - center_col). At the exact center the
// angle is undefined: the previous value carries over, and a trajectory that
// starts at the center starts at theta = 0.
inline std::vector<double> polar_series(const TrajectoryLog& log, int agent) {
  if (agent < 0 || agent >= log.n_agents)
    throw std::invalid_argument("polar_series: agent index out of range");
  const double cr = (log.height - 1) / 2.0;
  const double cc = (log.width - 1) / 2.0;
  std::vector<double> out;
  out.reserve(log.positions.size());
  double theta = 0.0;
  for (const auto& rec : log.positions) {
    const double dr = rec[agent].row - cr;
    const double dc = rec[agent].col - cc;
    if (dr != 0.0 || dc != 0.0) theta = std::atan2(dr, dc);
    out.push_back(std::sin(theta));
  }
  return out;
}

}  // namespace vpm
