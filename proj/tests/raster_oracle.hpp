#pragma once

// Brute-force grid rasterisation: for every (row, cell) pair, scan all
// vehicles and keep the front-most one whose footprint touches the bin.

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

struct Car {
  double x, y, psi, v, length, width;
};

struct GridSpec {
  int lanes;
  double lane_width;
  int fov;
  double v_norm;
  double psi_norm;
};

inline int lane_index(const GridSpec& g, double y) {
  int lane = static_cast<int>(std::floor(y / g.lane_width));
  if (lane < 0) lane = 0;
  if (lane >= g.lanes) lane = g.lanes - 1;
  return lane;
}

inline double wrap(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

/// Returns [channel][row][cell] flattened.
inline std::vector<double> rasterize(const Car& ego, const std::vector<Car>& others,
                                     const GridSpec& g) {
  const int width = 2 * g.fov + 1;
  std::vector<double> grid(4 * 3 * width, 0.0);
  auto at = [&](int ch, int row, int cell) -> double& {
    return grid[(ch * 3 + row) * width + cell];
  };
  const int ego_lane = lane_index(g, ego.y);
  for (int row = 0; row < 3; ++row) {
    const int lane = ego_lane + 1 - row;
    const bool wall = lane < 0 || lane >= g.lanes;
    for (int cell = 0; cell < width; ++cell) {
      if (wall) {
        at(0, row, cell) = 1.0;
        continue;
      }
      const double bin_lo = cell - g.fov - 0.5, bin_hi = cell - g.fov + 0.5;
      int winner = -1;
      for (int i = 0; i < static_cast<int>(others.size()); ++i) {
        const Car& o = others[i];
        if (lane_index(g, o.y) != lane) continue;
        double lo = 1e300, hi = -1e300;
        const double c = std::cos(o.psi), s = std::sin(o.psi);
        for (double u : {-o.length / 2, o.length / 2})
          for (double w : {-o.width / 2, o.width / 2}) {
            const double x = o.x + c * u - s * w;
            lo = std::min(lo, x);
            hi = std::max(hi, x);
          }
        lo -= ego.x;
        hi -= ego.x;
        if (!(lo < bin_hi && hi >= bin_lo)) continue;
        if (winner < 0 || o.x >= others[winner].x) winner = i;
      }
      if (winner < 0) continue;
      const Car& o = others[winner];
      at(0, row, cell) = 1.0;
      at(1, row, cell) = (o.v - ego.v) / g.v_norm;
      at(2, row, cell) = (o.y - (lane + 0.5) * g.lane_width) / g.lane_width;
      at(3, row, cell) = wrap(o.psi - ego.psi) / g.psi_norm;
    }
  }
  return grid;
}

}  // namespace oracle
