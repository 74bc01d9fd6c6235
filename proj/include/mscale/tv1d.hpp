#pragma once

// Exact proximal map of the 1D discrete total variation,
//   argmin_u 1/2 ||u - z||^2 + t sum_i |u_{i+1} - u_i|,
// computed with Condat's direct algorithm ("A direct algorithm for 1D total
// variation denoising", IEEE SPL 2013). The algorithm follows the taut string
// through the tube of radius t around the running sum of z, emitting one
// constant segment at a time.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mscale {

inline void tv1d_denoise(std::span<const double> input, std::span<double> output, double t) {
  if (input.size() != output.size()) throw std::invalid_argument("tv1d_denoise: size mismatch");
  if (!(t >= 0.0)) throw std::invalid_argument("tv1d_denoise: t must be >= 0");
  const std::ptrdiff_t width = static_cast<std::ptrdiff_t>(input.size());
  if (width == 0) return;
  if (t == 0.0) {
    std::copy(input.begin(), input.end(), output.begin());
    return;
  }

  std::ptrdiff_t k = 0, k0 = 0;        // current sample, start of current segment
  std::ptrdiff_t kplus = 0, kminus = 0;  // last positions where the bounds were touched
  double umin = t, umax = -t;            // tube offsets for the candidate segment values
  double vmin = input[0] - t, vmax = input[0] + t;  // lower / upper candidate values
  const double twot = 2.0 * t;

  for (;;) {
    while (k == width - 1) {
      if (umin < 0.0) {
        do output[k0++] = vmin; while (k0 <= kminus);
        k = kminus = k0;
        vmin = input[k];
        umin = t;
        umax = vmin + umin - vmax;
      } else if (umax > 0.0) {
        do output[k0++] = vmax; while (k0 <= kplus);
        k = kplus = k0;
        vmax = input[k];
        umax = -t;
        umin = vmax + umax - vmin;
      } else {
        vmin += umin / static_cast<double>(k - k0 + 1);
        do output[k0++] = vmin; while (k0 <= k);
        return;
      }
    }
    umin += input[k + 1] - vmin;
    if (umin < -t) {
      // negative jump
      do output[k0++] = vmin; while (k0 <= kminus);
      k = kminus = kplus = k0;
      vmin = input[k];
      vmax = vmin + twot;
      umin = t;
      umax = -t;
      continue;
    }
    umax += input[k + 1] - vmax;
    if (umax > t) {
      // positive jump
      do output[k0++] = vmax; while (k0 <= kplus);
      k = kminus = kplus = k0;
      vmax = input[k];
      vmin = vmax - twot;
      umin = t;
      umax = -t;
      continue;
    }
    ++k;
    if (umin >= t) {
      kminus = k;
      vmin += (umin - t) / static_cast<double>(kminus - k0 + 1);
      umin = t;
    }
    if (umax <= -t) {
      kplus = k;
      vmax += (umax + t) / static_cast<double>(kplus - k0 + 1);
      umax = -t;
    }
  }
}

inline std::vector<double> tv1d_denoise(std::span<const double> input, double t) {
  std::vector<double> out(input.size());
  tv1d_denoise(input, out, t);
  return out;
}

/// sum_i |u_{i+1} - u_i|
inline double total_variation(std::span<const double> u) {
  double tv = 0.0;
  for (std::size_t i = 1; i < u.size(); ++i) tv += std::abs(u[i] - u[i - 1]);
  return tv;
}

}  // namespace mscale
