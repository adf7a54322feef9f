#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <tuple>
#include <vector>

#include "fft.hpp"
#include "grid.hpp"

namespace fracnls {

// Symbol table for the fractional Laplacian of order s on the periodic box:
// entry k holds |xi_k|^{2s} with xi_k = pi k / L componentwise and k running
// over the standard DFT ordering (0, 1, ..., M/2-1, -M/2, ..., -1) per axis.
struct SpectralMultiplier {
  GridDescriptor grid;
  double exponent;
  std::vector<double> symbol;
};

namespace detail {

inline void require_order(double s) {
  if (!(s > 0.0 && s < 1.0)) throw ParameterError("fractional order s must lie in (0, 1)");
}

// Signed frequency index for DFT bin m of an M-point axis.
inline int signed_freq(int m, int M) { return m < M / 2 ? m : m - M; }

inline std::vector<double> build_symbol(const GridDescriptor& g, double s) {
  const int M = g.points_per_axis;
  const double base = std::numbers::pi / g.box_half_length;
  std::vector<double> sym(g.total_points());
  // Precompute per-axis squared frequencies once; the axis tables coincide.
  std::vector<double> xi2(M);
  for (int m = 0; m < M; ++m) {
    double x = base * signed_freq(m, M);
    xi2[m] = x * x;
  }
  int idx[3];
  for (std::size_t lin = 0; lin < sym.size(); ++lin) {
    decode_index(g, lin, idx);
    double r2 = 0.0;
    for (int d = 0; d < g.dim; ++d) r2 += xi2[idx[d]];
    sym[lin] = r2 == 0.0 ? 0.0 : std::pow(r2, s);
  }
  return sym;
}

// Symbol tables are reused heavily by the solvers; cache them per thread.
inline const std::vector<double>& cached_symbol(const GridDescriptor& g, double s) {
  thread_local std::map<std::tuple<int, int, double, double>, std::vector<double>> cache;
  auto key = std::make_tuple(g.dim, g.points_per_axis, g.box_half_length, s);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_symbol(g, s)).first;
  return it->second;
}

inline double cell_volume(const GridDescriptor& g) {
  double v = 1.0;
  for (int d = 0; d < g.dim; ++d) v *= g.spacing();
  return v;
}

// Quadrature weight for one spectral bin under the midpoint rule:
// integral |u|^2 = (spacing^dim / M^dim) * sum |Y_k|^2 (Parseval).
inline double spectral_weight(const GridDescriptor& g) {
  return cell_volume(g) / static_cast<double>(g.total_points());
}

}  // namespace detail

inline SpectralMultiplier make_multiplier(const GridDescriptor& g, double s) {
  detail::require_order(s);
  return SpectralMultiplier{g, s, detail::build_symbol(g, s)};
}

// (-Delta)^s u computed as the inverse DFT of |xi|^{2s} * DFT(u). Exact on
// resolved plane waves; the zero mode is annihilated.
inline Field apply_fractional_laplacian(const Field& u, double s) {
  detail::require_order(s);
  require_finite(u, "apply_fractional_laplacian");
  const std::vector<double>& sym = detail::cached_symbol(u.grid, s);
  std::vector<std::complex<double>> spec = detail::forward_dft(u);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= sym[i];
  Field out{u.grid, {}};
  detail::inverse_dft_real(u.grid, spec, out.values);
  return out;
}

// Squared Gagliardo seminorm [u]_s^2 = integral |xi|^{2s} |u_hat|^2 under the
// box quadrature. Nonnegative; zero exactly for constant fields.
inline double seminorm_sq(const Field& u, double s) {
  detail::require_order(s);
  require_finite(u, "seminorm_sq");
  const std::vector<double>& sym = detail::cached_symbol(u.grid, s);
  std::vector<std::complex<double>> spec = detail::forward_dft(u);
  double acc = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) acc += sym[i] * std::norm(spec[i]);
  return acc * detail::spectral_weight(u.grid);
}

// Squared L2 norm, midpoint quadrature.
inline double mass(const Field& u) {
  require_finite(u, "mass");
  double acc = 0.0;
  for (double v : u.values) acc += v * v;
  return acc * detail::cell_volume(u.grid);
}

// Same quantity evaluated through the spectrum; used to test Parseval
// consistency of the normalization.
inline double mass_spectral(const Field& u) {
  require_finite(u, "mass_spectral");
  std::vector<std::complex<double>> spec = detail::forward_dft(u);
  double acc = 0.0;
  for (const auto& c : spec) acc += std::norm(c);
  return acc * detail::spectral_weight(u.grid);
}

// integral |u|^r for r >= 2.
inline double lp_norm_pow(const Field& u, double r) {
  if (!(r >= 2.0)) throw ParameterError("lp_norm_pow requires r >= 2");
  require_finite(u, "lp_norm_pow");
  double acc = 0.0;
  if (r == 2.0) {
    for (double v : u.values) acc += v * v;
  } else if (r == 4.0) {
    for (double v : u.values) {
      double v2 = v * v;
      acc += v2 * v2;
    }
  } else {
    for (double v : u.values) acc += std::pow(std::abs(v), r);
  }
  return acc * detail::cell_volume(u.grid);
}

inline double inner_l2(const Field& u, const Field& v) {
  require_finite(u, "inner_l2");
  require_finite(v, "inner_l2");
  if (!(u.grid == v.grid)) throw InvalidFieldError("inner_l2: grids differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.values.size(); ++i) acc += u.values[i] * v.values[i];
  return acc * detail::cell_volume(u.grid);
}

// Discrete radial decreasing rearrangement: sort grid points by distance from
// the box center (ties broken by linear index) and assign the sorted absolute
// values in descending order. Preserves mass and every lp_norm_pow exactly,
// since it only permutes |values|.
inline Field rearrange_radial_decreasing(const Field& u) {
  require_finite(u, "rearrange_radial_decreasing");
  const std::size_t n = u.values.size();
  thread_local std::map<std::tuple<int, int, double>, std::vector<std::size_t>> order_cache;
  auto key = std::make_tuple(u.grid.dim, u.grid.points_per_axis, u.grid.box_half_length);
  auto it = order_cache.find(key);
  if (it == order_cache.end()) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> r2(n);
    for (std::size_t i = 0; i < n; ++i) r2[i] = radius_sq(u.grid, i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (r2[a] != r2[b]) return r2[a] < r2[b];
      return a < b;
    });
    it = order_cache.emplace(key, std::move(order)).first;
  }
  const std::vector<std::size_t>& order = it->second;
  std::vector<double> mags(n);
  for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(u.values[i]);
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  Field out = make_field(u.grid);
  for (std::size_t rank = 0; rank < n; ++rank) out.values[order[rank]] = mags[rank];
  return out;
}

}  // namespace fracnls
