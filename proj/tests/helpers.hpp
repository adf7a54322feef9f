#pragma once

// Shared fixtures for the test suite: analytic Gaussians with their exact
// continuum integrals, quadrature oracles for the fractional Laplacian, and
// deterministic random smooth fields.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "fracnls/spectral.hpp"

namespace testutil {

using fracnls::Field;
using fracnls::GridDescriptor;

// g(x) = amp * exp(-|x|^2 / (2 width^2)) sampled on the grid. With L = 12 and
// width about 1 both the tails and the spectrum are far below double round-off,
// so the continuum formulas below hold to machine precision on the grid.
inline Field gaussian(const GridDescriptor& g, double width = 1.0, double amp = 1.0) {
  Field u = fracnls::make_field(g);
  int idx[3];
  for (std::size_t lin = 0; lin < u.values.size(); ++lin) {
    fracnls::decode_index(g, lin, idx);
    double r2 = 0.0;
    for (int d = 0; d < g.dim; ++d) {
      const double x = g.coordinate(idx[d]);
      r2 += x * x;
    }
    u.values[lin] = amp * std::exp(-0.5 * r2 / (width * width));
  }
  return u;
}

// Deterministic smooth random field: a seeded mixture of off-center Gaussian
// bumps of varying widths and signs. Smooth, rapidly decaying, and generic.
// center_range / width_min / width_span control how hard the tails press on
// the box; the defaults leave ~1e-5 at the boundary, which is fine for
// quadrature tests but not for dilation tests (periodic wrap), so those pass
// tighter values.
inline Field random_smooth(const GridDescriptor& g, std::uint64_t seed, int nbumps = 12,
                           double center_range = 6.0, double width_min = 0.6,
                           double width_span = 1.4) {
  std::mt19937_64 eng(seed);
  auto unit = [&]() {
    return static_cast<double>(eng() >> 11) * (1.0 / 9007199254740992.0);
  };
  std::vector<double> center(static_cast<std::size_t>(nbumps) * 3);
  std::vector<double> width(nbumps), amp(nbumps);
  for (int b = 0; b < nbumps; ++b) {
    for (int d = 0; d < 3; ++d) center[3 * b + d] = center_range * (unit() - 0.5);
    width[b] = width_min + width_span * unit();
    amp[b] = 2.0 * (unit() - 0.5);
  }
  Field u = fracnls::make_field(g);
  int idx[3];
  for (std::size_t lin = 0; lin < u.values.size(); ++lin) {
    fracnls::decode_index(g, lin, idx);
    double acc = 0.0;
    for (int b = 0; b < nbumps; ++b) {
      double r2 = 0.0;
      for (int d = 0; d < g.dim; ++d) {
        const double x = g.coordinate(idx[d]) - center[3 * b + d];
        r2 += x * x;
      }
      acc += amp[b] * std::exp(-0.5 * r2 / (width[b] * width[b]));
    }
    u.values[lin] = acc;
  }
  return u;
}

// Exact continuum integrals of g(x) = amp exp(-|x|^2 / (2 w^2)).
inline double gaussian_mass_exact(int N, double w = 1.0, double amp = 1.0) {
  return amp * amp * std::pow(std::numbers::pi * w * w, N / 2.0);
}

inline double gaussian_lp_exact(int N, double r, double w = 1.0, double amp = 1.0) {
  return std::pow(amp, r) * std::pow(2.0 * std::numbers::pi * w * w / r, N / 2.0);
}

// [g]_s^2 = integral |xi|^{2s} e^{-|xi|^2} dxi = pi^{N/2} Gamma(s + N/2) / Gamma(N/2).
inline double gaussian_seminorm_exact(int N, double s) {
  return std::pow(std::numbers::pi, N / 2.0) * std::tgamma(s + N / 2.0) /
         std::tgamma(N / 2.0);
}

// Composite Simpson rule on [a, b] with n (even) panels.
template <typename F>
inline double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Lattice quadrature of the continuum Fourier integral for ((-Delta)^s of the
// periodized unit Gaussian)(x): (2L)^{-N} sum_k |xi_k|^{2s} ghat(xi_k)
// cos(xi_k . x) over the frequency lattice xi_k = pi k / L, using the analytic
// transform ghat(xi) = (2 pi)^{N/2} e^{-|xi|^2/2}. By Poisson summation this
// equals sum_m ((-Delta)^s g)(x + 2L m), the whole-space operator summed over
// box translates, so it is the exact continuum reference for what a periodic
// discretization can represent. Direct summation, no FFT, no library code.
// ghat is below 1e-100 once |xi| > 22, so kmax = ceil(22 L / pi) terms per
// axis make the truncation error pure round-off.
inline double gaussian_frac_lap_periodized_oracle(const GridDescriptor& g, double s,
                                                  const double* x) {
  const double L = g.box_half_length;
  const int kmax = static_cast<int>(std::ceil(22.0 * L / std::numbers::pi));
  const double amp = std::pow(2.0 * std::numbers::pi, g.dim / 2.0) /
                     std::pow(2.0 * L, g.dim);
  int k[3] = {0, 0, 0};
  for (int d = 0; d < g.dim; ++d) k[d] = -kmax;
  double acc = 0.0;
  while (true) {
    double xi2 = 0.0;
    double phase = 0.0;
    for (int d = 0; d < g.dim; ++d) {
      const double xi = std::numbers::pi * k[d] / L;
      xi2 += xi * xi;
      phase += xi * x[d];
    }
    if (xi2 > 0.0) {
      acc += std::pow(xi2, s) * std::exp(-0.5 * xi2) * std::cos(phase);
    }
    int d = 0;
    while (d < g.dim && ++k[d] > kmax) k[d++] = -kmax;
    if (d == g.dim) break;
  }
  return amp * acc;
}

// Exact Gagliardo seminorm of the periodized Gaussian amp e^{-|x|^2/(2w^2)}:
// [g_per]_s^2 = (2L)^{-N} sum_k |xi_k|^{2s} ghat(xi_k)^2 with
// ghat(xi) = amp (2 pi)^{N/2} w^N e^{-w^2 |xi|^2 / 2}.
inline double gaussian_seminorm_periodized(int N, double s, double L, double w = 1.0,
                                           double amp = 1.0) {
  const int kmax =
      static_cast<int>(std::ceil(16.0 * L / (std::numbers::pi * std::min(w, 1.0))));
  const double pref = amp * amp * std::pow(w, 2 * N) *
                      std::pow(2.0 * std::numbers::pi, static_cast<double>(N)) /
                      std::pow(2.0 * L, N);
  int k[3] = {0, 0, 0};
  for (int d = 0; d < N; ++d) k[d] = -kmax;
  double acc = 0.0;
  while (true) {
    double xi2 = 0.0;
    for (int d = 0; d < N; ++d) {
      const double xi = std::numbers::pi * k[d] / L;
      xi2 += xi * xi;
    }
    if (xi2 > 0.0) acc += std::pow(xi2, s) * std::exp(-w * w * xi2);
    int d = 0;
    while (d < N && ++k[d] > kmax) k[d++] = -kmax;
    if (d == N) break;
  }
  return pref * acc;
}

// Whole-space continuum Fourier-integral oracle for ((-Delta)^s g)(x), g the
// unit Gaussian, reduced to a radial quadrature. N = 2 uses the Bessel kernel,
// N = 1 the cosine kernel. The integrand decays like e^{-rho^2/2}, so [0, 14]
// captures it to below 1e-40. Differs from the periodized operator by the
// image tails sum_{m != 0} ((-Delta)^s g)(x + 2L m) ~ L^{-(N+2s)}, about
// 6e-4 at L = 12, s = 0.5: the symbol cusp at xi = 0 makes the kernel decay
// only algebraically, so periodic discretizations agree with the whole-space
// values at that scale, not at round-off.
inline double gaussian_frac_lap_oracle(int N, double s, double x_norm) {
  if (N == 2) {
    auto f = [&](double rho) {
      return std::pow(rho, 2.0 * s + 1.0) * std::exp(-0.5 * rho * rho) *
             std::cyl_bessel_j(0.0, rho * x_norm);
    };
    return simpson(f, 0.0, 14.0, 14000);
  }
  if (N == 1) {
    auto f = [&](double xi) {
      return std::pow(xi, 2.0 * s) * std::exp(-0.5 * xi * xi) * std::cos(xi * x_norm);
    };
    return std::sqrt(2.0 / std::numbers::pi) * simpson(f, 0.0, 14.0, 14000);
  }
  throw std::runtime_error("oracle only implemented for N = 1, 2");
}

}  // namespace testutil
