#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "spectral.hpp"

namespace fracnls {

enum class Regime { SubcriticalPair, SobolevCritical };

inline const char* to_string(Regime r) {
  return r == Regime::SubcriticalPair ? "SubcriticalPair" : "SobolevCritical";
}

// Problem data for -(Delta)^{s1} u + (-Delta)^{s2} u = lambda u + mu |u|^{q-2} u
// + |u|^{p-2} u on the mass sphere |u|_2 = a. The regime is inferred from p:
// SobolevCritical when p equals 2N/(N - 2 s1), SubcriticalPair otherwise.
struct ProblemParams {
  int N = 2;
  double s1 = 0.75;
  double s2 = 0.25;
  double p = 4.0;
  double q = 2.4;
  double mu = 1.0;
  double a = 1.0;
  Regime regime = Regime::SubcriticalPair;

  double kappa_p() const { return N * (p - 2.0) / (2.0 * p); }
  double kappa_q() const { return N * (q - 2.0) / (2.0 * q); }
  double two_star_s1() const { return 2.0 * N / (N - 2.0 * s1); }
  double two_star_s2() const { return 2.0 * N / (N - 2.0 * s2); }

  // Field-by-field checks with JSON-pointer style locations, reused by the
  // manifest validator. Inequalities are strict; boundary values are errors.
  static std::vector<ValidationIssue> check(int N, double s1, double s2, double p,
                                            double q, double mu, double a) {
    std::vector<ValidationIssue> issues;
    auto bad = [&](const char* ptr, const std::string& msg) {
      issues.push_back({ptr, msg});
    };
    if (N < 1 || N > 3) bad("/N", "dimension N must be 1, 2, or 3");
    if (!std::isfinite(s1) || !(s1 > 0.0 && s1 < 1.0)) bad("/s1", "requires 0 < s1 < 1 strictly");
    if (!std::isfinite(s2) || !(s2 > 0.0 && s2 < 1.0)) bad("/s2", "requires 0 < s2 < 1 strictly");
    if (std::isfinite(s1) && std::isfinite(s2) && !(s2 < s1))
      bad("/s2", "requires s2 < s1 strictly");
    if (!(mu > 0.0) || !std::isfinite(mu)) bad("/mu", "requires mu > 0");
    if (!(a > 0.0) || !std::isfinite(a)) bad("/a", "requires a > 0");
    if (!std::isfinite(p)) bad("/p", "p must be finite");
    if (!std::isfinite(q)) bad("/q", "q must be finite");
    if (!issues.empty()) return issues;
    if (!(N > 2.0 * s1)) {
      bad("/s1", "requires N > 2 s1 strictly");
      return issues;
    }
    const double p_crit = 2.0 * N / (N - 2.0 * s1);
    const double q_upper = 2.0 + 4.0 * s2 / N;
    const bool critical = is_critical(N, s1, p);
    if (!(q > 2.0)) bad("/q", "requires q > 2 strictly");
    if (!(q < q_upper))
      bad("/q", "requires q < 2 + 4 s2 / N strictly (got q = " + std::to_string(q) +
                    ", bound = " + std::to_string(q_upper) + ")");
    if (!critical) {
      const double p_lower = 2.0 + 4.0 * s1 / N;
      if (!(p > p_lower))
        bad("/p", "requires p > 2 + 4 s1 / N strictly (got p = " + std::to_string(p) +
                      ", bound = " + std::to_string(p_lower) + ")");
      if (!(p < p_crit))
        bad("/p", "requires p < 2 N / (N - 2 s1) strictly (got p = " + std::to_string(p) +
                      ", bound = " + std::to_string(p_crit) + ")");
    }
    return issues;
  }

  static bool is_critical(int N, double s1, double p) {
    const double p_crit = 2.0 * N / (N - 2.0 * s1);
    return std::abs(p - p_crit) <= 1e-12 * p_crit;
  }

  static ProblemParams create(int N, double s1, double s2, double p, double q,
                              double mu, double a) {
    auto issues = check(N, s1, s2, p, q, mu, a);
    if (!issues.empty()) {
      std::string msg = "invalid problem parameters:";
      for (const auto& it : issues) msg += " [" + it.pointer + "] " + it.message;
      throw ParameterError(msg);
    }
    Regime reg = is_critical(N, s1, p) ? Regime::SobolevCritical : Regime::SubcriticalPair;
    return ProblemParams{N, s1, s2, p, q, mu, a, reg};
  }

  // Bypasses the regime checks. Exists so that arithmetic identities can be
  // exercised at boundary exponents; solvers and reports must not use it.
  static ProblemParams unchecked(int N, double s1, double s2, double p, double q,
                                 double mu, double a,
                                 Regime reg = Regime::SubcriticalPair) {
    return ProblemParams{N, s1, s2, p, q, mu, a, reg};
  }
};

// The four integrals every scaling computation reduces to:
// A = [u]_{s1}^2, B = [u]_{s2}^2, C = integral |u|^p, D = integral |u|^q.
struct FiberCoefficients {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double D = 0.0;
};

inline FiberCoefficients fiber_coefficients(const Field& u, const ProblemParams& prm) {
  return FiberCoefficients{seminorm_sq(u, prm.s1), seminorm_sq(u, prm.s2),
                           lp_norm_pow(u, prm.p), lp_norm_pow(u, prm.q)};
}

inline double energy_from(const FiberCoefficients& c, const ProblemParams& prm) {
  return c.A / 2.0 + c.B / 2.0 - c.C / prm.p - prm.mu * c.D / prm.q;
}

inline double pohozaev_from(const FiberCoefficients& c, const ProblemParams& prm) {
  return prm.s1 * c.A + prm.s2 * c.B - prm.kappa_p() * c.C - prm.mu * prm.kappa_q() * c.D;
}

inline double energy(const Field& u, const ProblemParams& prm) {
  return energy_from(fiber_coefficients(u, prm), prm);
}

inline double pohozaev(const Field& u, const ProblemParams& prm) {
  return pohozaev_from(fiber_coefficients(u, prm), prm);
}

// Value of the fiber map Phi_u(t) = E(t * u) built from precomputed
// coefficients. The four exponential rates are ordered q kappa_q < 2 s2 <
// 2 s1 < p kappa_p throughout the admissible regime, which is what gives the
// map its two-critical-point shape.
namespace detail {

struct FiberRates {
  double rA, rB, rC, rD;  // exponents multiplying t in each term
};

inline FiberRates fiber_rates(const ProblemParams& prm) {
  return {2.0 * prm.s1, 2.0 * prm.s2, prm.p * prm.kappa_p(), prm.q * prm.kappa_q()};
}

inline double checked_exp(double arg, const char* term) {
  if (arg > 700.0)
    throw RangeError(std::string("fiber evaluation overflows in the ") + term +
                     " term (exponent " + std::to_string(arg) + ")");
  return std::exp(arg);
}

}  // namespace detail

inline double fiber_value(const FiberCoefficients& c, double t, const ProblemParams& prm) {
  auto r = detail::fiber_rates(prm);
  return detail::checked_exp(r.rA * t, "s1") * c.A / 2.0 +
         detail::checked_exp(r.rB * t, "s2") * c.B / 2.0 -
         detail::checked_exp(r.rC * t, "p") * c.C / prm.p -
         prm.mu * detail::checked_exp(r.rD * t, "q") * c.D / prm.q;
}

inline double fiber_deriv(const FiberCoefficients& c, double t, const ProblemParams& prm) {
  auto r = detail::fiber_rates(prm);
  return prm.s1 * detail::checked_exp(r.rA * t, "s1") * c.A +
         prm.s2 * detail::checked_exp(r.rB * t, "s2") * c.B -
         prm.kappa_p() * detail::checked_exp(r.rC * t, "p") * c.C -
         prm.mu * prm.kappa_q() * detail::checked_exp(r.rD * t, "q") * c.D;
}

inline double fiber_second_deriv(const FiberCoefficients& c, double t,
                                 const ProblemParams& prm) {
  auto r = detail::fiber_rates(prm);
  const double kp = prm.kappa_p(), kq = prm.kappa_q();
  return 2.0 * prm.s1 * prm.s1 * detail::checked_exp(r.rA * t, "s1") * c.A +
         2.0 * prm.s2 * prm.s2 * detail::checked_exp(r.rB * t, "s2") * c.B -
         prm.p * kp * kp * detail::checked_exp(r.rC * t, "p") * c.C -
         prm.mu * prm.q * kq * kq * detail::checked_exp(r.rD * t, "q") * c.D;
}

// L2-invariant dilation (t * u)(x) = e^{Nt/2} u(e^t x), realized by trigono-
// metric interpolation of the periodic extension: evaluate the band-limited
// interpolant of u at the points e^t x_j. Separable, so it reduces to one
// M x M evaluation matrix applied along each axis of the spectrum.
namespace detail {

inline std::vector<std::complex<double>> dilation_matrix(const GridDescriptor& g, double t) {
  const int M = g.points_per_axis;
  const double L = g.box_half_length;
  const double scale = std::exp(t);
  std::vector<std::complex<double>> T(static_cast<std::size_t>(M) * M);
  const double inv_m = 1.0 / M;
  for (int j = 0; j < M; ++j) {
    // Target point for output index j, mapped into the periodic cell.
    const double y = scale * g.coordinate(j);
    const double theta = std::numbers::pi * (y + L) / L;  // 2 pi (y+L) / (2L)
    for (int m = 0; m < M; ++m) {
      if (m == M / 2) {
        // The unpaired Nyquist mode interpolates as a cosine so that real
        // input stays real off the grid.
        T[static_cast<std::size_t>(j) * M + m] = std::cos(theta * (M / 2)) * inv_m;
      } else {
        const int k = signed_freq(m, M);
        T[static_cast<std::size_t>(j) * M + m] =
            std::complex<double>(std::cos(theta * k), std::sin(theta * k)) * inv_m;
      }
    }
  }
  return T;
}

// Contract the dilation matrix with axis `axis` of the spectral array.
inline std::vector<std::complex<double>> apply_axis(
    const std::vector<std::complex<double>>& T, const std::vector<std::complex<double>>& Y,
    const GridDescriptor& g, int axis) {
  const int M = g.points_per_axis;
  const std::size_t n = Y.size();
  // Row-major strides: axis d has stride M^(dim-1-d).
  std::size_t stride = 1;
  for (int d = g.dim - 1; d > axis; --d) stride *= static_cast<std::size_t>(M);
  const std::size_t block = stride * static_cast<std::size_t>(M);
  std::vector<std::complex<double>> out(n);
  for (std::size_t base = 0; base < n; base += block) {
    for (std::size_t off = 0; off < stride; ++off) {
      const std::complex<double>* col = Y.data() + base + off;
      std::complex<double>* res = out.data() + base + off;
      for (int j = 0; j < M; ++j) {
        std::complex<double> acc = 0.0;
        const std::complex<double>* row = T.data() + static_cast<std::size_t>(j) * M;
        for (int m = 0; m < M; ++m) acc += row[m] * col[static_cast<std::size_t>(m) * stride];
        res[static_cast<std::size_t>(j) * stride] = acc;
      }
    }
  }
  return out;
}

}  // namespace detail

inline Field dilate(const Field& u, double t, double t_cap = 3.0) {
  require_finite(u, "dilate");
  if (!std::isfinite(t)) throw ParameterError("dilate: t must be finite");
  if (std::abs(t) > t_cap)
    throw ResolutionError("dilate: |t| = " + std::to_string(std::abs(t)) +
                          " exceeds the resolution cap " + std::to_string(t_cap));
  if (t == 0.0) return u;
  std::vector<std::complex<double>> spec = detail::forward_dft(u);
  const auto T = detail::dilation_matrix(u.grid, t);
  for (int d = 0; d < u.grid.dim; ++d) spec = detail::apply_axis(T, spec, u.grid, d);
  const double amp = std::exp(0.5 * u.grid.dim * t);
  Field out = make_field(u.grid);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = amp * spec[i].real();
  return out;
}

enum class PohozaevClass { Pplus, Pzero, Pminus, NotOnPohozaev };

// Relative tolerance under which a fiber derivative or curvature counts as
// zero for classification; solver landings target the same depth so that
// returned fields actually classify.
inline constexpr double kPohozaevClassTol = 1e-8;

inline const char* to_string(PohozaevClass c) {
  switch (c) {
    case PohozaevClass::Pplus: return "Pplus";
    case PohozaevClass::Pzero: return "Pzero";
    case PohozaevClass::Pminus: return "Pminus";
    default: return "NotOnPohozaev";
  }
}

// Landmarks of the fiber map: Phi' vanishes at xi (local min) and t_max_pt
// (global max), Phi vanishes at c_zero in (xi, t_max_pt) and d_zero beyond,
// with Phi(xi) < 0 < Phi(t_max_pt).
struct FiberGeometry {
  double xi = 0.0;
  double t_max_pt = 0.0;
  double c_zero = 0.0;
  double d_zero = 0.0;
  double phi_at_xi = 0.0;
  double phi_at_tmax = 0.0;
  PohozaevClass classification_at_zero = PohozaevClass::NotOnPohozaev;
};

namespace detail {

// Phi' and Phi rescaled by e^{-q kappa_q t}. Same roots, but the value tends
// to the constant -mu kappa_q D (resp. -mu D / q) as t -> -infinity and stays
// representable over the whole scan window.
inline double scaled_fiber_deriv(const FiberCoefficients& c, double t,
                                 const ProblemParams& prm) {
  auto r = fiber_rates(prm);
  const double d = r.rD * t;
  return prm.s1 * checked_exp(r.rA * t - d, "s1") * c.A +
         prm.s2 * checked_exp(r.rB * t - d, "s2") * c.B -
         prm.kappa_p() * checked_exp(r.rC * t - d, "p") * c.C -
         prm.mu * prm.kappa_q() * c.D;
}

inline double scaled_fiber_value(const FiberCoefficients& c, double t,
                                 const ProblemParams& prm) {
  auto r = fiber_rates(prm);
  const double d = r.rD * t;
  return checked_exp(r.rA * t - d, "s1") * c.A / 2.0 +
         checked_exp(r.rB * t - d, "s2") * c.B / 2.0 -
         checked_exp(r.rC * t - d, "p") * c.C / prm.p - prm.mu * c.D / prm.q;
}

// Bisection refined to floating-point resolution of the abscissa. f must have
// opposite signs at lo and hi.
template <typename F>
inline double bisect_root(F&& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((flo < 0.0) == (fm < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline FiberGeometry fiber_geometry(const FiberCoefficients& c, const ProblemParams& prm) {
  if (!(c.A >= 0.0 && c.B >= 0.0))
    throw GeometryError("fiber geometry requires nonnegative seminorm coefficients");
  if (!(c.C > 0.0) || !(c.D > 0.0))
    throw GeometryError("fiber geometry requires C > 0 and D > 0");
  if (!(c.A > 0.0))
    throw GeometryError("fiber geometry requires A > 0 (nonconstant field)");

  auto g = [&](double t) { return detail::scaled_fiber_deriv(c, t, prm); };

  // Scan for the sign pattern - + - of Phi' on symmetric windows, expanding
  // geometrically until both crossings are bracketed.
  double lo_xi = 0.0, hi_xi = 0.0, lo_t = 0.0, hi_t = 0.0;
  bool found = false;
  for (double window = 20.0; window <= 60.0 + 1e-9 && !found; window *= std::sqrt(3.0)) {
    const int npts = 4000;
    double prev_t = -window;
    double prev_g = g(prev_t);
    int crossings = 0;
    for (int i = 1; i <= npts; ++i) {
      double t = -window + 2.0 * window * i / npts;
      double gt = g(t);
      if ((prev_g < 0.0) != (gt < 0.0)) {
        ++crossings;
        if (crossings == 1) {
          lo_xi = prev_t;
          hi_xi = t;
        } else if (crossings == 2) {
          lo_t = prev_t;
          hi_t = t;
        }
      }
      prev_t = t;
      prev_g = gt;
    }
    found = crossings == 2;
    if (crossings > 2)
      throw GeometryError("fiber derivative changed sign more than twice; coefficients "
                          "violate the expected fiber shape");
  }
  if (!found)
    throw GeometryError("could not bracket both critical points of the fiber map on "
                        "[-60, 60]; the positivity interval of Phi' is missing or "
                        "out of range");

  FiberGeometry out;
  out.xi = detail::bisect_root(g, lo_xi, hi_xi);
  out.t_max_pt = detail::bisect_root(g, lo_t, hi_t);
  out.phi_at_xi = fiber_value(c, out.xi, prm);
  out.phi_at_tmax = fiber_value(c, out.t_max_pt, prm);
  if (!(out.phi_at_xi < 0.0 && out.phi_at_tmax > 0.0))
    throw GeometryError("degenerate fiber geometry: expected Phi(xi) < 0 < Phi(t_max)");

  // Zeros of Phi on either side of the maximum.
  auto phi = [&](double t) { return detail::scaled_fiber_value(c, t, prm); };
  out.c_zero = detail::bisect_root(phi, out.xi, out.t_max_pt);
  double hi = out.t_max_pt + 1.0;
  for (int it = 0; phi(hi) > 0.0; ++it) {
    if (it >= 12) throw GeometryError("could not bracket the descending zero of Phi");
    hi = out.t_max_pt + (hi - out.t_max_pt) * 2.0;
  }
  out.d_zero = detail::bisect_root(phi, out.t_max_pt, hi);

  // Classify the t = 0 point of the fiber against the Pohozaev set.
  const double dphi0 = fiber_deriv(c, 0.0, prm);
  const double scale_p = prm.s1 * c.A + prm.s2 * c.B;
  if (std::abs(dphi0) <= kPohozaevClassTol * scale_p) {
    const double d2phi0 = fiber_second_deriv(c, 0.0, prm);
    const double scale_2 = 2.0 * prm.s1 * prm.s1 * c.A + 2.0 * prm.s2 * prm.s2 * c.B;
    if (d2phi0 > kPohozaevClassTol * scale_2)
      out.classification_at_zero = PohozaevClass::Pplus;
    else if (d2phi0 < -kPohozaevClassTol * scale_2)
      out.classification_at_zero = PohozaevClass::Pminus;
    else
      out.classification_at_zero = PohozaevClass::Pzero;
  } else {
    out.classification_at_zero = PohozaevClass::NotOnPohozaev;
  }
  return out;
}

}  // namespace fracnls
