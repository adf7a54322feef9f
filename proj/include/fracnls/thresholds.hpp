#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "variational.hpp"

namespace fracnls {

enum class Provenance { UserSupplied, Estimated };

inline const char* to_string(Provenance p) {
  return p == Provenance::UserSupplied ? "UserSupplied" : "Estimated";
}

// Best constants entering the threshold conditions: gn_q and gn_p are the
// Gagliardo-Nirenberg constants of order s1 at exponents q and p, sobolev_S
// is the critical Sobolev constant of order s1. At p = 2N/(N - 2 s1) the two
// descriptions coincide through gn_p = sobolev_S^{-2*/2}.
struct ConstantsTable {
  double gn_q = 0.0;
  double gn_p = 0.0;
  double sobolev_S = 0.0;
  Provenance provenance = Provenance::UserSupplied;
  std::optional<GridDescriptor> grid_used;
};

inline void require_constants(const ConstantsTable& ct) {
  if (!(ct.gn_q > 0.0) || !(ct.gn_p > 0.0) || !(ct.sobolev_S > 0.0))
    throw ParameterError("constants table entries must be positive");
}

struct ConditionCheck {
  bool pass = false;
  double lhs = 0.0;
  double rhs = 0.0;
  bool vacuous = false;
};

namespace detail {

inline void require_subcritical(const ProblemParams& prm, const char* what) {
  if (prm.regime != Regime::SubcriticalPair)
    throw ParameterError(std::string(what) + " requires the SubcriticalPair regime");
}

inline void require_critical(const ProblemParams& prm, const char* what) {
  if (prm.regime != Regime::SobolevCritical)
    throw ParameterError(std::string(what) + " requires the SobolevCritical regime");
}

}  // namespace detail

// Lower bound for the energy on the mass sphere as a function of
// t = [u]_{s1}: h(t) = t^2/2 - (gn_p/p) a^{p - N(p-2)/(2 s1)} t^{N(p-2)/(2 s1)}
//                    - (mu gn_q/q) a^{q - N(q-2)/(2 s1)} t^{N(q-2)/(2 s1)}.
inline double h_subcritical(double t, const ProblemParams& prm, const ConstantsTable& ct) {
  detail::require_subcritical(prm, "h_subcritical");
  require_constants(ct);
  if (!(t > 0.0)) throw ParameterError("h_subcritical requires t > 0");
  const double ep = prm.N * (prm.p - 2.0) / (2.0 * prm.s1);
  const double eq = prm.N * (prm.q - 2.0) / (2.0 * prm.s1);
  return 0.5 * t * t - (ct.gn_p / prm.p) * std::pow(prm.a, prm.p - ep) * std::pow(t, ep) -
         (prm.mu * ct.gn_q / prm.q) * std::pow(prm.a, prm.q - eq) * std::pow(t, eq);
}

inline double h_subcritical_deriv(double t, const ProblemParams& prm,
                                  const ConstantsTable& ct) {
  const double ep = prm.N * (prm.p - 2.0) / (2.0 * prm.s1);
  const double eq = prm.N * (prm.q - 2.0) / (2.0 * prm.s1);
  return t - (ct.gn_p / prm.p) * ep * std::pow(prm.a, prm.p - ep) * std::pow(t, ep - 1.0) -
         (prm.mu * ct.gn_q / prm.q) * eq * std::pow(prm.a, prm.q - eq) * std::pow(t, eq - 1.0);
}

// Smallness of a ensuring a negative multiplier; vacuous whenever
// p <= 2N/(N - 2 s2), where no constraint on a is needed.
inline ConditionCheck check_A0(const ProblemParams& prm, const ConstantsTable& ct) {
  detail::require_subcritical(prm, "check_A0");
  require_constants(ct);
  ConditionCheck out;
  const double N = prm.N, s1 = prm.s1, s2 = prm.s2, p = prm.p;
  const double kp = prm.kappa_p();
  const double gp = N * (p - 2.0) - 4.0 * s1;
  out.vacuous = p <= 2.0 * N / (N - 2.0 * s2);
  out.lhs = std::pow(prm.a, 2.0 * (p - 2.0) * s1 / gp);
  if (out.vacuous) {
    // kappa_p <= s2 here, so the rhs is not even defined; the condition asks
    // nothing of a.
    out.pass = true;
    out.rhs = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.rhs = std::pow((s1 - s2) / ct.gn_p, 2.0 * s1 / gp) *
            std::pow((s1 - kp) / (kp - s2), s1 / (2.0 * (s1 - s2)));
  out.pass = out.lhs < out.rhs;
  return out;
}

// Smallness of mu a^{...} guaranteeing an interior positivity interval for h.
inline ConditionCheck check_A1(const ProblemParams& prm, const ConstantsTable& ct) {
  detail::require_subcritical(prm, "check_A1");
  require_constants(ct);
  ConditionCheck out;
  const double N = prm.N, s1 = prm.s1, p = prm.p, q = prm.q;
  const double gq = 4.0 * s1 - N * (q - 2.0);   // > 0 in regime
  const double gp = N * (p - 2.0) - 4.0 * s1;   // > 0 in regime
  out.lhs = prm.mu * std::pow(prm.a, q - N * (q - 2.0) / (2.0 * s1) +
                                         (p - N * (p - 2.0) / (2.0 * s1)) * gq / gp);
  out.rhs = std::pow(p * gq / (2.0 * N * ct.gn_p * (p - q)), gq / gp) *
            (gp / (2.0 * N * (p - q))) * q / ct.gn_q;
  out.pass = out.lhs < out.rhs;
  return out;
}

// Strict version used by the mountain-pass geometry.
inline ConditionCheck check_A2(const ProblemParams& prm, const ConstantsTable& ct) {
  detail::require_subcritical(prm, "check_A2");
  require_constants(ct);
  ConditionCheck out;
  const double N = prm.N, s1 = prm.s1, p = prm.p, q = prm.q;
  const double kp = prm.kappa_p(), kq = prm.kappa_q();
  const double gq = 4.0 * s1 - N * (q - 2.0);
  const double gp = N * (p - 2.0) - 4.0 * s1;
  out.lhs = std::pow(prm.a, (2.0 * q * s1 - N * (q - 2.0)) / gq +
                                (2.0 * p * s1 - N * (p - 2.0)) / gp) *
            std::pow(prm.mu, 2.0 * s1 / gq);
  out.rhs = std::pow(s1 * (p * kp - 2.0 * s1) / (ct.gn_q * kq * (p * kp - q * kq)),
                     2.0 * s1 / gq) *
            std::pow(s1 * (2.0 * s1 - q * kq) / (ct.gn_p * kp * (p * kp - q * kq)),
                     2.0 * s1 / gp);
  out.pass = out.lhs < out.rhs;
  return out;
}

// Positivity interval (R0, R1) of h and its maximizer. Exists iff (A1) holds.
struct HGeometry {
  double R0 = 0.0;
  double R1 = 0.0;
  double t_max = 0.0;
  double h_at_tmax = 0.0;
};

inline HGeometry h_geometry(const ProblemParams& prm, const ConstantsTable& ct) {
  detail::require_subcritical(prm, "h_geometry");
  require_constants(ct);
  auto a1 = check_A1(prm, ct);
  if (!a1.pass)
    throw PreconditionError("h_geometry requires condition (A1); lhs = " +
                            std::to_string(a1.lhs) + " is not below rhs = " +
                            std::to_string(a1.rhs));
  const double N = prm.N, s1 = prm.s1, p = prm.p, q = prm.q;
  const double gq = 4.0 * s1 - N * (q - 2.0);
  const double gp = N * (p - 2.0) - 4.0 * s1;
  // Interior point where the p-free part of h is maximal; under (A1) the full
  // h is strictly positive here, which seeds both bisections.
  const double t_bar =
      std::pow(p * gq /
                   (2.0 * N * ct.gn_p * (p - q) *
                    std::pow(prm.a, (2.0 * p * s1 - N * (p - 2.0)) / (2.0 * s1))),
               2.0 * s1 / gp);
  if (!(h_subcritical(t_bar, prm, ct) > 0.0))
    throw GeometryError("h is not positive at its candidate interior point despite (A1)");

  auto h = [&](double t) { return h_subcritical(t, prm, ct); };
  double lo = t_bar;
  for (int it = 0; h(lo) > 0.0; ++it) {
    if (it >= 600) throw GeometryError("could not bracket R0 below the interior point");
    lo *= 0.5;
  }
  HGeometry out;
  out.R0 = detail::bisect_root(h, lo, t_bar);
  double hi = t_bar * 2.0;
  for (int it = 0; h(hi) > 0.0; ++it) {
    if (it >= 600) throw GeometryError("could not bracket R1 above the interior point");
    hi *= 2.0;
  }
  out.R1 = detail::bisect_root(h, t_bar, hi);
  auto dh = [&](double t) { return h_subcritical_deriv(t, prm, ct); };
  if (!(dh(out.R0) > 0.0 && dh(out.R1) < 0.0))
    throw GeometryError("h' does not change sign across the positivity interval");
  out.t_max = detail::bisect_root(dh, out.R0, out.R1);
  out.h_at_tmax = h(out.t_max);
  return out;
}

// Critical-regime analogue of h on the mass sphere, as a function of
// rho = [u]_{s1} (not squared). Uses gn_p only through sobolev_S.
inline double h_critical(double a, double rho, const ProblemParams& prm,
                         const ConstantsTable& ct) {
  detail::require_critical(prm, "h_critical");
  require_constants(ct);
  if (!(a > 0.0) || !(rho > 0.0)) throw ParameterError("h_critical requires a > 0 and rho > 0");
  const double N = prm.N, s1 = prm.s1, q = prm.q;
  const double two_star = prm.two_star_s1();
  return 0.5 - (1.0 / two_star) * std::pow(ct.sobolev_S, -two_star / 2.0) *
                   std::pow(rho, 4.0 * s1 / (N - 2.0 * s1)) -
         (prm.mu * ct.gn_q / q) * std::pow(a, (2.0 * N - q * (N - 2.0 * s1)) / (2.0 * s1)) *
             std::pow(rho, (N * (q - 2.0) - 4.0 * s1) / (2.0 * s1));
}

// Mass thresholds in the critical regime. a0 marks where max_rho h(a, .)
// crosses zero; abar0 is the separate bound entering the compactness range.
struct CriticalThresholds {
  double a0 = 0.0;
  double abar0 = 0.0;
  double K0 = 0.0;
  double rho_a = 0.0;
  double A_mu = 0.0;
};

namespace detail {

inline double critical_A_mu(const ProblemParams& prm, const ConstantsTable& ct) {
  const double N = prm.N, s1 = prm.s1, q = prm.q;
  const double two_star = prm.two_star_s1();
  return prm.mu * ct.gn_q * (4.0 * s1 - N * (q - 2.0)) / (2.0 * s1 * q) * N *
         std::pow(ct.sobolev_S, two_star / 2.0) / (2.0 * s1);
}

}  // namespace detail

// Maximizer of rho -> h(a, rho) in closed form.
inline double critical_rho(double a, const ProblemParams& prm, const ConstantsTable& ct) {
  detail::require_critical(prm, "critical_rho");
  require_constants(ct);
  const double N = prm.N, s1 = prm.s1, q = prm.q;
  const double denom = N * (2.0 * q * s1 - N * (q - 2.0));
  const double A_mu = detail::critical_A_mu(prm, ct);
  return std::pow(A_mu, 2.0 * s1 * (N - 2.0 * s1) / denom) *
         std::pow(a, (N - 2.0 * s1) / N);
}

inline CriticalThresholds critical_thresholds(const ProblemParams& prm,
                                              const ConstantsTable& ct) {
  detail::require_critical(prm, "critical_thresholds");
  require_constants(ct);
  CriticalThresholds out;
  const double N = prm.N, s1 = prm.s1, q = prm.q;
  const double two_star = prm.two_star_s1();
  const double kq = prm.kappa_q();
  const double denom = N * (2.0 * q * s1 - N * (q - 2.0));
  out.A_mu = detail::critical_A_mu(prm, ct);
  out.rho_a = critical_rho(prm.a, prm, ct);
  // K0 is the mu = 1 coefficient in max_rho h(a, rho) = 1/2 - K_mu a^{4 s1/N},
  // where K_mu = mu^{8 s1^2 / denom} K0.
  const double A1 = out.A_mu / prm.mu;
  const double e_plus = 8.0 * s1 * s1 / denom;
  const double e_minus = (N - 2.0 * s1) * (N * (q - 2.0) - 4.0 * s1) / denom;
  out.K0 = (1.0 / two_star) * std::pow(ct.sobolev_S, -two_star / 2.0) * std::pow(A1, e_plus) +
           (ct.gn_q / q) * std::pow(A1, e_minus);
  const double mu_exp = -2.0 * s1 / (2.0 * q * s1 - N * (q - 2.0));
  out.a0 = std::pow(prm.mu, mu_exp) * std::pow(1.0 / (2.0 * out.K0), N / (4.0 * s1));
  out.abar0 =
      std::pow(prm.mu, mu_exp) *
      std::pow(s1 * s1 * (two_star - 2.0) / (ct.gn_q * kq * (s1 * two_star - q * kq)),
               2.0 * s1 / (2.0 * q * s1 - N * (q - 2.0))) *
      std::pow(std::pow(ct.sobolev_S, 2.0 / two_star) * (2.0 * s1 - q * kq) /
                   (two_star * s1 - q * kq),
               (N - 2.0 * s1) * (4.0 * s1 - N * (q - 2.0)) /
                   (4.0 * s1 * (2.0 * q * s1 - N * (q - 2.0))));
  return out;
}

// ---------------------------------------------------------------------------
// Constant estimation by maximizing the corresponding quotient on the grid.
// ---------------------------------------------------------------------------

struct EstimateResult {
  double value = 0.0;          // estimate on the requested grid
  double value_refined = 0.0;  // same functional with 2M points per axis
  GridDescriptor grid;
  int iterations = 0;
};

namespace detail {

// Normalized Gaussian bump used to seed the ascents.
inline Field gaussian_bump(const GridDescriptor& g) {
  Field u = make_field(g);
  int idx[3];
  for (std::size_t lin = 0; lin < u.values.size(); ++lin) {
    decode_index(g, lin, idx);
    double r2 = 0.0;
    for (int d = 0; d < g.dim; ++d) {
      double x = g.coordinate(idx[d]);
      r2 += x * x;
    }
    u.values[lin] = std::exp(-0.5 * r2);
  }
  return u;
}

// The estimation subspace: fields whose spectrum lives on the fixed annulus
// 0 < |xi| <= kBandModes * pi / L. Every grid that resolves the band carries
// the exact same subspace, so the maximization landscape does not change
// under refinement and grids only differ through the quadrature of |u|^r.
// The band is essential for a convergent estimate: over all grid fields the
// discrete supremum is attained by a spike one spacing wide whose quotient
// tracks the resolution and never settles, and the excluded zero mode
// (constants have vanishing seminorm) would make the quotient unbounded.
inline constexpr int kBandModes = 20;

inline void band_project(Field& w) {
  const std::vector<double>& xi2 = cached_symbol(w.grid, 1.0);
  const double k0 = std::numbers::pi / w.grid.box_half_length * kBandModes;
  const double cut = k0 * k0 * (1.0 + 1e-12);
  std::vector<std::complex<double>> spec = forward_dft(w);
  for (std::size_t i = 0; i < spec.size(); ++i)
    if (xi2[i] == 0.0 || xi2[i] > cut) spec[i] = 0.0;
  inverse_dft_real(w.grid, spec, w.values);
}

// Gradient ascent on log W(u) over the band subspace, where W is either the
// Gagliardo-Nirenberg quotient |u|_r^r / ([u]_s^{2 theta} |u|_2^{2 sigma})
// with theta = N(r-2)/(4s) and sigma = r/2 - theta, or in sobolev_mode the
// reciprocal Sobolev quotient |u|_{2*}^2 / [u]_s^2 (r passes 2*). Fixed step
// with halving on decrease, stagnation over a 100-iteration window.
inline double quotient_ascent(int N, double s, double r, const GridDescriptor& g,
                              bool sobolev_mode, int* iterations_out,
                              Field* final_field = nullptr) {
  const double theta = N * (r - 2.0) / (4.0 * s);
  const double sigma = r / 2.0 - theta;
  if (g.points_per_axis < 2 * (kBandModes + 1))
    throw ResolutionError("estimation grid cannot resolve the fixed spectral band");
  Field u = gaussian_bump(g);
  band_project(u);
  {
    const double m0 = mass(u);
    for (double& v : u.values) v /= std::sqrt(m0);
  }
  auto eval_logW = [&](const Field& w, double& A, double& C, double& m) {
    A = seminorm_sq(w, s);
    C = lp_norm_pow(w, r);
    m = mass(w);
    if (sobolev_mode) return (2.0 / r) * std::log(C) - std::log(A);
    return std::log(C) - theta * std::log(A) - sigma * std::log(m);
  };
  double A, C, m;
  double logW = eval_logW(u, A, C, m);
  double step = 1e-2;
  std::vector<double> history;
  history.reserve(512);
  history.push_back(logW);
  const int max_iters = 50000;
  int it = 0;
  for (; it < max_iters; ++it) {
    // L2 gradient of log W, projected back onto the band so that updates stay
    // inside the subspace. All terms are scale-normalized so the update is
    // well conditioned regardless of the current magnitudes.
    Field lap = apply_fractional_laplacian(u, s);
    Field grad = make_field(u.grid);
    for (std::size_t i = 0; i < u.values.size(); ++i) {
      const double v = u.values[i];
      const double pw = std::pow(std::abs(v), r - 2.0) * v;
      if (sobolev_mode)
        grad.values[i] = 2.0 * pw / C - 2.0 * lap.values[i] / A;
      else
        grad.values[i] = r * pw / C - 2.0 * theta * lap.values[i] / A - 2.0 * sigma * v / m;
    }
    band_project(grad);
    bool accepted = false;
    while (step >= 1e-13) {
      Field trial{u.grid, u.values};
      for (std::size_t i = 0; i < trial.values.size(); ++i)
        trial.values[i] += step * grad.values[i];
      const double mt = mass(trial);
      const double inv = 1.0 / std::sqrt(mt);
      for (double& v : trial.values) v *= inv;
      double At, Ct, mtt;
      const double logWt = eval_logW(trial, At, Ct, mtt);
      if (logWt >= logW) {
        u = std::move(trial);
        A = At;
        C = Ct;
        m = mtt;
        logW = logWt;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (accepted && (it + 1) % 100 == 0) {
      // Hygiene reprojection: steps are band-preserving in exact arithmetic,
      // this only sweeps out accumulated rounding leakage.
      band_project(u);
      logW = eval_logW(u, A, C, m);
    }
    history.push_back(logW);
    if (!accepted) break;  // no ascent direction at floating-point resolution
    const std::size_t win = 100;
    if (history.size() > win &&
        std::abs(history.back() - history[history.size() - 1 - win]) <=
            1e-8 * std::max(1.0, std::abs(history.back())))
      break;
  }
  if (it >= max_iters) {
    std::vector<double> tail(history.end() - std::min<std::size_t>(100, history.size()),
                             history.end());
    throw EstimationError("quotient ascent did not stagnate within 50000 iterations", tail);
  }
  band_project(u);
  logW = eval_logW(u, A, C, m);
  if (iterations_out) *iterations_out = it;
  if (final_field) *final_field = u;
  return std::exp(logW);
}

}  // namespace detail

// Best Gagliardo-Nirenberg constant for |u|_r^r <= C [u]_{s}^{2 theta}
// |u|_2^{r - 2 theta}: maximizes the quotient over the grid, so the result is
// a certified lower bound on the continuum constant.
inline EstimateResult estimate_gn_constant(int N, double s, double r,
                                           const GridDescriptor& grid) {
  detail::require_order(s);
  if (!(r > 2.0)) throw ParameterError("estimate_gn_constant requires r > 2");
  if (grid.dim != N) throw ParameterError("estimation grid dimension must equal N");
  if (N > 2.0 * s && !(r <= 2.0 * N / (N - 2.0 * s) + 1e-12))
    throw ParameterError("exponent r exceeds the critical Sobolev exponent for order s");
  EstimateResult out;
  out.grid = grid;
  out.value = detail::quotient_ascent(N, s, r, grid, false, &out.iterations);
  GridDescriptor fine = grid;
  fine.points_per_axis = 2 * grid.points_per_axis;
  out.value_refined = detail::quotient_ascent(N, s, r, fine, false, nullptr);
  return out;
}

// Critical Sobolev constant S = inf [u]_s^2 / |u|_{2*}^2: minimizes the ratio
// on the grid, so the estimate is an upper bound on the continuum constant.
inline EstimateResult estimate_sobolev_constant(int N, double s, const GridDescriptor& grid) {
  detail::require_order(s);
  if (!(N > 2.0 * s)) throw ParameterError("estimate_sobolev_constant requires N > 2 s");
  if (grid.dim != N) throw ParameterError("estimation grid dimension must equal N");
  const double r = 2.0 * N / (N - 2.0 * s);
  EstimateResult out;
  out.grid = grid;
  int iters = 0;
  // The ascent maximizes |u|_{2*}^2 / [u]_s^2; invert to get S.
  out.value = 1.0 / detail::quotient_ascent(N, s, r, grid, true, &iters);
  out.iterations = iters;
  GridDescriptor fine = grid;
  fine.points_per_axis = 2 * grid.points_per_axis;
  out.value_refined = 1.0 / detail::quotient_ascent(N, s, r, fine, true, nullptr);
  return out;
}

}  // namespace fracnls
