#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fracnls/thresholds.hpp"
#include "helpers.hpp"

using namespace fracnls;
using testutil::gaussian;
using testutil::random_smooth;

namespace {

const ProblemParams kDesk = ProblemParams::create(2, 0.75, 0.25, 4.0, 2.4, 1.0, 1.0);
const ProblemParams kCrit = ProblemParams::create(2, 0.75, 0.25, 8.0, 2.4, 1.3, 0.8);

// Synthetic but plausible constants: geometry tests only need positivity and
// magnitudes in the right ballpark, not certified values.
const ConstantsTable kCt{0.6, 0.4, 2.0, Provenance::UserSupplied, std::nullopt};

ProblemParams with_mu_a(const ProblemParams& base, double mu, double a) {
  return ProblemParams::create(base.N, base.s1, base.s2, base.p, base.q, mu, a);
}

// Max of h over a wide logarithmic t-grid; used to probe the two-root /
// no-root transition without going through the (A1)-gated geometry call.
double scan_max_h(const ProblemParams& prm, const ConstantsTable& ct) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 400; ++i) {
    const double t = std::pow(10.0, -4.0 + 8.0 * i / 400.0);
    best = std::max(best, h_subcritical(t, prm, ct));
  }
  return best;
}

}  // namespace

TEST_CASE("h matches a hand computation and validates inputs", "[thresholds]") {
  const ConstantsTable ct{0.3, 0.2, 1.0, Provenance::UserSupplied, std::nullopt};
  const double ep = 2.0 * (4.0 - 2.0) / (2.0 * 0.75);  // N(p-2)/(2 s1) = 8/3
  const double eq = 2.0 * (2.4 - 2.0) / (2.0 * 0.75);  // 8/15
  const double t = 2.0;
  const double expected =
      0.5 * t * t - (0.2 / 4.0) * std::pow(t, ep) - (0.3 / 2.4) * std::pow(t, eq);
  CHECK(h_subcritical(t, kDesk, ct) == Catch::Approx(expected).epsilon(1e-14));

  // Derivative against central differences.
  const double h = 1e-6;
  const double fd =
      (h_subcritical(t + h, kDesk, ct) - h_subcritical(t - h, kDesk, ct)) / (2.0 * h);
  CHECK(h_subcritical_deriv(t, kDesk, ct) == Catch::Approx(fd).epsilon(1e-8));

  CHECK_THROWS_AS(h_subcritical(0.0, kDesk, ct), ParameterError);
  CHECK_THROWS_AS(h_subcritical(1.0, kCrit, ct), ParameterError);
  ConstantsTable bad = ct;
  bad.gn_p = 0.0;
  CHECK_THROWS_AS(h_subcritical(1.0, kDesk, bad), ParameterError);
}

TEST_CASE("condition A0 vacuous and non-vacuous branches", "[thresholds]") {
  // p <= 2N/(N - 2 s2) asks nothing of a: here 3.2 <= 4/1.2.
  const ProblemParams vac = ProblemParams::create(2, 0.45, 0.4, 3.2, 2.4, 1.0, 1.0);
  const ConditionCheck cv = check_A0(vac, kCt);
  CHECK(cv.vacuous);
  CHECK(cv.pass);
  CHECK(std::isnan(cv.rhs));

  // Desk parameters are non-vacuous (4 > 4/1.5); small masses pass, large fail,
  // and lhs = a^3 there (2 (p-2) s1 / gp = 3).
  const ConditionCheck small = check_A0(with_mu_a(kDesk, 1.0, 0.05), kCt);
  CHECK_FALSE(small.vacuous);
  CHECK(small.pass);
  CHECK(small.lhs == Catch::Approx(std::pow(0.05, 3.0)).epsilon(1e-14));
  const ConditionCheck large = check_A0(with_mu_a(kDesk, 1.0, 50.0), kCt);
  CHECK_FALSE(large.pass);
  CHECK(large.rhs == Catch::Approx(small.rhs).epsilon(1e-14));
}

TEST_CASE("conditions A1 and A2 flip monotonically and strictly", "[thresholds]") {
  // Small mu a^... passes, large fails; rhs does not depend on (mu, a).
  for (auto check : {check_A1, check_A2}) {
    const ConditionCheck ok = check(with_mu_a(kDesk, 0.01, 0.5), kCt);
    CHECK(ok.pass);
    const ConditionCheck no = check(with_mu_a(kDesk, 1e6, 10.0), kCt);
    CHECK_FALSE(no.pass);
    CHECK(ok.rhs == Catch::Approx(no.rhs).epsilon(1e-14));
    CHECK(ok.lhs < no.lhs);
  }

  // At a = 1 the A1 lhs is exactly mu, so the boundary can be pinned: the
  // inequality is strict and flips across rhs.
  const double mu_star = check_A1(with_mu_a(kDesk, 1.0, 1.0), kCt).rhs;
  CHECK(check_A1(with_mu_a(kDesk, mu_star * (1.0 - 1e-9), 1.0), kCt).pass);
  CHECK_FALSE(check_A1(with_mu_a(kDesk, mu_star * (1.0 + 1e-9), 1.0), kCt).pass);

  CHECK_THROWS_AS(check_A1(kCrit, kCt), ParameterError);
  CHECK_THROWS_AS(check_A2(kCrit, kCt), ParameterError);
}

TEST_CASE("h geometry brackets the positivity interval", "[thresholds]") {
  const HGeometry geo = h_geometry(kDesk, kCt);
  CHECK(geo.R0 > 0.0);
  CHECK(geo.R0 < geo.t_max);
  CHECK(geo.t_max < geo.R1);
  CHECK(geo.h_at_tmax > 0.0);

  // The endpoints are zeros to bisection resolution, relative to the peak.
  CHECK(std::abs(h_subcritical(geo.R0, kDesk, kCt)) <= 1e-10 * geo.h_at_tmax);
  CHECK(std::abs(h_subcritical(geo.R1, kDesk, kCt)) <= 1e-10 * geo.h_at_tmax);
  CHECK(std::abs(h_subcritical_deriv(geo.t_max, kDesk, kCt)) <=
        1e-9 * (geo.t_max + geo.h_at_tmax));

  // Sign pattern - / + / - on (0, R0) / (R0, R1) / (R1, inf).
  for (int i = 1; i <= 20; ++i) {
    const double inside = geo.R0 + (geo.R1 - geo.R0) * i / 21.0;
    CHECK(h_subcritical(inside, kDesk, kCt) > 0.0);
    const double below = geo.R0 * i / 21.0;
    CHECK(h_subcritical(below, kDesk, kCt) < 0.0);
    const double above = geo.R1 * (1.0 + 3.0 * i / 21.0);
    CHECK(h_subcritical(above, kDesk, kCt) < 0.0);
  }

  // With (A1) violated the gate reports the failed precondition.
  CHECK_THROWS_AS(h_geometry(with_mu_a(kDesk, 1e6, 1.0), kCt), PreconditionError);
}

TEST_CASE("A1 equality is sharp for the two-root transition", "[thresholds]") {
  // At a = 1 the equality point in mu is rhs itself. Slightly below it the
  // positivity interval exists; slightly above it h is negative everywhere.
  const double mu_star = check_A1(with_mu_a(kDesk, 1.0, 1.0), kCt).rhs;
  const ProblemParams below = with_mu_a(kDesk, mu_star * 0.99, 1.0);
  const HGeometry geo = h_geometry(below, kCt);
  CHECK(geo.h_at_tmax > 0.0);

  const ProblemParams above = with_mu_a(kDesk, mu_star * 1.01, 1.0);
  CHECK(scan_max_h(above, kCt) < 0.0);

  // Right at equality the gate itself rejects.
  CHECK_THROWS_AS(h_geometry(with_mu_a(kDesk, mu_star, 1.0), kCt), PreconditionError);
}

TEST_CASE("critical h maximum matches the closed form", "[thresholds]") {
  const double N = kCrit.N, s1 = kCrit.s1, q = kCrit.q;
  const double denom = N * (2.0 * q * s1 - N * (q - 2.0));
  const CriticalThresholds th = critical_thresholds(kCrit, kCt);
  CHECK(th.a0 > 0.0);
  CHECK(th.abar0 > 0.0);
  CHECK(th.rho_a > 0.0);

  // The exponent identity that collapses max_rho h(a, rho) onto a^{4 s1 / N}.
  const double lhs_id = N * (2.0 * N - q * (N - 2.0 * s1)) +
                        (N - 2.0 * s1) * (N * (q - 2.0) - 4.0 * s1);
  CHECK(lhs_id == Catch::Approx(8.0 * s1 * s1).epsilon(1e-14));

  const double K_mu = std::pow(kCrit.mu, 8.0 * s1 * s1 / denom) * th.K0;
  for (double a : {0.3, 1.0, 2.5}) {
    const double rho = critical_rho(a, kCrit, kCt);
    const double maxh = h_critical(a, rho, kCrit, kCt);
    const double closed = 0.5 - K_mu * std::pow(a, 4.0 * s1 / N);
    CHECK(maxh == Catch::Approx(closed).margin(1e-12).epsilon(1e-12));

    // rho is a stationary maximum of rho -> h(a, rho).
    const double dr = 1e-6 * rho;
    const double fd = (h_critical(a, rho + dr, kCrit, kCt) -
                       h_critical(a, rho - dr, kCrit, kCt)) /
                      (2.0 * dr);
    CHECK(std::abs(fd) <= 1e-7 / rho);
    CHECK(h_critical(a, rho * 1.3, kCrit, kCt) < maxh);
    CHECK(h_critical(a, rho * 0.7, kCrit, kCt) < maxh);
  }

  // Sign trichotomy of max_rho h at {a0/2, a0, 2 a0}.
  const auto max_h_at = [&](double a) {
    return h_critical(a, critical_rho(a, kCrit, kCt), kCrit, kCt);
  };
  CHECK(max_h_at(0.5 * th.a0) > 0.0);
  CHECK(std::abs(max_h_at(th.a0)) <= 1e-12);
  CHECK(max_h_at(2.0 * th.a0) < 0.0);

  CHECK_THROWS_AS(critical_thresholds(kDesk, kCt), ParameterError);
  CHECK_THROWS_AS(h_critical(1.0, 1.0, kDesk, kCt), ParameterError);
  CHECK_THROWS_AS(h_geometry(kCrit, kCt), ParameterError);
}

TEST_CASE("critical thresholds scale in mu as the closed forms dictate",
          "[thresholds]") {
  const double s1 = kCrit.s1, q = kCrit.q;
  const double mu_exp = -2.0 * s1 / (2.0 * q * s1 - kCrit.N * (q - 2.0));
  const CriticalThresholds t1 =
      critical_thresholds(with_mu_a(kCrit, 1.0, kCrit.a), kCt);
  const CriticalThresholds t2 =
      critical_thresholds(with_mu_a(kCrit, 2.7, kCrit.a), kCt);
  CHECK(t2.a0 / t1.a0 == Catch::Approx(std::pow(2.7, mu_exp)).epsilon(1e-12));
  CHECK(t2.abar0 / t1.abar0 == Catch::Approx(std::pow(2.7, mu_exp)).epsilon(1e-12));
  CHECK(t2.K0 == Catch::Approx(t1.K0).epsilon(1e-12));
  CHECK(t2.A_mu / t1.A_mu == Catch::Approx(2.7).epsilon(1e-12));
}

TEST_CASE("estimated constants satisfy their inequalities on sample fields",
          "[thresholds][estimation]") {
  const GridDescriptor grid = GridDescriptor::create(2, 48, 12.0);
  const EstimateResult gn = estimate_gn_constant(2, 0.75, 4.0, grid);
  CHECK(gn.value > 0.0);
  CHECK(gn.iterations > 0);
  // Grid refinement moves a crude 48^2 estimate only through the quadrature
  // of |u|^4, which the 48^2 grid does not yet resolve exactly.
  CHECK(std::abs(gn.value_refined - gn.value) <= 1e-2 * gn.value);
  // Once the grid resolves the quadrature as well as the band, the estimate
  // is essentially grid-free: the ascent landscape no longer changes.
  const EstimateResult fine =
      estimate_gn_constant(2, 0.75, 4.0, GridDescriptor::create(2, 96, 12.0));
  CHECK(std::abs(fine.value_refined - fine.value) <= 1e-6 * fine.value);
  CHECK(std::abs(fine.value - gn.value_refined) <= 1e-9 * fine.value);

  // The estimate is the max of the quotient reached by ascent, so the
  // inequality with the estimated constant must hold on generic fields.
  const double theta = 2.0 * (4.0 - 2.0) / (4.0 * 0.75);
  const double sigma = 4.0 / 2.0 - theta;
  for (std::uint64_t seed : {3u, 14u, 15u, 92u, 65u}) {
    const Field u = random_smooth(grid, seed);
    const double W = lp_norm_pow(u, 4.0) /
                     (std::pow(seminorm_sq(u, 0.75), theta) * std::pow(mass(u), sigma));
    CHECK(W <= gn.value * (1.0 + 1e-6));
  }
  const Field g = gaussian(grid);
  const double Wg = lp_norm_pow(g, 4.0) /
                    (std::pow(seminorm_sq(g, 0.75), theta) * std::pow(mass(g), sigma));
  CHECK(Wg <= gn.value * (1.0 + 1e-12));

  CHECK_THROWS_AS(estimate_gn_constant(2, 0.75, 1.5, grid), ParameterError);
  CHECK_THROWS_AS(estimate_gn_constant(2, 0.75, 9.0, grid), ParameterError);
  CHECK_THROWS_AS(estimate_gn_constant(1, 0.75, 4.0, grid), ParameterError);
  // Grids too coarse to carry the estimation band are rejected outright.
  CHECK_THROWS_AS(estimate_gn_constant(2, 0.75, 4.0, GridDescriptor::create(2, 32, 12.0)),
                  ResolutionError);
}

TEST_CASE("sobolev and gn estimators agree at the critical exponent",
          "[thresholds][estimation]") {
  const GridDescriptor grid = GridDescriptor::create(2, 48, 12.0);
  const EstimateResult sob = estimate_sobolev_constant(2, 0.75, grid);
  CHECK(sob.value > 0.0);
  CHECK(std::abs(sob.value_refined - sob.value) <= 5e-2 * sob.value);

  // At r = 2* the Gagliardo-Nirenberg functional reduces to the Sobolev
  // quotient raised to 2*/2, so C(2*) = S^{-2*/2} on the same grid.
  const EstimateResult gn = estimate_gn_constant(2, 0.75, 8.0, grid);
  CHECK(gn.value == Catch::Approx(std::pow(sob.value, -4.0)).epsilon(1e-2));

  // The Sobolev inequality with the estimated constant on generic fields:
  // S |u|_{2*}^2 <= [u]^2.
  for (std::uint64_t seed : {5u, 6u}) {
    const Field u = random_smooth(grid, seed);
    CHECK(sob.value * std::pow(lp_norm_pow(u, 8.0), 2.0 / 8.0) <=
          seminorm_sq(u, 0.75) * (1.0 + 1e-6));
  }

  CHECK_THROWS_AS(estimate_sobolev_constant(1, 0.6, GridDescriptor::create(1, 64, 12.0)),
                  ParameterError);
}
