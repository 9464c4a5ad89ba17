#include <cmath>
#include <numbers>
#include <sstream>

#include <doctest.h>

#include "oracles.h"
#include "photonparity/errors.h"
#include "photonparity/photonstats.h"

using namespace photonparity;

namespace {

HBTConfig quiet(long long trials, std::uint64_t seed) {
  HBTConfig cfg;
  cfg.dark_count_rate = 0.0;
  cfg.detector_efficiency = 1.0;
  cfg.trials = trials;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("analytic g2 reference states") {
  for (double a : {0.3, 1.0, 2.0}) {
    CHECK(*g2_analytic(DensityMatrix::from_pure(coherent_state(Complex(a, 0.0), 30))) ==
          doctest::Approx(1.0).epsilon(1e-3));
  }
  CHECK(*g2_analytic(DensityMatrix::fock(1, 4)) == 0.0);
  CHECK_FALSE(g2_analytic(DensityMatrix::vacuum(4)).has_value());
}

TEST_CASE("ideal odd herald approaches g2 = 0 for weak pulses") {
  DistillationConfig ideal;
  ideal.params = CavityParams(2000.0, 2.5, 0.0, 0.0, 3.0);
  const DensityMatrix rho = distill_coherent(ideal, std::sqrt(1e-3), Parity::odd, 12);
  // Odd cat: g2 = 6 p3 / p1^2 * p1 ... ~ alpha^4 / 3.
  CHECK(*g2_analytic(rho) < 1e-5);
}

TEST_CASE("dark counts enter g2 as uncorrelated clicks") {
  const DensityMatrix one = DensityMatrix::fock(1, 3);
  CHECK(*g2_with_dark_counts(one, 0.5, 0.0) == 0.0);
  // Only dark counts: Poissonian, g2 = 1.
  CHECK(*g2_with_dark_counts(DensityMatrix::vacuum(3), 0.5, 1e-4) == doctest::Approx(1.0));
  CHECK_FALSE(g2_with_dark_counts(DensityMatrix::vacuum(3), 0.5, 0.0).has_value());
  const double d = 0.01, h = 0.25;
  CHECK(*g2_with_dark_counts(one, 0.5, d) == doctest::Approx((2.0 * d * h + d * d) / ((h + d) * (h + d))));
}

TEST_CASE("Monte Carlo matches the Poissonian reference") {
  const DensityMatrix coh = DensityMatrix::from_pure(coherent_state(Complex(std::sqrt(0.5), 0.0), 20));
  PulseShape pulse;
  const HBTResult r = hbt_monte_carlo(coh, pulse, quiet(1'000'000, 3));
  REQUIRE(r.g2_zero.has_value());
  CHECK(std::abs(*r.g2_zero - 1.0) < 0.02);
  REQUIRE(r.g2_tau.size() == 7);
  for (const auto& p : r.g2_tau) CHECK(std::abs(*p.g2 - 1.0) < 0.05);
}

TEST_CASE("Monte Carlo converges to the analytic value") {
  PulseShape pulse;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const DensityMatrix rho = oracle::random_state(100 + seed, 8, 4);
    const HBTResult r = hbt_monte_carlo(rho, pulse, quiet(400'000, seed));
    const double exact = *g2_analytic(rho);
    INFO("seed " << seed << " exact " << exact << " mc " << *r.g2_zero << " se " << r.std_error);
    CHECK(std::abs(*r.g2_zero - exact) <= 3.0 * r.std_error);
  }
}

TEST_CASE("g2 does not depend on detector efficiency") {
  const oracle::Check c = oracle::g2_efficiency_invariance(77);
  INFO(c.detail);
  CHECK(c.ok);
}

TEST_CASE("dark-count floor tends to the coherent value") {
  PulseShape pulse;
  HBTConfig cfg;
  cfg.dark_count_rate = 20000.0;
  cfg.trials = 1'000'000;
  cfg.seed = 4;
  const HBTResult r = hbt_monte_carlo(DensityMatrix::vacuum(3), pulse, cfg);
  REQUIRE(r.g2_zero.has_value());
  CHECK(std::abs(*r.g2_zero - 1.0) <= 3.0 * r.std_error);
}

TEST_CASE("Monte Carlo reports undefined g2 without clicks") {
  PulseShape pulse;
  const HBTResult r = hbt_monte_carlo(DensityMatrix::vacuum(3), pulse, quiet(20'000, 1));
  CHECK_FALSE(r.g2_zero.has_value());
  CHECK(r.singles_a == 0);
  CHECK(r.singles_b == 0);
}

TEST_CASE("Monte Carlo is reproducible for a fixed seed") {
  const DensityMatrix rho = oracle::random_state(8, 6, 3);
  PulseShape pulse;
  HBTConfig cfg;
  cfg.trials = 200'000;
  cfg.seed = 12;
  const HBTResult a = hbt_monte_carlo(rho, pulse, cfg);
  const HBTResult b = hbt_monte_carlo(rho, pulse, cfg);
  CHECK(a.coincidences == b.coincidences);
  CHECK(*a.g2_zero == *b.g2_zero);
  for (std::size_t i = 0; i < a.g2_tau.size(); ++i) CHECK(*a.g2_tau[i].g2 == *b.g2_tau[i].g2);
}

TEST_CASE("configuration validation") {
  HBTConfig cfg;
  cfg.detector_efficiency = 1.5;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = HBTConfig{};
  cfg.coincidence_window = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  PulseShape pulse;
  pulse.duration = 0.0;
  CHECK_THROWS_AS(pulse.validate(), DomainError);
  CHECK_THROWS_AS(pulse_kind_from_string("triangle"), DomainError);
}

TEST_CASE("default window spans three pulse widths") {
  PulseShape pulse;
  HBTConfig cfg;
  CHECK(cfg.window_for(pulse) == doctest::Approx(6.9e-6));
  CHECK(cfg.dark_mean(pulse) == doctest::Approx(20.0 * 6.9e-6));
}

TEST_CASE("pulse envelopes integrate to the mean photon number") {
  for (PulseKind kind : {PulseKind::gaussian, PulseKind::double_peak, PulseKind::rectangular}) {
    PulseShape pulse;
    pulse.kind = kind;
    pulse.mean_photon_number = 0.11;
    const double half = pulse.support_half_width() * 1.5;
    const int n = 200000;
    const double dt = 2.0 * half / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += pulse.intensity(-half + (i + 0.5) * dt) * dt;
    CHECK(total == doctest::Approx(0.11).epsilon(1e-4));
  }
}

TEST_CASE("bandwidth check") {
  const CavityParams cavity = reference_cavity();
  PulseShape gauss;
  const BandwidthReport g = bandwidth_check(gauss, cavity);
  // Transform-limited Gaussian: FWHM product 2 ln2 / pi.
  CHECK(g.spectral_fwhm == doctest::Approx(2.0 * std::numbers::ln2 / (std::numbers::pi * 2.3e-6)).epsilon(1e-3));
  CHECK(g.valid);

  PulseShape rect;
  rect.kind = PulseKind::rectangular;
  rect.duration = 10e-9;
  const BandwidthReport r = bandwidth_check(rect, cavity);
  // sinc^2 half maximum at 0.4429 / t.
  CHECK(r.spectral_fwhm == doctest::Approx(2.0 * 0.442946 / 10e-9).epsilon(1e-3));
  CHECK_FALSE(r.valid);

  PulseShape slow;
  slow.duration = 1.0;
  CHECK(bandwidth_check(slow, cavity).ratio < 1e-6);

  PulseShape twin;
  twin.kind = PulseKind::double_peak;
  CHECK(bandwidth_check(twin, cavity).valid);
}

TEST_CASE("g2 curve shape") {
  const DistillationConfig config = counting_config();
  PulseShape pulse;
  HBTConfig cfg;
  const std::vector<double> grid = {1e-4, 0.02, 0.11, 2.5};
  const auto rows = g2_curve(config, grid, pulse, cfg, false, 20);
  REQUIRE(rows.size() == 4);
  // Dark-count dominated at the weakest input, rising again toward 1 at large input.
  CHECK(*rows[0].g2_zero > *rows[1].g2_zero);
  CHECK(*rows[2].g2_zero < *rows[3].g2_zero);
  CHECK(*rows[3].g2_zero < 1.0);

  HBTConfig dark_free = cfg;
  dark_free.dark_count_rate = 0.0;
  DistillationConfig clean = config;
  clean.detection_error = 0.0;
  const auto weak = g2_curve(clean, std::vector<double>{1e-3}, pulse, dark_free, false, 20);
  CHECK(*weak[0].g2_zero < 1e-3);
}

TEST_CASE("pulse shape enters only through the mean photon number") {
  const DensityMatrix rho = distill_coherent(counting_config(), std::sqrt(0.11), Parity::odd, 20);
  HBTConfig cfg;
  cfg.trials = 1'000'000;
  cfg.coincidence_window = 6.9e-6;
  std::vector<double> values, errors;
  for (PulseKind kind : {PulseKind::gaussian, PulseKind::double_peak, PulseKind::rectangular}) {
    PulseShape pulse;
    pulse.kind = kind;
    cfg.seed += 1;
    const HBTResult r = hbt_monte_carlo(rho, pulse, cfg);
    values.push_back(*r.g2_zero);
    errors.push_back(r.std_error);
  }
  for (std::size_t i = 1; i < values.size(); ++i) {
    CHECK(std::abs(values[i] - values[0]) <= 3.0 * std::hypot(errors[i], errors[0]));
  }
}

TEST_CASE("g2 CSV layout") {
  std::vector<G2Row> rows = {{0.11, 0.03, 0.001}, {0.0, std::nullopt, 0.0}};
  std::ostringstream out;
  write_g2_csv(out, rows);
  CHECK(out.str() == "alpha_sq,g2_zero,stderr\n0.11,0.03,0.001\n0,nan,0\n");

  std::vector<CorrelationPoint> points = {{-1, 1.01, 0.02}, {0, 0.04, 0.01}};
  std::ostringstream tau;
  write_g2_tau_csv(tau, points);
  CHECK(tau.str() == "tau_index,g2,stderr\n-1,1.01,0.02\n0,0.04,0.01\n");
}
