#include <cmath>
#include <numbers>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "oracles.h"
#include "photonparity/errors.h"
#include "photonparity/distillation.h"
#include "photonparity/tomography.h"

using namespace photonparity;

TEST_CASE("phases cover half a turn") {
  const auto phases = equally_spaced_phases(12);
  REQUIRE(phases.size() == 12);
  CHECK(phases.front() == 0.0);
  CHECK(phases.back() == doctest::Approx(11.0 * std::numbers::pi / 12.0));
  CHECK_THROWS_AS(equally_spaced_phases(0), DomainError);
}

TEST_CASE("sampler reproduces quadrature moments") {
  const Complex alpha(0.7, 0.0);
  const DensityMatrix coh = DensityMatrix::from_pure(coherent_state(alpha, 20));
  const std::vector<double> phases = {0.0, std::numbers::pi / 2};
  const auto samples = sample_homodyne(coh, phases, 40000, 1.0, 9);
  for (std::size_t ip = 0; ip < phases.size(); ++ip) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < 40000; ++i) {
      const double x = samples[ip * 40000 + i].x;
      mean += x;
      sq += x * x;
    }
    mean /= 40000;
    const double var = sq / 40000 - mean * mean;
    const double expected = std::sqrt(2.0) * alpha.real() * std::cos(phases[ip]);
    CHECK(std::abs(mean - expected) < 4.0 * std::sqrt(0.5 / 40000));
    CHECK(var == doctest::Approx(0.5).epsilon(0.03));
  }
}

TEST_CASE("sampler is deterministic and validates input") {
  const DensityMatrix one = DensityMatrix::fock(1, 4);
  const auto phases = equally_spaced_phases(3);
  const auto a = sample_homodyne(one, phases, 100, 0.8, 5);
  const auto b = sample_homodyne(one, phases, 100, 0.8, 5);
  const auto c = sample_homodyne(one, phases, 100, 0.8, 6);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].x == b[i].x && a[i].theta == b[i].theta;
    differs = differs || a[i].x != c[i].x;
  }
  CHECK(same);
  CHECK(differs);
  CHECK_THROWS_AS(sample_homodyne(one, std::vector<double>{}, 10, 1.0, 1), DomainError);
  CHECK_THROWS_AS(sample_homodyne(one, phases, 10, 0.0, 1), DomainError);
}

TEST_CASE("maximum-likelihood round trip with detector loss") {
  const DensityMatrix truth = DensityMatrix::diagonal(std::vector<double>{0.3, 0.7});
  const DensityMatrix padded = truth.resized(6);
  const auto samples = sample_homodyne(padded, equally_spaced_phases(8), 3000, 0.8, 21);
  const ReconstructionResult r = mle_reconstruct(samples, 6, 0.8, 3000, 1e-10);
  CHECK(r.converged);
  CHECK(state_fidelity(r.rho, padded) > 0.97);
  CHECK(r.rho.check().ok());
  for (std::size_t i = 1; i < r.log_likelihood_trace.size(); ++i) {
    CHECK(r.log_likelihood_trace[i] >= r.log_likelihood_trace[i - 1] - 1e-9 * std::abs(r.log_likelihood_trace[i]));
  }
}

TEST_CASE("degenerate data is flagged as not converged") {
  std::vector<QuadratureSample> samples(500, QuadratureSample{0.0, 0.25});
  const ReconstructionResult r = mle_reconstruct(samples, 4, 1.0, 50, 1e-12);
  CHECK_FALSE(r.converged);
  CHECK(r.rho.check().ok());
}

TEST_CASE("reconstruction input errors") {
  CHECK_THROWS_AS(mle_reconstruct(std::vector<QuadratureSample>{}, 4, 1.0, 10, 1e-8), DomainError);
  const std::vector<QuadratureSample> far = {{0.0, 50.0}, {0.5, -40.0}};
  CHECK_THROWS_AS(mle_reconstruct(far, 4, 1.0, 10, 1e-8), DomainError);
  CHECK_THROWS_AS(mle_reconstruct(far, 0, 1.0, 10, 1e-8), InvalidDimension);
}

TEST_CASE("loss correction inverts a known loss") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const DensityMatrix rho = oracle::random_state(seed, 10, 5);
    const DensityMatrix lossy = pure_loss_channel(rho, 1.0 - 0.251);
    const DensityMatrix back = loss_correct(lossy, 0.251);
    CHECK((back.matrix() - rho.matrix()).cwiseAbs().maxCoeff() < 1e-8);
  }
  const DensityMatrix one = DensityMatrix::fock(1, 5);
  CHECK(loss_correct(one, 0.0).population(1) == 1.0);
}

TEST_CASE("loss correction domain and conditioning") {
  const DensityMatrix one = DensityMatrix::fock(1, 5);
  CHECK_THROWS_AS(loss_correct(one, 1.0), DomainError);
  CHECK_THROWS_AS(loss_correct(one, -0.1), DomainError);
  CHECK_THROWS_AS(loss_correct(DensityMatrix::vacuum(40), 0.9), IllConditionedError);
  CHECK(loss_inversion_amplification(10, 0.251) < 1e3);
}

TEST_CASE("loss correction clips noise-induced negativity") {
  // Too little one-photon weight for this two-photon weight: no physical
  // preimage exists, the correction must still return a state.
  const DensityMatrix noisy = DensityMatrix::diagonal(std::vector<double>{0.3, 0.2, 0.5});
  const DensityMatrix corrected = loss_correct(noisy, 0.5);
  CHECK(corrected.check().ok());
}

TEST_CASE("sample CSV round trip and errors") {
  const std::vector<QuadratureSample> samples = {{0.1, -0.25}, {3.0, 1.5}, {0.1, 1e-12}};
  std::stringstream ss;
  write_samples_csv(ss, samples);
  const auto back = read_samples_csv(ss);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].theta == samples[i].theta);
    CHECK(back[i].x == samples[i].x);
  }
  std::istringstream bad_header("phase,x\n0,1\n");
  CHECK_THROWS_AS(read_samples_csv(bad_header), ParseError);
  std::istringstream bad_value("theta,x\n0,abc\n");
  CHECK_THROWS_AS(read_samples_csv(bad_value), ParseError);
}

TEST_CASE("reconstruction JSON keys") {
  ReconstructionResult r{DensityMatrix::fock(1, 3), {-10.0, -5.0}, 2, true, 0};
  const auto j = nlohmann::json::parse(reconstruction_json(r));
  CHECK(j["dim"] == 3);
  CHECK(j["iterations"] == 2);
  CHECK(j["converged"] == true);
  CHECK(j["final_log_likelihood"] == -5.0);
  CHECK(j["rho"]["real"][1][1] == 1.0);
  CHECK(j["rho"]["imag"][0][0] == 0.0);
}

namespace {

double sample_variance(const std::vector<QuadratureSample>& s, double* mean_out = nullptr) {
  double mean = 0.0, sq = 0.0;
  for (const auto& q : s) {
    mean += q.x;
    sq += q.x * q.x;
  }
  mean /= static_cast<double>(s.size());
  if (mean_out) *mean_out = mean;
  return sq / static_cast<double>(s.size()) - mean * mean;
}

}  // namespace

TEST_CASE("sampler reference moments") {
  const std::vector<double> one_phase = {0.0};
  CHECK(sample_variance(sample_homodyne(DensityMatrix::vacuum(4), one_phase, 100000, 1.0, 1)) ==
        doctest::Approx(0.5).epsilon(0.01));
  CHECK(sample_variance(sample_homodyne(DensityMatrix::fock(1, 4), one_phase, 100000, 1.0, 2)) ==
        doctest::Approx(1.5).epsilon(0.0134));
  double mean = 0.0;
  sample_variance(sample_homodyne(DensityMatrix::from_pure(coherent_state(Complex(1.0, 0.0), 16)), one_phase,
                                  100000, 1.0, 3),
                  &mean);
  CHECK(std::abs(mean - std::sqrt(2.0)) < 0.01);
}

TEST_CASE("vacuum reconstructs as vacuum") {
  const auto samples = sample_homodyne(DensityMatrix::vacuum(6), equally_spaced_phases(6), 5000, 1.0, 4);
  const ReconstructionResult r = mle_reconstruct(samples, 6, 1.0, 2000, 1e-10);
  CHECK(r.rho.population(0) >= 0.99);
}

TEST_CASE("coherent state round trip") {
  const DensityMatrix truth = DensityMatrix::from_pure(coherent_state(Complex(0.7, 0.0), 10));
  const auto samples = sample_homodyne(truth, equally_spaced_phases(12), 16667, 1.0, 5);
  const ReconstructionResult r = mle_reconstruct(samples, 10, 1.0, 3000, 1e-10);
  CHECK(state_fidelity(r.rho, truth) >= 0.99);
}

TEST_CASE("distilled state round trip through lossy detection") {
  const DensityMatrix truth = distill_coherent(fitted_config(), std::sqrt(0.31), Parity::odd, 10);
  const auto samples = sample_homodyne(truth, equally_spaced_phases(12), 16667, 0.749, 6);
  const ReconstructionResult folded = mle_reconstruct(samples, 10, 0.749, 3000, 1e-10);
  for (int n = 0; n < 4; ++n) CHECK(std::abs(folded.rho.population(n) - truth.population(n)) <= 0.02);

  // Reconstructing the lossy state first and inverting the loss afterwards
  // lands within the same statistical error.
  const ReconstructionResult lossy = mle_reconstruct(samples, 10, 1.0, 3000, 1e-10);
  const DensityMatrix inverted = loss_correct(lossy.rho, 1.0 - 0.749);
  for (int n = 0; n < 3; ++n) CHECK(std::abs(inverted.population(n) - folded.rho.population(n)) <= 0.02);
}

TEST_CASE("lossy single photon") {
  const DensityMatrix lossy = DensityMatrix::diagonal(std::vector<double>{0.251, 0.749});
  const DensityMatrix back = loss_correct(lossy, 0.251);
  CHECK(std::abs(back.population(1) - 1.0) < 1e-8);
  CHECK(std::abs(back.population(0)) < 1e-8);

  const double eta = 0.6;
  const DensityMatrix photon = pure_loss_channel(DensityMatrix::fock(1, 6), eta);
  const auto samples = sample_homodyne(photon, equally_spaced_phases(8), 10000, 1.0, 7);
  const ReconstructionResult r = mle_reconstruct(samples, 6, 1.0, 2000, 1e-10);
  CHECK(std::abs(wigner(r.rho, 0.0, 0.0) - (1.0 - 2.0 * eta) / std::numbers::pi) <= 0.02);
}
