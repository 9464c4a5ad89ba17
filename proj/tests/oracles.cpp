#include "oracles.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "photonparity/distillation.h"
#include "photonparity/photonstats.h"

namespace oracle {

namespace {

// Position wavefunctions from the physicists' Hermite recurrence, fine for
// the small n and |x| used in tests.
std::vector<double> position_wavefunctions(double x, int count) {
  std::vector<double> h(static_cast<std::size_t>(count));
  h[0] = 1.0;
  if (count > 1) h[1] = 2.0 * x;
  for (int n = 2; n < count; ++n) {
    h[static_cast<std::size_t>(n)] = 2.0 * x * h[static_cast<std::size_t>(n - 1)] -
                                     2.0 * (n - 1) * h[static_cast<std::size_t>(n - 2)];
  }
  std::vector<double> psi(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    const double log_norm = -0.5 * (n * std::log(2.0) + std::lgamma(n + 1.0) + 0.5 * std::log(std::numbers::pi));
    psi[static_cast<std::size_t>(n)] = h[static_cast<std::size_t>(n)] * std::exp(log_norm - 0.5 * x * x);
  }
  return psi;
}

struct Amplitudes {
  Complex r, t, m, a;
};

Amplitudes reflection(const photonparity::CavityParams& c, bool coupled) {
  const Complex i(0.0, 1.0);
  const double n = coupled ? 1.0 : 0.0;
  const Complex atom = i * c.delta_a() + c.gamma();
  const Complex den = n * c.g() * c.g() + (i * c.delta_c() + c.kappa()) * atom;
  return {(n * c.g() * c.g() + (i * c.delta_c() + c.kappa() - 2.0 * c.kappa_r()) * atom) / den,
          2.0 * std::sqrt(c.kappa_r() * c.kappa_t()) * atom / den,
          2.0 * std::sqrt(c.kappa_r() * c.kappa_m()) * atom / den,
          2.0 * std::sqrt(c.kappa_r() * c.gamma()) * std::sqrt(n) * c.g() / den};
}

double binomial(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

Check fail(const std::string& what) { return {false, what}; }

}  // namespace

Vector coherent(Complex alpha, int dim) {
  Vector v(dim);
  for (int n = 0; n < dim; ++n) {
    const double log_mag = -0.5 * std::norm(alpha) - 0.5 * std::lgamma(n + 1.0);
    v(n) = std::exp(log_mag) * (n == 0 ? Complex(1.0) : std::pow(alpha, n));
  }
  return v;
}

Complex coherent_overlap(Complex beta, Complex gamma) {
  return std::exp(-0.5 * std::norm(beta) - 0.5 * std::norm(gamma) + std::conj(beta) * gamma);
}

Matrix loss_kraus(const Matrix& rho, double transmission) {
  const int dim = static_cast<int>(rho.rows());
  Matrix out = Matrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    Matrix e = Matrix::Zero(dim, dim);
    for (int n = k; n < dim; ++n) {
      e(n - k, n) = std::sqrt(binomial(n, k) * std::pow(transmission, n - k) * std::pow(1.0 - transmission, k));
    }
    out += e * rho * e.adjoint();
  }
  return out;
}

double wigner_weyl(const Matrix& rho, double q, double p) {
  const int dim = static_cast<int>(rho.rows());
  constexpr int kPoints = 4001;
  constexpr double kRange = 8.0;
  const double h = 2.0 * kRange / (kPoints - 1);
  Complex sum = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const double y = -kRange + i * h;
    const auto left = position_wavefunctions(q + y, dim);
    const auto right = position_wavefunctions(q - y, dim);
    Complex element = 0.0;
    for (int m = 0; m < dim; ++m) {
      for (int n = 0; n < dim; ++n) element += rho(m, n) * left[static_cast<std::size_t>(m)] * right[static_cast<std::size_t>(n)];
    }
    const double weight = (i == 0 || i == kPoints - 1) ? 0.5 : 1.0;
    sum += weight * element * std::polar(1.0, -2.0 * p * y);
  }
  return (sum * h).real() / std::numbers::pi;
}

Matrix herald_by_projection(const photonparity::CavityParams& params, double alpha, double transmission, bool odd,
                            int dim) {
  const Amplitudes up = reflection(params, true), down = reflection(params, false);
  const double kept = std::sqrt(transmission), lost = std::sqrt(1.0 - transmission);
  const Vector a = coherent(kept * up.r * alpha, dim);
  const Vector b = coherent(kept * down.r * alpha, dim);
  // <env_down|env_up> over the lost reflected light and the three leak modes.
  const Complex c = coherent_overlap(lost * down.r * alpha, lost * up.r * alpha) *
                    coherent_overlap(down.t * alpha, up.t * alpha) * coherent_overlap(down.m * alpha, up.m * alpha) *
                    coherent_overlap(down.a * alpha, up.a * alpha);
  const double sign = odd ? -1.0 : 1.0;
  Matrix rho = a * a.adjoint() + b * b.adjoint() + sign * (c * a * b.adjoint() + std::conj(c) * b * a.adjoint());
  return 0.25 * rho;
}

photonparity::DensityMatrix random_state(std::uint64_t seed, int dim, int support) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g = Matrix::Zero(dim, support);
  for (int i = 0; i < support; ++i) {
    for (int j = 0; j < support; ++j) g(i, j) = Complex(normal(rng), normal(rng)) / (1.0 + i);
  }
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return photonparity::DensityMatrix(rho);
}

Check density_invariants_on_channel_outputs(std::uint64_t seed) {
  using namespace photonparity;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const DistillationConfig config = fitted_config();
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix rho = random_state(rng(), 12, 4);
    const double t = unit(rng);
    std::vector<std::pair<std::string, DensityMatrix>> outputs;
    outputs.emplace_back("pure_loss_channel", pure_loss_channel(rho, t));
    outputs.emplace_back("distill_general odd", distill_general(rho, config, Parity::odd).rho);
    outputs.emplace_back("distill_general even", distill_general(rho, config, Parity::even).rho);
    const double alpha = 1.5 * unit(rng) + 0.05;
    const HeraldedOutput h = herald_coherent(config, alpha, 16);
    outputs.emplace_back("herald_coherent odd", *h.rho_odd);
    outputs.emplace_back("herald_coherent even", *h.rho_even);
    outputs.emplace_back("unconditioned", unconditioned_reflected_state(config, alpha, 16));
    outputs.emplace_back("detection_error_mix", detection_error_mix(*h.rho_odd, *h.rho_even, 0.3, unit(rng) * 0.2));
    for (const auto& [name, out] : outputs) {
      const InvariantReport r = out.check();
      if (!r.ok()) {
        std::ostringstream msg;
        msg << name << " trial " << trial << ": herm " << r.hermiticity_error << " trace " << r.trace_error
            << " min eig " << r.min_eigenvalue;
        return fail(msg.str());
      }
    }
  }
  return {true, "20 trials x 7 channel outputs"};
}

Check recombination_identity(std::uint64_t seed) {
  using namespace photonparity;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    DistillationConfig config = fitted_config();
    config.detection_error = 0.1 * unit(rng);
    config.downstream_loss = 0.3 * unit(rng);
    const double alpha = 0.1 + 1.4 * unit(rng);
    const HeraldedOutput h = herald_coherent(config, alpha, 20);
    if (std::abs(h.p_up + h.p_down - 1.0) > 1e-12) return fail("herald probabilities do not sum to one");
    const ComplexMatrix sum = h.p_up * h.rho_odd->matrix() + h.p_down * h.rho_even->matrix();
    const ComplexMatrix direct = unconditioned_reflected_state(config, alpha, 20).matrix();
    worst = std::max(worst, (sum - direct).cwiseAbs().maxCoeff());

    const DensityMatrix input = random_state(rng(), 10, 4);
    const HeraldedOutput g = herald_general(input, config);
    if (std::abs(g.p_up + g.p_down - 1.0) > 1e-12) return fail("general herald probabilities do not sum to one");
    // Both outcomes together do not depend on the readout error.
    DistillationConfig ideal = config;
    ideal.detection_error = 0.0;
    const HeraldedOutput g0 = herald_general(input, ideal);
    const ComplexMatrix mixed = g.p_up * g.rho_odd->matrix() + g.p_down * g.rho_even->matrix();
    const ComplexMatrix pure = g0.p_up * g0.rho_odd->matrix() + g0.p_down * g0.rho_even->matrix();
    worst = std::max(worst, (mixed - pure).cwiseAbs().maxCoeff());
  }
  std::ostringstream msg;
  msg << "max deviation " << worst;
  return {worst < 1e-10, msg.str()};
}

Check parity_purity_ideal_limit() {
  using namespace photonparity;
  DistillationConfig config;
  config.params = CavityParams(2000.0, 2.5, 0.0, 0.0, 3.0);
  double worst_leak = 0.0, worst_fid = 1.0;
  for (double alpha_sq : {0.1, 0.5, 1.0, 2.0}) {
    const double alpha = std::sqrt(alpha_sq);
    const DensityMatrix odd = distill_coherent(config, alpha, Parity::odd, 24);
    const DensityMatrix even = distill_coherent(config, alpha, Parity::even, 24);
    double odd_leak = 0.0, even_leak = 0.0;
    for (int n = 0; n < 24; ++n) (n % 2 == 0 ? odd_leak : even_leak) += (n % 2 == 0 ? odd : even).population(n);
    worst_leak = std::max({worst_leak, odd_leak, even_leak});
    // Ideal odd cat (|a> - |-a>) up to the global reflection phase of the coupled branch.
    Vector cat = coherent(alpha, 24) - coherent(-alpha, 24);
    cat /= cat.norm();
    const double fid = std::abs((cat.adjoint() * odd.matrix() * cat)(0, 0));
    worst_fid = std::min(worst_fid, fid);
  }
  std::ostringstream msg;
  msg << "max wrong-parity weight " << worst_leak << ", min cat fidelity " << worst_fid;
  return {worst_leak < 1e-5 && worst_fid > 1.0 - 1e-5, msg.str()};
}

Check g2_efficiency_invariance(std::uint64_t seed) {
  using namespace photonparity;
  const DensityMatrix states[] = {
      distill_coherent(counting_config(), std::sqrt(0.5), Parity::odd, 20),
      DensityMatrix::from_pure(coherent_state(Complex(0.8, 0.0), 20)),
      thermal_state(0.4, 20),
  };
  PulseShape pulse;
  std::ostringstream msg;
  bool ok = true;
  for (std::size_t i = 0; i < std::size(states); ++i) {
    HBTConfig cfg;
    cfg.dark_count_rate = 0.0;
    cfg.trials = 1'000'000;
    cfg.max_offset = 0;
    cfg.seed = seed + 2 * i;
    cfg.detector_efficiency = 1.0;
    const HBTResult full = hbt_monte_carlo(states[i], pulse, cfg);
    cfg.seed = seed + 2 * i + 1;
    cfg.detector_efficiency = 0.3;
    const HBTResult weak = hbt_monte_carlo(states[i], pulse, cfg);
    const double diff = std::abs(*full.g2_zero - *weak.g2_zero);
    const double bound = 3.0 * std::hypot(full.std_error, weak.std_error);
    msg << "state " << i << ": " << *full.g2_zero << " vs " << *weak.g2_zero << " (3 se " << bound << "); ";
    ok = ok && diff <= bound;
  }
  return {ok, msg.str()};
}

Check loss_channel_composition(std::uint64_t seed) {
  using namespace photonparity;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix rho = random_state(rng(), 10, 6);
    const double t1 = unit(rng), t2 = unit(rng);
    const ComplexMatrix twice = pure_loss_channel(pure_loss_channel(rho, t1), t2).matrix();
    const ComplexMatrix once = pure_loss_channel(rho, t1 * t2).matrix();
    worst = std::max(worst, (twice - once).cwiseAbs().maxCoeff());
    worst = std::max(worst, (once - loss_kraus(rho.matrix(), t1 * t2)).cwiseAbs().maxCoeff());
  }
  std::ostringstream msg;
  msg << "max deviation " << worst;
  return {worst < 1e-12, msg.str()};
}

}  // namespace oracle
