#include "photonparity/distillation.h"

#include <cmath>
#include <limits>
#include <ostream>

#include "photonparity/errors.h"
#include "photonparity/parallel.h"

namespace photonparity {

namespace {

// log <beta|gamma> for coherent states.
Complex coherent_log_overlap(Complex beta, Complex gamma) {
  return -0.5 * std::norm(beta) - 0.5 * std::norm(gamma) + std::conj(beta) * gamma;
}

// 1 - Re(exp(z)), accurate when z is close to zero.
double one_minus_re_exp(Complex z) {
  const double s = std::sin(0.5 * z.imag());
  return -std::expm1(z.real()) * std::cos(z.imag()) + 2.0 * s * s;
}

void require_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(name) + " must lie in [0, 1]");
}

double sign_of(Parity parity) { return parity == Parity::odd ? -1.0 : 1.0; }

Parity other(Parity parity) { return parity == Parity::odd ? Parity::even : Parity::odd; }

// Unnormalized operator kept for a readout whose ideal outcome is `target`
// but which is flipped with probability epsilon.
ComplexMatrix readout_mixture(const ComplexMatrix& target, const ComplexMatrix& flipped, double epsilon) {
  return (1.0 - epsilon) * target + epsilon * flipped;
}

}  // namespace

void DistillationConfig::validate() const {
  require_probability(detection_error, "detection_error");
  require_probability(uncorrected_loss, "uncorrected_loss");
  require_probability(downstream_loss, "downstream_loss");
}

DistillationConfig fitted_config() {
  DistillationConfig c;
  c.params = reference_cavity().with_detunings(0.0, kFittedCavityDetuning);
  c.detection_error = kFittedDetectionError;
  c.uncorrected_loss = 1.0 - (1.0 - kFittedTotalLoss) / (1.0 - kCorrectedLoss);
  c.downstream_loss = 0.0;
  return c;
}

DistillationConfig counting_config() {
  DistillationConfig c = fitted_config();
  c.params = reference_cavity().with_detunings(kStarkShift, 0.0);
  return c;
}

CoherentBranches coherent_branches(const CavityParams& params, double alpha, double transmission) {
  if (!(alpha >= 0.0)) throw DomainError("coherent input amplitude must be real and >= 0");
  if (!(transmission >= 0.0)) throw DomainError("transmission must be >= 0");
  const BranchAmplitudes up = branch_amplitudes(params, true, alpha);
  const BranchAmplitudes down = branch_amplitudes(params, false, alpha);
  const double lost = 1.0 - transmission;
  const double nu = std::sqrt(transmission);

  CoherentBranches b;
  b.up = nu * up.r;
  b.down = nu * down.r;
  b.env_log_overlap = coherent_log_overlap(down.t, up.t) + coherent_log_overlap(down.m, up.m) +
                      coherent_log_overlap(down.a, up.a) + lost * coherent_log_overlap(down.r, up.r);
  return b;
}

double ideal_parity_probability(const CoherentBranches& b, Parity parity) {
  const Complex z = b.env_log_overlap + coherent_log_overlap(b.down, b.up);
  const double p_odd = 0.5 * one_minus_re_exp(z);
  return parity == Parity::odd ? p_odd : 1.0 - p_odd;
}

ComplexMatrix coherent_parity_operator(const CoherentBranches& b, Parity parity, int dim) {
  // (|a> -+ conj(c)|b>)(...)^dagger + (1 - |c|^2)|b><b|, all over 4, which
  // equals |a><a| + |b><b| -+ (c|a><b| + h.c.) but keeps the small
  // odd-parity weights free of cancellation.
  const ComplexVector a = coherent_state(b.up, dim).amplitudes();
  const ComplexVector d = coherent_state(b.down, dim).amplitudes();
  const Complex c = std::exp(b.env_log_overlap);
  const double decohered = -std::expm1(2.0 * b.env_log_overlap.real());
  const ComplexVector mixed = a + sign_of(parity) * std::conj(c) * d;
  return 0.25 * (mixed * mixed.adjoint() + decohered * d * d.adjoint());
}

DensityMatrix distill_coherent(const DistillationConfig& config, double alpha, Parity parity, int dim) {
  config.validate();
  const CoherentBranches b = coherent_branches(config.params, alpha, config.transmission());
  const double eps = config.detection_error;
  const double p_target = ideal_parity_probability(b, parity);
  const double p_flipped = 1.0 - p_target;
  const double weight = (1.0 - eps) * p_target + eps * p_flipped;
  if (!(weight > 0.0)) {
    throw EmptyBranchError("heralding outcome has zero probability (alpha = 0 without readout error)");
  }
  ComplexMatrix u = (1.0 - eps) * coherent_parity_operator(b, parity, dim);
  if (eps > 0.0) u += eps * coherent_parity_operator(b, other(parity), dim);
  return DensityMatrix(u / weight);
}

HeraldProbabilities herald_probability(const DistillationConfig& config, double alpha) {
  config.validate();
  const CoherentBranches b = coherent_branches(config.params, alpha, config.transmission());
  const double p_odd = ideal_parity_probability(b, Parity::odd);
  const double eps = config.detection_error;
  HeraldProbabilities h;
  h.p_up = (1.0 - eps) * p_odd + eps * (1.0 - p_odd);
  h.p_down = 1.0 - h.p_up;
  return h;
}

HeraldedOutput herald_coherent(const DistillationConfig& config, double alpha, int dim) {
  const HeraldProbabilities h = herald_probability(config, alpha);
  HeraldedOutput out;
  out.p_up = h.p_up;
  out.p_down = h.p_down;
  if (h.p_up > 0.0) out.rho_odd = distill_coherent(config, alpha, Parity::odd, dim);
  if (h.p_down > 0.0) out.rho_even = distill_coherent(config, alpha, Parity::even, dim);
  return out;
}

DensityMatrix unconditioned_reflected_state(const DistillationConfig& config, double alpha, int dim) {
  config.validate();
  const CoherentBranches b = coherent_branches(config.params, alpha, config.transmission());
  const ComplexVector a = coherent_state(b.up, dim).amplitudes();
  const ComplexVector d = coherent_state(b.down, dim).amplitudes();
  return DensityMatrix(0.5 * (a * a.adjoint() + d * d.adjoint()));
}

DensityMatrix detection_error_mix(const DensityMatrix& rho_odd, const DensityMatrix& rho_even, double p_odd,
                                  double epsilon) {
  require_probability(p_odd, "p_odd");
  require_probability(epsilon, "epsilon");
  if (rho_odd.dim() != rho_even.dim()) throw InvalidDimension("detection_error_mix: dimension mismatch");
  const double w_odd = (1.0 - epsilon) * p_odd;
  const double w_even = epsilon * (1.0 - p_odd);
  if (!(w_odd + w_even > 0.0)) throw EmptyBranchError("detection_error_mix: herald probability is zero");
  if (epsilon == 0.0) return rho_odd;
  if (epsilon == 1.0) return rho_even;
  return DensityMatrix((w_odd * rho_odd.matrix() + w_even * rho_even.matrix()) / (w_odd + w_even));
}

ParityChannel::ParityChannel(const CavityParams& params) {
  const BranchAmplitudes up = branch_amplitudes(params, true, 1.0);
  const BranchAmplitudes down = branch_amplitudes(params, false, 1.0);
  tau_up_ = up.r;
  tau_down_ = down.r;
  chi_ = up.t * std::conj(down.t) + up.m * std::conj(down.m) + up.a * std::conj(down.a);
  leak_up_ = std::norm(up.t) + std::norm(up.m) + std::norm(up.a);
  leak_down_ = std::norm(down.t) + std::norm(down.m) + std::norm(down.a);
}

ComplexMatrix ParityChannel::apply(const ComplexMatrix& rho, Parity parity) const {
  const int dim = static_cast<int>(rho.rows());
  if (rho.cols() != rho.rows()) throw InvalidDimension("ParityChannel: input must be square");

  // sqrt(C(n, k)) by Pascal's rule.
  std::vector<std::vector<double>> binom(static_cast<std::size_t>(dim));
  for (int n = 0; n < dim; ++n) {
    auto& row = binom[static_cast<std::size_t>(n)];
    row.assign(static_cast<std::size_t>(n) + 1, 1.0);
    for (int k = 1; k < n; ++k) {
      const auto& prev = binom[static_cast<std::size_t>(n - 1)];
      row[static_cast<std::size_t>(k)] = prev[static_cast<std::size_t>(k - 1)] + prev[static_cast<std::size_t>(k)];
    }
  }
  const auto kraus = [&](Complex tau, int k) {
    ComplexMatrix op = ComplexMatrix::Zero(dim, dim);
    Complex tau_pow = 1.0;  // tau^(n - k)
    for (int n = k; n < dim; ++n) {
      op(n - k, n) = tau_pow * std::sqrt(binom[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)]);
      tau_pow *= tau;
    }
    return op;
  };

  const double sign = sign_of(parity);
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  double w_up = 1.0, w_down = 1.0;
  Complex chi_k = 1.0;
  for (int k = 0; k < dim; ++k) {
    const ComplexMatrix up = kraus(tau_up_, k);
    const ComplexMatrix down = kraus(tau_down_, k);
    const ComplexMatrix up_rho = up * rho;
    const ComplexMatrix down_rho = down * rho;
    const ComplexMatrix cross = chi_k * up_rho * down.adjoint();
    out += w_up * up_rho * up.adjoint() + w_down * down_rho * down.adjoint() + sign * (cross + cross.adjoint());
    w_up *= leak_up_;
    w_down *= leak_down_;
    chi_k *= chi_;
  }
  return 0.25 * out;
}

namespace {

struct GeneralOutcomes {
  ComplexMatrix odd, even;  // after post-cavity loss, before readout error
};

GeneralOutcomes general_outcomes(const DensityMatrix& rho_in, const DistillationConfig& config) {
  config.validate();
  const ParityChannel channel(config.params);
  const double t = config.transmission();
  GeneralOutcomes o;
  o.odd = apply_loss(channel.apply(rho_in.matrix(), Parity::odd), t);
  o.even = apply_loss(channel.apply(rho_in.matrix(), Parity::even), t);
  return o;
}

}  // namespace

GeneralDistillationResult distill_general(const DensityMatrix& rho_in, const DistillationConfig& config,
                                          Parity parity) {
  const GeneralOutcomes o = general_outcomes(rho_in, config);
  const ComplexMatrix& target = parity == Parity::odd ? o.odd : o.even;
  const ComplexMatrix& flipped = parity == Parity::odd ? o.even : o.odd;
  const ComplexMatrix u = readout_mixture(target, flipped, config.detection_error);
  const double p = u.trace().real();
  if (!(p > 1e-300)) throw EmptyBranchError("heralding outcome has zero probability for this input");
  return {DensityMatrix(u / p), p};
}

HeraldedOutput herald_general(const DensityMatrix& rho_in, const DistillationConfig& config) {
  const GeneralOutcomes o = general_outcomes(rho_in, config);
  const double eps = config.detection_error;
  const ComplexMatrix up = readout_mixture(o.odd, o.even, eps);
  const ComplexMatrix down = readout_mixture(o.even, o.odd, eps);
  HeraldedOutput out;
  out.p_up = up.trace().real();
  out.p_down = down.trace().real();
  if (out.p_up > 1e-300) out.rho_odd = DensityMatrix(up / out.p_up);
  if (out.p_down > 1e-300) out.rho_even = DensityMatrix(down / out.p_down);
  return out;
}

double single_photon_fidelity(const DensityMatrix& rho) { return rho.population(1); }

double multi_photon_suppression(const DensityMatrix& rho) { return rho.population(0) + rho.population(1); }

double relative_multi_photon_suppression(const DensityMatrix& rho, const DensityMatrix& reference) {
  const double ref_tail = 1.0 - reference.population(0) - reference.population(1);
  if (!(ref_tail > 0.0)) throw DomainError("reference state has no multi-photon weight");
  const double tail = 1.0 - rho.population(0) - rho.population(1);
  return 1.0 - tail / ref_tail;
}

std::vector<double> heralded_odd_populations(const CavityParams& params, double alpha, double transmission,
                                             double epsilon, int count) {
  require_probability(epsilon, "epsilon");
  if (count < 1) throw InvalidDimension("heralded_odd_populations: count must be >= 1");
  const CoherentBranches b = coherent_branches(params, alpha, transmission);
  const double p_odd = ideal_parity_probability(b, Parity::odd);
  const double weight = (1.0 - epsilon) * p_odd + epsilon * (1.0 - p_odd);
  if (!(weight > 0.0)) throw EmptyBranchError("heralding outcome has zero probability");

  const Complex c = std::exp(b.env_log_overlap);
  const double decohered = -std::expm1(2.0 * b.env_log_overlap.real());
  std::vector<double> pops(static_cast<std::size_t>(count));
  Complex an = std::exp(-0.5 * std::norm(b.up));
  Complex dn = std::exp(-0.5 * std::norm(b.down));
  for (int n = 0; n < count; ++n) {
    if (n > 0) {
      an *= b.up / std::sqrt(static_cast<double>(n));
      dn *= b.down / std::sqrt(static_cast<double>(n));
    }
    const double odd = 0.25 * (std::norm(an - std::conj(c) * dn) + decohered * std::norm(dn));
    const double even = 0.25 * (std::norm(an + std::conj(c) * dn) + decohered * std::norm(dn));
    pops[static_cast<std::size_t>(n)] = ((1.0 - epsilon) * odd + epsilon * even) / weight;
  }
  return pops;
}

std::vector<SweepRow> sweep_coherent(const DistillationConfig& config, std::span<const double> alpha_sq_grid,
                                     int dim) {
  config.validate();
  std::vector<SweepRow> rows(alpha_sq_grid.size());
  parallel_for(alpha_sq_grid.size(), [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.alpha_sq = alpha_sq_grid[i];
    if (!(row.alpha_sq >= 0.0)) throw DomainError("sweep: alpha^2 must be >= 0");
    const double alpha = std::sqrt(row.alpha_sq);
    row.p_up = herald_probability(config, alpha).p_up;
    try {
      const DensityMatrix rho = distill_coherent(config, alpha, Parity::odd, dim);
      row.f1 = single_photon_fidelity(rho);
      for (int n = 0; n < 4; ++n) row.p[n] = rho.population(n);
      row.suppression = multi_photon_suppression(rho);
      const double input_tail = -std::expm1(-row.alpha_sq) - row.alpha_sq * std::exp(-row.alpha_sq);
      row.suppression_relative =
          input_tail > 0.0 ? 1.0 - (1.0 - row.suppression) / input_tail : std::numeric_limits<double>::quiet_NaN();
    } catch (const EmptyBranchError&) {
      row.empty_branch = true;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.f1 = row.suppression = row.suppression_relative = nan;
      for (double& v : row.p) v = nan;
    }
  });
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  const auto old = out.precision(10);
  out << "alpha_sq,p_up,f1,p0,p1,p2,p3,suppression,coherent_f1,suppression_relative\n";
  const auto field = [&](double v) -> std::ostream& {
    if (std::isnan(v)) return out << "nan";
    return out << v;
  };
  for (const auto& r : rows) {
    field(r.alpha_sq) << ',';
    field(r.p_up) << ',';
    field(r.f1) << ',';
    for (double v : r.p) field(v) << ',';
    field(r.suppression) << ',';
    field(r.alpha_sq * std::exp(-r.alpha_sq)) << ',';
    field(r.suppression_relative) << '\n';
  }
  out.precision(old);
}

}  // namespace photonparity
