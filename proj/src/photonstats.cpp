#include "photonparity/photonstats.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <numbers>
#include <random>

#include "photonparity/errors.h"
#include "photonparity/parallel.h"

namespace photonparity {

namespace {

constexpr double kFourLn2 = 4.0 * std::numbers::ln2;

double gaussian_lobe(double t, double centre, double fwhm) {
  const double u = (t - centre) / fwhm;
  return std::exp(-kFourLn2 * u * u) * 2.0 * std::sqrt(std::numbers::ln2 / std::numbers::pi) / fwhm;
}

// Power spectrum |FT sqrt(I)|^2 at frequency nu (Hz), on a fixed time grid.
class FieldSpectrum {
 public:
  explicit FieldSpectrum(const PulseShape& pulse) {
    constexpr int kSamples = 4096;
    const double half = pulse.support_half_width();
    dt_ = 2.0 * half / kSamples;
    times_.resize(kSamples);
    field_.resize(kSamples);
    for (int i = 0; i < kSamples; ++i) {
      const double t = -half + (i + 0.5) * dt_;
      times_[static_cast<std::size_t>(i)] = t;
      field_[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, pulse.intensity(t)));
    }
  }

  double operator()(double nu) const {
    std::complex<double> sum = 0.0;
    const double w = 2.0 * std::numbers::pi * nu;
    for (std::size_t i = 0; i < times_.size(); ++i) sum += field_[i] * std::polar(1.0, -w * times_[i]);
    return std::norm(sum * dt_);
  }

 private:
  double dt_ = 0.0;
  std::vector<double> times_, field_;
};

struct Moments {
  double mx = 0, my = 0, mz = 0;
  double cxx = 0, cyy = 0, czz = 0, cxy = 0, cxz = 0, cyz = 0;
  long long count = 0;
};

// g = <xy> / (<x><y>) with a delta-method standard error.
CorrelationPoint correlate(std::span<const std::uint16_t> a, std::span<const std::uint16_t> b, int offset) {
  CorrelationPoint point;
  point.offset = offset;
  const long long n = static_cast<long long>(a.size());
  const long long start = std::max(0, -offset);
  const long long stop = std::min(n, n - offset);
  Moments m;
  for (long long i = start; i < stop; ++i) {
    const double x = a[static_cast<std::size_t>(i)], y = b[static_cast<std::size_t>(i + offset)];
    m.mx += x;
    m.my += y;
    m.mz += x * y;
    ++m.count;
  }
  if (m.count < 2 || m.mx <= 0.0 || m.my <= 0.0) return point;
  const double cnt = static_cast<double>(m.count);
  m.mx /= cnt;
  m.my /= cnt;
  m.mz /= cnt;
  for (long long i = start; i < stop; ++i) {
    const double x = a[static_cast<std::size_t>(i)] - m.mx;
    const double y = b[static_cast<std::size_t>(i + offset)] - m.my;
    const double z = static_cast<double>(a[static_cast<std::size_t>(i)]) * b[static_cast<std::size_t>(i + offset)] - m.mz;
    m.cxx += x * x;
    m.cyy += y * y;
    m.czz += z * z;
    m.cxy += x * y;
    m.cxz += x * z;
    m.cyz += y * z;
  }
  const double g = m.mz / (m.mx * m.my);
  const double dz = 1.0 / (m.mx * m.my), dx = -g / m.mx, dy = -g / m.my;
  const double var = dz * dz * m.czz + dx * dx * m.cxx + dy * dy * m.cyy + 2.0 * dz * dx * m.cxz +
                     2.0 * dz * dy * m.cyz + 2.0 * dx * dy * m.cxy;
  point.g2 = g;
  point.std_error = std::sqrt(std::max(0.0, var / (cnt - 1.0)) / cnt);
  return point;
}

}  // namespace

const char* to_string(PulseKind kind) {
  switch (kind) {
    case PulseKind::gaussian:
      return "gaussian";
    case PulseKind::double_peak:
      return "double_peak";
    case PulseKind::rectangular:
      return "rectangular";
  }
  return "gaussian";
}

PulseKind pulse_kind_from_string(const std::string& name) {
  if (name == "gaussian") return PulseKind::gaussian;
  if (name == "double_peak" || name == "double-peak") return PulseKind::double_peak;
  if (name == "rectangular") return PulseKind::rectangular;
  throw DomainError("unknown pulse shape '" + name + "'");
}

void PulseShape::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration)) throw DomainError("pulse duration must be positive");
  if (!(mean_photon_number >= 0.0)) throw DomainError("mean photon number must be >= 0");
  if (!(repetition_rate > 0.0)) throw DomainError("repetition rate must be positive");
}

double PulseShape::intensity(double t) const {
  switch (kind) {
    case PulseKind::gaussian:
      return mean_photon_number * gaussian_lobe(t, 0.0, duration);
    case PulseKind::double_peak:
      return 0.5 * mean_photon_number *
             (gaussian_lobe(t, -0.5 * duration, 0.5 * duration) + gaussian_lobe(t, 0.5 * duration, 0.5 * duration));
    case PulseKind::rectangular:
      return std::abs(t) <= 0.5 * duration ? mean_photon_number / duration : 0.0;
  }
  return 0.0;
}

double PulseShape::support_half_width() const {
  switch (kind) {
    case PulseKind::gaussian:
      return 3.0 * duration;
    case PulseKind::double_peak:
      return 2.0 * duration;
    case PulseKind::rectangular:
      return 0.5 * duration;
  }
  return duration;
}

BandwidthReport bandwidth_check(const PulseShape& pulse, const CavityParams& params) {
  pulse.validate();
  if (!(params.kappa() > 0.0)) throw DomainError("bandwidth_check: cavity linewidth must be positive");
  const FieldSpectrum spectrum(pulse);
  const double peak = spectrum(0.0);
  const double half = 0.5 * peak;

  // Outermost half-maximum crossing: coarse scan then bisection.
  constexpr int kScan = 4000;
  const double nu_max = 40.0 / pulse.duration;
  double outer = 0.0;
  for (int i = kScan; i >= 1; --i) {
    const double nu = nu_max * i / kScan;
    if (spectrum(nu) >= half) {
      outer = nu;
      break;
    }
  }
  double lo = outer, hi = outer + nu_max / kScan;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (spectrum(mid) >= half ? lo : hi) = mid;
  }
  BandwidthReport report;
  report.spectral_fwhm = lo + hi;  // 2 * crossing
  report.ratio = report.spectral_fwhm / (params.kappa() * 1e6);
  report.valid = report.ratio < kBandwidthThreshold;
  return report;
}

void HBTConfig::validate() const {
  if (!(detector_efficiency >= 0.0 && detector_efficiency <= 1.0)) throw DomainError("detector efficiency in [0, 1]");
  if (!(dark_count_rate >= 0.0)) throw DomainError("dark count rate must be >= 0");
  if (coincidence_window && !(*coincidence_window > 0.0)) throw DomainError("coincidence window must be positive");
  if (trials < 1) throw DomainError("trials must be >= 1");
  if (max_offset < 0) throw DomainError("max_offset must be >= 0");
}

double HBTConfig::window_for(const PulseShape& pulse) const {
  return coincidence_window ? *coincidence_window : 3.0 * pulse.duration;
}

double HBTConfig::dark_mean(const PulseShape& pulse) const { return dark_count_rate * window_for(pulse); }

std::optional<double> g2_analytic(const DensityMatrix& rho) { return photon_statistics(rho).g2_zero; }

std::optional<double> g2_with_dark_counts(const DensityMatrix& rho, double efficiency, double dark_mean) {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw DomainError("efficiency in [0, 1]");
  if (!(dark_mean >= 0.0)) throw DomainError("dark count mean must be >= 0");
  const auto p = photon_statistics(rho).probabilities;
  double mean = 0.0, factorial2 = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    mean += static_cast<double>(n) * p[n];
    factorial2 += static_cast<double>(n) * (static_cast<double>(n) - 1.0) * p[n];
  }
  const double h = 0.5 * efficiency;
  const double singles = h * mean + dark_mean;
  if (!(singles > 1e-300)) return std::nullopt;
  const double cross = h * h * factorial2 + 2.0 * dark_mean * h * mean + dark_mean * dark_mean;
  return cross / (singles * singles);
}

HBTResult hbt_monte_carlo(const DensityMatrix& rho, const PulseShape& pulse, const HBTConfig& cfg) {
  pulse.validate();
  cfg.validate();
  if (cfg.trials > 0 && cfg.trials < 10'000) std::clog << "warning: hbt_monte_carlo with only " << cfg.trials << " trials\n";

  auto probs = photon_statistics(rho).probabilities;
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    acc += std::max(0.0, probs[n]);
    cdf[n] = acc;
  }
  if (!(acc > 0.0)) throw DomainError("hbt_monte_carlo: state has no weight");
  for (double& c : cdf) c /= acc;
  cdf.back() = 1.0;

  const double eta = cfg.detector_efficiency;
  const double dark = cfg.dark_mean(pulse);
  const auto trials = static_cast<std::size_t>(cfg.trials);
  constexpr std::size_t kBlock = 1u << 16;
  const std::size_t blocks = (trials + kBlock - 1) / kBlock;
  std::vector<std::uint16_t> counts_a(trials), counts_b(trials);

  parallel_for(blocks, [&](std::size_t blk) {
    std::mt19937_64 rng(derive_seed(cfg.seed, blk));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::poisson_distribution<int> dark_counts(dark > 0.0 ? dark : 1.0);
    const std::size_t begin = blk * kBlock, end = std::min(trials, begin + kBlock);
    for (std::size_t i = begin; i < end; ++i) {
      const double u = uniform(rng);
      const auto n = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      int a = 0, b = 0;
      for (int k = 0; k < n; ++k) {
        if (uniform(rng) >= eta) continue;  // lost before detection
        (uniform(rng) < 0.5 ? a : b) += 1;
      }
      if (dark > 0.0) {
        a += dark_counts(rng);
        b += dark_counts(rng);
      }
      counts_a[i] = static_cast<std::uint16_t>(a);
      counts_b[i] = static_cast<std::uint16_t>(b);
    }
  });

  HBTResult result;
  for (std::size_t i = 0; i < trials; ++i) {
    result.singles_a += counts_a[i];
    result.singles_b += counts_b[i];
    result.coincidences += static_cast<long long>(counts_a[i]) * counts_b[i];
  }
  for (int offset = -cfg.max_offset; offset <= cfg.max_offset; ++offset) {
    result.g2_tau.push_back(correlate(counts_a, counts_b, offset));
  }
  const CorrelationPoint& zero = result.g2_tau[static_cast<std::size_t>(cfg.max_offset)];
  result.g2_zero = zero.g2;
  result.std_error = zero.std_error;
  if (!result.g2_zero) {
    std::clog << "hbt_monte_carlo: g2 undefined (singles A = " << result.singles_a << ", singles B = "
              << result.singles_b << ")\n";
  }
  return result;
}

std::vector<G2Row> g2_curve(const DistillationConfig& config, std::span<const double> alpha_sq_grid,
                            const PulseShape& pulse, const HBTConfig& cfg, bool monte_carlo, int dim) {
  config.validate();
  cfg.validate();
  std::vector<G2Row> rows(alpha_sq_grid.size());
  const auto evaluate = [&](std::size_t i) {
    const double alpha_sq = alpha_sq_grid[i];
    if (!(alpha_sq >= 0.0)) throw DomainError("alpha^2 must be >= 0");
    G2Row& row = rows[i];
    row.alpha_sq = alpha_sq;
    PulseShape p = pulse;
    p.mean_photon_number = alpha_sq;
    DensityMatrix rho = DensityMatrix::vacuum(dim);
    try {
      rho = distill_coherent(config, std::sqrt(alpha_sq), Parity::odd, dim);
    } catch (const EmptyBranchError&) {
      return;
    }
    if (monte_carlo) {
      HBTConfig c = cfg;
      c.seed = derive_seed(cfg.seed, i);
      c.max_offset = 0;
      const HBTResult r = hbt_monte_carlo(rho, p, c);
      row.g2_zero = r.g2_zero;
      row.std_error = r.std_error;
    } else {
      row.g2_zero = g2_with_dark_counts(rho, cfg.detector_efficiency, cfg.dark_mean(p));
    }
  };
  // Monte Carlo rows parallelize internally.
  if (monte_carlo) {
    for (std::size_t i = 0; i < rows.size(); ++i) evaluate(i);
  } else {
    parallel_for(rows.size(), evaluate);
  }
  return rows;
}

void write_g2_csv(std::ostream& out, std::span<const G2Row> rows) {
  const auto old = out.precision(12);
  out << "alpha_sq,g2_zero,stderr\n";
  for (const auto& r : rows) {
    out << r.alpha_sq << ',';
    if (r.g2_zero) {
      out << *r.g2_zero;
    } else {
      out << "nan";
    }
    out << ',' << r.std_error << '\n';
  }
  out.precision(old);
}

void write_g2_tau_csv(std::ostream& out, std::span<const CorrelationPoint> points) {
  const auto old = out.precision(12);
  out << "tau_index,g2,stderr\n";
  for (const auto& p : points) {
    out << p.offset << ',';
    if (p.g2) {
      out << *p.g2;
    } else {
      out << "nan";
    }
    out << ',' << p.std_error << '\n';
  }
  out.precision(old);
}

}  // namespace photonparity
