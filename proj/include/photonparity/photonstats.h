#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "photonparity/cavity.h"
#include "photonparity/distillation.h"
#include "photonparity/fockspace.h"

namespace photonparity {

enum class PulseKind { gaussian, double_peak, rectangular };

/// Temporal intensity profile of a light pulse.
///
/// gaussian:    intensity FWHM = duration.
/// double_peak: two Gaussian lobes of FWHM duration/2, centred at
///              +-duration/2 (peak separation = duration).
/// rectangular: flat top of length duration.
struct PulseShape {
  PulseKind kind = PulseKind::gaussian;
  double duration = 2.3e-6;            // seconds (FWHM or full length)
  double mean_photon_number = 0.11;    // alpha^2
  double repetition_rate = 500.0;      // Hz

  void validate() const;
  /// Photon flux in 1/s; integrates to mean_photon_number over time.
  double intensity(double t) const;
  /// Interval outside which the intensity is negligible.
  double support_half_width() const;
};

const char* to_string(PulseKind kind);
PulseKind pulse_kind_from_string(const std::string& name);

struct BandwidthReport {
  bool valid = false;
  double spectral_fwhm = 0.0;  // Hz, of the field power spectrum
  double ratio = 0.0;          // spectral FWHM over the cavity field decay rate kappa / 2pi
};

inline constexpr double kBandwidthThreshold = 0.1;

BandwidthReport bandwidth_check(const PulseShape& pulse, const CavityParams& params);

struct HBTConfig {
  double detector_efficiency = 0.5;
  double dark_count_rate = 20.0;  // Hz per detector
  /// Counting window per pulse; when unset, three times the pulse duration.
  std::optional<double> coincidence_window;
  long long trials = 1'000'000;
  std::uint64_t seed = 1;
  int max_offset = 3;  // run offsets -max_offset..max_offset

  void validate() const;
  double window_for(const PulseShape& pulse) const;
  /// Mean dark counts per detector and pulse.
  double dark_mean(const PulseShape& pulse) const;
};

/// sum n(n-1) p_n / nbar^2; empty when the mean photon number vanishes.
std::optional<double> g2_analytic(const DensityMatrix& rho);

/// g2(0) measured by two photon-counting detectors behind a 50:50 splitter
/// with efficiency eta and independent Poissonian dark counts of mean
/// `dark_mean` per detector.
std::optional<double> g2_with_dark_counts(const DensityMatrix& rho, double efficiency, double dark_mean);

struct CorrelationPoint {
  int offset = 0;  // run offset tau in units of the repetition period
  std::optional<double> g2;
  double std_error = 0.0;
};

struct HBTResult {
  std::vector<CorrelationPoint> g2_tau;
  std::optional<double> g2_zero;
  double std_error = 0.0;
  long long singles_a = 0;  // total counts, detector A
  long long singles_b = 0;  // total counts, detector B
  long long coincidences = 0;  // sum of n_A n_B at zero offset
};

/// Monte Carlo Hanbury Brown-Twiss experiment over independent runs.  Each
/// run draws a photon number from the populations of rho, splits and thins
/// it binomially and adds dark counts; g2(tau) correlates runs tau apart.
/// Trials are generated in fixed-size blocks with seeds derived from
/// cfg.seed, so results do not depend on the thread count.
HBTResult hbt_monte_carlo(const DensityMatrix& rho, const PulseShape& pulse, const HBTConfig& cfg);

struct G2Row {
  double alpha_sq = 0.0;
  std::optional<double> g2_zero;
  double std_error = 0.0;
};

/// g2(0) of the odd-heralded light for each alpha^2 (pulse.mean_photon_number
/// is overridden per row).  Analytic with dark counts, or Monte Carlo when
/// `monte_carlo` is set.
std::vector<G2Row> g2_curve(const DistillationConfig& config, std::span<const double> alpha_sq_grid,
                            const PulseShape& pulse, const HBTConfig& cfg, bool monte_carlo,
                            int dim = kDefaultDim);

void write_g2_csv(std::ostream& out, std::span<const G2Row> rows);
void write_g2_tau_csv(std::ostream& out, std::span<const CorrelationPoint> points);

}  // namespace photonparity
