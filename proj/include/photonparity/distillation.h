#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "photonparity/cavity.h"
#include "photonparity/fockspace.h"

namespace photonparity {

/// Photon-number parity selected by the atomic measurement.  Detecting the
/// atom in the coupling state heralds odd parity.
enum class Parity { odd, even };

struct DistillationConfig {
  CavityParams params = reference_cavity();
  double detection_error = 0.0;   // probability the atomic readout is flipped
  double uncorrected_loss = 0.0;  // production-side loss beyond the cavity limit
  double downstream_loss = 0.0;   // propagation/detection loss left in the data

  void validate() const;
  /// Overall intensity transmission applied after the cavity.
  double transmission() const { return (1.0 - uncorrected_loss) * (1.0 - downstream_loss); }
};

/// Imperfection values obtained from the population fit of the experiment.
inline constexpr double kFittedTotalLoss = 0.352;
inline constexpr double kFittedDetectionError = 0.013;
inline constexpr double kFittedCavityDetuning = 0.39;  // 2*pi*MHz
/// Propagation and detection loss removed from the homodyne data.
inline constexpr double kCorrectedLoss = 0.251;
/// Average AC-Stark shift of the atomic resonance.
inline constexpr double kStarkShift = 6.0;  // 2*pi*MHz

/// Reference cavity with the fitted imperfections: detection error 1.3 %,
/// Delta_c = 0.39, and the uncorrected loss 1 - (1 - 0.352)/(1 - 0.251).
/// Downstream loss is zero, i.e. this describes loss-corrected data.
DistillationConfig fitted_config();

/// Configuration used for photon-counting predictions: cavity actively
/// locked (Delta_c = 0), atom detuned by the AC-Stark shift, fitted
/// detection error and uncorrected loss.
DistillationConfig counting_config();

/// Two output states with unit-normalized probabilities of the atomic
/// readout.  A branch that cannot occur has no state.
struct HeraldedOutput {
  std::optional<DensityMatrix> rho_odd;   // atom read out in the coupling state
  std::optional<DensityMatrix> rho_even;  // atom read out in the non-coupling state
  double p_up = 0.0;
  double p_down = 0.0;
};

struct HeraldProbabilities {
  double p_up = 0.0;
  double p_down = 0.0;
};

/// The two coherent reflected amplitudes (after intensity transmission T)
/// and the log-overlap of everything that was lost to the environment.
/// T > 1 is accepted and gives the analytic continuation used to model
/// loss-corrected data.
struct CoherentBranches {
  Complex up;    // sqrt(T) r_up
  Complex down;  // sqrt(T) r_down
  Complex env_log_overlap;  // log <env_down|env_up>
};

CoherentBranches coherent_branches(const CavityParams& params, double alpha, double transmission);

/// Probability of the ideal (error-free) parity outcome.
double ideal_parity_probability(const CoherentBranches& branches, Parity parity);

/// Conditional photonic operator for an ideal parity outcome, with trace
/// equal to the outcome probability (up to truncation).
ComplexMatrix coherent_parity_operator(const CoherentBranches& branches, Parity parity, int dim);

/// State heralded by reading out `parity` for a real coherent input alpha,
/// including cavity loss modes, post-cavity losses and readout errors.
DensityMatrix distill_coherent(const DistillationConfig& config, double alpha, Parity parity, int dim = kDefaultDim);

HeraldedOutput herald_coherent(const DistillationConfig& config, double alpha, int dim = kDefaultDim);

HeraldProbabilities herald_probability(const DistillationConfig& config, double alpha);

/// Reflected light without conditioning on the atom.
DensityMatrix unconditioned_reflected_state(const DistillationConfig& config, double alpha, int dim = kDefaultDim);

/// State kept after reading out the coupling state when the readout is
/// wrong with probability epsilon (Bayes mixing of the two ideal outcomes).
DensityMatrix detection_error_mix(const DensityMatrix& rho_odd, const DensityMatrix& rho_even, double p_odd,
                                  double epsilon);

/// Per-photon parity channel for arbitrary Fock-basis inputs.
///
/// Every input photon is reflected with amplitude tau_s (s = atomic state)
/// or leaks into the transmission/scattering modes.  Tracing the leaked
/// photons gives, for lost photon number k,
///   A_k^s = tau_s^{n} a^k / sqrt(k!)
/// with diagonal weights w_s^k and cross weight chi^k, chi the per-photon
/// overlap of the two leaked-mode amplitude vectors.
class ParityChannel {
 public:
  explicit ParityChannel(const CavityParams& params);

  /// Unnormalized output for an ideal parity outcome; trace = probability.
  ComplexMatrix apply(const ComplexMatrix& rho, Parity parity) const;

  Complex tau_up() const { return tau_up_; }
  Complex tau_down() const { return tau_down_; }
  Complex chi() const { return chi_; }

 private:
  Complex tau_up_, tau_down_, chi_;
  double leak_up_, leak_down_;
};

struct GeneralDistillationResult {
  DensityMatrix rho;
  double herald_probability;
};

GeneralDistillationResult distill_general(const DensityMatrix& rho_in, const DistillationConfig& config,
                                          Parity parity);

HeraldedOutput herald_general(const DensityMatrix& rho_in, const DistillationConfig& config);

/// <1|rho|1>
double single_photon_fidelity(const DensityMatrix& rho);
/// 1 - P(n >= 2)
double multi_photon_suppression(const DensityMatrix& rho);
/// 1 - P_rho(n >= 2) / P_reference(n >= 2)
double relative_multi_photon_suppression(const DensityMatrix& rho, const DensityMatrix& reference);

/// Populations p_0..p_{count-1} of the coupling-state-heralded light, from
/// the closed form without building the full matrix.  `transmission` may
/// exceed one (loss-corrected data).
std::vector<double> heralded_odd_populations(const CavityParams& params, double alpha, double transmission,
                                             double epsilon, int count);

struct SweepRow {
  double alpha_sq = 0.0;
  double p_up = 0.0;
  double f1 = 0.0;
  double p[4] = {0.0, 0.0, 0.0, 0.0};
  double suppression = 0.0;
  double suppression_relative = 0.0;  // against the input coherent state
  bool empty_branch = false;
};

/// Odd-herald figures of merit on a grid of mean input photon numbers.
/// Points are evaluated in parallel; row i belongs to alpha_sq_grid[i].
std::vector<SweepRow> sweep_coherent(const DistillationConfig& config, std::span<const double> alpha_sq_grid,
                                     int dim = kDefaultDim);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace photonparity
