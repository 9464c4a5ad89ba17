#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "photonparity/fockspace.h"

namespace photonparity {

/// One homodyne record: local-oscillator phase in [0, 2*pi) and the
/// quadrature value (vacuum variance 1/2).
struct QuadratureSample {
  double theta = 0.0;
  double x = 0.0;
};

struct ReconstructionResult {
  DensityMatrix rho;
  std::vector<double> log_likelihood_trace;  // one entry per accepted iterate
  int iterations = 0;
  bool converged = false;
  std::size_t dropped_samples = 0;  // outside the binning window
};

struct MleOptions {
  double efficiency = 1.0;
  int max_iter = 2000;
  /// Stop once the log-likelihood gain per sample drops below this.
  double tol = 1e-10;
  /// Bin edges for the quadrature axis.
  int grid_points = 801;
  double x_min = -6.0;
  double x_max = 6.0;
};

/// `count` phases equally spaced in [0, pi).
std::vector<double> equally_spaced_phases(int count);

/// Draws homodyne data from the state after a detector of efficiency eta.
/// Each phase uses its own RNG stream derived from `seed`, so the output
/// is fixed by (rho, phases, samples_per_phase, efficiency, seed).
std::vector<QuadratureSample> sample_homodyne(const DensityMatrix& rho, std::span<const double> phases,
                                              int samples_per_phase, double efficiency, std::uint64_t seed);

/// Iterative maximum-likelihood reconstruction (R rho R) over binned
/// quadrature projectors.  The detector efficiency is folded into the
/// projectors, so the result estimates the state before detection loss.
/// Every iterate is accepted only if the likelihood does not decrease; a
/// diluted step is used when the plain update would overshoot.
ReconstructionResult mle_reconstruct(std::span<const QuadratureSample> samples, int dim, const MleOptions& options);

ReconstructionResult mle_reconstruct(std::span<const QuadratureSample> samples, int dim, double efficiency,
                                     int max_iter, double tol);

/// Inverts a known pure loss L in [0, 1) (inverse Bernoulli
/// transformation).  Small negative eigenvalues produced by noisy input are
/// clipped and the clipped weight is reported on std::clog.
DensityMatrix loss_correct(const DensityMatrix& rho, double loss);

/// Largest absolute coefficient sum of the inverse loss map on `dim`
/// levels; a bound on how much it amplifies elementwise noise.
double loss_inversion_amplification(int dim, double loss);

void write_samples_csv(std::ostream& out, std::span<const QuadratureSample> samples);
std::vector<QuadratureSample> read_samples_csv(std::istream& in);

/// JSON object with keys dim, iterations, converged, final_log_likelihood,
/// rho {real, imag}.
std::string reconstruction_json(const ReconstructionResult& result);

}  // namespace photonparity
