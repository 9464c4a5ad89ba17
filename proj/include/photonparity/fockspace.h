#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace photonparity {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Truncation dimension used when callers do not pick one.  Adequate for
/// coherent amplitudes with |alpha|^2 <= 2.5 (tail mass below 1e-10).
inline constexpr int kDefaultDim = 20;

/// Pure state in the truncated Fock basis; amplitude n multiplies |n>.
class FockVector {
 public:
  explicit FockVector(ComplexVector amplitudes);

  int dim() const { return static_cast<int>(amplitudes_.size()); }
  const ComplexVector& amplitudes() const { return amplitudes_; }
  Complex operator[](int n) const { return amplitudes_(n); }
  double squared_norm() const { return amplitudes_.squaredNorm(); }

 private:
  ComplexVector amplitudes_;
};

/// Tolerances a physical density matrix has to satisfy.
struct InvariantReport {
  double hermiticity_error = 0.0;  // max |rho - rho^dagger| elementwise
  double trace_error = 0.0;        // |Tr rho - 1|
  double min_eigenvalue = 0.0;

  bool ok(double herm_tol = 1e-12, double trace_tol = 1e-10, double psd_tol = 1e-10) const {
    return hermiticity_error <= herm_tol && trace_error <= trace_tol && min_eigenvalue >= -psd_tol;
  }
};

/// Operator on the truncated Fock space, rho_mn = <m|rho|n>.
///
/// Construction only checks the shape.  Channels in this library return
/// Hermitian, unit-trace, positive semidefinite matrices; `check()` reports
/// how far a given instance is from that.
class DensityMatrix {
 public:
  explicit DensityMatrix(ComplexMatrix elements);

  static DensityMatrix from_pure(const FockVector& psi);
  static DensityMatrix diagonal(std::span<const double> populations);
  static DensityMatrix fock(int n, int dim);
  static DensityMatrix vacuum(int dim) { return fock(0, dim); }

  int dim() const { return static_cast<int>(elements_.rows()); }
  const ComplexMatrix& matrix() const { return elements_; }
  Complex operator()(int m, int n) const { return elements_(m, n); }

  double trace() const { return elements_.trace().real(); }
  /// <n|rho|n>, zero outside the truncated space.
  double population(int n) const;
  std::vector<double> populations() const;

  DensityMatrix normalized() const;
  /// Zero-padded or truncated copy in dimension `dim`.
  DensityMatrix resized(int dim) const;

  InvariantReport check() const;

 private:
  ComplexMatrix elements_;
};

struct PhotonStatistics {
  std::vector<double> probabilities;
  double mean = 0.0;
  /// <n(n-1)>/<n>^2; empty when the mean photon number vanishes.
  std::optional<double> g2_zero;
};

FockVector coherent_state(Complex alpha, int dim = kDefaultDim);
FockVector fock_state(int n, int dim);
/// Geometric photon-number distribution with the given mean.
DensityMatrix thermal_state(double mean_photon_number, int dim);

/// Beam-splitter loss with intensity transmission T in [0, 1].
DensityMatrix pure_loss_channel(const DensityMatrix& rho, double transmission);

/// The loss map for any T > 0.  For T > 1 this is the analytic continuation
/// that inverts pure_loss_channel(., 1/T) exactly on the truncated space.
/// Input need not be normalized or positive.
ComplexMatrix apply_loss(const ComplexMatrix& rho, double transmission);

/// Heisenberg-picture (adjoint) loss map, used to fold detector efficiency
/// into measurement operators: Tr[E(rho) P] = Tr[rho E^dagger(P)].
ComplexMatrix apply_loss_adjoint(const ComplexMatrix& op, double transmission);

/// Wigner function at phase-space point (q, p).
///
/// Quadrature convention: a = (q + i p)/sqrt(2), so the vacuum has variance
/// 1/2 in both quadratures and W_vacuum(0, 0) = 1/pi.
double wigner(const DensityMatrix& rho, double q, double p);

struct PhaseSpacePoint {
  double q = 0.0;
  double p = 0.0;
  double value = 0.0;
};

/// Smallest Wigner value on [-extent, extent]^2: a coarse grid scan
/// followed by successive zoomed scans around the current best point.
PhaseSpacePoint wigner_minimum(const DensityMatrix& rho, double extent = 3.0);

/// W(0, 0) from the displaced-parity identity, (1/pi) sum_n (-1)^n rho_nn.
double wigner_at_origin(const DensityMatrix& rho);

/// Harmonic-oscillator eigenfunctions psi_0..psi_{count-1} at x (same
/// convention as `wigner`), by the normalized upward recurrence.
std::vector<double> hermite_functions(double x, int count);

/// Probability density of the rotated quadrature x_theta = q cos(theta) +
/// p sin(theta) at value x.
double quadrature_pdf(const DensityMatrix& rho, double theta, double x);

PhotonStatistics photon_statistics(const DensityMatrix& rho);

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.  Inputs are
/// zero-padded to a common dimension.
double state_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

/// Hermitian part, eigenvalues clipped at zero, trace renormalized to one.
/// `clipped_weight` (if given) receives the total negative eigenvalue mass
/// removed.
DensityMatrix project_to_physical(const ComplexMatrix& rho, double* clipped_weight = nullptr);

}  // namespace photonparity
