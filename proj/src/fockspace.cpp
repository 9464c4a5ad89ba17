#include "photonparity/fockspace.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

#include "photonparity/errors.h"

namespace photonparity {

namespace {

// sqrt(C(n, k)) for 0 <= k <= n < size.
class SqrtBinomialTable {
 public:
  explicit SqrtBinomialTable(int size) : size_(size), values_(static_cast<std::size_t>(size) * size, 0.0) {
    std::vector<double> row(size, 0.0), prev(size, 0.0);
    for (int n = 0; n < size; ++n) {
      row.assign(size, 0.0);
      row[0] = 1.0;
      for (int k = 1; k <= n; ++k) row[k] = prev[k - 1] + (k < n ? prev[k] : 0.0);
      for (int k = 0; k <= n; ++k) values_[static_cast<std::size_t>(n) * size + k] = std::sqrt(row[k]);
      prev = row;
    }
  }
  double operator()(int n, int k) const { return values_[static_cast<std::size_t>(n) * size_ + k]; }

 private:
  int size_;
  std::vector<double> values_;
};

void require_square(const ComplexMatrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw InvalidDimension("density matrix must be square with dimension >= 1");
  }
}

}  // namespace

FockVector::FockVector(ComplexVector amplitudes) : amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() < 1) throw InvalidDimension("Fock vector needs dimension >= 1");
}

DensityMatrix::DensityMatrix(ComplexMatrix elements) : elements_(std::move(elements)) {
  require_square(elements_);
}

DensityMatrix DensityMatrix::from_pure(const FockVector& psi) {
  return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
}

DensityMatrix DensityMatrix::diagonal(std::span<const double> populations) {
  if (populations.empty()) throw InvalidDimension("empty population vector");
  const auto n = static_cast<Eigen::Index>(populations.size());
  ComplexMatrix m = ComplexMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = populations[static_cast<std::size_t>(i)];
  return DensityMatrix(std::move(m));
}

DensityMatrix DensityMatrix::fock(int n, int dim) { return from_pure(fock_state(n, dim)); }

double DensityMatrix::population(int n) const {
  if (n < 0 || n >= dim()) return 0.0;
  return elements_(n, n).real();
}

std::vector<double> DensityMatrix::populations() const {
  std::vector<double> p(static_cast<std::size_t>(dim()));
  for (int n = 0; n < dim(); ++n) p[static_cast<std::size_t>(n)] = elements_(n, n).real();
  return p;
}

DensityMatrix DensityMatrix::normalized() const {
  const double tr = trace();
  if (!(tr > 0.0)) throw DomainError("cannot normalize an operator with nonpositive trace");
  return DensityMatrix(elements_ / tr);
}

DensityMatrix DensityMatrix::resized(int dim) const {
  if (dim < 1) throw InvalidDimension("dimension must be >= 1");
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  const int keep = std::min(dim, this->dim());
  m.topLeftCorner(keep, keep) = elements_.topLeftCorner(keep, keep);
  return DensityMatrix(std::move(m));
}

InvariantReport DensityMatrix::check() const {
  InvariantReport r;
  r.hermiticity_error = (elements_ - elements_.adjoint()).cwiseAbs().maxCoeff();
  r.trace_error = std::abs(elements_.trace() - Complex(1.0, 0.0));
  const ComplexMatrix h = 0.5 * (elements_ + elements_.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  return r;
}

FockVector coherent_state(Complex alpha, int dim) {
  if (dim < 2) throw InvalidDimension("coherent_state: dim must be >= 2");
  const double mean = std::norm(alpha);
  if (mean > dim / 4.0) {
    std::clog << "warning: coherent_state |alpha|^2=" << mean << " exceeds dim/4 for dim=" << dim
              << "; truncation error may be significant\n";
  }
  ComplexVector c(dim);
  c(0) = std::exp(-mean / 2.0);
  for (int n = 1; n < dim; ++n) c(n) = c(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return FockVector(std::move(c));
}

FockVector fock_state(int n, int dim) {
  if (dim < 1 || n < 0 || n >= dim) throw InvalidDimension("fock_state: need 0 <= n < dim");
  ComplexVector c = ComplexVector::Zero(dim);
  c(n) = 1.0;
  return FockVector(std::move(c));
}

DensityMatrix thermal_state(double mean_photon_number, int dim) {
  if (mean_photon_number < 0.0) throw DomainError("thermal_state: negative mean");
  if (dim < 1) throw InvalidDimension("thermal_state: dim must be >= 1");
  const double q = mean_photon_number / (1.0 + mean_photon_number);
  std::vector<double> p(static_cast<std::size_t>(dim));
  double w = 1.0 / (1.0 + mean_photon_number);
  for (auto& v : p) {
    v = w;
    w *= q;
  }
  return DensityMatrix::diagonal(p);
}

ComplexMatrix apply_loss(const ComplexMatrix& rho, double transmission) {
  require_square(rho);
  if (!(transmission >= 0.0)) throw DomainError("apply_loss: transmission must be >= 0");
  const int dim = static_cast<int>(rho.rows());
  const SqrtBinomialTable binom(dim);
  const double loss = 1.0 - transmission;
  std::vector<double> sqrt_t(static_cast<std::size_t>(dim));
  for (int m = 0; m < dim; ++m) sqrt_t[static_cast<std::size_t>(m)] = std::pow(transmission, 0.5 * m);
  std::vector<double> loss_pow(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k) loss_pow[static_cast<std::size_t>(k)] = std::pow(loss, k);

  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  for (int m = 0; m < dim; ++m) {
    for (int n = 0; n < dim; ++n) {
      Complex acc = 0.0;
      for (int k = 0; m + k < dim && n + k < dim; ++k) {
        acc += binom(m + k, k) * binom(n + k, k) * loss_pow[static_cast<std::size_t>(k)] * rho(m + k, n + k);
      }
      out(m, n) = acc * sqrt_t[static_cast<std::size_t>(m)] * sqrt_t[static_cast<std::size_t>(n)];
    }
  }
  return out;
}

ComplexMatrix apply_loss_adjoint(const ComplexMatrix& op, double transmission) {
  require_square(op);
  if (transmission < 0.0 || transmission > 1.0) throw DomainError("apply_loss_adjoint: T outside [0, 1]");
  const int dim = static_cast<int>(op.rows());
  const SqrtBinomialTable binom(dim);
  const double loss = 1.0 - transmission;
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      Complex acc = 0.0;
      for (int k = 0; k <= std::min(i, j); ++k) {
        acc += binom(i, k) * binom(j, k) * std::pow(transmission, 0.5 * (i + j) - k) * std::pow(loss, k) *
               op(i - k, j - k);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

DensityMatrix pure_loss_channel(const DensityMatrix& rho, double transmission) {
  if (!(transmission >= 0.0 && transmission <= 1.0)) {
    throw DomainError("pure_loss_channel: transmission must lie in [0, 1]");
  }
  if (transmission == 1.0) return rho;
  return DensityMatrix(apply_loss(rho.matrix(), transmission));
}

double wigner(const DensityMatrix& rho, double q, double p) {
  const int dim = rho.dim();
  const Complex alpha(q / std::numbers::sqrt2, p / std::numbers::sqrt2);
  const double x = 4.0 * std::norm(alpha);
  const Complex two_alpha_conj = 2.0 * std::conj(alpha);
  const auto& r = rho.matrix();

  // Generalized Laguerre L_n^{(k)}(x) by upward recurrence in n for each order k.
  std::vector<double> lag(static_cast<std::size_t>(dim));
  Complex total = 0.0;
  for (int k = 0; k < dim; ++k) {
    const int nmax = dim - k;  // n + k < dim
    lag[0] = 1.0;
    if (nmax > 1) lag[1] = 1.0 + k - x;
    for (int j = 1; j + 1 < nmax; ++j) {
      lag[static_cast<std::size_t>(j + 1)] =
          ((2.0 * j + 1.0 + k - x) * lag[static_cast<std::size_t>(j)] - (j + k) * lag[static_cast<std::size_t>(j - 1)]) /
          (j + 1.0);
    }
    for (int n = 0; n < nmax; ++n) {
      const int m = n + k;
      // (-1)^n sqrt(n!/m!) (2 conj(alpha))^k
      Complex pref = (n % 2 == 0) ? 1.0 : -1.0;
      for (int j = n + 1; j <= m; ++j) pref *= two_alpha_conj / std::sqrt(static_cast<double>(j));
      const Complex w_mn = pref * lag[static_cast<std::size_t>(n)];
      if (k == 0) {
        total += r(n, n) * w_mn;
      } else {
        total += r(m, n) * w_mn + r(n, m) * std::conj(w_mn);
      }
    }
  }
  return std::exp(-0.5 * x) * total.real() / std::numbers::pi;
}

PhaseSpacePoint wigner_minimum(const DensityMatrix& rho, double extent) {
  if (!(extent > 0.0)) throw DomainError("wigner_minimum: extent must be positive");
  constexpr int kSteps = 60;
  PhaseSpacePoint best{0.0, 0.0, wigner(rho, 0.0, 0.0)};
  double cq = 0.0, cp = 0.0, half = extent;
  for (int round = 0; round < 8; ++round) {
    const double step = 2.0 * half / kSteps;
    for (int i = 0; i <= kSteps; ++i) {
      for (int j = 0; j <= kSteps; ++j) {
        const double q = cq - half + i * step, p = cp - half + j * step;
        const double w = wigner(rho, q, p);
        if (w < best.value) best = {q, p, w};
      }
    }
    cq = best.q;
    cp = best.p;
    half = 2.0 * step;
  }
  return best;
}

double wigner_at_origin(const DensityMatrix& rho) {
  double s = 0.0;
  for (int n = 0; n < rho.dim(); ++n) s += (n % 2 == 0 ? 1.0 : -1.0) * rho(n, n).real();
  return s / std::numbers::pi;
}

std::vector<double> hermite_functions(double x, int count) {
  std::vector<double> psi(static_cast<std::size_t>(std::max(count, 0)), 0.0);
  if (count <= 0) return psi;
  // Carry the Gaussian envelope as a separate log factor and rescale the
  // running values so neither underflow nor overflow occurs for large |x|.
  double log_scale = -0.5 * x * x - 0.25 * std::log(std::numbers::pi);
  std::vector<double> raw(psi.size());
  std::vector<double> shift(psi.size(), 0.0);
  double prev = 0.0, cur = 1.0;
  raw[0] = cur;
  for (int n = 1; n < count; ++n) {
    double next = std::sqrt(2.0 / n) * x * cur - std::sqrt((n - 1.0) / n) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > 1e150) {
      prev *= 1e-150;
      cur *= 1e-150;
      log_scale += 150.0 * std::log(10.0);
    }
    raw[static_cast<std::size_t>(n)] = cur;
    shift[static_cast<std::size_t>(n)] = log_scale;
  }
  shift[0] = -0.5 * x * x - 0.25 * std::log(std::numbers::pi);
  for (std::size_t n = 0; n < psi.size(); ++n) psi[n] = raw[n] * std::exp(shift[n]);
  return psi;
}

double quadrature_pdf(const DensityMatrix& rho, double theta, double x) {
  const int dim = rho.dim();
  const auto psi = hermite_functions(x, dim);
  ComplexVector w(dim);
  for (int m = 0; m < dim; ++m) w(m) = std::polar(psi[static_cast<std::size_t>(m)], theta * m);
  const Complex v = w.adjoint() * rho.matrix() * w;
  return v.real();
}

PhotonStatistics photon_statistics(const DensityMatrix& rho) {
  PhotonStatistics s;
  s.probabilities = rho.populations();
  double factorial_moment = 0.0;
  for (std::size_t n = 0; n < s.probabilities.size(); ++n) {
    const double pn = s.probabilities[n];
    s.mean += static_cast<double>(n) * pn;
    factorial_moment += static_cast<double>(n) * (static_cast<double>(n) - 1.0) * pn;
  }
  if (s.mean > 1e-300) s.g2_zero = factorial_moment / (s.mean * s.mean);
  return s;
}

namespace {

ComplexMatrix psd_sqrt(const ComplexMatrix& h) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (h + h.adjoint()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

double state_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  const int dim = std::max(rho.dim(), sigma.dim());
  const ComplexMatrix a = rho.resized(dim).matrix();
  const ComplexMatrix b = sigma.resized(dim).matrix();
  const ComplexMatrix s = psd_sqrt(a);
  const ComplexMatrix m = s * b * s;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  const double root_sum = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return root_sum * root_sum;
}

DensityMatrix project_to_physical(const ComplexMatrix& rho, double* clipped_weight) {
  require_square(rho);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (rho + rho.adjoint()));
  Eigen::VectorXd ev = es.eigenvalues();
  double clipped = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0) {
      clipped -= ev(i);
      ev(i) = 0.0;
    }
  }
  const double total = ev.sum();
  if (!(total > 0.0)) throw DomainError("project_to_physical: no positive spectral weight");
  ev /= total;
  if (clipped_weight != nullptr) *clipped_weight = clipped;
  return DensityMatrix(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint());
}

}  // namespace photonparity
