#pragma once

#include <complex>
#include <iosfwd>
#include <map>
#include <string>

namespace photonparity {

/// Cavity-QED rate set.  Every rate and detuning is in units of 2*pi*MHz.
///
/// The total field decay kappa is derived from its three channels
/// (reflection/in-coupling kappa_r, transmission kappa_t, mirror scattering
/// kappa_m); only the sum kappa_t + kappa_m affects any reflected-light
/// quantity.
class CavityParams {
 public:
  CavityParams(double g, double kappa_r, double kappa_t, double kappa_m, double gamma, double delta_a = 0.0,
               double delta_c = 0.0);

  /// As above, but cross-checks a separately quoted total kappa against the
  /// channel sum (tolerance 1e-9).
  static CavityParams with_total_kappa(double g, double kappa, double kappa_r, double kappa_t, double kappa_m,
                                       double gamma, double delta_a = 0.0, double delta_c = 0.0);

  double g() const { return g_; }
  double kappa() const { return kappa_; }
  double kappa_r() const { return kappa_r_; }
  double kappa_t() const { return kappa_t_; }
  double kappa_m() const { return kappa_m_; }
  double gamma() const { return gamma_; }
  double delta_a() const { return delta_a_; }
  double delta_c() const { return delta_c_; }

  CavityParams with_detunings(double delta_a, double delta_c) const;
  CavityParams with_coupling(double g) const;

 private:
  double g_, kappa_, kappa_r_, kappa_t_, kappa_m_, gamma_, delta_a_, delta_c_;
};

/// Coherent amplitudes of the reflected, transmitted, mirror-scattered and
/// atom-scattered output modes for one atomic state.
struct BranchAmplitudes {
  std::complex<double> r, t, m, a;

  double total_intensity() const { return std::norm(r) + std::norm(t) + std::norm(m) + std::norm(a); }
};

/// Steady-state input-output response to a coherent input of amplitude
/// alpha.  `coupled` selects the atomic state that couples to the cavity.
BranchAmplitudes branch_amplitudes(const CavityParams& params, bool coupled, std::complex<double> alpha);

double cooperativity(const CavityParams& params);

/// Coherence retention factor (kappa_r/kappa) g^2/(g^2 + kappa gamma).
double xi(const CavityParams& params);
/// The same quantity through the cooperativity, (kappa_r/kappa) 2C/(2C+1).
double xi_via_cooperativity(const CavityParams& params);

/// Upper bound on the single-photon fidelity of the reflected, heralded light.
double f1_max(const CavityParams& params);

/// Builds rates for a short Fabry-Perot (fiber) resonator.  Each fractional
/// round-trip loss l_i contributes kappa_i = c l_i / (4 L); the out-coupler
/// transmission sets kappa_r and the parasitic loss counts once per mirror
/// (two mirrors) into kappa_m.  kappa_t is zero.
///
/// `length_m` in meters, losses in ppm, g and gamma in 2*pi*MHz.
CavityParams fiber_params(double length_m, double parasitic_loss_per_mirror_ppm, double outcoupler_transmission_ppm,
                          double g, double gamma);

/// 2*pi*(7.8, 2.5, 2.3, 3) MHz with kappa split as kappa_t = 0.2, kappa_m = 0.
CavityParams reference_cavity();
/// 240 MHz coupling, 39 um length, 13.5 ppm parasitic, 1300 ppm out-coupler.
CavityParams fiber_cavity();

// Flat key-value configuration (`key = value`, `#` comments).
using KeyValueMap = std::map<std::string, double>;

KeyValueMap parse_key_value(std::istream& in);
KeyValueMap read_key_value_file(const std::string& path);
/// Reads g, kappa_r, kappa_t, kappa_m, gamma and optional delta_a, delta_c,
/// kappa.  Missing required keys raise ParseError.
CavityParams cavity_params_from_map(const KeyValueMap& values);
void write_cavity_params(std::ostream& out, const CavityParams& params);

}  // namespace photonparity
