#include "photonparity/cavity.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "photonparity/errors.h"

namespace photonparity {

namespace {

constexpr double kSpeedOfLight = 299792458.0;  // m/s

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string("cavity rate ") + name + " must be >= 0");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

CavityParams::CavityParams(double g, double kappa_r, double kappa_t, double kappa_m, double gamma, double delta_a,
                           double delta_c)
    : g_(g),
      kappa_(kappa_r + kappa_t + kappa_m),
      kappa_r_(kappa_r),
      kappa_t_(kappa_t),
      kappa_m_(kappa_m),
      gamma_(gamma),
      delta_a_(delta_a),
      delta_c_(delta_c) {
  require_nonnegative(g, "g");
  require_nonnegative(kappa_r, "kappa_r");
  require_nonnegative(kappa_t, "kappa_t");
  require_nonnegative(kappa_m, "kappa_m");
  require_nonnegative(gamma, "gamma");
  if (!std::isfinite(delta_a) || !std::isfinite(delta_c)) throw DomainError("detunings must be finite");
}

CavityParams CavityParams::with_total_kappa(double g, double kappa, double kappa_r, double kappa_t, double kappa_m,
                                            double gamma, double delta_a, double delta_c) {
  CavityParams p(g, kappa_r, kappa_t, kappa_m, gamma, delta_a, delta_c);
  if (std::abs(p.kappa() - kappa) > 1e-9) {
    throw DomainError("kappa must equal kappa_r + kappa_t + kappa_m");
  }
  return p;
}

CavityParams CavityParams::with_detunings(double delta_a, double delta_c) const {
  return CavityParams(g_, kappa_r_, kappa_t_, kappa_m_, gamma_, delta_a, delta_c);
}

CavityParams CavityParams::with_coupling(double g) const {
  return CavityParams(g, kappa_r_, kappa_t_, kappa_m_, gamma_, delta_a_, delta_c_);
}

BranchAmplitudes branch_amplitudes(const CavityParams& p, bool coupled, std::complex<double> alpha) {
  using C = std::complex<double>;
  const double n_atoms = coupled ? 1.0 : 0.0;
  const C cav(p.kappa(), p.delta_c());   // i*Delta_c + kappa
  const C atom(p.gamma(), p.delta_a());  // i*Delta_a + gamma
  const C coupling = n_atoms * p.g() * p.g();
  const C den = coupling + cav * atom;
  if (std::abs(den) == 0.0) throw DomainError("branch_amplitudes: singular cavity response");

  BranchAmplitudes b;
  b.r = (coupling + (cav - 2.0 * p.kappa_r()) * atom) / den * alpha;
  b.t = 2.0 * std::sqrt(p.kappa_r() * p.kappa_t()) * atom / den * alpha;
  b.m = 2.0 * std::sqrt(p.kappa_r() * p.kappa_m()) * atom / den * alpha;
  b.a = 2.0 * std::sqrt(p.kappa_r() * p.gamma()) * std::sqrt(n_atoms) * p.g() / den * alpha;
  return b;
}

double cooperativity(const CavityParams& p) {
  if (!(p.kappa() > 0.0) || !(p.gamma() > 0.0)) throw DomainError("cooperativity needs kappa > 0 and gamma > 0");
  return p.g() * p.g() / (2.0 * p.kappa() * p.gamma());
}

double xi(const CavityParams& p) {
  if (!(p.kappa() > 0.0) || !(p.gamma() > 0.0)) throw DomainError("xi needs kappa > 0 and gamma > 0");
  const double g2 = p.g() * p.g();
  return p.kappa_r() / p.kappa() * g2 / (g2 + p.kappa() * p.gamma());
}

double xi_via_cooperativity(const CavityParams& p) {
  const double c = cooperativity(p);
  return p.kappa_r() / p.kappa() * 2.0 * c / (2.0 * c + 1.0);
}

double f1_max(const CavityParams& p) { return xi(p); }

CavityParams fiber_params(double length_m, double parasitic_loss_per_mirror_ppm, double outcoupler_transmission_ppm,
                          double g, double gamma) {
  if (!(length_m > 0.0)) throw DomainError("fiber_params: length must be positive");
  if (!(parasitic_loss_per_mirror_ppm >= 0.0) || !(outcoupler_transmission_ppm >= 0.0)) {
    throw DomainError("fiber_params: losses must be nonnegative");
  }
  // Angular decay rate c*l/(4L) converted to units of 2*pi*MHz.
  const auto rate = [&](double fraction) {
    return kSpeedOfLight * fraction / (4.0 * length_m) / (2.0 * std::numbers::pi * 1e6);
  };
  const double kappa_r = rate(outcoupler_transmission_ppm * 1e-6);
  const double kappa_m = rate(2.0 * parasitic_loss_per_mirror_ppm * 1e-6);
  return CavityParams(g, kappa_r, 0.0, kappa_m, gamma);
}

CavityParams reference_cavity() { return CavityParams(7.8, 2.3, 0.2, 0.0, 3.0); }

CavityParams fiber_cavity() { return fiber_params(39e-6, 13.5, 1300.0, 240.0, 3.0); }

KeyValueMap parse_key_value(std::istream& in) {
  KeyValueMap values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string text = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty key");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + ": '" + text + "' is not a number");
    }
    if (used != text.size()) throw ParseError("line " + std::to_string(lineno) + ": trailing characters");
    if (!values.emplace(key, v).second) throw ParseError("line " + std::to_string(lineno) + ": duplicate key " + key);
  }
  return values;
}

KeyValueMap read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  return parse_key_value(in);
}

CavityParams cavity_params_from_map(const KeyValueMap& values) {
  const auto get = [&](const char* key) {
    const auto it = values.find(key);
    if (it == values.end()) throw ParseError(std::string("config is missing key '") + key + "'");
    return it->second;
  };
  const auto get_or = [&](const char* key, double fallback) {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  };
  const double g = get("g");
  const double kappa_r = get("kappa_r");
  const double kappa_t = get("kappa_t");
  const double kappa_m = get("kappa_m");
  const double gamma = get("gamma");
  const double delta_a = get_or("delta_a", 0.0);
  const double delta_c = get_or("delta_c", 0.0);
  if (values.count("kappa") != 0) {
    return CavityParams::with_total_kappa(g, get("kappa"), kappa_r, kappa_t, kappa_m, gamma, delta_a, delta_c);
  }
  return CavityParams(g, kappa_r, kappa_t, kappa_m, gamma, delta_a, delta_c);
}

void write_cavity_params(std::ostream& out, const CavityParams& p) {
  const auto old = out.precision(17);
  out << "g = " << p.g() << "\n"
      << "kappa = " << p.kappa() << "\n"
      << "kappa_r = " << p.kappa_r() << "\n"
      << "kappa_t = " << p.kappa_t() << "\n"
      << "kappa_m = " << p.kappa_m() << "\n"
      << "gamma = " << p.gamma() << "\n"
      << "delta_a = " << p.delta_a() << "\n"
      << "delta_c = " << p.delta_c() << "\n";
  out.precision(old);
}

}  // namespace photonparity
