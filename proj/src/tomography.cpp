#include "photonparity/tomography.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "photonparity/errors.h"
#include "photonparity/parallel.h"

namespace photonparity {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_phase(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  if (t >= kTwoPi) t = 0.0;
  return t;
}

// All samples of one local-oscillator phase, histogrammed.
struct PhaseData {
  double theta = 0.0;
  std::vector<int> bins;            // occupied bin indices
  std::vector<double> counts;       // counts per occupied bin
  std::vector<Eigen::MatrixXd> povm;  // efficiency-adjusted bin projector (unrotated)
};

// Rotation into the frame of phase theta: (D^dagger rho D)_mn = e^{-i theta (m - n)} rho_mn.
ComplexMatrix rotate_to_phase(const ComplexMatrix& rho, double theta) {
  const auto dim = rho.rows();
  ComplexMatrix out(dim, dim);
  for (Eigen::Index m = 0; m < dim; ++m) {
    for (Eigen::Index n = 0; n < dim; ++n) out(m, n) = rho(m, n) * std::polar(1.0, -theta * static_cast<double>(m - n));
  }
  return out;
}

ComplexMatrix rotate_from_phase(const Eigen::MatrixXd& s, double theta) {
  const auto dim = s.rows();
  ComplexMatrix out(dim, dim);
  for (Eigen::Index m = 0; m < dim; ++m) {
    for (Eigen::Index n = 0; n < dim; ++n) out(m, n) = s(m, n) * std::polar(1.0, theta * static_cast<double>(m - n));
  }
  return out;
}

// Integral of psi_m psi_n over [lo, hi] by 4-point Gauss-Legendre.
Eigen::MatrixXd bin_projector(double lo, double hi, int dim) {
  static constexpr double nodes[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                      0.8611363115940526};
  static constexpr double weights[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                        0.3478548451374538};
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, dim);
  for (int q = 0; q < 4; ++q) {
    const auto psi = hermite_functions(mid + half * nodes[q], dim);
    const Eigen::Map<const Eigen::VectorXd> v(psi.data(), dim);
    out.noalias() += (weights[q] * half) * v * v.transpose();
  }
  return out;
}

}  // namespace

std::vector<double> equally_spaced_phases(int count) {
  if (count < 1) throw DomainError("need at least one phase");
  std::vector<double> phases(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) phases[static_cast<std::size_t>(i)] = std::numbers::pi * i / count;
  return phases;
}

std::vector<QuadratureSample> sample_homodyne(const DensityMatrix& rho, std::span<const double> phases,
                                              int samples_per_phase, double efficiency, std::uint64_t seed) {
  if (phases.empty()) throw DomainError("sample_homodyne: empty phase list");
  if (samples_per_phase < 0) throw DomainError("sample_homodyne: negative sample count");
  if (!(efficiency > 0.0 && efficiency <= 1.0)) throw DomainError("sample_homodyne: efficiency must be in (0, 1]");

  const DensityMatrix detected = pure_loss_channel(rho, efficiency);
  const double extent = 4.0 + std::sqrt(2.0 * detected.dim() + 1.0);
  constexpr int kGrid = 8001;
  const double step = 2.0 * extent / (kGrid - 1);

  std::vector<QuadratureSample> samples(phases.size() * static_cast<std::size_t>(samples_per_phase));
  parallel_for(phases.size(), [&](std::size_t ip) {
    const double theta = wrap_phase(phases[ip]);
    std::vector<double> xs(kGrid), cdf(kGrid, 0.0);
    double prev_pdf = 0.0;
    for (int i = 0; i < kGrid; ++i) {
      xs[static_cast<std::size_t>(i)] = -extent + step * i;
      const double pdf = std::max(0.0, quadrature_pdf(detected, theta, xs[static_cast<std::size_t>(i)]));
      if (i > 0) cdf[static_cast<std::size_t>(i)] = cdf[static_cast<std::size_t>(i - 1)] + 0.5 * step * (pdf + prev_pdf);
      prev_pdf = pdf;
    }
    const double total = cdf.back();
    if (!(total > 0.0)) throw DomainError("sample_homodyne: quadrature distribution has no weight");

    std::mt19937_64 rng(derive_seed(seed, ip));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int s = 0; s < samples_per_phase; ++s) {
      const double u = uniform(rng) * total;
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), kGrid - 1);
      const std::size_t lo = hi == 0 ? 0 : hi - 1;
      const double span = cdf[hi] - cdf[lo];
      const double frac = span > 0.0 ? (u - cdf[lo]) / span : 0.5;
      samples[ip * static_cast<std::size_t>(samples_per_phase) + static_cast<std::size_t>(s)] = {
          theta, xs[lo] + frac * (xs[hi] - xs[lo])};
    }
  });
  return samples;
}

ReconstructionResult mle_reconstruct(std::span<const QuadratureSample> samples, int dim, const MleOptions& opt) {
  if (dim < 1) throw InvalidDimension("mle_reconstruct: dim must be >= 1");
  if (!(opt.efficiency > 0.0 && opt.efficiency <= 1.0)) throw DomainError("mle_reconstruct: efficiency in (0, 1]");
  if (opt.grid_points < 2 || !(opt.x_max > opt.x_min)) throw DomainError("mle_reconstruct: bad binning grid");
  if (samples.empty()) throw DomainError("mle_reconstruct: no samples");
  if (samples.size() < static_cast<std::size_t>(10 * dim * dim)) {
    std::clog << "warning: " << samples.size() << " samples for dim " << dim << " (recommended >= " << 10 * dim * dim
              << ")\n";
  }

  const int nbins = opt.grid_points - 1;
  const double width = (opt.x_max - opt.x_min) / nbins;

  // Histogram per distinct phase.
  std::map<double, std::map<int, double>> histogram;
  std::size_t dropped = 0;
  bool degenerate = true;
  for (const auto& s : samples) {
    if (s.x != samples.front().x) degenerate = false;
    const int b = static_cast<int>(std::floor((s.x - opt.x_min) / width));
    if (b < 0 || b >= nbins) {
      ++dropped;
      continue;
    }
    histogram[wrap_phase(s.theta)][b] += 1.0;
  }
  if (histogram.empty()) throw DomainError("mle_reconstruct: every sample lies outside the binning window");

  // Projector per occupied bin, shared across phases and efficiency-adjusted.
  std::map<int, Eigen::MatrixXd> projector_cache;
  for (const auto& [theta, bins] : histogram) {
    for (const auto& [b, count] : bins) projector_cache.try_emplace(b);
  }
  {
    std::vector<int> keys;
    for (const auto& kv : projector_cache) keys.push_back(kv.first);
    std::vector<Eigen::MatrixXd> values(keys.size());
    parallel_for(keys.size(), [&](std::size_t i) {
      const double lo = opt.x_min + keys[i] * width;
      Eigen::MatrixXd p = bin_projector(lo, lo + width, dim);
      if (opt.efficiency < 1.0) p = apply_loss_adjoint(p.cast<Complex>(), opt.efficiency).real();
      values[i] = std::move(p);
    });
    for (std::size_t i = 0; i < keys.size(); ++i) projector_cache[keys[i]] = std::move(values[i]);
  }

  std::vector<PhaseData> data;
  double total_counts = 0.0;
  for (const auto& [theta, bins] : histogram) {
    PhaseData pd;
    pd.theta = theta;
    for (const auto& [b, count] : bins) {
      pd.bins.push_back(b);
      pd.counts.push_back(count);
      pd.povm.push_back(projector_cache[b]);
      total_counts += count;
    }
    data.push_back(std::move(pd));
  }

  // Log-likelihood and (optionally) the R operator, normalized so R = 1 at a fixed point.
  const auto evaluate = [&](const ComplexMatrix& rho, ComplexMatrix* r_op) {
    double ll = 0.0;
    if (r_op != nullptr) *r_op = ComplexMatrix::Zero(dim, dim);
    for (const auto& pd : data) {
      const Eigen::MatrixXd rot = rotate_to_phase(rho, pd.theta).real();
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
      for (std::size_t j = 0; j < pd.bins.size(); ++j) {
        const double pr = std::max((rot.array() * pd.povm[j].array()).sum(), 1e-300);
        ll += pd.counts[j] * std::log(pr);
        if (r_op != nullptr) s.noalias() += (pd.counts[j] / pr) * pd.povm[j];
      }
      if (r_op != nullptr) *r_op += rotate_from_phase(s, pd.theta);
    }
    if (r_op != nullptr) *r_op /= total_counts;
    return ll;
  };

  const auto sandwich = [](const ComplexMatrix& a, const ComplexMatrix& rho) {
    ComplexMatrix next = a * rho * a.adjoint();
    next = 0.5 * (next + next.adjoint());
    return ComplexMatrix(next / next.trace().real());
  };

  ComplexMatrix rho = ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim);
  ReconstructionResult result{DensityMatrix(rho), {}, 0, false, dropped};
  ComplexMatrix r_op;
  double ll = evaluate(rho, &r_op);
  result.log_likelihood_trace.push_back(ll);
  const double slack = 1e-12 * std::max(1.0, std::abs(ll));

  bool converged = false;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    ComplexMatrix candidate = sandwich(r_op, rho);
    double ll_new = evaluate(candidate, nullptr);
    if (ll_new < ll - slack) {
      // Diluted update (1 + s R) rho (1 + s R) with shrinking s.
      const ComplexMatrix id = ComplexMatrix::Identity(dim, dim);
      bool accepted = false;
      for (double step = 1.0; step > 1e-8; step *= 0.5) {
        candidate = sandwich(id + step * r_op, rho);
        ll_new = evaluate(candidate, nullptr);
        if (ll_new >= ll - slack) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        converged = true;  // no ascent direction left at working precision
        break;
      }
    }
    const double gain = ll_new - ll;
    rho = std::move(candidate);
    ll = evaluate(rho, &r_op);
    result.log_likelihood_trace.push_back(ll);
    if (gain / total_counts < opt.tol) {
      converged = true;
      ++it;
      break;
    }
  }
  result.iterations = it;
  result.converged = converged && !degenerate;
  result.rho = DensityMatrix(rho);
  return result;
}

ReconstructionResult mle_reconstruct(std::span<const QuadratureSample> samples, int dim, double efficiency,
                                     int max_iter, double tol) {
  MleOptions opt;
  opt.efficiency = efficiency;
  opt.max_iter = max_iter;
  opt.tol = tol;
  return mle_reconstruct(samples, dim, opt);
}

double loss_inversion_amplification(int dim, double loss) {
  const double t = 1.0 - loss;
  double worst = 0.0;
  for (int m = 0; m < dim; ++m) {
    double sum = 0.0;
    double binom = 1.0;  // C(m + k, k)
    for (int k = 0; m + k < dim; ++k) {
      if (k > 0) binom *= static_cast<double>(m + k) / k;
      sum += binom * std::pow(loss / t, k);
    }
    worst = std::max(worst, sum * std::pow(t, -m));
  }
  return worst;
}

DensityMatrix loss_correct(const DensityMatrix& rho, double loss) {
  if (!(loss >= 0.0 && loss < 1.0)) throw DomainError("loss_correct: loss must lie in [0, 1)");
  if (loss == 0.0) return rho;
  constexpr double kMaxAmplification = 1e8;
  const double amplification = loss_inversion_amplification(rho.dim(), loss);
  if (amplification > kMaxAmplification) {
    std::ostringstream msg;
    msg << "loss_correct: inversion amplifies errors by " << amplification << " (dim " << rho.dim() << ", loss "
        << loss << ")";
    throw IllConditionedError(msg.str());
  }
  const DensityMatrix raw(apply_loss(rho.matrix(), 1.0 / (1.0 - loss)));
  const InvariantReport report = raw.check();
  if (report.min_eigenvalue >= -1e-12) return raw;
  double clipped = 0.0;
  DensityMatrix repaired = project_to_physical(raw.matrix(), &clipped);
  std::clog << "loss_correct: clipped negative eigenvalue weight " << clipped << "\n";
  return repaired;
}

void write_samples_csv(std::ostream& out, std::span<const QuadratureSample> samples) {
  const auto old = out.precision(17);
  out << "theta,x\n";
  for (const auto& s : samples) out << s.theta << ',' << s.x << '\n';
  out.precision(old);
}

std::vector<QuadratureSample> read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("samples CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "theta,x") throw ParseError("samples CSV must start with header 'theta,x'");
  std::vector<QuadratureSample> samples;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("samples CSV line " + std::to_string(lineno) + ": missing comma");
    try {
      samples.push_back({wrap_phase(std::stod(line.substr(0, comma))), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw ParseError("samples CSV line " + std::to_string(lineno) + ": not numeric");
    }
  }
  return samples;
}

std::string reconstruction_json(const ReconstructionResult& result) {
  nlohmann::json j;
  j["dim"] = result.rho.dim();
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["final_log_likelihood"] = result.log_likelihood_trace.empty() ? 0.0 : result.log_likelihood_trace.back();
  nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
  for (int m = 0; m < result.rho.dim(); ++m) {
    nlohmann::json row_re = nlohmann::json::array(), row_im = nlohmann::json::array();
    for (int n = 0; n < result.rho.dim(); ++n) {
      row_re.push_back(result.rho(m, n).real());
      row_im.push_back(result.rho(m, n).imag());
    }
    re.push_back(std::move(row_re));
    im.push_back(std::move(row_im));
  }
  j["rho"] = {{"real", re}, {"imag", im}};
  return j.dump(2);
}

}  // namespace photonparity
