#include "photonparity/calibration.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "photonparity/distillation.h"
#include "photonparity/errors.h"
#include "photonparity/parallel.h"

namespace photonparity {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, int lineno, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (trim(field.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(std::string(what) + " line " + std::to_string(lineno) + ": '" + field + "' is not a number");
}

double radical_inverse(unsigned index, unsigned base) {
  double result = 0.0, f = 1.0 / base;
  while (index > 0) {
    result += f * (index % base);
    index /= base;
    f /= base;
  }
  return result;
}

using Point = std::array<double, 3>;

struct SimplexOutcome {
  Point best;
  double value;
  bool converged;
};

// Nelder-Mead on the unit cube; trial points are clamped into the cube.
template <typename F>
SimplexOutcome nelder_mead(F&& f, Point start, int max_evaluations) {
  constexpr int kDim = 3;
  const auto clamp = [](Point p) {
    for (double& v : p) v = std::clamp(v, 0.0, 1.0);
    return p;
  };
  std::array<Point, kDim + 1> simplex;
  std::array<double, kDim + 1> values;
  simplex[0] = clamp(start);
  for (int i = 0; i < kDim; ++i) {
    Point p = simplex[0];
    p[static_cast<std::size_t>(i)] += p[static_cast<std::size_t>(i)] < 0.5 ? 0.1 : -0.1;
    simplex[static_cast<std::size_t>(i + 1)] = p;
  }
  int evaluations = 0;
  const auto eval = [&](const Point& p) {
    ++evaluations;
    return f(p);
  };
  for (std::size_t i = 0; i <= kDim; ++i) values[i] = eval(simplex[i]);

  bool converged = false;
  while (evaluations < max_evaluations) {
    std::array<std::size_t, kDim + 1> order;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::array<Point, kDim + 1> s2;
    std::array<double, kDim + 1> v2;
    for (std::size_t i = 0; i <= kDim; ++i) {
      s2[i] = simplex[order[i]];
      v2[i] = values[order[i]];
    }
    simplex = s2;
    values = v2;

    double size = 0.0;
    for (std::size_t i = 1; i <= kDim; ++i) {
      for (std::size_t k = 0; k < kDim; ++k) size = std::max(size, std::abs(simplex[i][k] - simplex[0][k]));
    }
    if (size < 1e-9 && values[kDim] - values[0] <= 1e-15 * (1.0 + std::abs(values[0]))) {
      converged = true;
      break;
    }

    Point centroid{};
    for (std::size_t i = 0; i < kDim; ++i) {
      for (std::size_t k = 0; k < kDim; ++k) centroid[k] += simplex[i][k] / kDim;
    }
    const auto along = [&](double t) {
      Point p;
      for (std::size_t k = 0; k < kDim; ++k) p[k] = centroid[k] + t * (simplex[kDim][k] - centroid[k]);
      return clamp(p);
    };
    const Point reflected = along(-1.0);
    const double fr = eval(reflected);
    if (fr < values[0]) {
      const Point expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[kDim] = expanded;
        values[kDim] = fe;
      } else {
        simplex[kDim] = reflected;
        values[kDim] = fr;
      }
      continue;
    }
    if (fr < values[kDim - 1]) {
      simplex[kDim] = reflected;
      values[kDim] = fr;
      continue;
    }
    const bool outside = fr < values[kDim];
    const Point contracted = along(outside ? -0.5 : 0.5);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : values[kDim])) {
      simplex[kDim] = contracted;
      values[kDim] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= kDim; ++i) {
      for (std::size_t k = 0; k < kDim; ++k) simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
      values[i] = eval(simplex[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  return {simplex[best], values[best], converged};
}

}  // namespace

void LossBudget::validate() const {
  for (const auto& item : items) {
    if (!(item.loss >= 0.0 && item.loss < 1.0)) {
      throw DomainError("loss '" + item.label + "' must lie in [0, 1)");
    }
  }
}

double combine_losses(const LossBudget& budget) {
  budget.validate();
  double transmission = 1.0;
  for (const auto& item : budget.items) transmission *= 1.0 - item.loss;
  return 1.0 - transmission;
}

double residual_loss(double total_loss, double corrected_loss) {
  if (!(corrected_loss < 1.0)) throw DomainError("corrected loss must be < 1");
  if (!(total_loss <= 1.0) || !(corrected_loss >= 0.0)) throw DomainError("losses must lie in [0, 1]");
  const double residual = 1.0 - (1.0 - total_loss) / (1.0 - corrected_loss);
  if (residual < 0.0) {
    std::ostringstream msg;
    msg << "corrected loss " << corrected_loss << " exceeds total loss " << total_loss;
    throw InconsistentBudgetError(msg.str());
  }
  return residual;
}

LossBudget downstream_budget() {
  return {{
      {"Other optics: waveplates, mirrors and NPBS", 0.076},
      {"Mode matching with local oscillator (both paths)", 0.060},
      {"Limited isolator transmission", 0.030},
      {"Switch acousto-optical deflector", 0.025},
      {"Detector dark noise", 0.025},
      {"Laser classical noise", 0.018},
      {"NPBS reflectivity", 0.015},
      {"Limited quantum efficiency of homodyne detector", 0.015},
      {"Electronic high pass 0.7 kHz signal reduction", 0.011},
      {"Vacuum viewport reflection", 0.006},
      {"Electronic high pass background noise", 0.002},
  }};
}

void write_budget_csv(std::ostream& out, const LossBudget& budget) {
  out << "label,loss\n";
  for (const auto& item : budget.items) {
    std::string label = item.label;
    if (label.find(',') != std::string::npos || label.find('"') != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : label) {
        if (ch == '"') quoted += '"';
        quoted += ch;
      }
      label = quoted + "\"";
    }
    out << label << ',' << item.loss << '\n';
  }
}

LossBudget read_budget_csv(std::istream& in) {
  LossBudget budget;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line != "label,loss") throw ParseError("budget CSV must start with header 'label,loss'");
      continue;
    }
    // The loss is the last field; the label may be quoted and contain commas.
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ParseError("budget line " + std::to_string(lineno) + ": missing comma");
    std::string label = trim(line.substr(0, comma));
    if (label.size() >= 2 && label.front() == '"' && label.back() == '"') {
      std::string unquoted;
      for (std::size_t i = 1; i + 1 < label.size(); ++i) {
        if (label[i] == '"' && i + 2 < label.size() && label[i + 1] == '"') ++i;
        unquoted += label[i];
      }
      label = unquoted;
    }
    budget.items.push_back({label, parse_number(line.substr(comma + 1), lineno, "budget")});
  }
  budget.validate();
  return budget;
}

std::array<double, 3> model_populations(const CavityParams& params, double alpha_sq, double loss, double epsilon,
                                        double delta_c, double corrected_loss) {
  const double transmission = (1.0 - loss) / (1.0 - corrected_loss);
  const auto pops = heralded_odd_populations(params.with_detunings(params.delta_a(), delta_c), std::sqrt(alpha_sq),
                                             transmission, epsilon, 3);
  return {pops[0], pops[1], pops[2]};
}

double fit_objective(std::span<const PopulationObservation> observations, const CavityParams& params, double loss,
                     double epsilon, double delta_c, double corrected_loss) {
  double sum = 0.0;
  for (const auto& obs : observations) {
    const auto model = model_populations(params, obs.alpha_sq, loss, epsilon, delta_c, corrected_loss);
    const double d0 = model[0] - obs.p0, d1 = model[1] - obs.p1, d2 = model[2] - obs.p2;
    sum += d0 * d0 + d1 * d1 + d2 * d2;
  }
  return sum;
}

FitResult fit_imperfections(std::span<const PopulationObservation> observations, const CavityParams& params,
                            const FitOptions& options) {
  std::vector<double> distinct;
  for (const auto& obs : observations) {
    if (!(obs.alpha_sq >= 0.0)) throw DomainError("fit: alpha^2 must be >= 0");
    distinct.push_back(obs.alpha_sq);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 4) throw DomainError("fit: need at least 4 observations with distinct alpha^2");
  if (options.restarts < 1) throw DomainError("fit: need at least one restart");
  const FitBounds& b = options.bounds;
  if (!(b.loss_min <= b.loss_max && b.epsilon_min <= b.epsilon_max && b.delta_c_min <= b.delta_c_max)) {
    throw DomainError("fit: empty search bounds");
  }
  if (!(b.loss_min >= 0.0 && b.loss_max < 1.0 && b.epsilon_min >= 0.0 && b.epsilon_max <= 1.0)) {
    throw DomainError("fit: bounds outside the physical range");
  }

  const auto to_params = [&](const Point& u) {
    return Point{b.loss_min + u[0] * (b.loss_max - b.loss_min), b.epsilon_min + u[1] * (b.epsilon_max - b.epsilon_min),
                 b.delta_c_min + u[2] * (b.delta_c_max - b.delta_c_min)};
  };
  const auto objective = [&](const Point& u) {
    const Point x = to_params(u);
    try {
      const double value = fit_objective(observations, params, x[0], x[1], x[2], options.corrected_loss);
      return std::isfinite(value) ? value : std::numeric_limits<double>::max();
    } catch (const EmptyBranchError&) {
      return std::numeric_limits<double>::max();
    }
  };

  const auto restarts = static_cast<std::size_t>(options.restarts);
  std::vector<Point> starts(restarts);
  for (std::size_t k = 0; k < restarts; ++k) {
    const auto idx = static_cast<unsigned>(k + 1);
    starts[k] = {radical_inverse(idx, 2), radical_inverse(idx, 3), radical_inverse(idx, 5)};
  }
  std::vector<SimplexOutcome> outcomes(restarts);
  std::vector<double> start_values(restarts);
  parallel_for(restarts, [&](std::size_t k) {
    start_values[k] = objective(starts[k]);
    outcomes[k] = nelder_mead(objective, starts[k], options.max_evaluations);
  });

  std::size_t best = 0;
  for (std::size_t k = 1; k < restarts; ++k) {
    if (outcomes[k].value < outcomes[best].value) best = k;
  }
  const Point x = to_params(outcomes[best].best);
  FitResult result;
  result.loss = x[0];
  result.epsilon = x[1];
  result.delta_c = x[2];
  result.residual = outcomes[best].value;
  result.converged = outcomes[best].converged;
  result.start_residuals = start_values;
  if (params.delta_a() == 0.0 && result.delta_c < 0.0 && -result.delta_c <= b.delta_c_max) {
    result.delta_c = -result.delta_c;
  }
  if (!result.converged) std::clog << "fit_imperfections: best restart did not converge\n";
  return result;
}

std::vector<PopulationObservation> synthetic_observations(const CavityParams& params,
                                                          std::span<const double> alpha_sq_grid, double loss,
                                                          double epsilon, double delta_c, double corrected_loss,
                                                          double relative_noise, std::uint64_t seed) {
  if (!(relative_noise >= 0.0)) throw DomainError("relative noise must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<PopulationObservation> rows;
  for (double alpha_sq : alpha_sq_grid) {
    const auto p = model_populations(params, alpha_sq, loss, epsilon, delta_c, corrected_loss);
    PopulationObservation obs{alpha_sq, p[0], p[1], p[2]};
    obs.p0 *= 1.0 + relative_noise * normal(rng);
    obs.p1 *= 1.0 + relative_noise * normal(rng);
    obs.p2 *= 1.0 + relative_noise * normal(rng);
    rows.push_back(obs);
  }
  return rows;
}

void write_observations_csv(std::ostream& out, std::span<const PopulationObservation> rows) {
  const auto old = out.precision(17);
  out << "alpha_sq,p0,p1,p2\n";
  for (const auto& r : rows) out << r.alpha_sq << ',' << r.p0 << ',' << r.p1 << ',' << r.p2 << '\n';
  out.precision(old);
}

std::vector<PopulationObservation> read_observations_csv(std::istream& in) {
  std::vector<PopulationObservation> rows;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line != "alpha_sq,p0,p1,p2") throw ParseError("observations CSV must start with 'alpha_sq,p0,p1,p2'");
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 4) throw ParseError("observations line " + std::to_string(lineno) + ": expected 4 fields");
    rows.push_back({parse_number(fields[0], lineno, "observations"), parse_number(fields[1], lineno, "observations"),
                    parse_number(fields[2], lineno, "observations"), parse_number(fields[3], lineno, "observations")});
  }
  return rows;
}

std::string fit_result_json(const FitResult& result, double corrected_loss) {
  nlohmann::json j;
  j["L_fit"] = result.loss;
  j["epsilon"] = result.epsilon;
  j["delta_c"] = result.delta_c;
  j["residual"] = result.residual;
  j["converged"] = result.converged;
  j["corrected_loss"] = corrected_loss;
  if (result.loss >= corrected_loss) {
    j["L_uncorr"] = residual_loss(result.loss, corrected_loss);
  } else {
    j["L_uncorr"] = nullptr;
  }
  return j.dump(2);
}

}  // namespace photonparity
