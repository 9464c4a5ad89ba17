#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "photonparity/cavity.h"

namespace photonparity {

struct LossItem {
  std::string label;
  double loss = 0.0;  // fraction in [0, 1)
};

struct LossBudget {
  std::vector<LossItem> items;

  void validate() const;
};

/// 1 - prod(1 - L_i).
double combine_losses(const LossBudget& budget);

/// 1 - (1 - L_total)/(1 - L_corrected).  Throws InconsistentBudgetError
/// when the corrected part exceeds the total.
double residual_loss(double total_loss, double corrected_loss);

/// The eleven propagation and detection losses of the homodyne setup.
LossBudget downstream_budget();

void write_budget_csv(std::ostream& out, const LossBudget& budget);
LossBudget read_budget_csv(std::istream& in);

struct PopulationObservation {
  double alpha_sq = 0.0;
  double p0 = 0.0, p1 = 0.0, p2 = 0.0;
};

struct FitBounds {
  double loss_min = 0.0, loss_max = 0.8;
  double epsilon_min = 0.0, epsilon_max = 0.1;
  double delta_c_min = -2.0, delta_c_max = 2.0;  // 2*pi*MHz
};

struct FitOptions {
  FitBounds bounds;
  /// Loss removed from the observations before fitting.
  double corrected_loss = 0.251;
  int restarts = 8;
  int max_evaluations = 4000;  // per restart
};

struct FitResult {
  double loss = 0.0;        // L_fit, total loss after the cavity
  double epsilon = 0.0;     // atomic readout error
  double delta_c = 0.0;     // 2*pi*MHz
  double residual = 0.0;    // sum of squared population errors
  bool converged = false;
  /// Objective at each restart's starting point, in restart order.
  std::vector<double> start_residuals;
};

/// Model populations p0..p2 for the odd herald.  The cavity detuning of
/// `params` is replaced by delta_c; `corrected_loss` is divided out of the
/// total loss as in loss-corrected data.
std::array<double, 3> model_populations(const CavityParams& params, double alpha_sq, double loss, double epsilon,
                                        double delta_c, double corrected_loss);

double fit_objective(std::span<const PopulationObservation> observations, const CavityParams& params, double loss,
                     double epsilon, double delta_c, double corrected_loss);

/// Least-squares fit of (L_fit, epsilon, Delta_c) by bounded Nelder-Mead
/// with scattered restarts.  The atomic detuning of `params` stays fixed.
/// With no atomic detuning the model is even in Delta_c, and the reported
/// value is |Delta_c|.
FitResult fit_imperfections(std::span<const PopulationObservation> observations, const CavityParams& params,
                            const FitOptions& options = {});

/// Model populations on `alpha_sq_grid`, each multiplied by
/// (1 + relative_noise * N(0, 1)).
std::vector<PopulationObservation> synthetic_observations(const CavityParams& params,
                                                          std::span<const double> alpha_sq_grid, double loss,
                                                          double epsilon, double delta_c, double corrected_loss,
                                                          double relative_noise, std::uint64_t seed);

void write_observations_csv(std::ostream& out, std::span<const PopulationObservation> rows);
std::vector<PopulationObservation> read_observations_csv(std::istream& in);

std::string fit_result_json(const FitResult& result, double corrected_loss);

}  // namespace photonparity
