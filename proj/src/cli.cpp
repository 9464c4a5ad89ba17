#include "photonparity/cli.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "photonparity/calibration.h"
#include "photonparity/cavity.h"
#include "photonparity/errors.h"
#include "photonparity/fockspace.h"
#include "photonparity/photonstats.h"
#include "photonparity/tomography.h"

namespace photonparity::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

// Signals exit code 4 after all outputs have been written.
struct NotConverged {
  std::string what;
};

struct Common {
  std::string config = "paper";
  std::uint64_t seed = 1;
  std::string out = "out";
  int dim = kDefaultDim;
};

class Run {
 public:
  Run(std::string command, const Common& common) : common_(common) {
    manifest_.command = std::move(command);
    manifest_.config_path = common.config;
    manifest_.seed = common.seed;
    manifest_.output_dir = common.out;
    manifest_.versions = {
        {"photonparity", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"cli11", CLI11_VERSION},
    };
    fs::create_directories(common.out);
  }

  void emit(const std::string& name, const std::string& content) {
    write_file_atomic((fs::path(common_.out) / name).string(), content);
    manifest_.outputs.push_back(name);
  }

  void finish() { write_file_atomic((fs::path(common_.out) / "manifest.json").string(), manifest_.to_json()); }

 private:
  Common common_;
  RunManifest manifest_;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config, "Preset name (paper, counting, fiber, vacuum) or key-value file")
      ->capture_default_str();
  sub->add_option("--seed", common.seed, "Master RNG seed")->capture_default_str();
  sub->add_option("--out", common.out, "Output directory")->capture_default_str();
  sub->add_option("--dim", common.dim, "Fock-space truncation")->capture_default_str()->check(CLI::Range(2, 200));
}

double retention_check(const CavityParams& params) {
  double worst = 0.0;
  for (bool coupled : {true, false}) {
    const BranchAmplitudes b = branch_amplitudes(params, coupled, 1.0);
    worst = std::max(worst, std::abs(b.total_intensity() - 1.0));
  }
  return worst;
}

}  // namespace

std::string RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["versions"] = versions;
  j["outputs"] = outputs;
  return j.dump(2);
}

DistillationConfig load_config(const std::string& name) {
  if (name == "paper") return fitted_config();
  if (name == "counting") return counting_config();
  if (name == "fiber") {
    DistillationConfig c;
    c.params = fiber_cavity();
    return c;
  }
  if (name == "vacuum") {
    DistillationConfig c;
    c.params = reference_cavity().with_coupling(0.0);
    return c;
  }
  KeyValueMap values = read_key_value_file(name);
  static const std::set<std::string> known = {"g",       "kappa",   "kappa_r",         "kappa_t",
                                              "kappa_m", "gamma",   "delta_a",         "delta_c",
                                              "detection_error", "uncorrected_loss", "downstream_loss"};
  for (const auto& [key, value] : values) {
    if (known.count(key) == 0) throw ParseError("config key '" + key + "' is not recognized");
  }
  DistillationConfig c;
  c.params = cavity_params_from_map(values);
  const auto get_or = [&](const char* key) {
    const auto it = values.find(key);
    return it == values.end() ? 0.0 : it->second;
  };
  c.detection_error = get_or("detection_error");
  c.uncorrected_loss = get_or("uncorrected_loss");
  c.downstream_loss = get_or("downstream_loss");
  c.validate();
  return c;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() != 3) throw ParseError("grid must look like MIN:MAX:STEPS, got '" + spec + "'");
  double lo = 0.0, hi = 0.0;
  long steps = 0;
  try {
    lo = std::stod(parts[0]);
    hi = std::stod(parts[1]);
    std::size_t used = 0;
    steps = std::stol(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("steps");
  } catch (const std::exception&) {
    throw ParseError("grid '" + spec + "' is not numeric");
  }
  if (steps < 1) throw ParseError("grid needs at least one step");
  if (!(hi >= lo)) throw ParseError("grid maximum below minimum");
  std::vector<double> grid(static_cast<std::size_t>(steps));
  for (long i = 0; i < steps; ++i) grid[static_cast<std::size_t>(i)] = steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
  return grid;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, target);
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Cavity-QED photon-parity distillation simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;

  // params
  auto* params_cmd = app.add_subcommand("params", "Cavity figures of merit as JSON");
  add_common(params_cmd, common);

  // sweep
  std::string grid = "0:2.5:26";
  auto* sweep_cmd = app.add_subcommand("sweep", "Odd-herald populations and fidelity versus alpha^2");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--grid", grid, "alpha^2 grid MIN:MAX:STEPS")->capture_default_str();

  // wigner
  double alpha_sq = 0.31;
  std::string phase_grid = "-3:3:121";
  bool uncorrected = false;
  std::string parity_name = "odd";
  auto* wigner_cmd = app.add_subcommand("wigner", "Wigner function of the heralded state on a phase-space grid");
  add_common(wigner_cmd, common);
  wigner_cmd->add_option("--alpha-sq", alpha_sq, "Mean input photon number")->capture_default_str();
  wigner_cmd->add_option("--grid", phase_grid, "Quadrature axis MIN:MAX:STEPS (both q and p)")->capture_default_str();
  auto* corrected_flag = wigner_cmd->add_flag("--corrected", "Loss-corrected state (default)");
  wigner_cmd->add_flag("--uncorrected", uncorrected, "Keep propagation and detection losses")->excludes(corrected_flag);
  wigner_cmd->add_option("--parity", parity_name, "Herald outcome: odd or even")
      ->check(CLI::IsMember({"odd", "even"}))
      ->capture_default_str();

  // g2
  std::optional<double> g2_alpha_sq;
  std::string g2_grid;
  long long trials = 1'000'000;
  bool monte_carlo = false;
  std::string pulse_name = "gaussian";
  double pulse_duration = 2.3e-6;
  double dark_rate = 20.0;
  double efficiency = 0.5;
  int max_offset = 3;
  auto* g2_cmd = app.add_subcommand("g2", "Second-order correlation of the heralded light");
  add_common(g2_cmd, common);
  g2_cmd->add_option("--alpha-sq", g2_alpha_sq, "Single point: Monte Carlo g2(tau)");
  g2_cmd->add_option("--grid", g2_grid, "alpha^2 grid MIN:MAX:STEPS for the g2(0) curve");
  g2_cmd->add_option("--trials", trials, "Monte Carlo runs per point")->capture_default_str()->check(CLI::PositiveNumber);
  g2_cmd->add_flag("--mc", monte_carlo, "Use Monte Carlo for the curve as well");
  g2_cmd->add_option("--pulse", pulse_name, "gaussian, double_peak or rectangular")->capture_default_str();
  g2_cmd->add_option("--duration", pulse_duration, "Pulse FWHM or length in seconds")->capture_default_str();
  g2_cmd->add_option("--dark-rate", dark_rate, "Dark counts per detector in Hz")->capture_default_str();
  g2_cmd->add_option("--efficiency", efficiency, "Detector efficiency")->capture_default_str();
  g2_cmd->add_option("--max-offset", max_offset, "Largest run offset for g2(tau)")->capture_default_str();

  // tomography
  auto* tomo_cmd = app.add_subcommand("tomography", "Homodyne sampling and maximum-likelihood reconstruction");
  tomo_cmd->require_subcommand(1);
  double tomo_alpha_sq = 0.31;
  int phases = 12;
  int samples_per_phase = 200'000 / 12;
  double homodyne_efficiency = 1.0 - kCorrectedLoss;
  std::string samples_path;
  int max_iter = 2000;
  double tol = 1e-10;
  std::optional<double> correct_loss;
  auto* simulate_cmd = tomo_cmd->add_subcommand("simulate", "Draw quadrature samples of the heralded state");
  add_common(simulate_cmd, common);
  simulate_cmd->add_option("--alpha-sq", tomo_alpha_sq, "Mean input photon number")->capture_default_str();
  simulate_cmd->add_option("--phases", phases, "Number of phases in [0, pi)")->capture_default_str();
  simulate_cmd->add_option("--samples-per-phase", samples_per_phase, "Samples per phase")->capture_default_str();
  simulate_cmd->add_option("--efficiency", homodyne_efficiency, "Homodyne detection efficiency")->capture_default_str();
  auto* reconstruct_cmd = tomo_cmd->add_subcommand("reconstruct", "Reconstruct a density matrix from samples");
  add_common(reconstruct_cmd, common);
  reconstruct_cmd->add_option("--samples", samples_path, "CSV with columns theta,x")->required();
  reconstruct_cmd->add_option("--efficiency", homodyne_efficiency, "Detection efficiency folded into the POVM")
      ->capture_default_str();
  reconstruct_cmd->add_option("--max-iter", max_iter, "Iteration limit")->capture_default_str();
  reconstruct_cmd->add_option("--tol", tol, "Log-likelihood gain per sample to stop")->capture_default_str();
  reconstruct_cmd->add_option("--loss-correct", correct_loss, "Invert this known loss after reconstruction");

  // fit
  std::string observations_path;
  double corrected_loss = kCorrectedLoss;
  auto* fit_cmd = app.add_subcommand("fit", "Fit loss, readout error and cavity detuning to populations");
  add_common(fit_cmd, common);
  fit_cmd->add_option("--observations", observations_path, "CSV with columns alpha_sq,p0,p1,p2")->required();
  fit_cmd->add_option("--corrected-loss", corrected_loss, "Loss removed from the data")->capture_default_str();

  // budget
  std::string budget_path = std::string(PHOTONPARITY_DATA_DIR) + "/downstream_losses.csv";
  std::optional<double> fit_loss;
  auto* budget_cmd = app.add_subcommand("budget", "Combine a loss budget");
  add_common(budget_cmd, common);
  budget_cmd->add_option("--budget", budget_path, "CSV with columns label,loss")->capture_default_str();
  budget_cmd->add_option("--fit-loss", fit_loss, "Total fitted loss; reports the uncorrected remainder");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (params_cmd->parsed()) {
      const DistillationConfig config = load_config(common.config);
      Run out("params", common);
      const CavityParams& p = config.params;
      json j;
      j["g"] = p.g();
      j["kappa"] = p.kappa();
      j["kappa_r"] = p.kappa_r();
      j["kappa_t"] = p.kappa_t();
      j["kappa_m"] = p.kappa_m();
      j["gamma"] = p.gamma();
      j["delta_a"] = p.delta_a();
      j["delta_c"] = p.delta_c();
      const bool lossy = p.kappa() > 0.0 && p.gamma() > 0.0;
      j["cooperativity"] = lossy ? json(cooperativity(p)) : json(nullptr);
      j["xi"] = xi(p);
      j["f1_max"] = f1_max(p);
      j["energy_conservation_error"] = retention_check(p);
      const std::string text = j.dump(2);
      out.emit("params.json", text + "\n");
      out.finish();
      std::cout << text << "\n";
      return kSuccess;
    }

    if (sweep_cmd->parsed()) {
      const DistillationConfig config = load_config(common.config);
      const auto alpha_grid = parse_grid(grid);
      Run out("sweep", common);
      const auto rows = sweep_coherent(config, alpha_grid, common.dim);
      std::ostringstream csv;
      write_sweep_csv(csv, rows);
      out.emit("sweep.csv", csv.str());
      out.finish();
      return kSuccess;
    }

    if (wigner_cmd->parsed()) {
      DistillationConfig config = load_config(common.config);
      if (uncorrected) config.downstream_loss = kCorrectedLoss;
      const auto axis = parse_grid(phase_grid);
      if (!(alpha_sq >= 0.0)) throw DomainError("alpha^2 must be >= 0");
      Run out("wigner", common);
      const Parity parity = parity_name == "odd" ? Parity::odd : Parity::even;
      const DensityMatrix rho = distill_coherent(config, std::sqrt(alpha_sq), parity, common.dim);
      std::ostringstream csv;
      csv.precision(12);
      csv << "q,p,w\n";
      for (double q : axis) {
        for (double p : axis) csv << q << ',' << p << ',' << wigner(rho, q, p) << '\n';
      }
      out.emit("wigner.csv", csv.str());
      const PhaseSpacePoint minimum = wigner_minimum(rho, std::max(std::abs(axis.front()), std::abs(axis.back())));
      json j;
      j["alpha_sq"] = alpha_sq;
      j["corrected"] = !uncorrected;
      j["parity"] = parity_name;
      j["minimum"] = minimum.value;
      j["minimum_q"] = minimum.q;
      j["minimum_p"] = minimum.p;
      j["w_origin"] = wigner_at_origin(rho);
      j["f1"] = single_photon_fidelity(rho);
      out.emit("wigner_summary.json", j.dump(2) + "\n");
      out.finish();
      std::cout << j.dump(2) << "\n";
      return kSuccess;
    }

    if (g2_cmd->parsed()) {
      if (!g2_cmd->count("--config")) common.config = "counting";
      const DistillationConfig config = load_config(common.config);
      PulseShape pulse;
      pulse.kind = pulse_kind_from_string(pulse_name);
      pulse.duration = pulse_duration;
      HBTConfig hbt;
      hbt.detector_efficiency = efficiency;
      hbt.dark_count_rate = dark_rate;
      hbt.trials = trials;
      hbt.seed = common.seed;
      hbt.max_offset = max_offset;
      if (!g2_alpha_sq && g2_grid.empty()) g2_grid = "0.02:2.5:40";
      std::vector<double> curve_grid;
      if (!g2_grid.empty()) curve_grid = parse_grid(g2_grid);
      Run out("g2", common);
      if (!curve_grid.empty()) {
        const auto rows = g2_curve(config, curve_grid, pulse, hbt, monte_carlo, common.dim);
        std::ostringstream csv;
        write_g2_csv(csv, rows);
        out.emit("g2_curve.csv", csv.str());
      }
      if (g2_alpha_sq) {
        pulse.mean_photon_number = *g2_alpha_sq;
        const DensityMatrix rho = distill_coherent(config, std::sqrt(*g2_alpha_sq), Parity::odd, common.dim);
        const HBTResult r = hbt_monte_carlo(rho, pulse, hbt);
        std::ostringstream csv;
        write_g2_tau_csv(csv, r.g2_tau);
        out.emit("g2_tau.csv", csv.str());
        json j;
        j["alpha_sq"] = *g2_alpha_sq;
        j["pulse"] = to_string(pulse.kind);
        j["trials"] = trials;
        j["g2_zero"] = r.g2_zero ? json(*r.g2_zero) : json(nullptr);
        j["stderr"] = r.std_error;
        j["g2_zero_analytic"] = [&] {
          const auto v = g2_with_dark_counts(rho, efficiency, hbt.dark_mean(pulse));
          return v ? json(*v) : json(nullptr);
        }();
        j["singles_a"] = r.singles_a;
        j["singles_b"] = r.singles_b;
        j["coincidences"] = r.coincidences;
        const BandwidthReport bw = bandwidth_check(pulse, config.params);
        j["bandwidth_ratio"] = bw.ratio;
        j["bandwidth_valid"] = bw.valid;
        out.emit("g2_summary.json", j.dump(2) + "\n");
        std::cout << j.dump(2) << "\n";
      }
      out.finish();
      return kSuccess;
    }

    if (simulate_cmd->parsed()) {
      const DistillationConfig config = load_config(common.config);
      Run out("tomography simulate", common);
      const DensityMatrix rho = distill_coherent(config, std::sqrt(tomo_alpha_sq), Parity::odd, common.dim);
      const auto phase_list = equally_spaced_phases(phases);
      const auto samples = sample_homodyne(rho, phase_list, samples_per_phase, homodyne_efficiency, common.seed);
      std::ostringstream csv;
      write_samples_csv(csv, samples);
      out.emit("samples.csv", csv.str());
      ReconstructionResult truth{rho, {}, 0, true, 0};
      out.emit("state_true.json", reconstruction_json(truth) + "\n");
      out.finish();
      return kSuccess;
    }

    if (reconstruct_cmd->parsed()) {
      std::ifstream in(samples_path);
      if (!in) throw ParseError("cannot read " + samples_path);
      const auto samples = read_samples_csv(in);
      Run out("tomography reconstruct", common);
      const ReconstructionResult result = mle_reconstruct(samples, common.dim, homodyne_efficiency, max_iter, tol);
      json j = json::parse(reconstruction_json(result));
      if (correct_loss) {
        const DensityMatrix corrected = loss_correct(result.rho, *correct_loss);
        json re = json::array(), im = json::array();
        for (int m = 0; m < corrected.dim(); ++m) {
          json row_re = json::array(), row_im = json::array();
          for (int n = 0; n < corrected.dim(); ++n) {
            row_re.push_back(corrected(m, n).real());
            row_im.push_back(corrected(m, n).imag());
          }
          re.push_back(row_re);
          im.push_back(row_im);
        }
        j["rho_loss_corrected"] = {{"real", re}, {"imag", im}};
        j["loss_corrected"] = *correct_loss;
      }
      out.emit("reconstruction.json", j.dump(2) + "\n");
      out.finish();
      if (!result.converged) throw NotConverged{"reconstruction did not converge"};
      return kSuccess;
    }

    if (fit_cmd->parsed()) {
      const DistillationConfig config = load_config(common.config);
      std::ifstream in(observations_path);
      if (!in) throw ParseError("cannot read " + observations_path);
      const auto observations = read_observations_csv(in);
      Run out("fit", common);
      FitOptions options;
      options.corrected_loss = corrected_loss;
      const FitResult result = fit_imperfections(observations, config.params, options);
      const std::string text = fit_result_json(result, corrected_loss);
      out.emit("fit.json", text + "\n");
      out.finish();
      std::cout << text << "\n";
      if (!result.converged) throw NotConverged{"fit did not converge"};
      return kSuccess;
    }

    if (budget_cmd->parsed()) {
      std::ifstream in(budget_path);
      if (!in) throw ParseError("cannot read " + budget_path);
      const LossBudget budget = read_budget_csv(in);
      Run out("budget", common);
      json j;
      j["items"] = budget.items.size();
      j["L_sum"] = combine_losses(budget);
      if (fit_loss) {
        j["L_fit"] = *fit_loss;
        j["L_uncorr"] = residual_loss(*fit_loss, j["L_sum"].get<double>());
      }
      out.emit("budget.json", j.dump(2) + "\n");
      out.finish();
      std::cout << j.dump(2) << "\n";
      return kSuccess;
    }
  } catch (const NotConverged& e) {
    std::cerr << "error: " << e.what << "\n";
    return kNotConverged;
  } catch (const ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModelError;
  } catch (const InvalidDimension& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModelError;
  } catch (const EmptyBranchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModelError;
  } catch (const IllConditionedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModelError;
  } catch (const InconsistentBudgetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModelError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsageError;
}

}  // namespace photonparity::cli
