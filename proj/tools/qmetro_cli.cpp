// qmetro: command-line front end for the phase-estimation toolkit.
//
// Exit status: 0 on success, 1 on computation errors (including partially failed
// campaigns), 2 on usage errors, unreadable configs and missing files.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "qmetro/errors.hpp"
#include "qmetro/harness.hpp"

namespace {

using namespace qmetro;
namespace fs = std::filesystem;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand that needs a probability model.
struct ModelFlags {
  std::string state;
  std::string state_file;
  std::string axes;
  std::optional<double> white_noise;
  std::optional<double> visibility;
  std::string tilt;
  std::string tilts;
  std::string calibration_file;

  CLI::Option* state_opt = nullptr;
  CLI::Option* state_file_opt = nullptr;
  CLI::Option* tilt_opt = nullptr;
  CLI::Option* tilts_opt = nullptr;

  void attach(CLI::App* app) {
    state_opt = app->add_option("--state", state, "dicke:N:k, ghz:N or product:N:{plus,minus,h,v}");
    state_file_opt = app->add_option("--state-file", state_file, "density matrix JSON file");
    app->add_option("--axes", axes, "x, y, z or a/b/c, one token or one per qubit");
    app->add_option("--white-noise", white_noise, "white-noise fraction p");
    app->add_option("--visibility", visibility, "coherence visibility v");
    tilt_opt = app->add_option("--tilt", tilt, "collective axis misalignment (radians or 0.01pi)");
    tilts_opt = app->add_option("--tilts", tilts, "comma-separated per-qubit misalignments");
    app->add_option("--calibration-file", calibration_file,
                    "calibration CSV; the fitted noise replaces the noise flags");
    state_opt->excludes(state_file_opt);
    tilt_opt->excludes(tilts_opt);
  }

  bool any_noise() const {
    return white_noise || visibility || !tilt.empty() || !tilts.empty();
  }

  // Overlays the flags that were given on `config`.
  void apply(ExperimentConfig& config) const {
    if (!state.empty()) {
      config.state = state;
      config.state_file.reset();
    }
    if (!state_file.empty()) config.state_file = fs::path(state_file);
    if (!axes.empty()) config.axes = axes;
    if (!calibration_file.empty()) {
      if (any_noise()) throw UsageError("--calibration-file cannot be combined with noise flags");
      config.calibration_file = fs::path(calibration_file);
    }
    if (any_noise()) {
      NoiseModel noise = config.noise.value_or(NoiseModel{});
      if (white_noise) noise.white_noise = *white_noise;
      if (visibility) noise.visibility = *visibility;
      if (!tilt.empty()) noise.misalignment = {parse_angle(tilt)};
      if (!tilts.empty()) {
        noise.misalignment.clear();
        std::string item;
        std::istringstream in(tilts);
        while (std::getline(in, item, ',')) noise.misalignment.push_back(parse_angle(item));
      }
      config.noise = noise;
    }
  }
};

ExperimentConfig config_from(const ModelFlags& flags) {
  ExperimentConfig config;
  flags.apply(config);
  config.validate();
  return config;
}

ProbabilityModel model_from(const ModelFlags& flags) {
  const ExperimentConfig config = config_from(flags);
  std::vector<std::string> warnings;
  ProbabilityModel model = build_model(config, &warnings);
  for (const std::string& w : warnings) std::cerr << "qmetro: warning: " << w << '\n';
  return model;
}

void print_noise(const NoiseModel& noise) {
  fmt::print("white_noise {:.6f}\n", noise.white_noise);
  fmt::print("visibility {:.6f}\n", noise.visibility);
  std::string tilts;
  for (double d : noise.misalignment) tilts += fmt::format("{}{:.6f}", tilts.empty() ? "" : ",", d);
  fmt::print("misalignment {}\n", tilts.empty() ? "none" : tilts);
}

TiltMode parse_tilt_mode(const std::string& s) {
  if (s == "none") return TiltMode::kNone;
  if (s == "collective") return TiltMode::kCollective;
  if (s == "per_qubit") return TiltMode::kPerQubit;
  throw UsageError("--fit-tilt must be none, collective or per_qubit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase estimation with multiqubit probes: Fisher information, entanglement "
               "depth, calibration and estimator campaigns"};
  app.require_subcommand(1);

  ModelFlags qfi_flags;
  CLI::App* qfi_cmd = app.add_subcommand("qfi", "QFI for the given axes, optimized QFI and certified depth");
  qfi_flags.attach(qfi_cmd);
  int restarts = 16;
  qfi_cmd->add_option("--restarts", restarts, "random starts of the axis optimization")
      ->check(CLI::PositiveNumber);

  ModelFlags witness_flags;
  CLI::App* witness_cmd = app.add_subcommand("witness", "2/3 - fidelity with the four-qubit Dicke state");
  witness_flags.attach(witness_cmd);

  ModelFlags curve_flags;
  CLI::App* curves_cmd = app.add_subcommand("curves", "write curves.csv and fisher.csv");
  curve_flags.attach(curves_cmd);
  std::string curves_out = "report";
  int curve_points = 101;
  std::string curve_lo = "0";
  std::string curve_hi = "0.5pi";
  curves_cmd->add_option("--out", curves_out, "output directory");
  curves_cmd->add_option("--points", curve_points, "phase grid points")->check(CLI::Range(2, 1000000));
  curves_cmd->add_option("--lo", curve_lo, "first phase");
  curves_cmd->add_option("--hi", curve_hi, "last phase");

  ModelFlags cal_flags;
  CLI::App* cal_cmd = app.add_subcommand("calibrate", "fit noise to calibration data, or simulate such data");
  cal_flags.attach(cal_cmd);
  std::string cal_data;
  std::string cal_simulate;
  std::string fit_tilt = "collective";
  bool fit_visibility = false;
  bool fit_no_white = false;
  long long cal_events = 7000;
  int cal_points = 31;
  std::uint64_t cal_seed = 1;
  auto* data_opt = cal_cmd->add_option("--data", cal_data, "calibration CSV (theta,mu,count) to fit");
  auto* sim_opt = cal_cmd->add_option("--simulate", cal_simulate,
                                      "write synthetic calibration CSV drawn from the noisy model");
  data_opt->excludes(sim_opt);
  cal_cmd->add_option("--fit-tilt", fit_tilt, "none, collective or per_qubit");
  cal_cmd->add_flag("--fit-visibility", fit_visibility, "also fit the visibility");
  cal_cmd->add_flag("--no-white-noise", fit_no_white, "keep the white-noise fraction at 0");
  cal_cmd->add_option("--events", cal_events, "events per phase when simulating")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--points", cal_points, "phases in [0, pi/2] when simulating")->check(CLI::Range(2, 100000));
  cal_cmd->add_option("--seed", cal_seed, "seed when simulating");

  ModelFlags est_flags;
  CLI::App* est_cmd = app.add_subcommand("estimate", "ML and Bayesian estimate from one m-experiment");
  est_flags.attach(est_cmd);
  std::string est_outcomes;
  std::string est_theta0;
  int est_m = 100;
  std::uint64_t est_seed = 1;
  auto* outcomes_opt = est_cmd->add_option("--outcomes", est_outcomes, "outcome file (header mu)");
  auto* theta0_opt = est_cmd->add_option("--theta0", est_theta0, "true phase of a fresh sample");
  outcomes_opt->excludes(theta0_opt);
  auto* m_opt = est_cmd->add_option("--m", est_m, "outcomes in a fresh sample")->check(CLI::PositiveNumber);
  auto* seed_opt = est_cmd->add_option("--seed", est_seed, "seed of a fresh sample");
  outcomes_opt->excludes(m_opt)->excludes(seed_opt);

  ModelFlags camp_flags;
  CLI::App* camp_cmd = app.add_subcommand("campaign", "full Monte Carlo report bundle");
  camp_flags.attach(camp_cmd);
  std::string camp_config;
  std::vector<int> camp_m;
  int camp_reps = 0;
  std::vector<std::string> camp_theta0;
  std::uint64_t camp_seed = 0;
  std::string camp_out;
  int camp_grid = 0;
  int camp_bins = 0;
  int camp_curve_points = 0;
  camp_cmd->add_option("--config", camp_config, "experiment config JSON; flags override it");
  auto* camp_m_opt = camp_cmd->add_option("--m", camp_m, "m values")->check(CLI::PositiveNumber);
  auto* camp_reps_opt = camp_cmd->add_option("--reps", camp_reps, "repetitions per cell")->check(CLI::Range(2, 100000000));
  auto* camp_theta_opt = camp_cmd->add_option("--theta0", camp_theta0, "true phases");
  auto* camp_seed_opt = camp_cmd->add_option("--seed", camp_seed, "base seed");
  auto* camp_out_opt = camp_cmd->add_option("--out", camp_out, "output directory");
  auto* camp_grid_opt = camp_cmd->add_option("--grid-points", camp_grid, "estimation grid points")->check(CLI::Range(3, 10000000));
  auto* camp_bins_opt = camp_cmd->add_option("--bins", camp_bins, "histogram bins")->check(CLI::PositiveNumber);
  auto* camp_curve_opt = camp_cmd->add_option("--curve-points", camp_curve_points, "curve grid points")->check(CLI::Range(2, 1000000));

  CLI::App* report_cmd = app.add_subcommand("report", "merge written report bundles");
  std::vector<std::string> report_inputs;
  std::string report_out = "report-merged";
  report_cmd->add_option("--inputs", report_inputs, "bundle directories")->required();
  report_cmd->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*qfi_cmd) {
      const ProbabilityModel model = model_from(qfi_flags);
      const QuantumState& probe = model.noise() ? model.effective_probe() : model.probe();
      const CollectiveGenerator& gen = model.noise() ? model.effective_generator() : model.generator();
      const double fixed = qfi(probe, gen);
      SeeSawOptions opts;
      opts.restarts = restarts;
      const QfiResult best = optimize_axes(probe, opts);
      const int n = probe.n_qubits();
      fmt::print("{:.6f}\n", fixed);
      fmt::print("qfi_opt {:.6f}\n", best.value);
      fmt::print("depth {}\n", classify_depth(std::max(fixed, best.value), n).certified_depth);
      fmt::print("depth_fixed_axes {}\n", classify_depth(fixed, n).certified_depth);
    } else if (*witness_cmd) {
      const ProbabilityModel model = model_from(witness_flags);
      const QuantumState& probe = model.noise() ? model.effective_probe() : model.probe();
      fmt::print("{:.6f}\n", witness_value(probe));
    } else if (*curves_cmd) {
      ExperimentConfig config = config_from(curve_flags);
      config.interval = {parse_angle(curve_lo), parse_angle(curve_hi)};
      config.curve_points = curve_points;
      config.validate();
      const ProbabilityModel model = model_from(curve_flags);
      ReportBundle bundle;
      for (double theta : phase_grid(config.interval.lo, config.interval.hi, config.curve_points)) {
        const auto p = model.probabilities(theta);
        const auto dp = model.derivatives(theta);
        for (std::size_t o = 0; o < p.size(); ++o) {
          bundle.curves.push_back({theta, model.outcomes()[o], p[o], dp[o]});
        }
        const FisherResult f = fisher_information(model, theta);
        bundle.fisher.push_back({theta, f.value, f.divergent});
      }
      bundle.summary = {{"schema_version", kReportSchemaVersion}};
      bundle.write(curves_out);
      fmt::print("wrote {} phases to {}\n", bundle.fisher.size(), curves_out);
    } else if (*cal_cmd) {
      if (cal_data.empty() == cal_simulate.empty()) {
        throw UsageError("calibrate needs exactly one of --data and --simulate");
      }
      if (!cal_simulate.empty()) {
        const ProbabilityModel model = model_from(cal_flags);
        const CalibrationData data = simulate_calibration(
            model, phase_grid(0.0, std::numbers::pi / 2, cal_points), cal_events, cal_seed);
        write_calibration_csv(cal_simulate, data, model.measurement());
        fmt::print("wrote {} phases to {}\n", data.thetas.size(), cal_simulate);
      } else {
        if (cal_flags.any_noise() || !cal_flags.calibration_file.empty()) {
          throw UsageError("calibrate --data fits the noise; do not pass noise flags");
        }
        const ProbabilityModel ideal = model_from(cal_flags);
        const CalibrationData data = read_calibration_csv(cal_data, ideal.measurement());
        NoiseFamily family;
        family.white_noise = !fit_no_white;
        family.visibility = fit_visibility;
        family.tilt = parse_tilt_mode(fit_tilt);
        const CalibrationFit fit = fit_calibration(ideal, data, family);
        print_noise(fit.noise);
        fmt::print("residual_rms {:.6e}\n", fit.residual_rms);
        fmt::print("iterations {}\n", fit.iterations);
      }
    } else if (*est_cmd) {
      if (est_outcomes.empty() && est_theta0.empty()) {
        throw UsageError("estimate needs --outcomes or --theta0");
      }
      const ProbabilityModel model = model_from(est_flags);
      OutcomeSample sample;
      if (!est_outcomes.empty()) {
        sample.outcomes = read_outcomes(est_outcomes);
        for (int mu : sample.outcomes) model.measurement().index_of(mu);
      } else {
        sample = sample_outcomes(model, parse_angle(est_theta0), est_m, est_seed);
      }
      const LikelihoodTable table(model, Interval{});
      const MlEstimate ml = ml_estimate(table, sample);
      const BayesPosterior post = bayes_posterior(table, sample);
      fmt::print("m {}\n", sample.outcomes.size());
      fmt::print("ml {:.6f}\n", ml.theta_est);
      fmt::print("bayes {:.6f}\n", post.theta_est);
      fmt::print("confidence {:.6f}{}\n", post.confidence, post.clipped ? " clipped" : "");
    } else if (*camp_cmd) {
      ExperimentConfig config = camp_config.empty() ? ExperimentConfig{} : ExperimentConfig::load(camp_config);
      camp_flags.apply(config);
      if (*camp_m_opt) config.m = camp_m;
      if (*camp_reps_opt) config.repetitions = camp_reps;
      if (*camp_theta_opt) {
        config.theta0.clear();
        for (const std::string& t : camp_theta0) config.theta0.push_back(parse_angle(t));
      }
      if (*camp_seed_opt) config.base_seed = camp_seed;
      if (*camp_out_opt) config.output_dir = camp_out;
      if (*camp_grid_opt) config.grid_points = camp_grid;
      if (*camp_bins_opt) config.histogram_bins = camp_bins;
      if (*camp_curve_opt) config.curve_points = camp_curve_points;
      const ReportBundle bundle = run_experiment(config);
      bundle.write(config.output_dir);
      for (const CampaignRow& r : bundle.campaign) {
        fmt::print("theta0 {:.6f} m {} ml_dres {:.6f} bayes_dres {:.6f}\n", r.theta0, r.m,
                   r.ml_dres, r.bayes_dres);
      }
      if (!bundle.ok()) {
        for (const Failure& f : bundle.failures) {
          std::cerr << "qmetro: error: " << f.config_path << ": " << f.message << '\n';
        }
        return kExitFailure;
      }
    } else if (*report_cmd) {
      std::vector<fs::path> inputs(report_inputs.begin(), report_inputs.end());
      merge_reports(inputs, report_out);
      fmt::print("merged {} bundles into {}\n", inputs.size(), report_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "qmetro: usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "qmetro: usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "qmetro: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
