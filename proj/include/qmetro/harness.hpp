#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qmetro/calibration.hpp"
#include "qmetro/estimation.hpp"
#include "qmetro/qfi.hpp"

namespace qmetro {

inline constexpr int kReportSchemaVersion = 1;

/// Parses "0.2pi", "pi", "0.25*pi", "-pi/4" or a plain number of radians.
double parse_angle(const std::string& text);

/// "dicke:N:k", "ghz:N" or "product:N:{plus,minus,h,v}".
PureState parse_state_spec(const std::string& spec);

/// One token for every qubit ("x,y,z,y") or a single token applied to all; a token is
/// x, y, z or an explicit vector "a/b/c" (normalized).
std::vector<LocalAxis> parse_axes(const std::string& spec, int n_qubits);

struct LoadedState {
  QuantumState state;
  std::vector<std::string> warnings;
};

/// Reads {"dim": d, "re": [[...]], "im": [[...]]}. The matrix must be Hermitian within 1e-8
/// with trace 1 within 1e-6 and eigenvalues >= -1e-8; small negative eigenvalues are clipped
/// and the matrix renormalized, with a warning. Throws ValidationError naming the failed check.
LoadedState load_density_matrix(const std::filesystem::path& path);
LoadedState parse_density_matrix(const nlohmann::json& doc);
void write_density_matrix(const std::filesystem::path& path, const QuantumState& state);

/// CSV with header theta,mu,count; rows of one phase are grouped in order of appearance.
CalibrationData read_calibration_csv(const std::filesystem::path& path,
                                     const MeasurementModel& measurement);
void write_calibration_csv(const std::filesystem::path& path, const CalibrationData& data,
                           const MeasurementModel& measurement);

/// Outcome file: header "mu", one integer per line.
std::vector<int> read_outcomes(const std::filesystem::path& path);

struct ExperimentConfig {
  std::string state = "dicke:4:2";
  std::optional<std::filesystem::path> state_file;
  std::string axes = "y";
  std::optional<NoiseModel> noise;
  std::optional<std::filesystem::path> calibration_file;
  NoiseFamily fit_family;
  std::vector<double> theta0 = {0.1 * std::numbers::pi, 0.2 * std::numbers::pi,
                                0.3 * std::numbers::pi};
  std::vector<int> m = {10, 100};
  int repetitions = 500;
  std::uint64_t base_seed = 1;
  Interval interval;
  int grid_points = kDefaultGridPoints;
  int curve_points = 101;
  int histogram_bins = 50;
  int optimize_restarts = 16;
  double optimize_tol = 1e-10;
  std::filesystem::path output_dir = "report";

  /// Throws ConfigError on unknown keys, wrong types, bad state specs or missing files.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Re-checks everything from_json checks, for configs assembled in code.
  void validate() const;
};

struct CurveRow {
  double theta;
  int mu;
  double p;
  double dp;
};

struct FisherRow {
  double theta;
  double f;
  bool divergent;
};

struct CampaignRow {
  double theta0;
  int m;
  int reps;
  double ml_std;
  double ml_bias;
  double ml_dres;
  double bayes_mean_c;
  double bayes_c_std;
  double bayes_dres;
};

struct HistogramRow {
  double theta0;
  int m;
  std::string method;
  double bin_center;
  long long count;
};

struct Failure {
  std::string config_path;
  std::string message;
};

struct ReportBundle {
  nlohmann::json summary;
  std::vector<CurveRow> curves;
  std::vector<FisherRow> fisher;
  std::vector<CampaignRow> campaign;
  std::vector<HistogramRow> histograms;
  std::vector<Failure> failures;

  bool ok() const { return failures.empty(); }
  /// Writes curves.csv, fisher.csv, campaign.csv, histograms.csv, summary.json and, when
  /// anything failed, failures.json. Rows are re-validated before writing.
  void write(const std::filesystem::path& dir) const;
};

/// State, generator and (optionally fitted) noise described by a config.
ProbabilityModel build_model(const ExperimentConfig& config, std::vector<std::string>* warnings);

/// QFI (configured and optimized axes), depth, witness, curves and ML/Bayes campaigns.
/// Module errors are collected in `failures` with the config entry that triggered them.
ReportBundle run_experiment(const ExperimentConfig& config);

/// Concatenates campaign tables and summaries of several written bundles.
void merge_reports(const std::vector<std::filesystem::path>& inputs,
                   const std::filesystem::path& output_dir);

/// Fixed-format number used in every emitted table.
std::string format_number(double value);

}  // namespace qmetro
