#include "qmetro/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "qmetro/errors.hpp"
#include "qmetro/random.hpp"

namespace qmetro {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kFileHermitianTol = 1e-8;
constexpr double kFileTraceTol = 1e-6;
constexpr double kFileNegativeTol = 1e-8;
constexpr double kRowSumTol = 1e-9;

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("cannot parse " + what + " '" + text + "'");
}

long long parse_integer(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("cannot parse " + what + " '" + text + "'");
}

std::ifstream open_input(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("file not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

// Reads a header line and checks it, tolerating surrounding whitespace and CR.
void expect_header(std::istream& in, const std::string& header, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != header) {
    throw ConfigError(path.string() + ": expected header '" + header + "'");
  }
}

std::string format_flag(double v) { return format_number(v); }

double angle_from_json(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_angle(v.get<std::string>());
  throw ConfigError("'" + key + "' must be a number or an angle string");
}

json noise_to_json(const NoiseModel& noise) {
  return {{"misalignment", noise.misalignment},
          {"white_noise", noise.white_noise},
          {"visibility", noise.visibility}};
}

int state_qubits(const ExperimentConfig& config) {
  if (config.state_file) return load_density_matrix(*config.state_file).state.n_qubits();
  return parse_state_spec(config.state).n_qubits();
}

QuantumState build_probe(const ExperimentConfig& config, std::vector<std::string>* warnings) {
  if (config.state_file) {
    LoadedState loaded = load_density_matrix(*config.state_file);
    if (warnings) warnings->insert(warnings->end(), loaded.warnings.begin(), loaded.warnings.end());
    return std::move(loaded.state);
  }
  return QuantumState::from_pure(parse_state_spec(config.state));
}

}  // namespace

std::string format_number(double value) {
  if (value == 0.0) return "0";
  return fmt::format("{:.12g}", value);
}

double parse_angle(const std::string& raw) {
  std::string text = trim(raw);
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const std::regex pi_form(R"(^([+-]?(?:[0-9]*\.?[0-9]+(?:e[+-]?[0-9]+)?)?)\*?pi(?:/([0-9]*\.?[0-9]+))?$)");
  std::smatch match;
  if (std::regex_match(text, match, pi_form)) {
    const std::string coef = match[1].str();
    double factor = 1.0;
    if (coef == "-") {
      factor = -1.0;
    } else if (!coef.empty() && coef != "+") {
      factor = parse_double(coef, "angle");
    }
    double value = factor * std::numbers::pi;
    if (match[2].matched) {
      const double div = parse_double(match[2].str(), "angle");
      if (div == 0.0) throw ConfigError("angle '" + raw + "' divides by zero");
      value /= div;
    }
    return value;
  }
  return parse_double(text, "angle");
}

PureState parse_state_spec(const std::string& spec) {
  const std::vector<std::string> parts = split(spec, ':');
  if (parts.empty()) throw ConfigError("empty state spec");
  const std::string& kind = parts[0];
  auto qubits = [&]() {
    if (parts.size() < 2) throw ConfigError("state spec '" + spec + "' is missing N");
    return static_cast<int>(parse_integer(parts[1], "qubit count"));
  };
  try {
    if (kind == "dicke") {
      if (parts.size() != 3) throw ConfigError("expected dicke:N:k, got '" + spec + "'");
      return dicke_state(qubits(), static_cast<int>(parse_integer(parts[2], "Dicke excitations")));
    }
    if (kind == "ghz") {
      if (parts.size() != 2) throw ConfigError("expected ghz:N, got '" + spec + "'");
      return ghz_state(qubits());
    }
    if (kind == "product") {
      if (parts.size() != 3) throw ConfigError("expected product:N:ket, got '" + spec + "'");
      const std::string& ket = parts[2];
      Eigen::Vector2cd v;
      if (ket == "plus" || ket == "+") {
        v = plus_ket();
      } else if (ket == "minus" || ket == "-") {
        v = minus_ket();
      } else if (ket == "h" || ket == "H") {
        v << 1.0, 0.0;
      } else if (ket == "v" || ket == "V") {
        v << 0.0, 1.0;
      } else {
        throw ConfigError("unknown single-qubit ket '" + ket + "'");
      }
      return product_state(qubits(), v);
    }
  } catch (const ParameterError& e) {
    throw ConfigError("invalid state spec '" + spec + "': " + e.what());
  }
  throw ConfigError("unknown state kind '" + kind + "'");
}

std::vector<LocalAxis> parse_axes(const std::string& spec, int n_qubits) {
  const std::vector<std::string> tokens = split(spec, ',');
  if (tokens.size() != 1 && static_cast<int>(tokens.size()) != n_qubits) {
    throw ConfigError("axes spec '" + spec + "' must give one axis or one per qubit");
  }
  auto parse_token = [&](const std::string& t) {
    if (t == "x") return LocalAxis::unit_x();
    if (t == "y") return LocalAxis::unit_y();
    if (t == "z") return LocalAxis::unit_z();
    const std::vector<std::string> c = split(t, '/');
    if (c.size() != 3) throw ConfigError("cannot parse axis '" + t + "'");
    try {
      return LocalAxis::normalized(parse_double(c[0], "axis"), parse_double(c[1], "axis"),
                                   parse_double(c[2], "axis"));
    } catch (const ParameterError& e) {
      throw ConfigError("invalid axis '" + t + "': " + e.what());
    }
  };
  std::vector<LocalAxis> axes;
  for (int q = 0; q < n_qubits; ++q) axes.push_back(parse_token(tokens[tokens.size() == 1 ? 0 : q]));
  return axes;
}

LoadedState parse_density_matrix(const json& doc) {
  if (!doc.is_object() || !doc.contains("dim") || !doc.contains("re") || !doc.contains("im")) {
    throw ValidationError("density matrix file needs keys dim, re and im");
  }
  if (!doc["dim"].is_number_integer()) throw ValidationError("dim must be an integer");
  const long long dim = doc["dim"].get<long long>();
  if (dim < 2 || (dim & (dim - 1)) != 0) {
    throw ValidationError("dim must be a power of two, got " + std::to_string(dim));
  }
  const int n_qubits = std::countr_zero(static_cast<unsigned long long>(dim));
  if (n_qubits > kMaxQubits) throw ValidationError("dim exceeds the supported qubit count");

  CMatrix m(dim, dim);
  for (const char* part : {"re", "im"}) {
    const json& rows = doc[part];
    if (!rows.is_array() || static_cast<long long>(rows.size()) != dim) {
      throw ValidationError(std::string(part) + " must be a dim x dim array");
    }
    for (long long i = 0; i < dim; ++i) {
      if (!rows[i].is_array() || static_cast<long long>(rows[i].size()) != dim) {
        throw ValidationError(std::string(part) + " must be a dim x dim array");
      }
      for (long long j = 0; j < dim; ++j) {
        if (!rows[i][j].is_number()) throw ValidationError("matrix entries must be numbers");
        const double v = rows[i][j].get<double>();
        if (!std::isfinite(v)) throw ValidationError("matrix entries must be finite");
        if (part[0] == 'r') {
          m(i, j) = Complex(v, 0.0);
        } else {
          m(i, j) += Complex(0.0, v);
        }
      }
    }
  }

  const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kFileHermitianTol) {
    throw ValidationError(fmt::format("hermiticity deviation {:.2e}", herm));
  }
  const double trace_dev = std::abs(m.trace() - Complex(1.0));
  if (trace_dev > kFileTraceTol) {
    throw ValidationError(trace_dev >= 0.01 ? fmt::format("trace deviation {:.2f}", trace_dev)
                                            : fmt::format("trace deviation {:.2e}", trace_dev));
  }
  CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
  const double min_eig = solver.eigenvalues().minCoeff();
  if (min_eig < -kFileNegativeTol) {
    throw ValidationError(fmt::format("negative eigenvalue {:.2e}", min_eig));
  }
  LoadedState out{QuantumState::maximally_mixed(n_qubits), {}};
  if (min_eig < -1e-10) {
    const Eigen::VectorXd clipped = solver.eigenvalues().cwiseMax(0.0);
    h = solver.eigenvectors() * clipped.cast<Complex>().asDiagonal() * solver.eigenvectors().adjoint();
    out.warnings.push_back(
        fmt::format("clipped negative eigenvalue {:.2e} to zero and renormalized", min_eig));
  }
  h /= h.trace().real();
  h = 0.5 * (h + h.adjoint()).eval();
  out.state = QuantumState(n_qubits, std::move(h));
  return out;
}

LoadedState load_density_matrix(const fs::path& path) {
  std::ifstream in = open_input(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": parse error: " + e.what());
  }
  return parse_density_matrix(doc);
}

void write_density_matrix(const fs::path& path, const QuantumState& state) {
  const Eigen::Index dim = state.dim();
  json re = json::array();
  json im = json::array();
  for (Eigen::Index i = 0; i < dim; ++i) {
    json r = json::array();
    json c = json::array();
    for (Eigen::Index j = 0; j < dim; ++j) {
      r.push_back(state.matrix()(i, j).real());
      c.push_back(state.matrix()(i, j).imag());
    }
    re.push_back(std::move(r));
    im.push_back(std::move(c));
  }
  std::ofstream out = open_output(path);
  out << json{{"dim", dim}, {"re", re}, {"im", im}}.dump() << '\n';
}

CalibrationData read_calibration_csv(const fs::path& path, const MeasurementModel& measurement) {
  std::ifstream in = open_input(path);
  expect_header(in, "theta,mu,count", path);
  CalibrationData data;
  std::map<double, std::size_t> row_of;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(trim(line), ',');
    if (cells.size() != 3) {
      throw ConfigError(fmt::format("{}:{}: expected 3 columns", path.string(), line_no));
    }
    const double theta = parse_angle(cells[0]);
    const int mu = static_cast<int>(parse_integer(cells[1], "mu"));
    const long long count = parse_integer(cells[2], "count");
    if (count < 0) throw ConfigError(fmt::format("{}:{}: negative count", path.string(), line_no));
    std::size_t o = 0;
    try {
      o = measurement.index_of(mu);
    } catch (const ParameterError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
    auto [it, inserted] = row_of.try_emplace(theta, data.thetas.size());
    if (inserted) {
      data.thetas.push_back(theta);
      data.counts.emplace_back(measurement.outcome_count(), 0);
    }
    data.counts[it->second][o] += count;
  }
  return data;
}

void write_calibration_csv(const fs::path& path, const CalibrationData& data,
                           const MeasurementModel& measurement) {
  std::ofstream out = open_output(path);
  out << "theta,mu,count\n";
  for (std::size_t j = 0; j < data.thetas.size(); ++j) {
    for (std::size_t o = 0; o < measurement.outcome_count(); ++o) {
      out << format_number(data.thetas[j]) << ',' << measurement.outcomes()[o] << ','
          << data.counts[j][o] << '\n';
    }
  }
}

std::vector<int> read_outcomes(const fs::path& path) {
  std::ifstream in = open_input(path);
  expect_header(in, "mu", path);
  std::vector<int> out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    out.push_back(static_cast<int>(parse_integer(t, "outcome")));
  }
  return out;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "state",          "state_file",    "axes",         "noise",
      "calibration_file", "fit_family",  "theta0",       "m",
      "repetitions",    "base_seed",     "interval",     "grid_points",
      "curve_points",   "histogram_bins", "optimize_restarts", "optimize_tol",
      "output_dir"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  ExperimentConfig c;
  try {
    if (doc.contains("state")) c.state = doc["state"].get<std::string>();
    if (doc.contains("state_file")) c.state_file = doc["state_file"].get<std::string>();
    if (doc.contains("axes")) c.axes = doc["axes"].get<std::string>();
    if (doc.contains("noise")) {
      const json& n = doc["noise"];
      if (!n.is_object()) throw ConfigError("'noise' must be an object");
      NoiseModel noise;
      for (const auto& [key, value] : n.items()) {
        if (key == "white_noise") {
          noise.white_noise = value.get<double>();
        } else if (key == "visibility") {
          noise.visibility = value.get<double>();
        } else if (key == "misalignment") {
          if (value.is_array()) {
            for (const json& a : value) noise.misalignment.push_back(angle_from_json(a, key));
          } else {
            // A single angle is applied to every qubit once N is known.
            noise.misalignment.push_back(angle_from_json(value, key));
          }
        } else {
          throw ConfigError("unknown noise key '" + key + "'");
        }
      }
      c.noise = noise;
    }
    if (doc.contains("calibration_file")) {
      c.calibration_file = doc["calibration_file"].get<std::string>();
    }
    if (doc.contains("fit_family")) {
      const json& f = doc["fit_family"];
      for (const auto& [key, value] : f.items()) {
        if (key == "white_noise") {
          c.fit_family.white_noise = value.get<bool>();
        } else if (key == "visibility") {
          c.fit_family.visibility = value.get<bool>();
        } else if (key == "tilt") {
          const std::string t = value.get<std::string>();
          if (t == "none") {
            c.fit_family.tilt = TiltMode::kNone;
          } else if (t == "collective") {
            c.fit_family.tilt = TiltMode::kCollective;
          } else if (t == "per_qubit") {
            c.fit_family.tilt = TiltMode::kPerQubit;
          } else {
            throw ConfigError("fit_family.tilt must be none, collective or per_qubit");
          }
        } else {
          throw ConfigError("unknown fit_family key '" + key + "'");
        }
      }
    }
    if (doc.contains("theta0")) {
      c.theta0.clear();
      for (const json& t : doc["theta0"]) c.theta0.push_back(angle_from_json(t, "theta0"));
    }
    if (doc.contains("m")) c.m = doc["m"].get<std::vector<int>>();
    if (doc.contains("repetitions")) c.repetitions = doc["repetitions"].get<int>();
    if (doc.contains("base_seed")) c.base_seed = doc["base_seed"].get<std::uint64_t>();
    if (doc.contains("interval")) {
      const json& iv = doc["interval"];
      if (!iv.is_array() || iv.size() != 2) throw ConfigError("'interval' must be [lo, hi]");
      c.interval = {angle_from_json(iv[0], "interval"), angle_from_json(iv[1], "interval")};
    }
    if (doc.contains("grid_points")) c.grid_points = doc["grid_points"].get<int>();
    if (doc.contains("curve_points")) c.curve_points = doc["curve_points"].get<int>();
    if (doc.contains("histogram_bins")) c.histogram_bins = doc["histogram_bins"].get<int>();
    if (doc.contains("optimize_restarts")) c.optimize_restarts = doc["optimize_restarts"].get<int>();
    if (doc.contains("optimize_tol")) c.optimize_tol = doc["optimize_tol"].get<double>();
    if (doc.contains("output_dir")) c.output_dir = doc["output_dir"].get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has a wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in = open_input(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig c = from_json(doc);
  // Relative paths inside a config file are relative to the file.
  const fs::path base = path.parent_path();
  auto rebase = [&](std::optional<fs::path>& p) {
    if (p && p->is_relative() && !fs::exists(*p) && fs::exists(base / *p)) *p = base / *p;
  };
  rebase(c.state_file);
  rebase(c.calibration_file);
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (state_file && !fs::is_regular_file(*state_file)) {
    throw ConfigError("state_file not found: " + state_file->string());
  }
  if (calibration_file && !fs::is_regular_file(*calibration_file)) {
    throw ConfigError("calibration_file not found: " + calibration_file->string());
  }
  const int n = state_qubits(*this);
  parse_axes(axes, n);
  if (noise) {
    NoiseModel expanded = *noise;
    if (expanded.misalignment.size() == 1 && n > 1) {
      expanded.misalignment.assign(static_cast<std::size_t>(n), expanded.misalignment[0]);
    }
    try {
      expanded.validate(n);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("noise: ") + e.what());
    }
  }
  if (theta0.empty()) throw ConfigError("theta0 list is empty");
  for (double t : theta0) {
    if (!std::isfinite(t)) throw ConfigError("theta0 entries must be finite");
  }
  if (m.empty()) throw ConfigError("m list is empty");
  for (int v : m) {
    if (v < 1) throw ConfigError("m entries must be >= 1");
  }
  if (repetitions < 2) throw ConfigError("repetitions must be >= 2");
  try {
    interval.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (grid_points < 3) throw ConfigError("grid_points must be >= 3");
  if (curve_points < 2) throw ConfigError("curve_points must be >= 2");
  if (histogram_bins < 1) throw ConfigError("histogram_bins must be >= 1");
  if (optimize_restarts < 1) throw ConfigError("optimize_restarts must be >= 1");
  if (!(optimize_tol > 0.0)) throw ConfigError("optimize_tol must be positive");
  if (n % 2 != 0) throw ConfigError("the mu measurement needs an even number of qubits");
}

ProbabilityModel build_model(const ExperimentConfig& config, std::vector<std::string>* warnings) {
  QuantumState probe = build_probe(config, warnings);
  const int n = probe.n_qubits();
  CollectiveGenerator generator(parse_axes(config.axes, n));
  std::optional<NoiseModel> noise = config.noise;
  if (noise && noise->misalignment.size() == 1 && n > 1) {
    noise->misalignment.assign(static_cast<std::size_t>(n), noise->misalignment[0]);
  }
  if (config.calibration_file) {
    const ProbabilityModel ideal(probe, generator);
    const CalibrationData data = read_calibration_csv(*config.calibration_file, ideal.measurement());
    return fit_calibration(ideal, data, config.fit_family).model;
  }
  return ProbabilityModel(std::move(probe), std::move(generator), std::move(noise));
}

ReportBundle run_experiment(const ExperimentConfig& config) {
  config.validate();
  ReportBundle bundle;
  json& summary = bundle.summary;
  summary["schema_version"] = kReportSchemaVersion;
  summary["state"] = config.state_file ? config.state_file->string() : config.state;
  summary["axes"] = config.axes;
  summary["base_seed"] = config.base_seed;

  std::vector<std::string> warnings;
  std::optional<ProbabilityModel> model;
  try {
    model.emplace(build_model(config, &warnings));
  } catch (const std::exception& e) {
    bundle.failures.push_back({config.calibration_file ? "calibration_file" : "state", e.what()});
    summary["warnings"] = warnings;
    return bundle;
  }
  const int n = model->n_qubits();
  summary["n_qubits"] = n;
  summary["warnings"] = warnings;
  if (model->noise()) summary["noise"] = noise_to_json(*model->noise());

  try {
    const QuantumState& probe = model->probe();
    const double fixed = qfi(probe, model->generator());
    SeeSawOptions opts;
    opts.restarts = config.optimize_restarts;
    opts.tol = config.optimize_tol;
    const QfiResult best = optimize_axes(probe, opts);
    const DepthClassification depth = classify_depth(std::max(best.value, fixed), n);
    summary["qfi"] = fixed;
    summary["qfi_opt"] = best.value;
    json axes = json::array();
    for (const LocalAxis& a : best.axes) axes.push_back({a.x(), a.y(), a.z()});
    summary["qfi_opt_axes"] = axes;
    summary["depth"] = depth.certified_depth;
    summary["depth_fixed_axes"] = classify_depth(fixed, n).certified_depth;
    json bounds = json::object();
    for (const auto& [k, b] : depth.bounds_table) bounds[std::to_string(k)] = b;
    summary["bounds"] = bounds;
    summary["witness"] = n == 4 ? json(witness_value(probe)) : json(nullptr);
    if (model->noise()) {
      summary["qfi_effective"] = qfi(model->effective_probe(), model->effective_generator());
    }
  } catch (const std::exception& e) {
    bundle.failures.push_back({"state", e.what()});
  }

  try {
    for (double theta : phase_grid(config.interval.lo, config.interval.hi, config.curve_points)) {
      const std::vector<double> p = model->probabilities(theta);
      const std::vector<double> dp = model->derivatives(theta);
      for (std::size_t o = 0; o < p.size(); ++o) {
        bundle.curves.push_back({theta, model->outcomes()[o], p[o], dp[o]});
      }
      const FisherResult f = fisher_information(*model, theta);
      bundle.fisher.push_back({theta, f.value, f.divergent});
    }
  } catch (const std::exception& e) {
    bundle.failures.push_back({"curve_points", e.what()});
  }

  for (std::size_t i = 0; i < config.theta0.size(); ++i) {
    for (std::size_t j = 0; j < config.m.size(); ++j) {
      const double theta0 = config.theta0[i];
      CampaignOptions options;
      options.m = config.m[j];
      options.repetitions = config.repetitions;
      options.base_seed = derive_seed(config.base_seed, i * config.m.size() + j);
      options.interval = config.interval;
      options.grid_points = config.grid_points;
      options.histogram_bins = config.histogram_bins;
      try {
        const CampaignReport ml = ml_campaign(*model, theta0, options);
        const CampaignReport bayes = bayes_campaign(*model, theta0, options);
        bundle.campaign.push_back({theta0, options.m, options.repetitions, ml.std, ml.bias,
                                   ml.delta_res, bayes.mean_confidence, bayes.confidence_std,
                                   bayes.delta_res});
        for (const auto* r : {&ml, &bayes}) {
          const std::string method = r == &ml ? "ml" : "bayes";
          for (std::size_t b = 0; b < r->histogram.counts.size(); ++b) {
            bundle.histograms.push_back(
                {theta0, options.m, method, r->histogram.bin_center(b), r->histogram.counts[b]});
          }
          if (r->failures > 0) {
            bundle.failures.push_back(
                {fmt::format("theta0[{}]/m[{}]", i, j),
                 fmt::format("{} of {} {} estimates failed", r->failures, r->repetitions, method)});
          }
        }
      } catch (const std::exception& e) {
        bundle.failures.push_back({fmt::format("theta0[{}]/m[{}]", i, j), e.what()});
      }
    }
  }
  return bundle;
}

void ReportBundle::write(const fs::path& dir) const {
  // Re-validation: every number finite and every probability row normalized.
  std::map<double, double> row_sums;
  for (const CurveRow& r : curves) {
    if (!std::isfinite(r.p) || !std::isfinite(r.dp)) throw InconsistencyError("non-finite curve row");
    row_sums[r.theta] += r.p;
  }
  for (const auto& [theta, sum] : row_sums) {
    if (std::abs(sum - 1.0) > kRowSumTol) {
      throw InconsistencyError(fmt::format("probabilities at theta={} sum to {}", theta, sum));
    }
  }
  for (const FisherRow& r : fisher) {
    if (!std::isfinite(r.f)) throw InconsistencyError("non-finite Fisher row");
  }
  for (const CampaignRow& r : campaign) {
    for (double v : {r.ml_std, r.ml_bias, r.ml_dres, r.bayes_mean_c, r.bayes_c_std, r.bayes_dres}) {
      if (!std::isfinite(v)) throw InconsistencyError("non-finite campaign row");
    }
  }

  fs::create_directories(dir);
  {
    std::ofstream out = open_output(dir / "curves.csv");
    out << "theta,mu,p,dp\n";
    for (const CurveRow& r : curves) {
      out << format_number(r.theta) << ',' << r.mu << ',' << format_number(r.p) << ','
          << format_number(r.dp) << '\n';
    }
  }
  {
    std::ofstream out = open_output(dir / "fisher.csv");
    out << "theta,f,flag\n";
    for (const FisherRow& r : fisher) {
      out << format_number(r.theta) << ',' << format_number(r.f) << ','
          << (r.divergent ? "divergent" : "ok") << '\n';
    }
  }
  {
    std::ofstream out = open_output(dir / "campaign.csv");
    out << "theta0,m,reps,ml_std,ml_bias,ml_dres,bayes_mean_c,bayes_c_std,bayes_dres\n";
    for (const CampaignRow& r : campaign) {
      out << format_number(r.theta0) << ',' << r.m << ',' << r.reps << ',' << format_flag(r.ml_std)
          << ',' << format_number(r.ml_bias) << ',' << format_number(r.ml_dres) << ','
          << format_number(r.bayes_mean_c) << ',' << format_number(r.bayes_c_std) << ','
          << format_number(r.bayes_dres) << '\n';
    }
  }
  {
    std::ofstream out = open_output(dir / "histograms.csv");
    out << "theta0,m,method,bin_center,count\n";
    for (const HistogramRow& r : histograms) {
      out << format_number(r.theta0) << ',' << r.m << ',' << r.method << ','
          << format_number(r.bin_center) << ',' << r.count << '\n';
    }
  }
  {
    std::ofstream out = open_output(dir / "summary.json");
    out << summary.dump(2) << '\n';
  }
  const fs::path manifest = dir / "failures.json";
  if (failures.empty()) {
    fs::remove(manifest);
  } else {
    json list = json::array();
    for (const Failure& f : failures) list.push_back({{"config_path", f.config_path}, {"message", f.message}});
    std::ofstream out = open_output(manifest);
    out << json{{"schema_version", kReportSchemaVersion}, {"failures", list}}.dump(2) << '\n';
  }
}

void merge_reports(const std::vector<fs::path>& inputs, const fs::path& output_dir) {
  if (inputs.empty()) throw ConfigError("report needs at least one input bundle");
  json bundles = json::array();
  std::vector<std::string> rows;
  for (const fs::path& in_dir : inputs) {
    std::ifstream summary_in = open_input(in_dir / "summary.json");
    json summary;
    try {
      summary = json::parse(summary_in);
    } catch (const json::parse_error& e) {
      throw ConfigError((in_dir / "summary.json").string() + ": " + e.what());
    }
    if (summary.value("schema_version", 0) != kReportSchemaVersion) {
      throw ConfigError(in_dir.string() + ": unsupported report schema version");
    }
    bundles.push_back({{"source", in_dir.string()}, {"summary", std::move(summary)}});

    std::ifstream campaign_in = open_input(in_dir / "campaign.csv");
    expect_header(campaign_in,
                  "theta0,m,reps,ml_std,ml_bias,ml_dres,bayes_mean_c,bayes_c_std,bayes_dres",
                  in_dir / "campaign.csv");
    std::string line;
    while (std::getline(campaign_in, line)) {
      if (!trim(line).empty()) rows.push_back(in_dir.string() + ',' + trim(line));
    }
  }
  fs::create_directories(output_dir);
  {
    std::ofstream out = open_output(output_dir / "campaign.csv");
    out << "bundle,theta0,m,reps,ml_std,ml_bias,ml_dres,bayes_mean_c,bayes_c_std,bayes_dres\n";
    for (const std::string& r : rows) out << r << '\n';
  }
  std::ofstream out = open_output(output_dir / "summary.json");
  out << json{{"schema_version", kReportSchemaVersion}, {"bundles", bundles}}.dump(2) << '\n';
}

}  // namespace qmetro
