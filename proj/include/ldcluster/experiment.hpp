#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "ldcluster/config.hpp"
#include "ldcluster/empirical_law.hpp"
#include "ldcluster/params.hpp"
#include "ldcluster/rare_event.hpp"

namespace ldcluster {

struct LevelResult {
  int n = 0;
  int J_max = 0;
  int horizon = 0;
  long time_unit = 0;
  double sigma_n2 = 0.0;
  double tail_bound = 0.0;
  TiltSolution tilt;
  ProbabilityEstimate p_E0;
  double p_E0_asymptotic = 0.0;  ///< (2 pi)^{-1/2} e^{log_mgf - theta n eps} / (sigma_n theta)
  std::size_t replicas = 0;
  double effective_size = 0.0;
  double censored_fraction = 0.0;
  double censor_point = 0.0;  ///< horizon in limiting-time units
  double ks_overshoot_exponential = 0.0;
  double ks_In_tau = 0.0;
  double wasserstein_In_tau = 0.0;
  EmpiricalLaw In_law;
  EmpiricalLaw overshoot_law;
  double wall_seconds = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  DerivedConstants constants;
  nlohmann::json noise;
  std::vector<LevelResult> levels;
  EmpiricalLaw tau;
  std::size_t tau_censored = 0;
  std::size_t tau_extended = 0;
  std::vector<double> tau_quantiles;  ///< at 0.05, 0.25, 0.5, 0.75, 0.95
  double tau_wall_seconds = 0.0;
  bool trend_ok = false;
  bool final_ok = false;
  bool complete = false;

  bool pass() const noexcept { return complete && trend_ok && final_ok; }
};

inline constexpr int kSchemaVersion = 1;
inline const std::vector<double> kTauQuantileLevels{0.05, 0.25, 0.5, 0.75, 0.95};

/// Runs one ladder level against a precomputed tau law.
LevelResult run_level(const ExperimentConfig& config, const NoiseSpec& noise, const DerivedConstants& constants,
                      int n, const EmpiricalLaw& tau);

/// The full pipeline. When `out_dir` is non-empty the report is rewritten
/// after every level, so a failure leaves the finished levels on disk.
ExperimentReport run_experiment(const ExperimentConfig& config, const std::string& out_dir = "");
ExperimentReport run_experiment(const std::string& config_path);

/// Trend and ceiling checks from a KS sequence.
void evaluate_checks(ExperimentReport& report);

/// Deterministic content only; wall times and thread count are excluded.
nlohmann::json report_to_json(const ExperimentReport& report);
nlohmann::json timing_to_json(const ExperimentReport& report);

/// Writes report.json, timing.json and the law CSVs.
void write_report(const ExperimentReport& report, const std::string& out_dir);
/// CDF tables law_tau.csv, law_In_n<n>.csv, law_overshoot_n<n>.csv.
void emit_plot_data(const ExperimentReport& report, const std::string& out_dir);

struct RecheckResult {
  bool identical = false;
  std::vector<double> ks_In_tau;
  std::vector<double> ks_overshoot_exponential;
  bool trend_ok = false;
  bool final_ok = false;
};

/// Recomputes every KS value and pass flag from the CSVs and report.json in
/// `out_dir` and compares them with the stored ones.
RecheckResult recheck_report(const std::string& out_dir);

}  // namespace ldcluster
