#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ldcluster/ma_engine.hpp"
#include "ldcluster/noise.hpp"

namespace ldcluster {

struct NoiseConfig {
  std::string family = "gaussian";  ///< gaussian | symmetric_gaussian_mixture | matched
  double sigma_Z2 = 1.0;
  std::vector<MixtureComponent> components;
  double knob = 0.9;              ///< matched only
  std::optional<int> kappa;       ///< matched only; defaults to the model's kappa
};

struct SamplerConfig {
  std::vector<int> n_ladder{500, 1000, 2000, 4000};
  int jmax_factor = 50;
  double horizon_units = 32.0;
  std::size_t in_event_target = 5000;
  std::size_t batch_size = 1024;
  std::size_t max_replicas = 1u << 22;
  std::size_t fft_crossover = 1024;
};

struct FbmConfig {
  double dt = 1.0 / 1024.0;
  std::size_t N = 100000;
  double initial_horizon = 64.0;
  double horizon_cap = 1024.0;
};

struct RunConfig {
  std::uint64_t seed = 20240611;
  int threads = 1;
  std::string out_dir = "ldcluster_out";
  double ks_final_tolerance = 0.15;
  double trend_slack = 0.02;
};

/// Everything a run needs, with every default explicit.
struct ExperimentConfig {
  double alpha = 0.75;
  double epsilon = 0.5;
  CoefficientFamily coefficients = CoefficientFamily::shifted;
  NoiseConfig noise;
  SamplerConfig sampler;
  FbmConfig fbm;
  RunConfig run;

  /// Builds the noise law (solving the moment match for `matched`).
  NoiseSpec noise_spec() const;
  /// Throws ValidationError or ConfigurationError naming the field.
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
/// Reads and validates a JSON config file; throws IoError / ValidationError.
ExperimentConfig load_config(const std::string& path);

nlohmann::json noise_to_json(const NoiseSpec& spec);

}  // namespace ldcluster
