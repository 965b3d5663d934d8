#include "ldcluster/config.hpp"

#include <fstream>

#include "ldcluster/errors.hpp"
#include "ldcluster/params.hpp"

namespace ldcluster {
namespace {

constexpr const char* kModule = "config";

template <class T>
void read(const nlohmann::json& section, const char* key, T& out, const std::string& where) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, where + "." + key + ": " + e.what());
  }
}

const nlohmann::json& section(const nlohmann::json& j, const char* name) {
  static const nlohmann::json empty = nlohmann::json::object();
  if (!j.contains(name)) return empty;
  if (!j.at(name).is_object()) throw ValidationError(kModule, std::string("section '") + name + "' must be an object");
  return j.at(name);
}

void check_keys(const nlohmann::json& s, const std::string& where, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : s.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ValidationError(kModule, "unknown key '" + where + "." + k + "'");
  }
}

}  // namespace

NoiseSpec ExperimentConfig::noise_spec() const {
  if (noise.family == "gaussian") return NoiseSpec::gaussian(noise.sigma_Z2);
  if (noise.family == "symmetric_gaussian_mixture") return NoiseSpec::mixture(noise.components);
  if (noise.family == "matched") {
    const int k = noise.kappa.value_or(kappa_for(alpha));
    return build_matched_mixture(noise.sigma_Z2, k, noise.knob);
  }
  throw ValidationError(kModule, "noise.family must be gaussian, symmetric_gaussian_mixture or matched, got '" +
                                     noise.family + "'");
}

void ExperimentConfig::validate() const {
  derive_constants(alpha, noise.sigma_Z2);
  if (!(epsilon > 0.0)) throw ValidationError(kModule, "model.epsilon must be > 0");
  if (sampler.n_ladder.empty()) throw ValidationError(kModule, "sampler.n_ladder must not be empty");
  for (int n : sampler.n_ladder) {
    if (n < 2) throw ValidationError(kModule, "sampler.n_ladder entries must be >= 2");
  }
  if (sampler.jmax_factor < 1) throw ConfigurationError(kModule, "sampler.jmax_factor must be >= 1 so that J_max >= n");
  if (!(sampler.horizon_units > 0.0)) throw ValidationError(kModule, "sampler.horizon_units must be > 0");
  if (sampler.in_event_target < 1) throw ValidationError(kModule, "sampler.in_event_target must be >= 1");
  if (sampler.batch_size < 1) throw ValidationError(kModule, "sampler.batch_size must be >= 1");
  if (!(fbm.dt > 0.0)) throw ValidationError(kModule, "fbm.dt must be > 0");
  if (fbm.N < 1) throw ValidationError(kModule, "fbm.N must be >= 1");
  if (!(fbm.initial_horizon > 0.0) || fbm.horizon_cap < fbm.initial_horizon) {
    throw ValidationError(kModule, "fbm horizons must satisfy 0 < initial_horizon <= horizon_cap");
  }
  if (run.threads < 1) throw ValidationError(kModule, "run.threads must be >= 1");
  const NoiseSpec spec = noise_spec();
  if (std::abs(spec.sigma_Z2() - noise.sigma_Z2) > 1e-12 * noise.sigma_Z2 && noise.family != "gaussian") {
    throw ValidationError(kModule, "mixture variance " + std::to_string(spec.sigma_Z2()) +
                                       " differs from noise.sigma_Z2 " + std::to_string(noise.sigma_Z2));
  }
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError(kModule, "config must be a JSON object");
  check_keys(j, "config", {"model", "noise", "sampler", "fbm", "run"});
  ExperimentConfig c;

  const auto& m = section(j, "model");
  check_keys(m, "model", {"alpha", "epsilon", "coefficients"});
  read(m, "alpha", c.alpha, "model");
  read(m, "epsilon", c.epsilon, "model");
  std::string coeff = to_string(c.coefficients);
  read(m, "coefficients", coeff, "model");
  c.coefficients = coefficient_family_from_string(coeff);

  const auto& nz = section(j, "noise");
  check_keys(nz, "noise", {"family", "sigma_Z2", "components", "knob", "kappa"});
  read(nz, "family", c.noise.family, "noise");
  read(nz, "sigma_Z2", c.noise.sigma_Z2, "noise");
  read(nz, "knob", c.noise.knob, "noise");
  if (nz.contains("kappa")) c.noise.kappa = nz.at("kappa").get<int>();
  if (nz.contains("components")) {
    for (const auto& comp : nz.at("components")) {
      MixtureComponent mc;
      read(comp, "w", mc.w, "noise.components");
      read(comp, "mu", mc.mu, "noise.components");
      read(comp, "s", mc.s, "noise.components");
      c.noise.components.push_back(mc);
    }
    if (!nz.contains("sigma_Z2") && c.noise.family == "symmetric_gaussian_mixture") {
      c.noise.sigma_Z2 = NoiseSpec::mixture(c.noise.components).sigma_Z2();
    }
  }

  const auto& s = section(j, "sampler");
  check_keys(s, "sampler", {"n_ladder", "jmax_factor", "horizon_units", "in_event_target", "batch_size",
                            "max_replicas", "fft_crossover"});
  read(s, "n_ladder", c.sampler.n_ladder, "sampler");
  read(s, "jmax_factor", c.sampler.jmax_factor, "sampler");
  read(s, "horizon_units", c.sampler.horizon_units, "sampler");
  read(s, "in_event_target", c.sampler.in_event_target, "sampler");
  read(s, "batch_size", c.sampler.batch_size, "sampler");
  read(s, "max_replicas", c.sampler.max_replicas, "sampler");
  read(s, "fft_crossover", c.sampler.fft_crossover, "sampler");

  const auto& f = section(j, "fbm");
  check_keys(f, "fbm", {"dt", "N", "initial_horizon", "horizon_cap"});
  read(f, "dt", c.fbm.dt, "fbm");
  read(f, "N", c.fbm.N, "fbm");
  read(f, "initial_horizon", c.fbm.initial_horizon, "fbm");
  read(f, "horizon_cap", c.fbm.horizon_cap, "fbm");

  const auto& r = section(j, "run");
  check_keys(r, "run", {"seed", "threads", "out_dir", "ks_final_tolerance", "trend_slack"});
  read(r, "seed", c.run.seed, "run");
  read(r, "threads", c.run.threads, "run");
  read(r, "out_dir", c.run.out_dir, "run");
  read(r, "ks_final_tolerance", c.run.ks_final_tolerance, "run");
  read(r, "trend_slack", c.run.trend_slack, "run");

  c.validate();
  return c;
}

nlohmann::json noise_to_json(const NoiseSpec& spec) {
  nlohmann::json j;
  j["family"] = to_string(spec.family());
  j["sigma_Z2"] = spec.sigma_Z2();
  j["components"] = nlohmann::json::array();
  for (const auto& c : spec.components()) j["components"].push_back({{"w", c.w}, {"mu", c.mu}, {"s", c.s}});
  return j;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["model"] = {{"alpha", c.alpha}, {"epsilon", c.epsilon}, {"coefficients", to_string(c.coefficients)}};
  nlohmann::json nz = {{"family", c.noise.family}, {"sigma_Z2", c.noise.sigma_Z2}};
  if (c.noise.family == "symmetric_gaussian_mixture") {
    nz["components"] = nlohmann::json::array();
    for (const auto& m : c.noise.components) nz["components"].push_back({{"w", m.w}, {"mu", m.mu}, {"s", m.s}});
  }
  if (c.noise.family == "matched") {
    nz["knob"] = c.noise.knob;
    nz["kappa"] = c.noise.kappa.value_or(kappa_for(c.alpha));
  }
  j["noise"] = nz;
  j["sampler"] = {{"n_ladder", c.sampler.n_ladder},
                  {"jmax_factor", c.sampler.jmax_factor},
                  {"horizon_units", c.sampler.horizon_units},
                  {"in_event_target", c.sampler.in_event_target},
                  {"batch_size", c.sampler.batch_size},
                  {"max_replicas", c.sampler.max_replicas},
                  {"fft_crossover", c.sampler.fft_crossover}};
  j["fbm"] = {{"dt", c.fbm.dt},
              {"N", c.fbm.N},
              {"initial_horizon", c.fbm.initial_horizon},
              {"horizon_cap", c.fbm.horizon_cap}};
  j["run"] = {{"seed", c.run.seed},
              {"threads", c.run.threads},
              {"out_dir", c.run.out_dir},
              {"ks_final_tolerance", c.run.ks_final_tolerance},
              {"trend_slack", c.run.trend_slack}};
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(kModule, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, "'" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace ldcluster
