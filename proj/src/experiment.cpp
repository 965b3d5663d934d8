#include "ldcluster/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "ldcluster/errors.hpp"
#include "ldcluster/fbm_limit.hpp"
#include "ldcluster/numeric.hpp"

namespace ldcluster {
namespace {

constexpr const char* kModule = "analysis";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

nlohmann::json law_summary(const EmpiricalLaw& law) {
  nlohmann::json j;
  j["points"] = law.size();
  j["censored_mass"] = law.censored_mass();
  j["censor_point"] = std::isinf(law.censor_point()) ? nlohmann::json(nullptr) : nlohmann::json(law.censor_point());
  j["effective_size"] = law.effective_size();
  return j;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(kModule, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError(kModule, "write to '" + path.string() + "' failed");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError(kModule, "cannot create output directory '" + dir + "'");
  }
}

std::string level_file(const char* stem, int n) { return std::string(stem) + "_n" + std::to_string(n) + ".csv"; }

}  // namespace

LevelResult run_level(const ExperimentConfig& config, const NoiseSpec& noise, const DerivedConstants& constants, int n,
                      const EmpiricalLaw& tau) {
  const auto t0 = Clock::now();
  LevelResult r;
  r.n = n;
  r.J_max = config.sampler.jmax_factor * n;
  r.time_unit = time_unit(n, constants.beta);
  r.horizon = static_cast<int>(std::ceil(config.sampler.horizon_units * static_cast<double>(r.time_unit)));
  const CoefficientTable table = build_coefficients(config.alpha, r.J_max, n + r.horizon, config.coefficients);
  const VarianceResult var = sigma_n2(table, n, noise.sigma_Z2());
  r.sigma_n2 = var.value;
  r.tail_bound = var.tail_bound;

  const WindowWeights w = WindowWeights::make(table, n, noise);
  r.tilt = solve_tilt(w, config.epsilon, noise);
  const ConditionedSampler sampler(table, r.tilt, noise, r.horizon, constants.beta, config.sampler.fft_crossover);

  BatchOptions opts;
  opts.in_event_target = config.sampler.in_event_target;
  opts.batch_size = config.sampler.batch_size;
  opts.max_replicas = config.sampler.max_replicas;
  opts.threads = config.run.threads;
  const auto samples = run_conditioned(sampler, level_seed(config.run.seed, n), opts);
  r.replicas = samples.size();
  r.p_E0 = estimate_event_probability(samples);
  const double sigma_n = std::sqrt(r.sigma_n2);
  r.p_E0_asymptotic = std::exp(r.tilt.log_mgf_Sn - r.tilt.theta_n * n * config.epsilon) /
                      (std::sqrt(2.0 * std::numbers::pi) * sigma_n * r.tilt.theta_n);

  r.censor_point = static_cast<double>(r.horizon) / std::pow(static_cast<double>(n), constants.beta);
  r.In_law = conditional_law(samples, Statistic::In_scaled, r.censor_point);
  r.In_law.parameter = n;
  r.In_law.seed = config.run.seed;
  r.overshoot_law = conditional_law(samples, Statistic::overshoot_scaled);
  r.overshoot_law.parameter = n;
  r.overshoot_law.seed = config.run.seed;
  r.effective_size = r.overshoot_law.effective_size();
  r.censored_fraction = r.In_law.censored_mass();
  r.ks_overshoot_exponential = ks_against_exponential(r.overshoot_law);
  r.ks_In_tau = ks_distance(r.In_law, tau);
  r.wasserstein_In_tau = wasserstein1(r.In_law, tau);
  r.wall_seconds = seconds_since(t0);
  return r;
}

void evaluate_checks(ExperimentReport& report) {
  report.trend_ok = true;
  for (std::size_t i = 1; i < report.levels.size(); ++i) {
    if (report.levels[i].ks_In_tau > report.levels[i - 1].ks_In_tau + report.config.run.trend_slack) {
      report.trend_ok = false;
    }
  }
  report.final_ok = !report.levels.empty() && report.levels.back().ks_In_tau <= report.config.run.ks_final_tolerance;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  ExperimentReport report;
  report.config = config;
  const NoiseSpec noise = config.noise_spec();
  report.noise = noise_to_json(noise);
  report.constants = derive_constants(config.alpha, noise.sigma_Z2());
  if (!out_dir.empty()) ensure_dir(out_dir);

  const auto t0 = Clock::now();
  TauOptions topts;
  topts.initial_horizon = config.fbm.initial_horizon;
  topts.horizon_cap = config.fbm.horizon_cap;
  const TauQuery q{config.epsilon, 1};
  const TauLawResult tl = tau_law_coupled(report.constants, noise.sigma_Z2(), config.fbm.dt,
                                          std::span<const TauQuery>(&q, 1), config.fbm.N, config.run.seed,
                                          config.run.threads, topts);
  report.tau = tl.laws.front();
  report.tau_censored = tl.censored.front();
  report.tau_extended = tl.extended;
  for (double p : kTauQuantileLevels) report.tau_quantiles.push_back(report.tau.quantile(p));
  report.tau_wall_seconds = seconds_since(t0);

  for (int n : config.sampler.n_ladder) {
    report.levels.push_back(run_level(config, noise, report.constants, n, report.tau));
    evaluate_checks(report);
    if (!out_dir.empty()) write_report(report, out_dir);
  }
  report.complete = true;
  evaluate_checks(report);
  if (!out_dir.empty()) write_report(report, out_dir);
  return report;
}

ExperimentReport run_experiment(const std::string& config_path) {
  const ExperimentConfig config = load_config(config_path);
  return run_experiment(config, config.run.out_dir);
}

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  nlohmann::json cfg = config_to_json(report.config);
  cfg["run"].erase("threads");
  cfg["run"].erase("out_dir");
  j["config"] = cfg;
  j["noise"] = report.noise;
  const auto& c = report.constants;
  j["constants"] = {{"beta", c.beta}, {"H", c.hurst}, {"kappa", c.kappa}, {"C_alpha", c.C_alpha}, {"K_1", c.K_1}};

  nlohmann::json levels = nlohmann::json::array();
  for (const auto& r : report.levels) {
    nlohmann::json l;
    l["n"] = r.n;
    l["J_max"] = r.J_max;
    l["horizon"] = r.horizon;
    l["time_unit"] = r.time_unit;
    l["sigma_n2"] = r.sigma_n2;
    l["sigma_n2_tail_bound"] = r.tail_bound;
    l["tilt"] = {{"tau_n", r.tilt.tau_n},
                 {"theta_n", r.tilt.theta_n},
                 {"zeta_n", r.tilt.zeta_n},
                 {"log_mgf_Sn", r.tilt.log_mgf_Sn},
                 {"residual", r.tilt.residual}};
    l["p_E0"] = {{"estimate", r.p_E0.p_hat},
                 {"std_err", r.p_E0.std_err},
                 {"log_estimate", r.p_E0.log_p_hat},
                 {"asymptotic", r.p_E0_asymptotic},
                 {"degenerate", r.p_E0.degenerate}};
    l["replicas"] = r.replicas;
    l["in_event"] = r.p_E0.in_event;
    l["effective_size"] = r.effective_size;
    l["censored_fraction"] = r.censored_fraction;
    l["censor_point"] = r.censor_point;
    l["ks_overshoot_exponential"] = r.ks_overshoot_exponential;
    l["ks_In_tau"] = r.ks_In_tau;
    l["wasserstein_In_tau"] = r.wasserstein_In_tau;
    l["In_law"] = law_summary(r.In_law);
    l["In_law"]["file"] = level_file("law_In", r.n);
    l["overshoot_law"] = law_summary(r.overshoot_law);
    l["overshoot_law"]["file"] = level_file("law_overshoot", r.n);
    levels.push_back(l);
  }
  j["levels"] = levels;

  nlohmann::json tau;
  tau["dt"] = report.config.fbm.dt;
  tau["N"] = report.config.fbm.N;
  tau["censored"] = report.tau_censored;
  tau["extended_paths"] = report.tau_extended;
  tau["quantile_levels"] = kTauQuantileLevels;
  nlohmann::json qs = nlohmann::json::array();
  for (double v : report.tau_quantiles) qs.push_back(std::isinf(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  tau["quantiles"] = qs;
  tau["law"] = law_summary(report.tau);
  tau["law"]["file"] = "law_tau.csv";
  j["tau_law"] = tau;

  j["checks"] = {{"ks_final_tolerance", report.config.run.ks_final_tolerance},
                 {"trend_slack", report.config.run.trend_slack},
                 {"trend_ok", report.trend_ok},
                 {"final_ok", report.final_ok},
                 {"complete", report.complete},
                 {"pass", report.pass()}};
  return j;
}

nlohmann::json timing_to_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["threads"] = report.config.run.threads;
  j["tau_law_seconds"] = report.tau_wall_seconds;
  nlohmann::json lv = nlohmann::json::array();
  for (const auto& r : report.levels) lv.push_back({{"n", r.n}, {"seconds", r.wall_seconds}});
  j["levels"] = lv;
  return j;
}

void emit_plot_data(const ExperimentReport& report, const std::string& out_dir) {
  ensure_dir(out_dir);
  const std::filesystem::path dir(out_dir);
  write_law_csv(report.tau, (dir / "law_tau.csv").string());
  for (const auto& r : report.levels) {
    write_law_csv(r.In_law, (dir / level_file("law_In", r.n)).string());
    write_law_csv(r.overshoot_law, (dir / level_file("law_overshoot", r.n)).string());
  }
}

void write_report(const ExperimentReport& report, const std::string& out_dir) {
  ensure_dir(out_dir);
  emit_plot_data(report, out_dir);
  const std::filesystem::path dir(out_dir);
  write_json(report_to_json(report), dir / "report.json");
  write_json(timing_to_json(report), dir / "timing.json");
}

RecheckResult recheck_report(const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::ifstream in(dir / "report.json");
  if (!in) throw IoError(kModule, "no report.json in '" + out_dir + "'");
  nlohmann::json j;
  in >> j;
  const auto censor = [](const nlohmann::json& law) {
    return law.at("censor_point").is_null() ? std::numeric_limits<double>::infinity()
                                            : law.at("censor_point").get<double>();
  };
  const auto& tj = j.at("tau_law").at("law");
  const EmpiricalLaw tau = read_law_csv((dir / tj.at("file").get<std::string>()).string(), censor(tj));

  RecheckResult r;
  r.identical = true;
  for (const auto& l : j.at("levels")) {
    const auto& ij = l.at("In_law");
    const auto& oj = l.at("overshoot_law");
    const EmpiricalLaw In = read_law_csv((dir / ij.at("file").get<std::string>()).string(), censor(ij));
    const EmpiricalLaw ov = read_law_csv((dir / oj.at("file").get<std::string>()).string(), censor(oj));
    r.ks_In_tau.push_back(ks_distance(In, tau));
    r.ks_overshoot_exponential.push_back(ks_against_exponential(ov));
    r.identical = r.identical && r.ks_In_tau.back() == l.at("ks_In_tau").get<double>() &&
                  r.ks_overshoot_exponential.back() == l.at("ks_overshoot_exponential").get<double>();
  }
  const double slack = j.at("checks").at("trend_slack").get<double>();
  const double tol = j.at("checks").at("ks_final_tolerance").get<double>();
  r.trend_ok = true;
  for (std::size_t i = 1; i < r.ks_In_tau.size(); ++i) {
    if (r.ks_In_tau[i] > r.ks_In_tau[i - 1] + slack) r.trend_ok = false;
  }
  r.final_ok = !r.ks_In_tau.empty() && r.ks_In_tau.back() <= tol;
  r.identical = r.identical && r.trend_ok == j.at("checks").at("trend_ok").get<bool>() &&
                r.final_ok == j.at("checks").at("final_ok").get<bool>();
  return r;
}

}  // namespace ldcluster
