#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ldcluster/config.hpp"
#include "ldcluster/errors.hpp"
#include "ldcluster/experiment.hpp"
#include "ldcluster/fbm_limit.hpp"
#include "ldcluster/numeric.hpp"
#include "ldcluster/params.hpp"
#include "ldcluster/parallel.hpp"
#include "ldcluster/rare_event.hpp"

namespace {

using nlohmann::json;
using namespace ldcluster;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON experiment config (defaults apply when omitted)");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--threads", c.threads, "worker threads (LDCLUSTER_THREADS also honoured)")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  if (c.seed) cfg.run.seed = *c.seed;
  cfg.run.threads = c.threads ? *c.threads : threads_from_env(cfg.run.threads);
  if (!c.out.empty()) cfg.run.out_dir = c.out;
  cfg.validate();
  return cfg;
}

void emit(const json& j, const Common& c, const std::string& file) {
  std::cout << j.dump(2) << '\n';
  if (c.out.empty()) return;
  std::filesystem::create_directories(c.out);
  const auto path = std::filesystem::path(c.out) / file;
  std::ofstream out(path);
  if (!out) throw IoError("cli", "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json run_constants(const Common& c, std::optional<double> alpha_override) {
  ExperimentConfig cfg = resolve(c);
  const double alpha = alpha_override.value_or(cfg.alpha);
  const DerivedConstants d = derive_constants(alpha, cfg.noise.sigma_Z2);
  const PickardCheck p = pickard_integral_check(d.hurst);
  return {{"alpha", alpha},
          {"sigma_Z2", cfg.noise.sigma_Z2},
          {"beta", d.beta},
          {"H", d.hurst},
          {"kappa", d.kappa},
          {"C_alpha", d.C_alpha},
          {"K_1", d.K_1},
          {"pickard",
           {{"numeric", p.numeric},
            {"closed_form", p.closed_form},
            {"abs_difference", std::abs(p.numeric - p.closed_form)},
            {"identity_target", (1.0 - alpha) * (1.0 - alpha) * d.C_alpha},
            {"quadrature_error", p.quadrature_error}}}};
}

json run_check_noise(const Common& c, double theta0) {
  const ExperimentConfig cfg = resolve(c);
  const NoiseSpec spec = cfg.noise_spec();
  const int kappa = cfg.noise.kappa.value_or(kappa_for(cfg.alpha));
  const AssumptionReport r = check_assumptions(spec, kappa, theta0);
  json res = json::array();
  for (std::size_t i = 0; i < r.moment_residuals.size(); ++i) {
    res.push_back({{"order", i + 1}, {"residual", r.moment_residuals[i]}, {"ok", static_cast<bool>(r.moment_ok[i])}});
  }
  return {{"noise", noise_to_json(spec)},
          {"kappa", kappa},
          {"exponential_moments", {{"finite", r.exponential_moments_finite}, {"reason", r.exponential_moments_reason}}},
          {"moments", res},
          {"chf", {{"theta0", r.theta0}, {"integral", r.chf_integral}, {"bound", r.chf_bound}, {"ok", r.chf_ok}}},
          {"all_ok", r.all_ok()}};
}

json run_prob_e0(const Common& c, std::vector<int> ns, std::size_t replicas) {
  const ExperimentConfig cfg = resolve(c);
  const NoiseSpec noise = cfg.noise_spec();
  const DerivedConstants d = derive_constants(cfg.alpha, noise.sigma_Z2());
  if (ns.empty()) ns = cfg.sampler.n_ladder;
  json levels = json::array();
  for (int n : ns) {
    const CoefficientTable table = build_coefficients(cfg.alpha, cfg.sampler.jmax_factor * n, n, cfg.coefficients);
    const WindowWeights w = WindowWeights::make(table, n, noise);
    const TiltSolution t = solve_tilt(w, cfg.epsilon, noise);
    const ConditionedSampler sampler(table, t, noise, 0, d.beta, cfg.sampler.fft_crossover);
    const auto samples = run_conditioned_fixed(sampler, level_seed(cfg.run.seed, n), replicas, cfg.run.threads);
    const ProbabilityEstimate e = estimate_event_probability(samples);
    const double sigma_n = std::sqrt(w.sigma_n2);
    json l = {{"n", n},
              {"sigma_n2", w.sigma_n2},
              {"tau_n", t.tau_n},
              {"theta_n", t.theta_n},
              {"zeta_n", t.zeta_n},
              {"log_mgf_Sn", t.log_mgf_Sn},
              {"replicas", replicas},
              {"in_event", e.in_event},
              {"p_hat", e.p_hat},
              {"std_err", e.std_err},
              {"degenerate", e.degenerate},
              {"asymptotic", std::exp(t.log_mgf_Sn - t.theta_n * n * cfg.epsilon) /
                                 (std::sqrt(2.0 * 3.14159265358979323846) * sigma_n * t.theta_n)}};
    if (noise.is_gaussian()) l["exact_gaussian"] = normal_upper_tail(n * cfg.epsilon / sigma_n);
    levels.push_back(l);
  }
  return {{"alpha", cfg.alpha}, {"epsilon", cfg.epsilon}, {"seed", cfg.run.seed}, {"levels", levels}};
}

json run_tau_law(const Common& c, std::optional<std::size_t> N, std::optional<double> dt) {
  ExperimentConfig cfg = resolve(c);
  if (N) cfg.fbm.N = *N;
  if (dt) cfg.fbm.dt = *dt;
  const DerivedConstants d = derive_constants(cfg.alpha, cfg.noise.sigma_Z2);
  TauOptions opts;
  opts.initial_horizon = cfg.fbm.initial_horizon;
  opts.horizon_cap = cfg.fbm.horizon_cap;
  const TauQuery q{cfg.epsilon, 1};
  const TauLawResult r = tau_law_coupled(d, cfg.noise.sigma_Z2, cfg.fbm.dt, std::span<const TauQuery>(&q, 1),
                                         cfg.fbm.N, cfg.run.seed, cfg.run.threads, opts);
  const EmpiricalLaw& law = r.laws.front();
  if (!c.out.empty()) {
    std::filesystem::create_directories(c.out);
    write_law_csv(law, (std::filesystem::path(c.out) / "law_tau.csv").string());
  }
  json qs = json::array();
  for (double p : kTauQuantileLevels) qs.push_back(law.quantile(p));
  return {{"alpha", cfg.alpha},
          {"epsilon", cfg.epsilon},
          {"dt", cfg.fbm.dt},
          {"N", cfg.fbm.N},
          {"seed", cfg.run.seed},
          {"censored", r.censored.front()},
          {"extended_paths", r.extended},
          {"quantile_levels", kTauQuantileLevels},
          {"quantiles", qs}};
}

int run_verify(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const ExperimentReport report = run_experiment(cfg, cfg.run.out_dir);
  std::cout << "n        p_E0          ks(overshoot,Exp1)  ks(In,tau)  censored\n";
  for (const auto& l : report.levels) {
    std::cout << l.n << "  " << l.p_E0.p_hat << "  " << l.ks_overshoot_exponential << "  " << l.ks_In_tau << "  "
              << l.censored_fraction << '\n';
  }
  std::cout << "trend " << (report.trend_ok ? "ok" : "violated") << ", final KS "
            << (report.final_ok ? "within" : "above") << " tolerance; report in " << cfg.run.out_dir << '\n';
  return report.pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moderate-deviation cluster lengths of long-memory moving averages"};
  app.require_subcommand(1);
  Common common;

  auto* constants = app.add_subcommand("constants", "derived constants and the integral identity check");
  add_common(constants, common);
  std::optional<double> alpha;
  constants->add_option("--alpha", alpha, "memory exponent in (1/2, 1)");

  auto* check = app.add_subcommand("check-noise", "noise assumption report");
  add_common(check, common);
  double theta0 = 1.0;
  check->add_option("--theta0", theta0, "tilt range for the characteristic-function bound");

  auto* prob = app.add_subcommand("prob-e0", "importance-sampling estimate of P(E_0)");
  add_common(prob, common);
  std::vector<int> ns;
  std::size_t replicas = 10000;
  prob->add_option("--n", ns, "window lengths (default: the config ladder)");
  prob->add_option("--replicas", replicas, "tilted replicas per window length");

  auto* tau = app.add_subcommand("tau-law", "empirical law of the limiting hitting time");
  add_common(tau, common);
  std::optional<std::size_t> N;
  std::optional<double> dt;
  tau->add_option("--N", N, "number of samples");
  tau->add_option("--dt", dt, "grid step in limiting-time units");

  auto* verify = app.add_subcommand("verify", "full pipeline over the n-ladder");
  add_common(verify, common);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*constants) emit(run_constants(common, alpha), common, "constants.json");
    if (*check) emit(run_check_noise(common, theta0), common, "check_noise.json");
    if (*prob) emit(run_prob_e0(common, ns, replicas), common, "prob_e0.json");
    if (*tau) emit(run_tau_law(common, N, dt), common, "tau_law.json");
    if (*verify) return run_verify(common);
  } catch (const Error& e) {
    std::cerr << "error in " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
