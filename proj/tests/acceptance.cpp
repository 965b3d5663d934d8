#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ldcluster/config.hpp"
#include "ldcluster/empirical_law.hpp"
#include "ldcluster/errors.hpp"
#include "ldcluster/experiment.hpp"
#include "ldcluster/fbm_limit.hpp"
#include "ldcluster/ma_engine.hpp"
#include "ldcluster/numeric.hpp"
#include "ldcluster/parallel.hpp"
#include "ldcluster/params.hpp"
#include "ldcluster/rare_event.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ldcluster;

namespace {

struct Context {
  fs::path work_dir;
  std::uint64_t seed = 20240611;
  int threads = 1;
};

struct Outcome {
  bool pass = false;
  std::string detail;
  json record;  // deterministic content, compared across thread counts
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

fs::path record_dir(const Context& ctx) { return ctx.work_dir / ("threads_" + std::to_string(ctx.threads)); }

void save_record(const Context& ctx, int k, const json& record) {
  fs::create_directories(record_dir(ctx));
  std::ofstream(record_dir(ctx) / ("criterion_" + std::to_string(k) + ".json")) << record.dump(2) << '\n';
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Interval of a weighted law's p-quantile from its Kish size.
std::pair<double, double> quantile_interval(const EmpiricalLaw& law, double p) {
  const double h = 1.96 * std::sqrt(p * (1 - p) / law.effective_size());
  return {law.quantile(std::max(0.0, p - h)), law.quantile(std::min(1.0, p + h))};
}

// Self-normalized mean with its delta-method interval.
std::pair<double, double> mean_interval(const std::vector<double>& x, const std::vector<double>& w) {
  double sw = 0.0, swx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    swx += w[i] * x[i];
  }
  const double mu = swx / sw;
  double v = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) v += w[i] * w[i] * (x[i] - mu) * (x[i] - mu);
  const double se = std::sqrt(v) / sw;
  return {mu - 1.96 * se, mu + 1.96 * se};
}

bool overlap(std::pair<double, double> a, std::pair<double, double> b) {
  return a.first <= b.second && b.first <= a.second;
}

std::string interval(std::pair<double, double> i) { return "[" + fmt(i.first) + ", " + fmt(i.second) + "]"; }

Outcome criterion_1(const Context&) {
  Outcome o{true, "", {}};
  double worst_num = 0.0, worst_id = 0.0;
  for (double a : {0.6, 0.75, 0.9}) {
    const DerivedConstants d = derive_constants(a, 1.0);
    const PickardCheck p = pickard_integral_check(d.hurst);
    const double e1 = std::abs(p.numeric - p.closed_form);
    const double e2 = std::abs(p.closed_form - (1 - a) * (1 - a) * d.C_alpha);
    worst_num = std::max(worst_num, e1);
    worst_id = std::max(worst_id, e2);
    o.pass = o.pass && e1 <= 1e-6 && e2 <= 1e-9;
  }
  o.detail = "max |numeric - closed| = " + fmt(worst_num, 3) + " (<= 1e-6), max |closed - (1-a)^2 C| = " +
             fmt(worst_id, 3) + " (<= 1e-9)";
  return o;
}

Outcome criterion_2(const Context&) {
  const CoefficientTable t = build_coefficients(0.75, 50 * 10000, 10000 + 2000);
  const DiagnosticsReport d3 = asymptotic_diagnostics(t, 1000, 1.0);
  const DiagnosticsReport d4 = asymptotic_diagnostics(t, 10000, 1.0);
  const auto r3 = d3.ratios();
  const auto r4 = d4.ratios();
  const char* names[] = {"prefix", "variance", "head", "mid_left", "mid_right", "decorrelation"};
  Outcome o{true, "", {}};
  std::string list;
  for (std::size_t i = 0; i < r4.size(); ++i) {
    const bool in_band = r4[i] >= 0.8 && r4[i] <= 1.2;
    const bool closer = std::abs(r4[i] - 1) < std::abs(r3[i] - 1);
    o.pass = o.pass && in_band && closer;
    list += std::string(i ? ", " : "") + names[i] + " " + fmt(r3[i], 3) + "->" + fmt(r4[i], 3) +
            (in_band ? "" : "(out)") + (closer ? "" : "(away)");
  }
  o.detail = "ratios n=1e3->1e4 at t=1: " + list + "; band [0.8, 1.2]";
  return o;
}

Outcome criterion_3(const Context&) {
  const NoiseSpec g = NoiseSpec::gaussian(1.0);
  double worst = 0.0;
  for (int n : {100, 1000, 10000}) {
    const CoefficientTable t = build_coefficients(0.75, 50 * n, n);
    const WindowWeights w = WindowWeights::make(t, n, g);
    for (double eps : {0.1, 0.5, 2.0}) worst = std::max(worst, std::abs(solve_tilt(w, eps, g).tau_n - eps));
    for (double s : {0.01, 0.25, 0.5, 1.0, 3.0}) worst = std::max(worst, std::abs(psi_n(w, g, s) - 0.5 * s * s));
  }
  return {worst <= 1e-10, "max deviation from tau_n = eps and psi_n(s) = s^2/2: " + fmt(worst, 3) + " (<= 1e-10)",
          {}};
}

Outcome criterion_4(const Context& ctx) {
  const int n = 2000;
  const double eps = 0.5;
  const NoiseSpec g = NoiseSpec::gaussian(1.0);
  const CoefficientTable t = build_coefficients(0.75, 50 * n, n);
  const TiltSolution sol = solve_tilt(t, n, eps, g);
  const ConditionedSampler sampler(t, sol, g, 0, derive_constants(0.75, 1.0).beta);
  const auto samples = run_conditioned_fixed(sampler, level_seed(ctx.seed, n), 10000, ctx.threads);
  const ProbabilityEstimate e = estimate_event_probability(samples);
  const double sigma_n = std::sqrt(sol.sigma_n2);
  const double exact = normal_upper_tail(n * eps / sigma_n);
  const double asym = std::exp(sol.log_mgf_Sn - sol.theta_n * n * eps) /
                      (std::sqrt(2 * std::numbers::pi) * sigma_n * sol.theta_n);
  const double z = std::abs(e.p_hat - exact) / e.std_err;
  const double rel = std::abs(e.p_hat / asym - 1);
  Outcome o;
  o.pass = z <= 3 && rel <= 0.1;
  o.detail = "p_hat " + fmt(e.p_hat, 6) + " +- " + fmt(e.std_err, 3) + ", exact " + fmt(exact, 6) + " (" + fmt(z, 3) +
             " se, <= 3: " + (z <= 3 ? "ok" : "no") + "), asymptotic " + fmt(asym, 6) + " (rel. diff " + fmt(rel, 3) +
             ", <= 0.1: " + (rel <= 0.1 ? "ok" : "no") + ")";
  o.record = {{"p_hat", e.p_hat}, {"std_err", e.std_err}, {"in_event", e.in_event}, {"exact", exact},
              {"asymptotic", asym}};
  return o;
}

Outcome criterion_5(const Context& ctx) {
  const int n = 500;
  const double eps = 0.7;
  const NoiseSpec g = NoiseSpec::gaussian(1.0);
  const DerivedConstants d = derive_constants(0.75, 1.0);
  const ExperimentConfig defaults;
  const int horizon = static_cast<int>(std::ceil(defaults.sampler.horizon_units * time_unit(n, d.beta)));
  const double censor = horizon / std::pow(n, d.beta);
  const CoefficientTable t = build_coefficients(0.75, 50 * n, n + horizon);

  const TiltSolution sol = solve_tilt(t, n, eps, g);
  const ConditionedSampler sampler(t, sol, g, horizon, d.beta);
  BatchOptions opts;
  opts.in_event_target = 5000;
  opts.threads = ctx.threads;
  const auto is = run_conditioned(sampler, level_seed(ctx.seed, n), opts);
  const ProbabilityEstimate pe = estimate_event_probability(is);

  const RejectionResult rej = rejection_sample(t, n, eps, g, ctx.seed, 40000, horizon, d.beta, ctx.threads);

  const std::pair p_is{pe.p_hat - 1.96 * pe.std_err, pe.p_hat + 1.96 * pe.std_err};
  const std::pair p_rej{rej.acceptance_rate - 1.96 * rej.rate_std_err, rej.acceptance_rate + 1.96 * rej.rate_std_err};

  std::vector<double> x, w;
  double mx = -1e300;
  for (const auto& s : is) {
    if (s.in_event) mx = std::max(mx, s.log_weight);
  }
  for (const auto& s : is) {
    if (!s.in_event) continue;
    x.push_back(s.overshoot_scaled);
    w.push_back(std::exp(s.log_weight - mx));
  }
  const auto m_is = mean_interval(x, w);
  std::vector<double> xr, wr;
  for (const auto& s : rej.accepted) {
    xr.push_back(s.overshoot_scaled);
    wr.push_back(1.0);
  }
  const auto m_rej = mean_interval(xr, wr);

  const EmpiricalLaw In_is = conditional_law(is, Statistic::In_scaled, censor);
  const EmpiricalLaw In_rej = conditional_law(rej.accepted, Statistic::In_scaled, censor);
  const auto q_is = quantile_interval(In_is, 0.5);
  const auto q_rej = quantile_interval(In_rej, 0.5);

  Outcome o;
  o.pass = overlap(p_is, p_rej) && overlap(m_is, m_rej) && overlap(q_is, q_rej);
  o.detail = "P(E0) IS " + interval(p_is) + " vs rejection " + interval(p_rej) + "; mean overshoot " + interval(m_is) +
             " vs " + interval(m_rej) + "; In_scaled median " + interval(q_is) + " vs " + interval(q_rej) + " (" +
             std::to_string(rej.accepted.size()) + " accepted of " + std::to_string(rej.attempts) + ")";
  o.record = {{"p_is", {p_is.first, p_is.second}},   {"p_rejection", {p_rej.first, p_rej.second}},
              {"mean_is", {m_is.first, m_is.second}}, {"mean_rejection", {m_rej.first, m_rej.second}},
              {"median_is", {q_is.first, q_is.second}}, {"median_rejection", {q_rej.first, q_rej.second}},
              {"is_replicas", is.size()},             {"accepted", rej.accepted.size()}};
  return o;
}

Outcome criterion_6(const Context& ctx) {
  const int n = 4000;
  const double eps = 0.5;
  const DerivedConstants d = derive_constants(0.75, 1.0);
  const CoefficientTable t = build_coefficients(0.75, 50 * n, n);
  Outcome o{true, "", json::object()};
  for (const auto& [name, noise] : {std::pair{"gaussian", NoiseSpec::gaussian(1.0)},
                                    std::pair{"matched", build_matched_mixture(1.0, d.kappa)}}) {
    const TiltSolution sol = solve_tilt(t, n, eps, noise);
    const ConditionedSampler sampler(t, sol, noise, 0, d.beta);
    BatchOptions opts;
    opts.in_event_target = 5000;
    opts.threads = ctx.threads;
    const auto samples = run_conditioned(sampler, level_seed(ctx.seed, n), opts);
    std::size_t in = 0;
    for (const auto& s : samples) in += s.in_event;
    const double ks = ks_against_exponential(conditional_law(samples, Statistic::overshoot_scaled));
    o.pass = o.pass && ks <= 0.05 && in >= 5000;
    o.detail += std::string(o.detail.empty() ? "" : ", ") + name + " KS " + fmt(ks, 4) + " (" + std::to_string(in) +
                " in event)";
    o.record[name] = {{"ks", ks}, {"in_event", in}};
  }
  o.detail += "; tolerance 0.05";
  return o;
}

Outcome criterion_7(const Context& ctx) {
  const double dt = 1.0 / 64;
  const std::size_t len = 128, N = 100000;
  Outcome o{true, "", json::object()};
  double worst = 0.0;
  for (double H : {0.5, 0.75, 0.9}) {
    const FbmGenerator gen(H, dt, len);
    std::vector<std::array<double, 3>> pts(N);
    parallel_for(N / 2, ctx.threads, [&](std::size_t i, int) {
      RandomStream rng = RandomStream::derive(ctx.seed, StreamTag::fbm_replica, i);
      std::vector<double> a(len), b(len);
      gen.increments_pair(rng, a, b);
      for (int p = 0; p < 2; ++p) {
        const auto& inc = p == 0 ? a : b;
        double s = 0.0;
        auto& out = pts[2 * i + static_cast<std::size_t>(p)];
        for (std::size_t k = 0; k < len; ++k) {
          s += inc[k];
          if (k == 31) out[0] = s;
          if (k == 63) out[1] = s;
        }
        out[2] = s;
      }
    });
    const std::pair<int, int> pairs[] = {{1, 1}, {1, 2}, {0, 2}};
    const double times[] = {0.5, 1.0, 2.0};
    json rec = json::array();
    for (auto [i, j] : pairs) {
      double m = 0.0;
      for (const auto& p : pts) m += p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(j)];
      m /= N;
      double v = 0.0;
      for (const auto& p : pts) {
        const double e = p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(j)] - m;
        v += e * e;
      }
      const double se = std::sqrt(v / (N - 1) / N);
      const double s = times[i], t = times[j];
      const double exact = 0.5 * (std::pow(s, 2 * H) + std::pow(t, 2 * H) - std::pow(std::abs(t - s), 2 * H));
      const double z = std::abs(m - exact) / se;
      worst = std::max(worst, z);
      o.pass = o.pass && z <= 3;
      rec.push_back({{"s", s}, {"t", t}, {"estimate", m}, {"se", se}, {"exact", exact}});
    }
    o.record[fmt(H, 2)] = rec;
  }
  o.detail = "9 covariance checks, worst deviation " + fmt(worst, 3) + " se (<= 3), N = 1e5";
  return o;
}

Outcome criterion_8(const Context& ctx) {
  const DerivedConstants d = derive_constants(0.75, 1.0);
  const ExperimentConfig defaults;
  TauOptions opts;
  opts.initial_horizon = defaults.fbm.initial_horizon;
  opts.horizon_cap = defaults.fbm.horizon_cap;
  const std::vector<TauQuery> qs{{0.5, 1}, {0.5, 2}};
  const TauLawResult r = tau_law_coupled(d, 1.0, std::ldexp(1.0, -11), qs, 100000, ctx.seed, ctx.threads, opts);
  const double ks = ks_distance(r.laws[0], r.laws[1]);
  Outcome o;
  o.pass = ks <= 0.01 && r.censored[0] == 0 && r.censored[1] == 0;
  o.detail = "KS(dt=2^-11, dt=2^-10) = " + fmt(ks, 4) + " (<= 0.01), censored " + std::to_string(r.censored[0]) + "/" +
             std::to_string(r.censored[1]) + ", extended paths " + std::to_string(r.extended) + ", median " +
             fmt(r.laws[0].quantile(0.5), 4);
  o.record = {{"ks", ks}, {"censored", r.censored}, {"extended", r.extended}};
  for (const auto& law : r.laws) {
    json q = json::array();
    for (double p : kTauQuantileLevels) q.push_back(law.quantile(p));
    o.record["quantiles"].push_back(q);
  }
  return o;
}

Outcome criterion_9(const Context& ctx) {
  ExperimentConfig c;
  c.run.seed = ctx.seed;
  c.run.threads = ctx.threads;
  const fs::path out = record_dir(ctx) / "headline";
  const ExperimentReport r = run_experiment(c, out.string());
  Outcome o;
  bool enough = true;
  std::string ks;
  for (const auto& l : r.levels) {
    enough = enough && l.p_E0.in_event >= 5000;
    ks += (ks.empty() ? "" : ", ") + std::to_string(l.n) + ": " + fmt(l.ks_In_tau, 4);
  }
  o.pass = r.pass() && enough;
  o.detail = "KS by n {" + ks + "}, trend " + (r.trend_ok ? "ok" : "violated") + " (slack 0.02), final " +
             (r.final_ok ? "<=" : ">") + " 0.15; report in " + out.string();
  o.record = json::parse(slurp(out / "report.json"));
  return o;
}

using Runner = std::function<Outcome(const Context&)>;

const std::vector<std::pair<Runner, double>>& runners() {
  static const std::vector<std::pair<Runner, double>> r{
      {criterion_1, 1.0},   {criterion_2, 30.0},  {criterion_3, 10.0}, {criterion_4, 120.0},
      {criterion_5, 300.0}, {criterion_6, 600.0}, {criterion_7, 120.0}, {criterion_8, 300.0},
      {criterion_9, 1800.0}};
  return r;
}

Outcome run_timed(int k, const Context& ctx, bool print) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o = runners()[static_cast<std::size_t>(k - 1)].first(ctx);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double budget = runners()[static_cast<std::size_t>(k - 1)].second;
  if (k >= 4) save_record(ctx, k, o.record);
  if (print) {
    o.detail += "; " + fmt(secs, 3) + " s (budget " + fmt(budget, 4) + " s" + (secs < budget ? ")" : ", exceeded)");
  }
  o.pass = o.pass && secs < budget;
  return o;
}

Outcome criterion_10(const Context& ctx) {
  Context other = ctx;
  other.threads = ctx.threads == 1 ? 2 : 1;
  Outcome o{true, "", {}};
  std::string diffs;
  for (int k = 4; k <= 9; ++k) {
    const fs::path base = record_dir(ctx) / ("criterion_" + std::to_string(k) + ".json");
    if (!fs::exists(base)) run_timed(k, ctx, false);
    run_timed(k, other, false);
    const fs::path alt = record_dir(other) / ("criterion_" + std::to_string(k) + ".json");
    bool same = slurp(base) == slurp(alt);
    if (k == 9) {
      for (const auto& f : fs::directory_iterator(record_dir(ctx) / "headline")) {
        if (f.path().filename() == "timing.json") continue;
        same = same && slurp(f.path()) == slurp(record_dir(other) / "headline" / f.path().filename());
      }
    }
    o.pass = o.pass && same;
    diffs += std::string(k == 4 ? "" : ", ") + std::to_string(k) + (same ? " identical" : " DIFFERS");
  }
  o.detail = "threads " + std::to_string(ctx.threads) + " vs " + std::to_string(other.threads) + ": " + diffs;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks; prints one PASS/FAIL line per criterion"};
  int criterion = 0;
  Context ctx;
  std::string work = "acceptance_work";
  app.add_option("--criterion", criterion, "criterion 1..10 (0 runs all)")->check(CLI::Range(0, 10));
  app.add_option("--work-dir", work, "directory for reports");
  app.add_option("--seed", ctx.seed, "master seed");
  app.add_option("--threads", ctx.threads, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  ctx.threads = threads_from_env(ctx.threads);
  ctx.work_dir = work;
  fs::create_directories(ctx.work_dir);

  bool all = true;
  for (int k = 1; k <= 10; ++k) {
    if (criterion != 0 && criterion != k) continue;
    Outcome o;
    try {
      o = k == 10 ? criterion_10(ctx) : run_timed(k, ctx, true);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
