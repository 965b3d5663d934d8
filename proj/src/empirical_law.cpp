#include "ldcluster/empirical_law.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ldcluster/errors.hpp"
#include "ldcluster/numeric.hpp"

namespace ldcluster {
namespace {

constexpr const char* kModule = "analysis";

void require_nonempty(const EmpiricalLaw& law) {
  if (law.size() == 0) throw ValidationError(kModule, "empirical law has no uncensored points");
}

double parse_double(const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw IoError(kModule, "cannot parse number '" + text + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

EmpiricalLaw EmpiricalLaw::from_weighted(std::span<const double> values, std::span<const double> weights,
                                         double censored_weight, double censor_point) {
  if (values.size() != weights.size()) throw ValidationError(kModule, "values and weights differ in length");
  if (!(censored_weight >= 0.0) || !std::isfinite(censored_weight)) {
    throw ValidationError(kModule, "censored weight must be finite and >= 0");
  }
  std::vector<Point> pts;
  pts.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw ValidationError(kModule, "law values must be finite");
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw ValidationError(kModule, "law weights must be finite and >= 0");
    }
    if (weights[i] > 0.0) pts.push_back({values[i], weights[i]});
  }
  std::stable_sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.value < b.value; });

  CompensatedSum total;
  for (const auto& p : pts) total += p.weight;
  total += censored_weight;
  double z = total.value();
  if (!(z > 0.0)) throw ValidationError(kModule, "law has zero total weight");
  // Already-normalized input (e.g. a re-read CSV) keeps its exact weights.
  if (std::abs(z - 1.0) <= 1e-12) z = 1.0;

  EmpiricalLaw law;
  CompensatedSum w1;
  double w2 = 0.0;
  for (const auto& p : pts) {
    const double w = p.weight / z;
    if (!law.points_.empty() && law.points_.back().value == p.value) {
      law.points_.back().weight += w;
    } else {
      law.points_.push_back({p.value, w});
    }
    w1 += w;
    w2 += w * w;
  }
  law.censored_mass_ = censored_weight / z;
  law.censor_point_ = law.censored_mass_ > 0.0 ? censor_point : std::numeric_limits<double>::infinity();
  if (law.censored_mass_ > 0.0 && !law.points_.empty() && law.censor_point_ < law.points_.back().value) {
    throw ValidationError(kModule, "censor point lies below an observed value");
  }
  law.effective_size_ = w2 > 0.0 ? w1.value() * w1.value() / w2 : 0.0;
  return law;
}

EmpiricalLaw EmpiricalLaw::from_samples(std::span<const double> values, std::size_t censored_count,
                                        double censor_point) {
  const std::vector<double> w(values.size(), 1.0);
  return from_weighted(values, w, static_cast<double>(censored_count), censor_point);
}

double EmpiricalLaw::cdf(double x) const {
  CompensatedSum s;
  for (const auto& p : points_) {
    if (p.value > x) break;
    s += p.weight;
  }
  if (std::isinf(x) && x > 0) s += censored_mass_;
  return std::min(1.0, s.value());
}

double EmpiricalLaw::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(kModule, "quantile level must lie in [0, 1]");
  require_nonempty(*this);
  CompensatedSum s;
  for (const auto& pt : points_) {
    s += pt.weight;
    if (s.value() >= p * (1.0 - 1e-14)) return pt.value;
  }
  return std::numeric_limits<double>::infinity();
}

double EmpiricalLaw::conditional_mean() const {
  require_nonempty(*this);
  CompensatedSum m;
  CompensatedSum w;
  for (const auto& p : points_) {
    m += p.value * p.weight;
    w += p.weight;
  }
  return m.value() / w.value();
}

double ks_distance(const EmpiricalLaw& a, const EmpiricalLaw& b) {
  require_nonempty(a);
  require_nonempty(b);
  const double limit = std::min(a.censor_point(), b.censor_point());
  const auto& pa = a.points();
  const auto& pb = b.points();
  std::size_t i = 0;
  std::size_t j = 0;
  CompensatedSum fa;
  CompensatedSum fb;
  double sup = 0.0;
  while (i < pa.size() || j < pb.size()) {
    const double va = i < pa.size() ? pa[i].value : std::numeric_limits<double>::infinity();
    const double vb = j < pb.size() ? pb[j].value : std::numeric_limits<double>::infinity();
    const double x = std::min(va, vb);
    if (x > limit) break;
    while (i < pa.size() && pa[i].value == x) fa += pa[i++].weight;
    while (j < pb.size() && pb[j].value == x) fb += pb[j++].weight;
    sup = std::max(sup, std::abs(fa.value() - fb.value()));
  }
  if (std::isinf(limit)) {
    // Both laws uncensored: F -> 1 at +inf on both sides.
    sup = std::max(sup, std::abs((1.0 - a.censored_mass()) - (1.0 - b.censored_mass())));
  }
  return std::clamp(sup, 0.0, 1.0);
}

double ks_against_exponential(const EmpiricalLaw& law) {
  require_nonempty(law);
  const auto& pts = law.points();
  if (pts.front().value < 0.0) throw ValidationError(kModule, "exponential comparison needs nonnegative support");
  const double limit = law.censor_point();
  CompensatedSum f;
  double sup = 0.0;
  for (const auto& p : pts) {
    if (p.value > limit) break;
    const double g = -std::expm1(-p.value);
    sup = std::max(sup, std::abs(f.value() - g));  // left limit
    f += p.weight;
    sup = std::max(sup, std::abs(f.value() - g));
  }
  // Limit at the censor point (or +inf, where G = 1).
  const double g_end = std::isinf(limit) ? 1.0 : -std::expm1(-limit);
  sup = std::max(sup, std::abs(f.value() - g_end));
  return std::clamp(sup, 0.0, 1.0);
}

double wasserstein1(const EmpiricalLaw& a, const EmpiricalLaw& b) {
  require_nonempty(a);
  require_nonempty(b);
  const double limit = std::min(a.censor_point(), b.censor_point());
  const auto& pa = a.points();
  const auto& pb = b.points();
  std::size_t i = 0;
  std::size_t j = 0;
  CompensatedSum fa;
  CompensatedSum fb;
  CompensatedSum area;
  double prev = std::min(pa.front().value, pb.front().value);
  while (i < pa.size() || j < pb.size()) {
    const double va = i < pa.size() ? pa[i].value : std::numeric_limits<double>::infinity();
    const double vb = j < pb.size() ? pb[j].value : std::numeric_limits<double>::infinity();
    double x = std::min(va, vb);
    const bool stop = x > limit;
    if (stop) x = limit;
    area += std::abs(fa.value() - fb.value()) * (x - prev);
    if (stop) break;
    prev = x;
    while (i < pa.size() && pa[i].value == x) fa += pa[i++].weight;
    while (j < pb.size() && pb[j].value == x) fb += pb[j++].weight;
  }
  return area.value();
}

void write_law_csv(const EmpiricalLaw& law, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(kModule, "cannot open '" + path + "' for writing");
  out << "value,cdf,weight\n";
  CompensatedSum f;
  const auto& pts = law.points();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    f += pts[k].weight;
    double c = std::min(1.0, f.value());
    if (k + 1 == pts.size() && law.censored_mass() == 0.0) c = 1.0;
    out << format_double(pts[k].value) << ',' << format_double(c) << ',' << format_double(pts[k].weight) << '\n';
  }
  if (law.censored_mass() > 0.0) out << "inf,1," << format_double(law.censored_mass()) << '\n';
  if (!out) throw IoError(kModule, "write to '" + path + "' failed");
}

EmpiricalLaw read_law_csv(const std::string& path, double censor_point) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(kModule, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "value,cdf,weight") throw IoError(kModule, "'" + path + "' has no law header");
  std::vector<double> values;
  std::vector<double> weights;
  double censored = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string v;
    std::string c;
    std::string w;
    if (!std::getline(ss, v, ',') || !std::getline(ss, c, ',') || !std::getline(ss, w)) {
      throw IoError(kModule, "malformed row '" + line + "' in '" + path + "'");
    }
    const double value = parse_double(v);
    const double weight = parse_double(w);
    if (std::isinf(value)) {
      censored += weight;
    } else {
      values.push_back(value);
      weights.push_back(weight);
    }
  }
  if (std::isnan(censor_point)) {
    censor_point = values.empty() ? std::numeric_limits<double>::infinity() : values.back();
  }
  return EmpiricalLaw::from_weighted(values, weights, censored, censor_point);
}

}  // namespace ldcluster
