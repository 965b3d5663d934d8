#include "ldcluster/fbm_limit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ldcluster/errors.hpp"
#include "ldcluster/fft.hpp"
#include "ldcluster/parallel.hpp"

namespace ldcluster {
namespace {

constexpr const char* kModule = "fbm_limit";
constexpr std::size_t kCholeskyBelow = 16;
constexpr std::size_t kCholeskyMax = 2048;

void check_hurst(double H) {
  if (!(H > 0.0 && H < 1.0)) throw ValidationError(kModule, "Hurst index must lie in (0, 1)");
}

// Per-thread complex transform of a given size, reused across samples.
fft::ComplexTransform& thread_transform(std::size_t size) {
  thread_local std::map<std::size_t, std::unique_ptr<fft::ComplexTransform>> cache;
  auto& slot = cache[size];
  if (!slot) slot = std::make_unique<fft::ComplexTransform>(size, -1);
  return *slot;
}

// Symmetric circulant embedding of a Toeplitz matrix of order N with first
// column g: eigenvalues of the order-2N circulant, used for fast matvecs.
class ToeplitzOperator {
 public:
  ToeplitzOperator(std::span<const double> g) : n_(g.size()), tr_(2 * g.size()) {
    auto r = tr_.real();
    std::fill(r.begin(), r.end(), 0.0);
    for (std::size_t k = 0; k < n_; ++k) r[k] = g[k];
    for (std::size_t k = 1; k < n_; ++k) r[2 * n_ - k] = g[k];
    tr_.forward();
    auto s = tr_.spectrum();
    eig_.resize(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) eig_[k] = s[k].real() / static_cast<double>(2 * n_);
  }

  // out = T v for v of length N; `offset` selects rows offset..offset+len-1
  // of the product when the operator is larger than the input.
  void apply(std::span<const double> v, std::span<double> out, std::size_t offset = 0) {
    auto r = tr_.real();
    std::fill(r.begin(), r.end(), 0.0);
    std::copy(v.begin(), v.end(), r.begin());
    tr_.forward();
    auto s = tr_.spectrum();
    for (std::size_t k = 0; k < s.size(); ++k) s[k] *= eig_[k];
    tr_.backward();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = r[offset + i];
  }

 private:
  std::size_t n_;
  fft::RealTransform tr_;
  std::vector<double> eig_;
};

// T. Chan optimal circulant preconditioner for a symmetric Toeplitz matrix.
class CirculantPreconditioner {
 public:
  explicit CirculantPreconditioner(std::span<const double> g) : m_(g.size()), tr_(g.size()) {
    auto r = tr_.real();
    const double m = static_cast<double>(m_);
    r[0] = g[0];
    for (std::size_t k = 1; k < m_; ++k) r[k] = ((m - k) * g[k] + k * g[m_ - k]) / m;
    tr_.forward();
    auto s = tr_.spectrum();
    inv_.resize(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double lam = s[k].real();
      inv_[k] = lam > 0.0 ? 1.0 / (lam * m) : 0.0;
    }
  }

  void apply(std::span<const double> v, std::span<double> out) {
    auto r = tr_.real();
    std::copy(v.begin(), v.end(), r.begin());
    tr_.forward();
    auto s = tr_.spectrum();
    for (std::size_t k = 0; k < s.size(); ++k) s[k] *= inv_[k];
    tr_.backward();
    std::copy(r.begin(), r.begin() + static_cast<long>(m_), out.begin());
  }

 private:
  std::size_t m_;
  fft::RealTransform tr_;
  std::vector<double> inv_;
};

std::vector<double> dense_toeplitz_solve(std::span<const double> g, std::span<const double> b) {
  const auto m = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd T(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) T(i, j) = g[static_cast<std::size_t>(std::abs(i - j))];
  Eigen::LLT<Eigen::MatrixXd> llt(T);
  if (llt.info() != Eigen::Success) throw SolverError(kModule, "fGn covariance is not positive definite");
  const Eigen::VectorXd x = llt.solve(Eigen::Map<const Eigen::VectorXd>(b.data(), m));
  return {x.data(), x.data() + m};
}

// Solves T x = b by preconditioned conjugate gradients, T symmetric
// positive definite Toeplitz with operator `T` and preconditioner `P`.
std::vector<double> pcg_solve(ToeplitzOperator& T, CirculantPreconditioner& P, std::span<const double> b) {
  const std::size_t m = b.size();
  std::vector<double> x(m, 0.0);
  std::vector<double> r(b.begin(), b.end());
  std::vector<double> z(m);
  std::vector<double> p(m);
  std::vector<double> Ap(m);
  const auto dot = [](const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
  };
  const double bnorm = std::sqrt(dot(r, r));
  if (bnorm == 0.0) return x;
  P.apply(r, z);
  p = z;
  double rz = dot(r, z);
  for (int it = 0; it < 1000; ++it) {
    T.apply(p, Ap);
    const double alpha = rz / dot(p, Ap);
    for (std::size_t i = 0; i < m; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    if (std::sqrt(dot(r, r)) <= 1e-9 * bnorm) return x;
    P.apply(r, z);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverError(kModule, "conjugate gradients did not converge for order " + std::to_string(m));
}

std::vector<double> fgn_covariances(double H, double dt, std::size_t count);

// Everything the doubling step from m to 2m increments needs that depends
// only on (H, dt, m). Built once per thread and size.
struct ExtensionKernel {
  ExtensionKernel(double H, double dt, std::size_t m)
      : gen(H, dt, 2 * m), g(fgn_covariances(H, dt, 2 * m)), full(g) {
    const std::span<const double> head = std::span<const double>(g).first(m);
    if (m > 64) {
      solve_op = std::make_unique<ToeplitzOperator>(head);
      precond = std::make_unique<CirculantPreconditioner>(head);
    }
  }

  std::vector<double> solve(std::span<const double> b) {
    if (!solve_op) return dense_toeplitz_solve(std::span<const double>(g).first(b.size()), b);
    return pcg_solve(*solve_op, *precond, b);
  }

  FbmGenerator gen;
  std::vector<double> g;
  ToeplitzOperator full;
  std::unique_ptr<ToeplitzOperator> solve_op;
  std::unique_ptr<CirculantPreconditioner> precond;
};

ExtensionKernel& thread_kernel(double H, double dt, std::size_t m) {
  thread_local std::map<std::tuple<double, double, std::size_t>, std::unique_ptr<ExtensionKernel>> cache;
  auto& slot = cache[{H, dt, m}];
  if (!slot) slot = std::make_unique<ExtensionKernel>(H, dt, m);
  return *slot;
}

std::vector<double> fgn_covariances(double H, double dt, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k) g[k] = fgn_autocovariance(H, dt, static_cast<long>(k));
  return g;
}

}  // namespace

double fgn_autocovariance(double H, double dt, long k) {
  const double a = std::abs(static_cast<double>(k));
  const double h2 = 2.0 * H;
  return 0.5 * std::pow(dt, h2) * (std::pow(a + 1.0, h2) - 2.0 * std::pow(a, h2) + std::pow(std::abs(a - 1.0), h2));
}

FbmGenerator::FbmGenerator(double H, double dt, std::size_t length) : H_(H), dt_(dt), length_(length) {
  check_hurst(H);
  if (!(dt > 0.0)) throw ValidationError(kModule, "dt must be > 0");
  if (length < 1) throw ValidationError(kModule, "length must be >= 1");

  if (length >= kCholeskyBelow) {
    const std::size_t M = 2 * fft::next_pow2(length);
    fft::RealTransform tr(M);
    auto r = tr.real();
    for (std::size_t k = 0; k <= M / 2; ++k) r[k] = fgn_autocovariance(H, dt, static_cast<long>(k));
    for (std::size_t k = M / 2 + 1; k < M; ++k) r[k] = r[M - k];
    tr.forward();
    auto s = tr.spectrum();
    double max_eig = 0.0;
    double min_eig = 0.0;
    for (const auto& c : s) {
      max_eig = std::max(max_eig, c.real());
      min_eig = std::min(min_eig, c.real());
    }
    if (min_eig >= -1e-10 * max_eig) {
      embed_size_ = M;
      sqrt_eigen_.resize(M);
      for (std::size_t k = 0; k < M; ++k) {
        const double lam = std::max(0.0, s[k <= M / 2 ? k : M - k].real());
        sqrt_eigen_[k] = std::sqrt(lam / static_cast<double>(M));
      }
      return;
    }
  }
  if (length > kCholeskyMax) {
    throw ResourceError(kModule, "circulant embedding failed and length " + std::to_string(length) +
                                     " exceeds the dense fallback limit");
  }
  const auto n = static_cast<Eigen::Index>(length);
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) C(i, j) = fgn_autocovariance(H, dt, static_cast<long>(i - j));
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) throw SolverError(kModule, "fGn covariance factorization failed");
  const Eigen::MatrixXd L = llt.matrixL();
  cholesky_.resize(length * length);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cholesky_[static_cast<std::size_t>(i * n + j)] = L(i, j);
}

void FbmGenerator::increments_pair(RandomStream& rng, std::span<double> first, std::span<double> second) const {
  if (first.size() != length_ || second.size() != length_) {
    throw ValidationError(kModule, "increment buffers must have length " + std::to_string(length_));
  }
  if (!sqrt_eigen_.empty()) {
    auto& tr = thread_transform(embed_size_);
    auto d = tr.data();
    for (std::size_t k = 0; k < embed_size_; ++k) {
      const double re = rng.normal();
      const double im = rng.normal();
      d[k] = std::complex<double>(sqrt_eigen_[k] * re, sqrt_eigen_[k] * im);
    }
    tr.execute();
    for (std::size_t i = 0; i < length_; ++i) {
      first[i] = d[i].real();
      second[i] = d[i].imag();
    }
    return;
  }
  std::vector<double> g(length_);
  for (auto* out : {&first, &second}) {
    for (auto& x : g) x = rng.normal();
    for (std::size_t i = 0; i < length_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j <= i; ++j) s += cholesky_[i * length_ + j] * g[j];
      (*out)[i] = s;
    }
  }
}

void FbmGenerator::increments(RandomStream& rng, std::span<double> out) const {
  std::vector<double> spare(length_);
  increments_pair(rng, out, spare);
}

FbmGrid sample_fbm(double H, double dt, std::size_t length, RandomStream& rng) {
  FbmGenerator gen(H, dt, length);
  std::vector<double> inc(length);
  gen.increments(rng, inc);
  FbmGrid g;
  g.H = H;
  g.dt = dt;
  g.length = length;
  g.values.resize(length + 1);
  g.values[0] = 0.0;
  for (std::size_t k = 0; k < length; ++k) g.values[k + 1] = g.values[k] + inc[k];
  return g;
}

void extend_increments(double H, double dt, std::vector<double>& history, RandomStream& rng) {
  const std::size_t m = history.size();
  if (m == 0) throw ValidationError(kModule, "cannot extend an empty path");
  // Unconditional joint draw (Y1, Y2), then x2 = Y2 + S21 S11^{-1} (x1 - Y1).
  ExtensionKernel& kern = thread_kernel(H, dt, m);
  std::vector<double> y(2 * m);
  kern.gen.increments(rng, y);
  std::vector<double> resid(m);
  for (std::size_t i = 0; i < m; ++i) resid[i] = history[i] - y[i];
  const std::vector<double> v = kern.solve(resid);
  // S21 v is the lower half of the order-2m Toeplitz product with (v, 0).
  std::vector<double> cross(m);
  kern.full.apply(v, cross, m);
  history.resize(2 * m);
  for (std::size_t i = 0; i < m; ++i) history[m + i] = y[m + i] + cross[i];
}

Barrier Barrier::make(const DerivedConstants& c, double sigma_Z2, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError(kModule, "epsilon must be > 0");
  if (!(sigma_Z2 > 0.0)) throw ValidationError(kModule, "sigma_Z2 must be > 0");
  Barrier b;
  b.H = c.hurst;
  b.sigma_Z = std::sqrt(sigma_Z2);
  b.drift = epsilon / std::sqrt(2.0 * c.C_alpha);
  b.offset = std::sqrt(0.5 * c.C_alpha) * sigma_Z2 / epsilon;
  return b;
}

double Barrier::level(double t, double T0) const { return drift * std::pow(t, 2.0 * H) - offset * T0; }

long first_hit(std::span<const double> path, double fine_dt, std::size_t stride, const Barrier& barrier, double T0,
               std::size_t from) {
  if (stride < 1) throw ValidationError(kModule, "stride must be >= 1");
  std::size_t k = (from + stride - 1) / stride * stride;
  for (; k < path.size(); k += stride) {
    if (barrier.sigma_Z * path[k] <= barrier.level(static_cast<double>(k) * fine_dt, T0)) return static_cast<long>(k);
  }
  return -1;
}

namespace {

struct QueryState {
  Barrier barrier;
  std::size_t stride = 1;
  std::size_t scanned = 0;  // next fine index to examine
  long hit = -1;
};

// Scans and, when needed, extends one path until every query hits or the
// cap is reached. `inc` holds fGn increments; `t2h` caches (k dt)^{2H}.
std::vector<HittingSample> resolve(std::vector<double>& inc, double T0, double dt, std::vector<QueryState>& qs,
                                   RandomStream& rng, const TauOptions& options, std::span<const double> t2h,
                                   bool& extended) {
  const double H = qs.front().barrier.H;
  std::vector<double> B(inc.size() + 1);
  B[0] = 0.0;
  for (std::size_t k = 0; k < inc.size(); ++k) B[k + 1] = B[k] + inc[k];
  const double cap_steps = std::ceil(options.horizon_cap / dt - 1e-9);

  for (;;) {
    bool pending = false;
    for (auto& q : qs) {
      if (q.hit >= 0) continue;
      std::size_t k = (q.scanned + q.stride - 1) / q.stride * q.stride;
      const double shift = q.barrier.offset * T0;
      for (; k < B.size(); k += q.stride) {
        const double tp = k < t2h.size() ? t2h[k] : std::pow(static_cast<double>(k) * dt, 2.0 * H);
        if (q.barrier.sigma_Z * B[k] <= q.barrier.drift * tp - shift) {
          q.hit = static_cast<long>(k);
          break;
        }
      }
      q.scanned = k;
      if (q.hit < 0) pending = true;
    }
    if (!pending || static_cast<double>(inc.size()) >= cap_steps) break;
    extend_increments(H, dt, inc, rng);
    extended = true;
    const std::size_t old = B.size();
    B.resize(inc.size() + 1);
    for (std::size_t k = old - 1; k < inc.size(); ++k) B[k + 1] = B[k] + inc[k];
  }

  for (auto& q : qs) {
    if (static_cast<double>(q.hit) > cap_steps) q.hit = -1;
  }
  std::vector<HittingSample> out(qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    auto& h = out[i];
    h.T0 = T0;
    h.grid_dt = dt * static_cast<double>(qs[i].stride);
    h.horizon_used = static_cast<double>(inc.size()) * dt;
    if (qs[i].hit < 0) {
      if (options.throw_on_cap) {
        throw NonTerminationError(kModule, "no barrier crossing before the horizon cap of " +
                                               std::to_string(options.horizon_cap) + " time units");
      }
      h.censored = true;
      h.tau = std::numeric_limits<double>::infinity();
    } else {
      h.tau = static_cast<double>(qs[i].hit) * dt;
      h.at_zero = qs[i].hit == 0;
    }
  }
  return out;
}

std::vector<QueryState> make_states(const DerivedConstants& c, double sigma_Z2, std::span<const TauQuery> queries) {
  if (queries.empty()) throw ValidationError(kModule, "at least one query is required");
  std::vector<QueryState> qs;
  for (const auto& q : queries) {
    if (q.stride < 1) throw ValidationError(kModule, "stride must be >= 1");
    qs.push_back({Barrier::make(c, sigma_Z2, q.epsilon), q.stride, 0, -1});
  }
  return qs;
}

std::size_t initial_steps(double dt, const TauOptions& options) {
  if (!(dt > 0.0)) throw ValidationError(kModule, "dt must be > 0");
  if (!(options.initial_horizon > 0.0) || options.horizon_cap < options.initial_horizon) {
    throw ValidationError(kModule, "need 0 < initial_horizon <= horizon_cap");
  }
  return fft::next_pow2(static_cast<std::size_t>(std::ceil(options.initial_horizon / dt - 1e-9)));
}

std::vector<double> power_table(double H, double dt, std::size_t steps) {
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = std::pow(static_cast<double>(k) * dt, 2.0 * H);
  return t;
}

}  // namespace

std::vector<HittingSample> sample_tau_coupled(const DerivedConstants& c, double sigma_Z2, double dt,
                                              std::span<const TauQuery> queries, RandomStream& rng,
                                              const TauOptions& options, std::optional<double> forced_T0) {
  auto qs = make_states(c, sigma_Z2, queries);
  const std::size_t steps = initial_steps(dt, options);
  const double T0 = forced_T0 ? *forced_T0 : rng.exponential();
  FbmGenerator gen(c.hurst, dt, steps);
  std::vector<double> inc(steps);
  gen.increments(rng, inc);
  bool extended = false;
  return resolve(inc, T0, dt, qs, rng, options, {}, extended);
}

HittingSample sample_tau(const DerivedConstants& c, double sigma_Z2, double epsilon, double dt, RandomStream& rng,
                         const TauOptions& options, std::optional<double> forced_T0) {
  const TauQuery q{epsilon, 1};
  return sample_tau_coupled(c, sigma_Z2, dt, std::span<const TauQuery>(&q, 1), rng, options, forced_T0).front();
}

TauLawResult tau_law_coupled(const DerivedConstants& c, double sigma_Z2, double dt, std::span<const TauQuery> queries,
                             std::size_t N, std::uint64_t seed, int threads, const TauOptions& options) {
  if (N < 1) throw ValidationError(kModule, "N must be >= 1");
  const auto proto = make_states(c, sigma_Z2, queries);
  const std::size_t steps = initial_steps(dt, options);
  const FbmGenerator gen(c.hurst, dt, steps);
  const std::vector<double> t2h = power_table(c.hurst, dt, steps);

  const std::size_t pairs = (N + 1) / 2;
  std::vector<std::vector<HittingSample>> results(N);
  std::vector<char> extended(N, 0);
  parallel_for(pairs, threads, [&](std::size_t p, int) {
    RandomStream rng = RandomStream::derive(seed, StreamTag::tau_sample, p);
    const double T0a = rng.exponential();
    const double T0b = rng.exponential();
    std::vector<double> a(steps);
    std::vector<double> b(steps);
    gen.increments_pair(rng, a, b);
    bool ext = false;
    auto qa = proto;
    results[2 * p] = resolve(a, T0a, dt, qa, rng, options, t2h, ext);
    extended[2 * p] = ext;
    if (2 * p + 1 < N) {
      ext = false;
      auto qb = proto;
      results[2 * p + 1] = resolve(b, T0b, dt, qb, rng, options, t2h, ext);
      extended[2 * p + 1] = ext;
    }
  });

  TauLawResult out;
  out.samples = N;
  for (std::size_t i = 0; i < N; ++i) out.extended += extended[i] ? 1 : 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::vector<double> values;
    values.reserve(N);
    std::size_t censored = 0;
    std::size_t zero = 0;
    for (const auto& r : results) {
      if (r[q].censored) {
        ++censored;
      } else {
        values.push_back(r[q].tau);
        zero += r[q].at_zero ? 1 : 0;
      }
    }
    EmpiricalLaw law = EmpiricalLaw::from_samples(values, censored, options.horizon_cap);
    law.source = "tau";
    law.parameter = dt * static_cast<double>(queries[q].stride);
    law.seed = seed;
    out.laws.push_back(std::move(law));
    out.censored.push_back(censored);
    out.at_zero.push_back(zero);
  }
  return out;
}

EmpiricalLaw tau_law(const DerivedConstants& c, double sigma_Z2, double epsilon, std::size_t N, double dt,
                     std::uint64_t seed, int threads, const TauOptions& options) {
  const TauQuery q{epsilon, 1};
  return std::move(tau_law_coupled(c, sigma_Z2, dt, std::span<const TauQuery>(&q, 1), N, seed, threads, options)
                       .laws.front());
}

}  // namespace ldcluster
