#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ldcluster/errors.hpp"
#include "ldcluster/ma_engine.hpp"
#include "ldcluster/random.hpp"

using namespace ldcluster;

namespace {

std::vector<double> normals(std::uint64_t seed, std::size_t count) {
  RandomStream rng(seed);
  std::vector<double> z(count);
  for (auto& x : z) x = rng.normal();
  return z;
}

// X_k = sum_{i=0}^{J_max+k} a_i Z_{k-i}, with Z indexed from -J_max.
std::vector<double> brute_force_X(const CoefficientTable& t, const std::vector<double>& past,
                                  const std::vector<double>& future, int n, int horizon) {
  const auto Z = [&](long m) {
    return m <= n - 1 ? past[static_cast<std::size_t>(n - 1 - m)] : future[static_cast<std::size_t>(m - n)];
  };
  std::vector<double> X(static_cast<std::size_t>(n + horizon));
  for (long k = 0; k < n + horizon; ++k) {
    long double s = 0;
    for (long i = 0; i <= t.J_max + k; ++i) s += static_cast<long double>(t.a[static_cast<std::size_t>(i)]) * Z(k - i);
    X[static_cast<std::size_t>(k)] = static_cast<double>(s);
  }
  return X;
}

}  // namespace

TEST(MaEngine, CoefficientFamilies) {
  const CoefficientTable s = build_coefficients(0.75, 10, 5);
  ASSERT_EQ(s.size(), 16u);
  EXPECT_DOUBLE_EQ(s.a[0], 1.0);
  EXPECT_DOUBLE_EQ(s.a[3], std::pow(4.0, -0.75));
  const CoefficientTable u = build_coefficients(0.75, 10, 5, CoefficientFamily::unit_start);
  EXPECT_DOUBLE_EQ(u.a[0], 1.0);
  EXPECT_DOUBLE_EQ(u.a[1], 1.0);
  EXPECT_DOUBLE_EQ(u.a[3], std::pow(3.0, -0.75));
  EXPECT_EQ(coefficient_family_from_string("unit_start"), CoefficientFamily::unit_start);
  EXPECT_EQ(coefficient_family_from_string(to_string(CoefficientFamily::shifted)), CoefficientFamily::shifted);
  EXPECT_THROW(coefficient_family_from_string("other"), ValidationError);
  EXPECT_THROW(build_coefficients(0.5, 10, 0), ValidationError);
  EXPECT_THROW(build_coefficients(0.75, 0, 0), ValidationError);
}

TEST(MaEngine, PrefixSumsMatchHurwitzZeta) {
  // A_n = zeta(a) - zeta(a, n+2), mpmath
  const CoefficientTable t = build_coefficients(0.75, 10000, 0);
  EXPECT_NEAR(t.prefix(1000), 19.060798175210341857, 1e-12);
  EXPECT_NEAR(t.prefix(10000), 36.560214531811339009, 1e-11);
  EXPECT_EQ(t.prefix(-1), 0.0);
}

TEST(MaEngine, WindowWeightsAreNoiseLoadings) {
  const int n = 7, J = 20;
  const CoefficientTable t = build_coefficients(0.8, J, n);
  const auto w = window_weights(t, n);
  ASSERT_EQ(w.size(), static_cast<std::size_t>(J + n));
  // Loading of Z_{n-1-j} in X_0 + ... + X_{n-1}.
  for (int j = 0; j < J + n; ++j) {
    double direct = 0.0;
    for (int k = 0; k < n; ++k) {
      const int i = k - (n - 1 - j);
      if (i >= 0 && i <= J + k) direct += t.a[static_cast<std::size_t>(i)];
    }
    EXPECT_NEAR(w[static_cast<std::size_t>(j)], direct, 1e-13) << j;
  }
}

TEST(MaEngine, VarianceMatchesCovarianceDoubleSum) {
  const int n = 6, J = 15;
  const double s2z = 1.7;
  const CoefficientTable t = build_coefficients(0.7, J, n);
  // Var(sum X_k) from Cov(X_k, X_l) = s2z sum_i a_i a_{i+l-k}, i <= J+k.
  double var = 0.0;
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      const int lo = std::min(k, l), d = std::abs(k - l);
      for (int i = 0; i <= J + lo; ++i) var += s2z * t.a[static_cast<std::size_t>(i)] * t.a[static_cast<std::size_t>(i + d)];
    }
  }
  EXPECT_NEAR(sigma_n2(t, n, s2z).value, var, 1e-12 * var);
}

TEST(MaEngine, VarianceAtThousandMatchesExtendedPrecision) {
  // numpy longdouble, J_max = 50 n
  const CoefficientTable t = build_coefficients(0.75, 50000, 1000);
  EXPECT_NEAR(sigma_n2(t, 1000, 1.0).value, 321301.17679138575, 1e-8 * 321301.0);
  EXPECT_THROW(sigma_n2(t, 60000, 1.0), ConfigurationError);
}

TEST(MaEngine, TailBoundDominatesOmittedTerms) {
  for (auto family : {CoefficientFamily::shifted, CoefficientFamily::unit_start}) {
    const int n = 20, J = 200, far = 400000;
    const CoefficientTable big = build_coefficients(0.75, J + far, n, family);
    double omitted = 0.0;
    for (long j = J + n; j < J + n + far; ++j) {
      const double w = big.window_weight(j, n);
      omitted += w * w;
    }
    const CoefficientTable t = build_coefficients(0.75, J, n, family);
    const double bound = sigma_n2(t, n, 1.0).tail_bound;
    EXPECT_GE(bound, omitted);
    EXPECT_LT(bound, 2.0 * omitted);
  }
}

TEST(MaEngine, DiagnosticsApproachOne) {
  const CoefficientTable t = build_coefficients(0.75, 50 * 10000, 10000 + 4000);
  const DiagnosticsReport d3 = asymptotic_diagnostics(t, 1000, 1.0);
  const DiagnosticsReport d4 = asymptotic_diagnostics(t, 10000, 1.0);
  EXPECT_NEAR(d3.prefix_ratio, 0.84738562334710058, 1e-12);
  EXPECT_NEAR(d4.prefix_ratio, 0.91400536329528348, 1e-12);
  EXPECT_EQ(d3.shift, 100);
  const auto r3 = d3.ratios();
  const auto r4 = d4.ratios();
  for (std::size_t i = 0; i < r3.size(); ++i) {
    EXPECT_LT(std::abs(r4[i] - 1.0), std::abs(r3[i] - 1.0)) << i;
  }
  const DiagnosticsReport z = asymptotic_diagnostics(t, 1000, 0.0);
  EXPECT_TRUE(std::isnan(z.head_ratio));
  EXPECT_NEAR(z.normalized_inner_product, 1.0, 1e-14);
}

TEST(MaEngine, TimeUnitSnapsExactPowers) {
  EXPECT_EQ(time_unit(1000, 2.0 / 3.0), 100);
  EXPECT_EQ(time_unit(8, 2.0 / 3.0), 4);
  EXPECT_EQ(time_unit(500, 2.0 / 3.0), 63);
}

TEST(MaEngine, FirstNonOccurrence) {
  const std::vector<double> S{5.0, 4.0, 3.0, 1.0, 0.5};
  EXPECT_EQ(first_non_occurrence(S, 2.0), 3);
  EXPECT_EQ(first_non_occurrence(S, 6.0), 1);  // index 0 is never tested
  EXPECT_FALSE(first_non_occurrence(S, 0.1).has_value());
}

TEST(MaEngine, DirectAndFftWindowsAgreeWithBruteForce) {
  const int n = 40, J = 120, h = 30;
  const CoefficientTable t = build_coefficients(0.75, J, n + h);
  const auto past = normals(1, J + n);
  const auto future = normals(2, h);
  const auto X = brute_force_X(t, past, future, n, h);
  const WindowPath direct = simulate_window(t, past, future, n, h, 0.1, 1u << 30);
  const WindowPath viafft = simulate_window(t, past, future, n, h, 0.1, 1);
  for (std::size_t i = 0; i < X.size(); ++i) {
    EXPECT_NEAR(direct.X[i], X[i], 1e-11) << i;
    EXPECT_NEAR(viafft.X[i], X[i], 1e-11) << i;
  }
  // Sliding sums equal the window sums of X.
  for (int j = 0; j <= h; ++j) {
    double s = 0.0;
    for (int k = j; k < j + n; ++k) s += X[static_cast<std::size_t>(k)];
    EXPECT_NEAR(direct.S[static_cast<std::size_t>(j)], s, 1e-10) << j;
    EXPECT_NEAR(viafft.S[static_cast<std::size_t>(j)], s, 1e-10) << j;
  }
  EXPECT_NEAR(direct.S0_from_X, direct.S[0], 1e-10);
  EXPECT_EQ(direct.I_n, first_non_occurrence(direct.S, n * 0.1));
  EXPECT_EQ(direct.I_n, viafft.I_n);
}

TEST(MaEngine, SummaryOnlyRunMatchesPath) {
  const int n = 30, J = 90;
  const CoefficientTable t = build_coefficients(0.75, J, n + 10);
  const auto past = normals(3, J + n);
  WindowSimulator sim(t, n, 0);
  WindowSimulator::Workspace ws(sim);
  const WindowSummary s = sim.run(ws, past, {}, 0.0);
  WindowSimulator sim10(t, n, 10);
  WindowSimulator::Workspace ws10(sim10);
  const auto future = normals(4, 10);
  WindowPath path;
  const WindowSummary s10 = sim10.run(ws10, past, future, 0.0, &path);
  EXPECT_DOUBLE_EQ(s.S0, s10.S0);
  EXPECT_EQ(s.in_event, s.S0 >= 0.0);
  EXPECT_EQ(s10.I_n, path.I_n);
  EXPECT_THROW(sim.run(ws, future, {}, 0.0), ValidationError);
}

TEST(MaEngine, WindowSumVarianceProperty) {
  const int n = 25, J = 75, reps = 20000;
  const CoefficientTable t = build_coefficients(0.75, J, n);
  WindowSimulator sim(t, n, 0);
  WindowSimulator::Workspace ws(sim);
  RandomStream rng(99);
  std::vector<double> past(sim.past_length());
  double sum2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    for (auto& z : past) z = rng.normal();
    const double s = sim.run(ws, past, {}, 0.0).S0;
    sum2 += s * s;
  }
  const double var = sigma_n2(t, n, 1.0).value;
  EXPECT_NEAR(sum2 / reps, var, 5 * var * std::sqrt(2.0 / reps));
}

TEST(MaEngine, TinyWindowHandCase) {
  // n = 2, J_max = 3, noises Z_{-3} .. Z_2 = 1, -2, 0.5, 3, -1, 2
  const CoefficientTable t = build_coefficients(0.75, 3, 3);
  const std::vector<double> past{-1.0, 3.0, 0.5, -2.0, 1.0};  // Z_1, Z_0, Z_{-1}, Z_{-2}, Z_{-3}
  const std::vector<double> future{2.0};                       // Z_2
  const double a0 = 1.0, a1 = std::pow(2.0, -0.75), a2 = std::pow(3.0, -0.75), a3 = std::pow(4.0, -0.75),
               a4 = std::pow(5.0, -0.75);
  const double X0 = a0 * 3.0 + a1 * 0.5 + a2 * -2.0 + a3 * 1.0;
  const double X1 = a0 * -1.0 + a1 * 3.0 + a2 * 0.5 + a3 * -2.0 + a4 * 1.0;
  const double X2 = a0 * 2.0 + a1 * -1.0 + a2 * 3.0 + a3 * 0.5 + a4 * -2.0 + std::pow(6.0, -0.75) * 1.0;
  const WindowPath p = simulate_window(t, past, future, 2, 1, 0.0);
  EXPECT_NEAR(p.S[0], X0 + X1, 1e-12);
  EXPECT_NEAR(p.S[1], X1 + X2, 1e-12);
}
