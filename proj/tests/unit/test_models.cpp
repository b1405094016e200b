#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "oracles.hpp"
#include "photocorr/models.hpp"

using namespace photocorr;

namespace {

const double kSigma50 = sigma_from_fwhm(50.0);

HomModelParams device(double v) {
  HomModelParams p;
  p.dip_contrast = v;
  return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(Irf, SigmaFromFwhm) { EXPECT_NEAR(kSigma50, 21.233045007200477, 1e-12); }

TEST(Erfcx, KnownValues) {
  EXPECT_NEAR(erfcx(0.0), 1.0, 1e-15);
  EXPECT_NEAR(erfcx(1.0), 0.42758357615580700442, 1e-15);
  EXPECT_NEAR(erfcx(30.0), 0.018795888861416751, 1e-16);
  EXPECT_NEAR(rel(erfcx(-2.0), std::exp(4.0) * std::erfc(-2.0)), 0.0, 1e-14);
  EXPECT_NEAR(rel(erfcx(1e6), 1.0 / (1e6 * std::sqrt(std::numbers::pi))), 0.0, 1e-12);
}

TEST(Kernel, ReducesToExponential) {
  EXPECT_NEAR(exp_gauss_kernel(2350.0, 2350.0, 0.0), 0.36787944117144233, 1e-15);
  EXPECT_EQ(exp_gauss_kernel(-100.0, 100.0, 0.0), exp_gauss_kernel(100.0, 100.0, 0.0));
}

TEST(Kernel, ValueAtZero) {
  for (const double tau : {190.0, 2350.0}) {
    for (const double s : {5.0, 21.23, 50.0}) {
      const double expected = std::exp(s * s / (2 * tau * tau)) * std::erfc(s / (std::sqrt(2.0) * tau));
      EXPECT_NEAR(rel(exp_gauss_kernel(0.0, tau, s), expected), 0.0, 1e-13);
    }
  }
}

TEST(Kernel, MatchesQuadratureOracle) {
  for (const double tau : {2350.0, 190.0}) {
    for (const double s : {21.23, 50.0}) {
      for (int i = -200; i <= 200; ++i) {
        const double t = i * 10.0 * tau / 200.0;
        ASSERT_LT(rel(exp_gauss_kernel(t, tau, s), oracle::kernel_quadrature(t, tau, s)), 1e-9)
            << t << ' ' << tau << ' ' << s;
      }
    }
  }
}

TEST(Kernel, SymmetricMonotoneFiniteFarOut) {
  double prev = exp_gauss_kernel(0.0, 179.06, 21.23);
  for (double t = 1.0; t < 200'000.0; t *= 1.1) {
    const double k = exp_gauss_kernel(t, 179.06, 21.23);
    EXPECT_EQ(k, exp_gauss_kernel(-t, 179.06, 21.23));
    EXPECT_LE(k, prev);
    EXPECT_TRUE(std::isfinite(k));
    EXPECT_GE(k, 0.0);
    prev = k;
  }
  EXPECT_THROW(exp_gauss_kernel(0.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(exp_gauss_kernel(0.0, 1.0, -1.0), std::invalid_argument);
}

TEST(Decay, OneSidedMatchesQuadrature) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double tau = 2350.0, s = kSigma50;
  for (const double t : {-300.0, -50.0, 0.0, 20.0, 1000.0, 20'000.0}) {
    // Gaussian-variable form over u = (t - x) / sigma with x >= 0 the decay time.
    auto f = [&](double u) {
      const double x = t - s * u;
      return x < 0 ? 0.0 : std::exp(-0.5 * u * u - x / tau) / std::sqrt(2 * std::numbers::pi);
    };
    const double hi = std::min(40.0, t / s);
    const double q = hi > -40.0 ? GK::integrate(f, -40.0, hi, 20, 1e-14) : 0.0;
    if (q < 1e-250) continue;
    EXPECT_LT(rel(exp_gauss_decay(t, tau, s), q), 1e-9) << t;
  }
  EXPECT_EQ(exp_gauss_decay(-1.0, tau, 0.0), 0.0);
  EXPECT_NEAR(exp_gauss_decay(tau, tau, 0.0), std::exp(-1.0), 1e-15);
}

TEST(HbtModel, SigmaZeroTailSum) {
  HbtModelParams p;
  p.irf_fwhm_ps = 0.0;
  p.amplitude = 3.0;
  double tail = 0.0;
  for (int n = 1; n <= 8; ++n) tail += 2.0 * std::exp(-n * 12'500.0 / 3110.0);
  EXPECT_NEAR(rel(hbt_model(0.0, p), 3.0 * tail), 0.0, 1e-13);
}

TEST(HbtModel, FrozenDeviceValue) {
  // Full sum with the 50 ps IRF; the leading n = +-1 term alone is 0.0359.
  HbtModelParams p;
  p.g2_zero = 0.006;
  EXPECT_NEAR(rel(hbt_model(0.0, p), 0.0425569861453479217), 0.0, 1e-11);
  EXPECT_NEAR(2.0 * std::exp(-12'500.0 / 3110.0), 0.0359, 1e-4);
}

TEST(HbtModel, UnitG2MakesPeaksEquivalent) {
  HbtModelParams p;
  p.g2_zero = 1.0;
  const double diff = std::abs(hbt_model(0.0, p) - hbt_model(12'500.0, p));
  EXPECT_LT(diff, std::exp(-12'500.0 / 3110.0));
}

TEST(HomModel, TauQ) { EXPECT_NEAR(device(0.5).tau_q_ps(), 179.0606060606, 1e-9); }

TEST(HomModel, FrozenValues) {
  EXPECT_NEAR(rel(hom_co_model(0.0, device(0.95)), 0.0916956290147132711), 0.0, 1e-11);
  HomModelParams p = device(0.0);
  p.irf_fwhm_ps = 0.0;
  EXPECT_NEAR(rel(hom_cross_model(6'250.0, p), 0.171847284092872952), 0.0, 1e-12);
}

TEST(HomModel, CrossHalfRuleAtSigmaZero) {
  HomModelParams p = device(0.0);
  p.irf_fwhm_ps = 0.0;
  const double T = p.t_rep_ps, e = std::exp(-T / (2.0 * p.tau1_ps));
  double expected = 0.5 * e + 0.75 * (e + std::exp(-1.5 * T / p.tau1_ps));
  for (int n = 2; n <= 8; ++n) {
    expected += std::exp(-(n - 0.5) * T / p.tau1_ps) + std::exp(-(n + 0.5) * T / p.tau1_ps);
  }
  // The n = -1 peak contributes 3/4 e^{-3T/2tau}, n = 1 3/4 e^{-T/2tau}.
  EXPECT_NEAR(rel(hom_cross_model(T / 2.0, p), expected), 0.0, 1e-13);
}

TEST(HomModel, PeakWeights) {
  const HomModelParams p = device(0.0);
  const double side = hom_cross_model(2 * p.t_rep_ps, p);
  const double tail = 2.0 * std::exp(-p.t_rep_ps / p.tau1_ps);
  EXPECT_NEAR(hom_cross_model(0.0, p) / side, 0.5, tail);
  EXPECT_NEAR(hom_cross_model(p.t_rep_ps, p) / side, 0.75, tail);
}

TEST(HomModel, DipLimits) {
  for (double t = -40'000; t <= 40'000; t += 37.0) {
    EXPECT_EQ(hom_co_model(t, device(0.0)), hom_cross_model(t, device(0.7)));
    const double co = hom_co_model(t, device(0.8));
    EXPECT_LE(co, hom_cross_model(t, device(0.8)));
    EXPECT_GE(co, 0.0);
    EXPECT_TRUE(std::isfinite(co));
  }
  HomModelParams full = device(1.0);
  full.irf_fwhm_ps = 0.0;
  // Central peak alone vanishes; what remains at zero delay is side-peak tails.
  double tails = 0.75 * 2.0 * std::exp(-full.t_rep_ps / full.tau1_ps);
  for (int n = 2; n <= 8; ++n) tails += 2.0 * std::exp(-n * full.t_rep_ps / full.tau1_ps);
  EXPECT_NEAR(hom_co_model(0.0, full), tails, 1e-15);
}

TEST(AnalyticVisibility, ZeroContrastGivesZero) {
  for (const double w : {50.0, 400.0, 12'500.0}) {
    EXPECT_NEAR(analytic_visibility(w, device(0.0)).visibility, 0.0, 1e-14);
  }
}

TEST(AnalyticVisibility, IsolatedPeakLimit) {
  HomModelParams p = device(0.9);
  p.tau1_ps = 500.0;
  p.irf_fwhm_ps = 0.0;
  const auto r = analytic_visibility(p.t_rep_ps, p);
  EXPECT_NEAR(r.visibility, 0.9 * p.tau_q_ps() / p.tau1_ps, 1e-4);
  EXPECT_DOUBLE_EQ(r.retained_fraction, 1.0);
}

TEST(AnalyticVisibility, FrozenDeviceSweep) {
  const auto p = device(0.95);
  const struct {
    double w, v, retained;
  } cases[] = {{100.0, 0.775321485824696305, 0.00372721187018675803},
               {400.0, 0.557153180501774232, 0.0287573122074619840},
               {2000.0, 0.185963770536428991, 0.235341291818660212},
               {12'500.0, 0.0512036684790497527, 1.0}};
  for (const auto& c : cases) {
    const auto r = analytic_visibility(c.w, p);
    EXPECT_NEAR(rel(r.visibility, c.v), 0.0, 1e-8) << c.w;
    EXPECT_NEAR(rel(r.retained_fraction, c.retained), 0.0, 1e-8) << c.w;
  }
}

TEST(AnalyticVisibility, MonotoneInWindowWithoutIrf) {
  HomModelParams p = device(1.0);
  p.irf_fwhm_ps = 0.0;
  const double frozen[] = {0.923105341897398094, 0.833177734322350746, 0.588302416241800237,
                           0.195745535650163971};
  const double ws[] = {20.0, 100.0, 400.0, 2000.0};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(rel(analytic_visibility(ws[i], p).visibility, frozen[i]), 0.0, 1e-8);
  }
  double prev = 2.0, prev_retained = 0.0;
  for (double w = 10.0; w <= 12'500.0; w += 10.0) {
    const auto r = analytic_visibility(w, p);
    ASSERT_LE(r.visibility, prev) << w;
    ASSERT_GE(r.retained_fraction, prev_retained) << w;
    prev = r.visibility;
    prev_retained = r.retained_fraction;
  }
}

TEST(AnalyticVisibility, RejectsBadWindow) {
  EXPECT_THROW(analytic_visibility(0.0, device(0.5)), std::invalid_argument);
  EXPECT_THROW(analytic_visibility(13'000.0, device(0.5)), std::invalid_argument);
}

TEST(SolveDipContrast, RootOutsidePhysicalRange) {
  const auto p = device(0.0);
  EXPECT_FALSE(solve_dip_contrast(0.0558, 12'500.0, p).has_value());
  const auto v = solve_dip_contrast(0.0558, 12'500.0, p, 0.0, 2.0);
  ASSERT_TRUE(v.has_value());
  EXPECT_NEAR(*v, 1.03527738489458655, 1e-8);
}

TEST(SolveDipContrast, InvertsAnalyticVisibility) {
  for (const double v : {0.2, 0.6, 0.95}) {
    for (const double w : {100.0, 1000.0, 12'500.0}) {
      const double target = analytic_visibility(w, device(v)).visibility;
      const auto got = solve_dip_contrast(target, w, device(0.0));
      ASSERT_TRUE(got.has_value());
      EXPECT_NEAR(*got, v, 1e-9);
    }
  }
}

TEST(BinAverage, MatchesExactBinIntegral) {
  const HistogramSpec spec(50, -1000, 1000);
  const double tau = 300.0;
  const auto avg = bin_average(spec, [&](double t) { return exp_gauss_kernel(t, tau, kSigma50); });
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  for (std::size_t i = 0; i < spec.bin_count(); ++i) {
    const auto lo = static_cast<double>(spec.bin_lower_ps(i));
    const double exact =
        GK::integrate([&](double t) { return oracle::kernel_quadrature(t, tau, kSigma50); }, lo,
                      lo + 50.0, 10, 1e-12) /
        50.0;
    EXPECT_NEAR(rel(avg[i], exact), 0.0, 1e-5) << i;
  }
}

TEST(ModelCsv, Header) {
  const auto dir = oracle::scratch_dir("model_csv");
  const std::vector<double> d{-1.0, 0.0, 1.0};
  write_model_csv(dir / "m.csv", d, [](double t) { return t * 2.0; });
  std::ifstream in(dir / "m.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "delay_ps,model_value");
  std::getline(in, line);
  EXPECT_EQ(line, "-1,-2");
}
