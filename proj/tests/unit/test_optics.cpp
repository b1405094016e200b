#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "photocorr/correlator.hpp"
#include "photocorr/emitter.hpp"
#include "photocorr/fitting.hpp"
#include "photocorr/optics.hpp"
#include "photocorr/pipeline.hpp"

using namespace photocorr;

namespace {

DetectorParams ideal() {
  DetectorParams d;
  d.jitter_fwhm_ps = 0.0;
  return d;
}

HbtConfig ideal_hbt(double ratio = 0.5) {
  HbtConfig c;
  c.splitting_ratio = ratio;
  c.det0 = c.det1 = ideal();
  return c;
}

HomConfig ideal_hom(Polarization pol) {
  HomConfig c;
  c.polarization = pol;
  c.det0 = c.det1 = ideal();
  return c;
}

std::vector<PhotonRecord> uniform_photons(std::size_t n, std::int64_t spacing) {
  std::vector<PhotonRecord> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = {static_cast<std::int64_t>(i) * spacing, static_cast<std::int64_t>(i)};
  }
  return v;
}

bool within_binomial(double k, double n, double p) {
  return std::abs(k - n * p) < 3.0 * std::sqrt(n * p * (1.0 - p));
}

}  // namespace

TEST(Hbt, SinglePhotonGivesOneTag) {
  const std::vector<PhotonRecord> one{{1234, 0}};
  const auto [a, b] = simulate_hbt(one, ideal_hbt(), 1);
  ASSERT_EQ(a.size() + b.size(), 1u);
  const auto& tag = a.empty() ? b.tags()[0] : a.tags()[0];
  EXPECT_EQ(tag.timestamp_ps, 1234);
}

TEST(Hbt, SplittingRatioIsBinomial) {
  const auto photons = uniform_photons(1'000'000, 1000);
  for (const double ratio : {0.5, 0.7}) {
    const auto [a, b] = simulate_hbt(photons, ideal_hbt(ratio), 5);
    EXPECT_EQ(a.size() + b.size(), photons.size());
    EXPECT_TRUE(within_binomial(static_cast<double>(a.size()), 1e6, ratio)) << a.size();
  }
}

TEST(Hbt, DeterministicUnderSeed) {
  const auto photons = generate_photons(EmitterParams{}, 50'000, 3);
  HbtConfig c;
  c.det0.dark_rate_hz = 1e4;
  EXPECT_EQ(simulate_hbt(photons, c, 8), simulate_hbt(photons, c, 8));
  EXPECT_NE(simulate_hbt(photons, c, 8), simulate_hbt(photons, c, 9));
}

TEST(Detector, IdealIsIdentity) {
  std::vector<std::int64_t> arrivals{0, 5, 5, 17, 1000};
  const auto s = apply_detector(arrivals, ideal(), 1);
  ASSERT_EQ(s.size(), arrivals.size());
  for (std::size_t i = 0; i < arrivals.size(); ++i) EXPECT_EQ(s.tags()[i].timestamp_ps, arrivals[i]);
}

TEST(Detector, JitterSigmaFromFwhm) {
  std::vector<std::int64_t> arrivals(1'000'000);
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    arrivals[i] = 1000 + static_cast<std::int64_t>(i) * 10'000;
  }
  DetectorParams d = ideal();
  d.jitter_fwhm_ps = 50.0;
  const auto s = apply_detector(arrivals, d, 2);
  ASSERT_EQ(s.size(), arrivals.size());
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const double e = static_cast<double>(s.tags()[i].timestamp_ps - arrivals[i]);
    sum += e;
    sum2 += e * e;
  }
  const double n = static_cast<double>(arrivals.size());
  const double sd = std::sqrt(sum2 / n - (sum / n) * (sum / n));
  EXPECT_NEAR(sd, 50.0 / 2.3548, 0.01 * 21.23);
  EXPECT_NEAR(sum / n, 0.0, 0.2);
}

TEST(Detector, EfficiencyZeroLeavesDarkCounts) {
  std::vector<std::int64_t> arrivals(10'000);
  std::iota(arrivals.begin(), arrivals.end(), 0);
  DetectorParams d = ideal();
  d.efficiency = 0.0;
  EXPECT_TRUE(apply_detector(arrivals, d, 3).empty());

  d.dark_rate_hz = 1e6;
  const std::int64_t span = 10'000'000'000;  // 10 ms: 10^4 expected
  const auto s = apply_detector(arrivals, d, 3, span);
  EXPECT_NEAR(static_cast<double>(s.size()), 1e4, 3.0 * 100.0);
  for (const auto& t : s.tags()) {
    ASSERT_GE(t.timestamp_ps, 0);
    ASSERT_LT(t.timestamp_ps, span);
  }
}

TEST(Detector, EfficiencyIsBinomial) {
  std::vector<std::int64_t> arrivals(1'000'000);
  std::iota(arrivals.begin(), arrivals.end(), 0);
  DetectorParams d = ideal();
  d.efficiency = 0.5;
  const auto s = apply_detector(arrivals, d, 4);
  EXPECT_TRUE(within_binomial(static_cast<double>(s.size()), 1e6, 0.5));
}

TEST(Detector, DeadTimeAndClamp) {
  std::vector<std::int64_t> arrivals;
  for (std::int64_t t = 0; t < 100'000; t += 7) arrivals.push_back(t);
  DetectorParams d;
  d.dead_time_ps = 100;
  d.jitter_fwhm_ps = 200.0;
  const auto s = apply_detector(arrivals, d, 5);
  ASSERT_FALSE(s.empty());
  EXPECT_GE(s.tags()[0].timestamp_ps, 0);
  for (std::size_t i = 1; i < s.size(); ++i) {
    ASSERT_GE(s.tags()[i].timestamp_ps - s.tags()[i - 1].timestamp_ps, 100);
  }
}

TEST(Detector, RejectsBadParams) {
  DetectorParams d;
  d.efficiency = 1.5;
  EXPECT_THROW(d.validate(), std::invalid_argument);
  d = {};
  d.dead_time_ps = -1;
  EXPECT_THROW(d.validate(), std::invalid_argument);
  const std::vector<std::int64_t> unsorted{5, 4};
  EXPECT_THROW(apply_detector(unsorted, DetectorParams{}, 1), std::invalid_argument);
}

TEST(Hom, CoincidenceProbabilityClosedForm) {
  EXPECT_DOUBLE_EQ(pair_coincidence_probability(0.0), 0.5);
  EXPECT_DOUBLE_EQ(pair_coincidence_probability(1.0), 0.0);
  HomSimulator sim(ideal_hom(Polarization::co), {1.0, 190.0}, 1, 0);
  EXPECT_NEAR(pair_coincidence_probability(sim.interference(190)), 0.5 * (1.0 - std::exp(-1.0)),
              1e-15);
  EXPECT_NEAR(0.5 * (1.0 - std::exp(-1.0)), 0.3161, 1e-4);
  HomSimulator cross(ideal_hom(Polarization::cross), {1.0, 190.0}, 1, 0);
  EXPECT_EQ(cross.interference(0), 0.0);
}

namespace {

struct PairOutcome {
  double trials = 0;
  double coincidences = 0;
  double bunched0 = 0;
  double bunched1 = 0;
};

// Many isolated two-photon trials. Pulse 2i takes the long arm and pulse
// 2i + 1 the short one in a quarter of trials; those arrive exactly at
// base + delay and base + delay + dt, which identifies them with zero jitter.
PairOutcome hom_pair_trials(Polarization pol, double v, std::int64_t dt, std::size_t n_trials) {
  const std::int64_t T = 12'500;
  std::vector<PhotonRecord> photons;
  photons.reserve(2 * n_trials);
  for (std::size_t i = 0; i < n_trials; ++i) {
    const auto base = static_cast<std::int64_t>(i) * 10 * T;
    const auto k = static_cast<std::int64_t>(2 * i);
    photons.push_back({base, k});
    photons.push_back({base + T + dt, k + 1});
  }
  const auto [a, b] = simulate_hom(photons, ideal_hom(pol), {v, 190.0}, 21);
  std::vector<int> in_a(n_trials), in_b(n_trials);
  std::vector<bool> is_pair(n_trials, true);
  for (const auto* s : {&a, &b}) {
    for (const auto& t : s->tags()) {
      const auto i = static_cast<std::size_t>(t.timestamp_ps / (10 * T));
      const auto rel = t.timestamp_ps - static_cast<std::int64_t>(i) * 10 * T;
      if (rel != T && rel != T + dt) is_pair[i] = false;
      ++(s == &a ? in_a : in_b)[i];
    }
  }
  PairOutcome out;
  for (std::size_t i = 0; i < n_trials; ++i) {
    if (!is_pair[i] || in_a[i] + in_b[i] != 2) continue;
    out.trials += 1;
    if (in_a[i] == 1) out.coincidences += 1;
    if (in_a[i] == 2) out.bunched0 += 1;
    if (in_b[i] == 2) out.bunched1 += 1;
  }
  return out;
}

}  // namespace

TEST(Hom, InterferingPairFrequencyMatchesProbability) {
  const auto r = hom_pair_trials(Polarization::co, 1.0, 190, 4'000'000);
  ASSERT_GT(r.trials, 9e5);
  EXPECT_TRUE(within_binomial(r.coincidences, r.trials, 0.5 * (1.0 - std::exp(-1.0))))
      << r.coincidences / r.trials;
}

TEST(Hom, CrossPolarizedPairsAreClassical) {
  const auto r = hom_pair_trials(Polarization::cross, 1.0, 190, 1'000'000);
  EXPECT_TRUE(within_binomial(r.coincidences, r.trials, 0.5));
  EXPECT_TRUE(within_binomial(r.bunched0, r.trials, 0.25));
  EXPECT_TRUE(within_binomial(r.bunched1, r.trials, 0.25));
}

TEST(Hom, PerfectOverlapNeverCoincides) {
  // dt = 0 makes the long-arm photon of one pulse meet the short-arm photon
  // of the next at the same instant.
  const std::int64_t T = 12'500;
  std::vector<PhotonRecord> photons;
  for (std::int64_t i = 0; i < 200'000; ++i) {
    photons.push_back({i * 10 * T, 2 * i});
    photons.push_back({i * 10 * T + T, 2 * i + 1});
  }
  const auto [a, b] = simulate_hom(photons, ideal_hom(Polarization::co), {1.0, 190.0}, 4);
  const auto h = correlate(a, b, HistogramSpec::symmetric(1, 1));
  // Only same-instant arrivals at T; all of them must have bunched.
  std::size_t at_t = 0;
  for (const auto* s : {&a, &b}) {
    for (const auto& t : s->tags()) at_t += (t.timestamp_ps % (10 * T)) == T;
  }
  EXPECT_GT(at_t, 150'000u);
  EXPECT_EQ(h.counts[1], 0u);
}

TEST(Hom, RoutingConservesPhotons) {
  const auto photons = generate_photons(EmitterParams{}, 300'000, 6);
  for (const auto pol : {Polarization::co, Polarization::cross}) {
    const auto [a, b] = simulate_hom(photons, ideal_hom(pol), {0.95, 190.0}, 7);
    EXPECT_EQ(a.size() + b.size(), photons.size());
  }
  const auto [a, b] = simulate_hbt(photons, ideal_hbt(), 7);
  EXPECT_EQ(a.size() + b.size(), photons.size());
}

TEST(Hom, DeterministicUnderSeed) {
  const auto photons = generate_photons(EmitterParams{}, 50'000, 3);
  const HomConfig c;
  EXPECT_EQ(simulate_hom(photons, c, {0.9, 190.0}, 8), simulate_hom(photons, c, {0.9, 190.0}, 8));
  EXPECT_NE(simulate_hom(photons, c, {0.9, 190.0}, 8), simulate_hom(photons, c, {0.9, 190.0}, 9));
}

TEST(Hom, CrossPolarizedPeakRatios) {
  EmitterParams e;
  e.tau1_ps = 500.0;
  HomConfig c;
  c.polarization = Polarization::cross;
  const double T = 12'500.0;
  CorrelatorSink sink(HistogramSpec::symmetric(50, 4 * 12'500 + 6'250));
  run_hom(e, c, 10'000'000, 31, sink);
  const auto areas = peak_areas(sink.histogram(), T, T, 4);
  double side = 0.0;
  for (const int n : {-4, -3, -2, 2, 3, 4}) side += static_cast<double>(areas.at(n));
  const double per_peak = side / 6.0;
  const auto check = [&](double area, double expected, double n_peaks) {
    const double r = area / (n_peaks * per_peak);
    const double sigma = r * std::sqrt(1.0 / area + 1.0 / side);
    EXPECT_NEAR(r, expected, 3.0 * sigma) << "sigma " << sigma;
  };
  check(static_cast<double>(areas.at(0)), 0.5, 1.0);
  check(static_cast<double>(areas.at(-1) + areas.at(1)), 0.75, 2.0);
}

TEST(Hom, CoPolarizedHistogramMatchesModel) {
  EmitterParams e;
  e.v_intrinsic = 0.95;
  CorrelatorSink sink(HistogramSpec::symmetric(50, 3 * 12'500));
  run_hom(e, HomConfig{}, 4'000'000, 12, sink);
  HomModelParams shape;
  shape.dip_contrast = 0.95;
  const auto fit = fit_hom_amplitude(sink.histogram(), shape);
  EXPECT_GE(fit.chi2_per_dof, 0.8);
  EXPECT_LE(fit.chi2_per_dof, 1.3);
}
