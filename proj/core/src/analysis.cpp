#include "photocorr/analysis.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "photocorr/correlator.hpp"

namespace photocorr {

namespace {

// Summed areas of the full-period peaks with |n| >= 2 that lie entirely
// inside the histogram.
std::uint64_t side_peak_area(const CorrelationHistogram& h, double t_rep_ps) {
  const auto lo = static_cast<double>(h.spec.delay_min_ps());
  const auto hi = static_cast<double>(h.spec.delay_max_ps());
  std::uint64_t sum = 0;
  int used = 0;
  for (int n = 2;; ++n) {
    const double reach = n * t_rep_ps + t_rep_ps / 2.0;
    if (-reach < lo || reach > hi) break;
    for (const int s : {-1, 1}) {
      const double c = s * n * t_rep_ps;
      sum += integrate_counts(h, c - t_rep_ps / 2.0, c + t_rep_ps / 2.0);
    }
    ++used;
  }
  if (used == 0) throw std::invalid_argument("histogram does not cover the |n| = 2 peaks");
  return sum;
}

// 1 - (a*b)/(c*d) from reduced integer ratios, so that a common factor in
// (b, c) cancels exactly.
double one_minus_ratio(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  __extension__ typedef unsigned __int128 u128;
  u128 num = static_cast<u128>(a) * b;
  u128 den = static_cast<u128>(c) * d;
  u128 x = num;
  u128 y = den;
  while (y != 0) {
    const u128 t = x % y;
    x = y;
    y = t;
  }
  if (x > 1) {
    num /= x;
    den /= x;
  }
  return 1.0 - static_cast<double>(num) / static_cast<double>(den);
}

void check_rate(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be a finite non-negative rate");
  }
}

void check_efficiency(double v, const char* name) {
  if (v == 0.0) throw std::domain_error(std::string(name) + " is zero");
  if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in (0,1]");
}

}  // namespace

VisibilityResult visibility(const CorrelationHistogram& co, const CorrelationHistogram& cross,
                            double window_ps, double t_rep_ps) {
  if (!(co.spec == cross.spec)) {
    throw std::invalid_argument("co and cross histograms must share bin geometry");
  }
  if (!(t_rep_ps > 0.0)) throw std::invalid_argument("t_rep_ps must be positive");
  if (!(window_ps > 0.0) || window_ps > t_rep_ps) {
    throw std::invalid_argument("window must lie in (0, t_rep]");
  }
  const std::uint64_t s_co = side_peak_area(co, t_rep_ps);
  const std::uint64_t s_cross = side_peak_area(cross, t_rep_ps);
  if (s_co == 0 || s_cross == 0) throw std::domain_error("side peaks are empty");

  VisibilityResult r;
  r.window_ps = window_ps;
  r.c_co = integrate_counts(co, -window_ps / 2.0, window_ps / 2.0);
  r.c_cross_raw = integrate_counts(cross, -window_ps / 2.0, window_ps / 2.0);
  if (r.c_cross_raw == 0) {
    throw std::domain_error("visibility undefined: no cross coincidences in window");
  }
  r.normalization_factor = static_cast<double>(s_co) / static_cast<double>(s_cross);
  r.c_cross = static_cast<double>(r.c_cross_raw) * r.normalization_factor;
  r.visibility = one_minus_ratio(r.c_co, s_cross, r.c_cross_raw, s_co);

  const auto inv = [](std::uint64_t n) { return n > 0 ? 1.0 / static_cast<double>(n) : 0.0; };
  r.visibility_err = (1.0 - r.visibility) *
                     std::sqrt(inv(r.c_co) + inv(r.c_cross_raw) + inv(s_co) + inv(s_cross));
  const std::uint64_t full = integrate_counts(co, -t_rep_ps / 2.0, t_rep_ps / 2.0);
  r.retained_fraction =
      full > 0 ? static_cast<double>(r.c_co) / static_cast<double>(full) : 0.0;
  return r;
}

std::vector<SweepEntry> postselection_sweep(const CorrelationHistogram& co,
                                            const CorrelationHistogram& cross,
                                            std::span<const double> windows_ps, double t_rep_ps) {
  for (std::size_t i = 0; i < windows_ps.size(); ++i) {
    if (windows_ps[i] > t_rep_ps) throw std::invalid_argument("window exceeds t_rep");
    if (i > 0 && windows_ps[i] < windows_ps[i - 1]) {
      throw std::invalid_argument("windows must be ascending");
    }
  }
  std::vector<SweepEntry> out;
  out.reserve(windows_ps.size());
  for (const double w : windows_ps) {
    SweepEntry e;
    e.window_ps = w;
    try {
      e.result = visibility(co, cross, w, t_rep_ps);
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_sweep_csv(std::span<const SweepEntry> sweep, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.precision(10);
  out << "window_ps,visibility,visibility_err,retained_fraction\n";
  for (const auto& e : sweep) {
    out << e.window_ps << ',';
    if (e.result) {
      out << e.result->visibility << ',' << e.result->visibility_err << ','
          << e.result->retained_fraction;
    } else {
      out << ",,";
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EfficiencyChain efficiency_chain(double detected_rate_hz, double setup_efficiency,
                                 double detector_efficiency, double rep_rate_hz) {
  check_rate(detected_rate_hz, "detected rate");
  check_efficiency(setup_efficiency, "setup efficiency");
  check_efficiency(detector_efficiency, "detector efficiency");
  check_rate(rep_rate_hz, "repetition rate");
  if (rep_rate_hz == 0.0) throw std::domain_error("repetition rate is zero");
  EfficiencyChain c{detected_rate_hz, setup_efficiency, detector_efficiency, rep_rate_hz};
  c.first_lens_rate_hz = detected_rate_hz / (setup_efficiency * detector_efficiency);
  c.first_lens_efficiency = c.first_lens_rate_hz / rep_rate_hz;
  return c;
}

EfficiencyChain efficiency_chain_from_first_lens(double first_lens_efficiency,
                                                 double setup_efficiency,
                                                 double detector_efficiency, double rep_rate_hz) {
  check_rate(first_lens_efficiency, "first-lens efficiency");
  check_efficiency(setup_efficiency, "setup efficiency");
  check_efficiency(detector_efficiency, "detector efficiency");
  check_rate(rep_rate_hz, "repetition rate");
  EfficiencyChain c{0.0, setup_efficiency, detector_efficiency, rep_rate_hz};
  c.first_lens_efficiency = first_lens_efficiency;
  c.first_lens_rate_hz = first_lens_efficiency * rep_rate_hz;
  c.detected_rate_hz = c.first_lens_rate_hz * setup_efficiency * detector_efficiency;
  return c;
}

}  // namespace photocorr
