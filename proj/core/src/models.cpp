#include "photocorr/models.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace photocorr {

namespace {

constexpr double kQuadratureTolerance = 1e-10;
constexpr unsigned kQuadratureDepth = 30;

// Beyond this, erfc(x1) == 2 in double precision and the opposite tail term
// is below 1e-18 of the result.
constexpr double kFastPathArgument = 6.5;

double integrate(const std::function<double(double)>& f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  double error = 0.0;
  return gauss_kronrod<double, 61>::integrate(f, a, b, kQuadratureDepth, kQuadratureTolerance,
                                              &error);
}

// Integral over a symmetric window of an even function.
double integrate_even(const std::function<double(double)>& f, double half_width) {
  return 2.0 * integrate(f, 0.0, half_width);
}

}  // namespace

double erfcx(double x) {
  if (x < 0.0) {
    // erfc(x) -> 2; e^{x^2} overflows for x < -26.6.
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  // Asymptotic series; at x >= 25 eight terms reach double precision.
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int n = 1; n <= 8; ++n) {
    term *= -(2.0 * n - 1.0) * inv2x2;
    sum += term;
  }
  return sum / (x * std::sqrt(std::numbers::pi));
}

double exp_gauss_kernel(double t_ps, double tau_ps, double sigma_ps) {
  if (!(tau_ps > 0.0)) throw std::invalid_argument("kernel tau must be positive");
  if (!(sigma_ps >= 0.0)) throw std::invalid_argument("kernel sigma must be non-negative");
  const double t = std::abs(t_ps);
  if (sigma_ps == 0.0) return std::exp(-t / tau_ps);

  const double s2 = std::numbers::sqrt2 * sigma_ps;
  const double shift = sigma_ps * sigma_ps / tau_ps;
  const double x1 = (shift - t) / s2;
  const double growth = sigma_ps * sigma_ps / (2.0 * tau_ps * tau_ps);
  if (x1 <= -kFastPathArgument) return std::exp(growth - t / tau_ps);

  const double x2 = (shift + t) / s2;
  const double gauss = std::exp(-t * t / (2.0 * sigma_ps * sigma_ps));
  const double term2 = gauss * erfcx(x2);
  const double term1 =
      x1 >= 0.0 ? gauss * erfcx(x1) : std::exp(growth - t / tau_ps) * std::erfc(x1);
  return 0.5 * (term1 + term2);
}

double exp_gauss_decay(double t_ps, double tau_ps, double sigma_ps) {
  if (!(tau_ps > 0.0)) throw std::invalid_argument("decay tau must be positive");
  if (!(sigma_ps >= 0.0)) throw std::invalid_argument("decay sigma must be non-negative");
  if (sigma_ps == 0.0) {
    if (t_ps > 0.0) return std::exp(-t_ps / tau_ps);
    return t_ps == 0.0 ? 0.5 : 0.0;
  }
  const double x = (sigma_ps * sigma_ps / tau_ps - t_ps) / (std::numbers::sqrt2 * sigma_ps);
  if (x >= 0.0) {
    return 0.5 * std::exp(-t_ps * t_ps / (2.0 * sigma_ps * sigma_ps)) * erfcx(x);
  }
  const double growth = sigma_ps * sigma_ps / (2.0 * tau_ps * tau_ps);
  return 0.5 * std::exp(growth - t_ps / tau_ps) * std::erfc(x);
}

void HbtModelParams::validate() const {
  if (!(amplitude > 0.0)) throw std::invalid_argument("amplitude must be positive");
  if (!(g2_zero >= 0.0)) throw std::invalid_argument("g2_zero must be non-negative");
  if (!(tau1_ps > 0.0)) throw std::invalid_argument("tau1_ps must be positive");
  if (!(t_rep_ps > 0.0)) throw std::invalid_argument("t_rep_ps must be positive");
  if (n_side_peaks < 1) throw std::invalid_argument("n_side_peaks must be >= 1");
  if (!(irf_fwhm_ps >= 0.0)) throw std::invalid_argument("irf_fwhm_ps must be non-negative");
}

void HomModelParams::validate() const {
  if (!(amplitude > 0.0)) throw std::invalid_argument("amplitude must be positive");
  if (!(tau1_ps > 0.0)) throw std::invalid_argument("tau1_ps must be positive");
  if (!(t_rep_ps > 0.0)) throw std::invalid_argument("t_rep_ps must be positive");
  if (!(dip_contrast >= 0.0 && dip_contrast <= 1.0)) {
    throw std::invalid_argument("dip_contrast must lie in [0,1]");
  }
  if (!(tau_dip_ps > 0.0)) throw std::invalid_argument("tau_dip_ps must be positive");
  if (!(irf_fwhm_ps >= 0.0)) throw std::invalid_argument("irf_fwhm_ps must be non-negative");
  if (n_side_peaks < 2) throw std::invalid_argument("n_side_peaks must be >= 2");
}

double hbt_model(double tau_ps, const HbtModelParams& p) {
  const double sigma = sigma_from_fwhm(p.irf_fwhm_ps);
  double sum = p.g2_zero * exp_gauss_kernel(tau_ps, p.tau1_ps, sigma);
  for (int n = 1; n <= p.n_side_peaks; ++n) {
    sum += exp_gauss_kernel(tau_ps - n * p.t_rep_ps, p.tau1_ps, sigma) +
           exp_gauss_kernel(tau_ps + n * p.t_rep_ps, p.tau1_ps, sigma);
  }
  return p.amplitude * sum;
}

double hom_co_model(double tau_ps, const HomModelParams& p) {
  const double sigma = sigma_from_fwhm(p.irf_fwhm_ps);
  const double tau1 = p.tau1_ps;
  const double T = p.t_rep_ps;
  double centre = exp_gauss_kernel(tau_ps, tau1, sigma);
  if (p.dip_contrast != 0.0) {
    centre -= p.dip_contrast * exp_gauss_kernel(tau_ps, p.tau_q_ps(), sigma);
  }
  double sum = 0.5 * centre + 0.75 * (exp_gauss_kernel(tau_ps - T, tau1, sigma) +
                                      exp_gauss_kernel(tau_ps + T, tau1, sigma));
  for (int n = 2; n <= p.n_side_peaks; ++n) {
    sum += exp_gauss_kernel(tau_ps - n * T, tau1, sigma) +
           exp_gauss_kernel(tau_ps + n * T, tau1, sigma);
  }
  return p.amplitude * sum;
}

double hom_cross_model(double tau_ps, const HomModelParams& p) {
  HomModelParams cross = p;
  cross.dip_contrast = 0.0;
  return hom_co_model(tau_ps, cross);
}

AnalyticVisibility analytic_visibility(double window_ps, const HomModelParams& p) {
  p.validate();
  if (!(window_ps > 0.0) || window_ps > p.t_rep_ps) {
    throw std::invalid_argument("window must lie in (0, t_rep]");
  }
  const auto co = [&](double t) { return hom_co_model(t, p); };
  const auto cross = [&](double t) { return hom_cross_model(t, p); };
  const double co_w = integrate_even(co, window_ps / 2.0);
  const double cross_w = integrate_even(cross, window_ps / 2.0);
  const double co_full = window_ps == p.t_rep_ps ? co_w : integrate_even(co, p.t_rep_ps / 2.0);
  return {1.0 - co_w / cross_w, co_w / co_full};
}

std::optional<double> solve_dip_contrast(double target_visibility, double window_ps,
                                         HomModelParams p, double lo, double hi) {
  // V is affine in the contrast: the dip enters the co integral linearly.
  const auto at = [&](double v) {
    HomModelParams q = p;
    q.dip_contrast = 0.0;
    const auto co = [&](double t) {
      const double sigma = sigma_from_fwhm(q.irf_fwhm_ps);
      return hom_cross_model(t, q) - 0.5 * v * q.amplitude * exp_gauss_kernel(t, q.tau_q_ps(), sigma);
    };
    const auto cross = [&](double t) { return hom_cross_model(t, q); };
    return 1.0 - integrate_even(co, window_ps / 2.0) / integrate_even(cross, window_ps / 2.0);
  };
  if (!(window_ps > 0.0) || window_ps > p.t_rep_ps) {
    throw std::invalid_argument("window must lie in (0, t_rep]");
  }
  const double v_lo = at(lo);
  const double v_hi = at(hi);
  if ((v_lo - target_visibility) * (v_hi - target_visibility) > 0.0) return std::nullopt;
  return lo + (target_visibility - v_lo) * (hi - lo) / (v_hi - v_lo);
}

std::vector<double> bin_average(const HistogramSpec& spec,
                                const std::function<double(double)>& model) {
  static const double kNode = std::sqrt(3.0 / 5.0) / 2.0;
  const double w = static_cast<double>(spec.bin_width_ps());
  std::vector<double> out(spec.bin_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c = spec.bin_center_ps(i);
    out[i] = (5.0 * model(c - kNode * w) + 8.0 * model(c) + 5.0 * model(c + kNode * w)) / 18.0;
  }
  return out;
}

void write_model_csv(const std::filesystem::path& path, std::span<const double> delays_ps,
                     const std::function<double(double)>& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.precision(12);
  out << "delay_ps,model_value\n";
  for (const double d : delays_ps) out << d << ',' << model(d) << '\n';
}

}  // namespace photocorr
