#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "photocorr/irf.hpp"
#include "photocorr/timetag.hpp"

namespace photocorr {

/// e^{x^2} erfc(x), accurate for all finite x.
double erfcx(double x);

/// Exact convolution of e^{-|t|/tau} with a unit-area Gaussian of standard
/// deviation sigma. Reduces to e^{-|t|/tau} for sigma == 0.
double exp_gauss_kernel(double t_ps, double tau_ps, double sigma_ps);

/// One-sided decay e^{-t/tau} for t >= 0, convolved with a unit-area
/// Gaussian of standard deviation sigma.
double exp_gauss_decay(double t_ps, double tau_ps, double sigma_ps);

/// Pulsed autocorrelation: a reduced zero-delay peak plus unit
/// side peaks at multiples of the repetition period.
struct HbtModelParams {
  double amplitude = 1.0;
  double g2_zero = 0.0;
  double tau1_ps = 3110.0;
  double t_rep_ps = 12'500.0;
  int n_side_peaks = 8;
  double irf_fwhm_ps = kSystemIrfFwhmPs;

  void validate() const;
};

/// Five-peak HOM pattern with weights 1/2, 3/4, 1 at |n| = 0, 1, >=2 and a
/// coherence dip of contrast `dip_contrast` and width `tau_dip_ps` at zero
/// delay.
struct HomModelParams {
  double amplitude = 1.0;
  double tau1_ps = 3110.0;
  double t_rep_ps = 12'500.0;
  double dip_contrast = 0.0;
  double tau_dip_ps = 190.0;
  double irf_fwhm_ps = kSystemIrfFwhmPs;
  int n_side_peaks = 8;

  void validate() const;
  /// Harmonic combination 1/(1/tau1 + 1/tau_dip).
  double tau_q_ps() const { return 1.0 / (1.0 / tau1_ps + 1.0 / tau_dip_ps); }
};

double hbt_model(double tau_ps, const HbtModelParams& p);
double hom_co_model(double tau_ps, const HomModelParams& p);
/// hom_co_model with zero dip contrast.
double hom_cross_model(double tau_ps, const HomModelParams& p);

struct AnalyticVisibility {
  double visibility = 0.0;
  double retained_fraction = 0.0;
};

/// 1 - (co / cross) integrated over [-W/2, W/2], and the co integral over
/// that window relative to [-T/2, T/2]. Adaptive quadrature, rel. tol 1e-10.
AnalyticVisibility analytic_visibility(double window_ps, const HomModelParams& p);

/// Finds the dip contrast for which analytic_visibility(window) equals
/// `target`, searching [lo, hi]. Returns nullopt when no root is bracketed.
std::optional<double> solve_dip_contrast(double target_visibility, double window_ps,
                                         HomModelParams p, double lo = 0.0, double hi = 1.0);

/// Model averaged over each histogram bin (3-point Gauss-Legendre), i.e.
/// expected counts per bin when the model is in counts-per-bin units.
std::vector<double> bin_average(const HistogramSpec& spec,
                                const std::function<double(double)>& model);

/// "delay_ps,model_value" for plotting overlays.
void write_model_csv(const std::filesystem::path& path, std::span<const double> delays_ps,
                     const std::function<double(double)>& model);

}  // namespace photocorr
