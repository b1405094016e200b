#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "photocorr/models.hpp"
#include "photocorr/timetag.hpp"

namespace photocorr {

struct FitResult {
  std::string model;
  std::map<std::string, double> parameters;
  /// Infinite for parameters the data cannot constrain at the optimum.
  std::map<std::string, double> std_errors;
  double chi2 = 0.0;
  int dof = 0;
  double chi2_per_dof = 0.0;
  int n_iterations = 0;
  bool converged = false;
  /// Parameters that ended on a bound.
  std::vector<std::string> boundary_hits;
  /// Parameters held fixed during the fit.
  std::map<std::string, double> fixed;
};

nlohmann::json to_json(const FitResult& r);
void write_fit_json(const FitResult& r, const std::filesystem::path& path);

struct FitRange {
  double min_ps;
  double max_ps;
};

/// Single-exponential decay convolved with the IRF plus a flat baseline:
/// free (amplitude, tau_ps, t0_ps, baseline). If `t_rep_ps` > 0 the tails
/// of earlier excitation pulses are included. Throws std::invalid_argument
/// when fewer than 10 bins in range hold counts.
FitResult fit_lifetime(const CorrelationHistogram& decay, double irf_fwhm_ps,
                       std::optional<FitRange> range = std::nullopt, double t_rep_ps = 0.0);

/// Pulsed autocorrelation fit: free (amplitude, g2_zero >= 0, tau1_ps).
FitResult fit_hbt(const CorrelationHistogram& hist, double t_rep_ps, double irf_fwhm_ps);

/// Co-polarized HOM fit: free (amplitude, dip_contrast in [0,1], tau_dip_ps,
/// tau1_ps unless fixed).
FitResult fit_hom(const CorrelationHistogram& co, double t_rep_ps, double irf_fwhm_ps,
                  std::optional<double> fixed_tau1_ps = std::nullopt);

/// Linear fit of a single amplitude scaling `shape` (expected counts per bin
/// at amplitude 1). Weighted as the nonlinear fits.
FitResult fit_amplitude(const CorrelationHistogram& hist, std::span<const double> shape,
                        std::optional<FitRange> range = std::nullopt);

/// Amplitude-only comparison against hom_co_model with all shape parameters
/// taken from `shape` (its amplitude is ignored).
FitResult fit_hom_amplitude(const CorrelationHistogram& co, const HomModelParams& shape);

/// Weighted sum of squares with per-bin variance max(counts, 1).
double weighted_chi2(const CorrelationHistogram& hist, std::span<const double> expected,
                     std::optional<FitRange> range = std::nullopt);

/// Expected counts per bin for the lifetime model.
std::vector<double> lifetime_expected(const HistogramSpec& spec, double amplitude, double tau_ps,
                                      double t0_ps, double baseline, double irf_fwhm_ps,
                                      double t_rep_ps = 0.0);

}  // namespace photocorr
