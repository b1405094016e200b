#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "photocorr/timetag.hpp"

namespace photocorr {

struct VisibilityResult {
  double window_ps = 0.0;
  /// Raw counts in [-W/2, W/2).
  std::uint64_t c_co = 0;
  std::uint64_t c_cross_raw = 0;
  /// Cross counts after scaling by normalization_factor.
  double c_cross = 0.0;
  /// Summed |n| >= 2 peak areas of co over those of cross.
  double normalization_factor = 1.0;
  double visibility = 0.0;
  /// Poisson error propagated through all four counts.
  double visibility_err = 0.0;
  /// C_co(W) / C_co(t_rep).
  double retained_fraction = 0.0;
};

/// 1 - C_co(W) / C_cross(W) after normalizing cross to co by their |n| >= 2
/// peak areas. W is the total window width. Both histograms must share one
/// bin geometry that covers at least the n = +-2 peaks.
/// Throws std::domain_error when the cross window is empty.
VisibilityResult visibility(const CorrelationHistogram& co, const CorrelationHistogram& cross,
                            double window_ps, double t_rep_ps);

struct SweepEntry {
  double window_ps = 0.0;
  std::optional<VisibilityResult> result;
  std::string error;
};

/// visibility() per window. A window that fails records its error and the
/// sweep continues. Windows must be ascending and <= t_rep.
std::vector<SweepEntry> postselection_sweep(const CorrelationHistogram& co,
                                            const CorrelationHistogram& cross,
                                            std::span<const double> windows_ps, double t_rep_ps);

/// "window_ps,visibility,visibility_err,retained_fraction"; failed windows
/// get empty fields.
void write_sweep_csv(std::span<const SweepEntry> sweep, const std::filesystem::path& path);

struct EfficiencyChain {
  double detected_rate_hz = 0.0;
  double setup_efficiency = 1.0;
  double detector_efficiency = 1.0;
  double rep_rate_hz = 1.0;
  double first_lens_rate_hz = 0.0;
  double first_lens_efficiency = 0.0;
};

/// Rate at the first lens = detected / (setup * detector); efficiency is
/// that rate over the repetition rate. Zero efficiency throws
/// std::domain_error; other invalid inputs std::invalid_argument.
EfficiencyChain efficiency_chain(double detected_rate_hz, double setup_efficiency,
                                 double detector_efficiency, double rep_rate_hz);

/// Inverse direction: the detected rate implied by a first-lens efficiency.
EfficiencyChain efficiency_chain_from_first_lens(double first_lens_efficiency,
                                                 double setup_efficiency,
                                                 double detector_efficiency, double rep_rate_hz);

}  // namespace photocorr
