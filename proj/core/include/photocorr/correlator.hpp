#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "photocorr/timetag.hpp"

namespace photocorr {

/// Full (ordered-pair) cross-correlation: every pair (a, b) with
/// t_b - t_a in [delay_min, delay_max). Two-pointer sweep, O(n_a + n_b +
/// pairs). With `threads` > 1 stream A is split into contiguous blocks; the
/// result is identical to the sequential one.
CorrelationHistogram correlate(const TagStream& a, const TagStream& b, const HistogramSpec& spec,
                               unsigned threads = 1);
CorrelationHistogram correlate(std::span<const TimeTag> a, std::span<const TimeTag> b,
                               const HistogramSpec& spec, unsigned threads = 1);

/// Start-stop (classic TCSPC) mode: each a-tag counts only the first b-tag
/// whose delay falls inside the histogram range.
CorrelationHistogram correlate_start_stop(const TagStream& a, const TagStream& b,
                                          const HistogramSpec& spec);
CorrelationHistogram correlate_start_stop(std::span<const TimeTag> a,
                                          std::span<const TimeTag> b, const HistogramSpec& spec);

/// Incremental full correlator for streams delivered in chunks.
class StreamingCorrelator {
 public:
  explicit StreamingCorrelator(const HistogramSpec& spec);

  /// Appends sorted tags (continuing earlier chunks) and declares that every
  /// later tag on either stream is >= frontier_ps.
  void push(std::span<const TimeTag> a, std::span<const TimeTag> b, std::int64_t frontier_ps);
  CorrelationHistogram finish();

 private:
  void process(std::int64_t frontier_ps);

  CorrelationHistogram hist_;
  std::vector<TimeTag> a_;
  std::vector<TimeTag> b_;
  std::size_t b_start_ = 0;
  std::int64_t last_a_ = 0;
  std::int64_t last_b_ = 0;
};

/// Integrates counts of bins whose centre lies in [nT - W/2, nT + W/2) for
/// n in [-n_peaks, n_peaks]. Throws std::out_of_range if a window leaves the
/// histogram and std::invalid_argument if window_ps > t_rep_ps.
std::map<int, std::uint64_t> peak_areas(const CorrelationHistogram& hist, double t_rep_ps,
                                        double window_ps, int n_peaks);

/// Counts in bins whose centre lies in [lo, hi).
std::uint64_t integrate_counts(const CorrelationHistogram& hist, double lo_ps, double hi_ps);

/// "delay_ps,counts" with one row per bin centre, plus a JSON sidecar
/// (`<path>.json`) holding the bin geometry and totals.
void write_histogram_csv(const CorrelationHistogram& hist, const std::filesystem::path& path);
/// Reads the CSV; geometry comes from the sidecar when present, otherwise it
/// is inferred from the bin centres.
CorrelationHistogram read_histogram_csv(const std::filesystem::path& path);

}  // namespace photocorr
