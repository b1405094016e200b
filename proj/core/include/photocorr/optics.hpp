#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "photocorr/emitter.hpp"
#include "photocorr/irf.hpp"
#include "photocorr/rng.hpp"
#include "photocorr/timetag.hpp"

namespace photocorr {

struct DetectorParams {
  double efficiency = 1.0;
  /// Per-detector jitter. Two of these in quadrature give a 50 ps system IRF.
  double jitter_fwhm_ps = kSystemIrfFwhmPs / std::numbers::sqrt2;
  double dark_rate_hz = 0.0;
  std::int64_t dead_time_ps = 0;

  void validate() const;
};

struct HbtConfig {
  /// Probability that a photon is sent to detector 0.
  double splitting_ratio = 0.5;
  DetectorParams det0;
  DetectorParams det1;

  void validate() const;
};

enum class Polarization { co, cross };

/// Which meeting photon pairs may interfere at the second beam splitter.
enum class HomPairing {
  /// Long-arm photon of cycle k with the short-arm photon of cycle k + 1.
  subsequent_cycles,
  /// Any nearest-neighbour pair from opposite arms, whatever its cycles.
  any_overlap,
};

struct HomConfig {
  /// Long-minus-short path delay of the unbalanced interferometer.
  std::int64_t delay_ps = 12'500;
  Polarization polarization = Polarization::co;
  /// Probability of taking the long arm at the first beam splitter.
  double bs1_ratio = 0.5;
  /// Transmission of the recombining beam splitter.
  double bs2_ratio = 0.5;
  HomPairing pairing = HomPairing::subsequent_cycles;
  DetectorParams det0;
  DetectorParams det1;

  void validate() const;
};

/// Source properties that govern two-photon interference at the second
/// beam splitter.
struct TwoPhotonCoherence {
  double v_intrinsic = 1.0;
  double tau_dip_ps = 190.0;

  static TwoPhotonCoherence of(const EmitterParams& p) { return {p.v_intrinsic, p.tau_dip_ps}; }
};

/// Coincidence probability for a photon pair meeting at a beam splitter with
/// transmission t and overlap `interference` in [0,1]: t^2 + r^2 - 2 t r I.
inline double pair_coincidence_probability(double interference, double transmission = 0.5) {
  const double r = 1.0 - transmission;
  return transmission * transmission + r * r - 2.0 * transmission * r * interference;
}

/// Streaming detector model: efficiency, Gaussian jitter, dark counts and
/// dead time. Arrivals are pushed in non-decreasing order; tags come out
/// sorted once they can no longer be preceded by later arrivals.
class DetectorChannel {
 public:
  /// Dark counts are drawn over [0, dark_span_end_ps).
  DetectorChannel(const DetectorParams& params, std::uint64_t seed, std::uint16_t channel,
                  std::int64_t dark_span_end_ps);

  void push(std::int64_t arrival_ps);
  /// Declares that all later arrivals are >= `input_frontier_ps` and emits
  /// every tag that is now final.
  void advance(std::int64_t input_frontier_ps, std::vector<TimeTag>& out);
  /// Flushes everything still pending.
  void finish(std::vector<TimeTag>& out);
  /// Every tag emitted from now on is >= this.
  std::int64_t released_until() const noexcept { return released_until_; }

  /// Jitter is truncated at this many standard deviations so streamed output
  /// is identical to a single-pass run.
  static constexpr double kJitterClampSigmas = 10.0;

 private:
  void release(std::int64_t limit_ps, std::vector<TimeTag>& out);

  DetectorParams params_;
  std::uint16_t channel_;
  Engine rng_;
  Engine dark_rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> gauss_{0.0, 1.0};
  std::exponential_distribution<double> dark_gap_{1.0};
  double sigma_ps_;
  std::int64_t margin_ps_;
  double dark_span_end_ps_;
  double next_dark_ps_ = 0.0;
  std::int64_t last_accepted_ = std::numeric_limits<std::int64_t>::min();
  std::int64_t released_until_ = 0;
  std::vector<std::int64_t> pending_;
  std::vector<std::int64_t> ready_;
};

/// Streaming HBT setup: a beam splitter feeding two detectors.
class HbtSimulator {
 public:
  /// `span_end_ps` is the acquisition end used for dark counts.
  HbtSimulator(const HbtConfig& cfg, std::uint64_t seed, std::int64_t span_end_ps);

  /// `photons` must continue the emission-time order of earlier pushes;
  /// `frontier_ps` bounds every later emission time from below.
  void push(std::span<const PhotonRecord> photons, std::int64_t frontier_ps,
            std::vector<TimeTag>& out0, std::vector<TimeTag>& out1);
  void finish(std::vector<TimeTag>& out0, std::vector<TimeTag>& out1);
  /// Lower bound on every tag still to come on either output.
  std::int64_t output_frontier() const noexcept {
    return std::min(det0_.released_until(), det1_.released_until());
  }

 private:
  HbtConfig cfg_;
  Engine route_rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  DetectorChannel det0_;
  DetectorChannel det1_;
};

/// Streaming unbalanced Mach-Zehnder HOM interferometer.
class HomSimulator {
 public:
  HomSimulator(const HomConfig& cfg, const TwoPhotonCoherence& coherence, std::uint64_t seed,
               std::int64_t span_end_ps);

  void push(std::span<const PhotonRecord> photons, std::int64_t frontier_ps,
            std::vector<TimeTag>& out0, std::vector<TimeTag>& out1);
  void finish(std::vector<TimeTag>& out0, std::vector<TimeTag>& out1);
  std::int64_t output_frontier() const noexcept {
    return std::min(det0_.released_until(), det1_.released_until());
  }

  /// Interference overlap for two photons meeting with this arrival spread.
  double interference(std::int64_t delta_ps) const;

  struct Stats {
    std::uint64_t pairs = 0;
    std::uint64_t unpaired = 0;
  };
  const Stats& stats() const noexcept { return stats_; }

 private:
  struct Arrival {
    std::int64_t time_ps;
    std::uint64_t sequence;
    std::int64_t pulse_index;
    bool long_arm;
  };

  void scan(const Arrival& a);
  void emit_single(const Arrival& a);
  void emit_pair(const Arrival& first, const Arrival& second);
  std::int64_t detector_frontier(std::int64_t arrival_frontier) const;

  HomConfig cfg_;
  TwoPhotonCoherence coherence_;
  Engine bs1_rng_;
  Engine bs2_rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  DetectorChannel det0_;
  DetectorChannel det1_;
  std::uint64_t sequence_ = 0;
  std::vector<Arrival> pending_;
  std::vector<Arrival> ready_;
  // Pairing scan state: `held_` waits for a partner, `candidate_` is an
  // opposite-arm partner awaiting one arrival of lookahead.
  std::optional<Arrival> held_;
  std::optional<Arrival> candidate_;
  Stats stats_;
};

/// Applies the detector model to sorted arrival times. `span_end_ps` bounds
/// the dark-count interval; 0 means the last arrival.
TagStream apply_detector(std::span<const std::int64_t> arrivals_ps, const DetectorParams& params,
                         std::uint64_t seed, std::int64_t span_end_ps = 0,
                         std::uint16_t channel = 0);

/// Routes photons through the HBT splitter. Channel 0 and 1 streams.
std::pair<TagStream, TagStream> simulate_hbt(std::span<const PhotonRecord> photons,
                                             const HbtConfig& cfg, std::uint64_t seed,
                                             std::int64_t span_end_ps = 0);

std::pair<TagStream, TagStream> simulate_hom(std::span<const PhotonRecord> photons,
                                             const HomConfig& cfg,
                                             const TwoPhotonCoherence& coherence,
                                             std::uint64_t seed, std::int64_t span_end_ps = 0);

}  // namespace photocorr
