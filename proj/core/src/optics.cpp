#include "photocorr/optics.hpp"

#include <algorithm>
#include <stdexcept>

namespace photocorr {

namespace {

constexpr std::int64_t kNoLimit = std::numeric_limits<std::int64_t>::max();

void check_ratio(double r, const char* name) {
  if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument(std::string(name) + " must lie in (0,1)");
}

void check_photon_order(std::span<const PhotonRecord> photons) {
  for (std::size_t i = 1; i < photons.size(); ++i) {
    if (photons[i].emission_time_ps < photons[i - 1].emission_time_ps) {
      throw std::invalid_argument("photon records not sorted by emission time");
    }
  }
}

std::int64_t default_span(std::span<const PhotonRecord> photons, std::int64_t span_end_ps) {
  if (span_end_ps > 0) return span_end_ps;
  return photons.empty() ? 0 : photons.back().emission_time_ps + 1;
}

TagStream to_stream(std::vector<TimeTag> tags, std::int64_t span_end_ps,
                    std::uint16_t channel) {
  std::int64_t duration = std::max<std::int64_t>(span_end_ps, 0);
  if (!tags.empty()) duration = std::max(duration, tags.back().timestamp_ps);
  TagStream::Labels labels{{channel, "det" + std::to_string(channel)}};
  return TagStream::make(std::move(tags), duration, 1, std::move(labels));
}

}  // namespace

void DetectorParams::validate() const {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
    throw std::invalid_argument("detector efficiency must lie in [0,1]");
  }
  if (!(jitter_fwhm_ps >= 0.0) || !std::isfinite(jitter_fwhm_ps)) {
    throw std::invalid_argument("jitter_fwhm_ps must be non-negative");
  }
  if (!(dark_rate_hz >= 0.0) || !std::isfinite(dark_rate_hz)) {
    throw std::invalid_argument("dark_rate_hz must be non-negative");
  }
  if (dead_time_ps < 0) throw std::invalid_argument("dead_time_ps must be non-negative");
}

void HbtConfig::validate() const {
  check_ratio(splitting_ratio, "splitting_ratio");
  det0.validate();
  det1.validate();
}

void HomConfig::validate() const {
  if (delay_ps <= 0) throw std::invalid_argument("delay_ps must be positive");
  check_ratio(bs1_ratio, "bs1_ratio");
  check_ratio(bs2_ratio, "bs2_ratio");
  det0.validate();
  det1.validate();
}

// --- DetectorChannel --------------------------------------------------------

DetectorChannel::DetectorChannel(const DetectorParams& params, std::uint64_t seed,
                                 std::uint16_t channel, std::int64_t dark_span_end_ps)
    : params_(params),
      channel_(channel),
      rng_(derive_seed(seed, 0)),
      dark_rng_(derive_seed(seed, seed_stream::kDarkCounts)),
      sigma_ps_(sigma_from_fwhm(params.jitter_fwhm_ps)),
      margin_ps_(static_cast<std::int64_t>(std::ceil(kJitterClampSigmas * sigma_ps_)) + 1),
      dark_span_end_ps_(static_cast<double>(dark_span_end_ps)) {
  params_.validate();
  const double rate_per_ps = params_.dark_rate_hz * 1e-12;
  if (rate_per_ps > 0.0) {
    dark_gap_ = std::exponential_distribution<double>(rate_per_ps);
    next_dark_ps_ = dark_gap_(dark_rng_);
  } else {
    next_dark_ps_ = std::numeric_limits<double>::infinity();
  }
}

void DetectorChannel::push(std::int64_t arrival_ps) {
  if (unit_(rng_) >= params_.efficiency) return;
  std::int64_t t = arrival_ps;
  if (sigma_ps_ > 0.0) {
    const double z = std::clamp(gauss_(rng_), -kJitterClampSigmas, kJitterClampSigmas);
    t += std::llround(z * sigma_ps_);
  }
  pending_.push_back(std::max<std::int64_t>(t, 0));
}

void DetectorChannel::release(std::int64_t limit_ps, std::vector<TimeTag>& out) {
  ready_.clear();
  released_until_ = std::max(released_until_, limit_ps);
  if (limit_ps == kNoLimit) {
    ready_.swap(pending_);
  } else {
    auto split = std::partition(pending_.begin(), pending_.end(),
                                [&](std::int64_t t) { return t < limit_ps; });
    ready_.assign(pending_.begin(), split);
    pending_.erase(pending_.begin(), split);
  }
  const double dark_limit = std::min(static_cast<double>(limit_ps), dark_span_end_ps_);
  while (next_dark_ps_ < dark_limit) {
    ready_.push_back(static_cast<std::int64_t>(next_dark_ps_));
    next_dark_ps_ += dark_gap_(dark_rng_);
  }
  std::sort(ready_.begin(), ready_.end());
  for (const std::int64_t t : ready_) {
    if (last_accepted_ != std::numeric_limits<std::int64_t>::min() &&
        t - last_accepted_ < params_.dead_time_ps) {
      continue;
    }
    last_accepted_ = t;
    out.push_back({t, channel_});
  }
}

void DetectorChannel::advance(std::int64_t input_frontier_ps, std::vector<TimeTag>& out) {
  if (input_frontier_ps == kNoLimit) {
    release(kNoLimit, out);
    return;
  }
  release(input_frontier_ps - margin_ps_, out);
}

void DetectorChannel::finish(std::vector<TimeTag>& out) { release(kNoLimit, out); }

// --- HBT --------------------------------------------------------------------

HbtSimulator::HbtSimulator(const HbtConfig& cfg, std::uint64_t seed, std::int64_t span_end_ps)
    : cfg_(cfg),
      route_rng_(derive_seed(seed, seed_stream::kRouting)),
      det0_(cfg.det0, derive_seed(seed, seed_stream::kDetector0), 0, span_end_ps),
      det1_(cfg.det1, derive_seed(seed, seed_stream::kDetector1), 1, span_end_ps) {
  cfg_.validate();
}

void HbtSimulator::push(std::span<const PhotonRecord> photons, std::int64_t frontier_ps,
                        std::vector<TimeTag>& out0, std::vector<TimeTag>& out1) {
  for (const auto& p : photons) {
    if (unit_(route_rng_) < cfg_.splitting_ratio) {
      det0_.push(p.emission_time_ps);
    } else {
      det1_.push(p.emission_time_ps);
    }
  }
  det0_.advance(frontier_ps, out0);
  det1_.advance(frontier_ps, out1);
}

void HbtSimulator::finish(std::vector<TimeTag>& out0, std::vector<TimeTag>& out1) {
  det0_.finish(out0);
  det1_.finish(out1);
}

// --- HOM --------------------------------------------------------------------

HomSimulator::HomSimulator(const HomConfig& cfg, const TwoPhotonCoherence& coherence,
                           std::uint64_t seed, std::int64_t span_end_ps)
    : cfg_(cfg),
      coherence_(coherence),
      bs1_rng_(derive_seed(seed, seed_stream::kBeamSplitter1)),
      bs2_rng_(derive_seed(seed, seed_stream::kBeamSplitter2)),
      det0_(cfg.det0, derive_seed(seed, seed_stream::kDetector0), 0, span_end_ps),
      det1_(cfg.det1, derive_seed(seed, seed_stream::kDetector1), 1, span_end_ps) {
  cfg_.validate();
  if (!(coherence_.v_intrinsic >= 0.0 && coherence_.v_intrinsic <= 1.0)) {
    throw std::invalid_argument("v_intrinsic must lie in [0,1]");
  }
  if (!(coherence_.tau_dip_ps > 0.0)) throw std::invalid_argument("tau_dip_ps must be positive");
}

double HomSimulator::interference(std::int64_t delta_ps) const {
  if (cfg_.polarization == Polarization::cross) return 0.0;
  return coherence_.v_intrinsic *
         std::exp(-std::abs(static_cast<double>(delta_ps)) / coherence_.tau_dip_ps);
}

void HomSimulator::emit_single(const Arrival& a) {
  ++stats_.unpaired;
  // Short-arm photons enter the input that transmits to port 0.
  const double t = cfg_.bs2_ratio;
  const double p_port0 = a.long_arm ? 1.0 - t : t;
  if (unit_(bs2_rng_) < p_port0) {
    det0_.push(a.time_ps);
  } else {
    det1_.push(a.time_ps);
  }
}

void HomSimulator::emit_pair(const Arrival& first, const Arrival& second) {
  ++stats_.pairs;
  const double t = cfg_.bs2_ratio;
  const double r = 1.0 - t;
  const Arrival& long_arm = first.long_arm ? first : second;
  const Arrival& short_arm = first.long_arm ? second : first;
  const bool eligible = cfg_.pairing == HomPairing::any_overlap ||
                        short_arm.pulse_index == long_arm.pulse_index + 1;
  const double overlap = eligible ? interference(second.time_ps - first.time_ps) : 0.0;
  const double p_coinc = pair_coincidence_probability(overlap, t);
  const double u = unit_(bs2_rng_);
  const double w = unit_(bs2_rng_);
  if (u < p_coinc) {
    // Opposite ports: the short-arm photon lands in port 0 when both transmit.
    const bool short_to_port0 = w < t * t / (t * t + r * r);
    for (const Arrival* a : {&first, &second}) {
      const bool to_port0 = (a == &short_arm) == short_to_port0;
      (to_port0 ? det0_ : det1_).push(a->time_ps);
    }
  } else {
    DetectorChannel& det = w < 0.5 ? det0_ : det1_;
    det.push(first.time_ps);
    det.push(second.time_ps);
  }
}

void HomSimulator::scan(const Arrival& x) {
  if (candidate_) {
    const bool x_prefers_next = x.long_arm != candidate_->long_arm &&
                                x.time_ps - candidate_->time_ps <
                                    candidate_->time_ps - held_->time_ps;
    if (x_prefers_next) {
      emit_single(*held_);
      held_ = candidate_;
      candidate_ = x;
    } else {
      emit_pair(*held_, *candidate_);
      held_ = x;
      candidate_.reset();
    }
  } else if (held_) {
    if (x.long_arm != held_->long_arm) {
      candidate_ = x;
    } else {
      emit_single(*held_);
      held_ = x;
    }
  } else {
    held_ = x;
  }
}

std::int64_t HomSimulator::detector_frontier(std::int64_t arrival_frontier) const {
  std::int64_t f = arrival_frontier;
  if (held_) f = std::min(f, held_->time_ps);
  if (candidate_) f = std::min(f, candidate_->time_ps);
  return f;
}

void HomSimulator::push(std::span<const PhotonRecord> photons, std::int64_t frontier_ps,
                        std::vector<TimeTag>& out0, std::vector<TimeTag>& out1) {
  for (const auto& p : photons) {
    const bool long_arm = unit_(bs1_rng_) < cfg_.bs1_ratio;
    pending_.push_back(
        {p.emission_time_ps + (long_arm ? cfg_.delay_ps : 0), sequence_++, p.pulse_index, long_arm});
  }
  const auto order = [](const Arrival& a, const Arrival& b) {
    return a.time_ps != b.time_ps ? a.time_ps < b.time_ps : a.sequence < b.sequence;
  };
  auto split = std::partition(pending_.begin(), pending_.end(),
                              [&](const Arrival& a) { return a.time_ps < frontier_ps; });
  ready_.assign(pending_.begin(), split);
  pending_.erase(pending_.begin(), split);
  std::sort(ready_.begin(), ready_.end(), order);
  for (const auto& a : ready_) scan(a);

  const std::int64_t f = detector_frontier(frontier_ps);
  det0_.advance(f, out0);
  det1_.advance(f, out1);
}

void HomSimulator::finish(std::vector<TimeTag>& out0, std::vector<TimeTag>& out1) {
  push({}, kNoLimit, out0, out1);
  if (candidate_) {
    emit_pair(*held_, *candidate_);
  } else if (held_) {
    emit_single(*held_);
  }
  held_.reset();
  candidate_.reset();
  det0_.finish(out0);
  det1_.finish(out1);
}

// --- batch wrappers -----------------------------------------------------------

TagStream apply_detector(std::span<const std::int64_t> arrivals_ps, const DetectorParams& params,
                         std::uint64_t seed, std::int64_t span_end_ps, std::uint16_t channel) {
  for (std::size_t i = 1; i < arrivals_ps.size(); ++i) {
    if (arrivals_ps[i] < arrivals_ps[i - 1]) throw std::invalid_argument("arrivals not sorted");
  }
  if (span_end_ps <= 0) span_end_ps = arrivals_ps.empty() ? 0 : arrivals_ps.back() + 1;
  DetectorChannel det(params, seed, channel, span_end_ps);
  for (const auto t : arrivals_ps) det.push(t);
  std::vector<TimeTag> out;
  det.finish(out);
  return to_stream(std::move(out), span_end_ps, channel);
}

std::pair<TagStream, TagStream> simulate_hbt(std::span<const PhotonRecord> photons,
                                             const HbtConfig& cfg, std::uint64_t seed,
                                             std::int64_t span_end_ps) {
  check_photon_order(photons);
  span_end_ps = default_span(photons, span_end_ps);
  HbtSimulator sim(cfg, seed, span_end_ps);
  std::vector<TimeTag> a, b;
  sim.push(photons, kNoLimit, a, b);
  sim.finish(a, b);
  return {to_stream(std::move(a), span_end_ps, 0), to_stream(std::move(b), span_end_ps, 1)};
}

std::pair<TagStream, TagStream> simulate_hom(std::span<const PhotonRecord> photons,
                                             const HomConfig& cfg,
                                             const TwoPhotonCoherence& coherence,
                                             std::uint64_t seed, std::int64_t span_end_ps) {
  check_photon_order(photons);
  span_end_ps = default_span(photons, span_end_ps);
  HomSimulator sim(cfg, coherence, seed, span_end_ps);
  std::vector<TimeTag> a, b;
  sim.push(photons, kNoLimit, a, b);
  sim.finish(a, b);
  return {to_stream(std::move(a), span_end_ps, 0), to_stream(std::move(b), span_end_ps, 1)};
}

}  // namespace photocorr
