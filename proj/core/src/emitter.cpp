#include "photocorr/emitter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "photocorr/rng.hpp"

namespace photocorr {

namespace {

bool emission_order(const PhotonRecord& a, const PhotonRecord& b) {
  if (a.emission_time_ps != b.emission_time_ps) return a.emission_time_ps < b.emission_time_ps;
  if (a.pulse_index != b.pulse_index) return a.pulse_index < b.pulse_index;
  return a.origin < b.origin;
}

}  // namespace

void EmitterParams::validate() const {
  if (t_rep_ps <= 0) throw std::invalid_argument("t_rep_ps must be positive");
  if (!(tau1_ps > 0.0) || !std::isfinite(tau1_ps)) {
    throw std::invalid_argument("tau1_ps must be positive");
  }
  if (!(tau_dip_ps > 0.0) || !std::isfinite(tau_dip_ps)) {
    throw std::invalid_argument("tau_dip_ps must be positive");
  }
  if (!(p_one >= 0.0 && p_one <= 1.0)) throw std::invalid_argument("p_one must lie in [0,1]");
  if (!(p_two >= 0.0 && p_two <= p_one)) {
    throw std::invalid_argument("p_two must lie in [0, p_one]");
  }
  if (!(v_intrinsic >= 0.0 && v_intrinsic <= 1.0)) {
    throw std::invalid_argument("v_intrinsic must lie in [0,1]");
  }
}

PhotonSource::PhotonSource(const EmitterParams& params, std::int64_t n_pulses,
                           std::uint64_t seed)
    : params_(params), n_pulses_(n_pulses), seed_(seed) {
  params_.validate();
  if (n_pulses < 0) throw std::invalid_argument("n_pulses must be non-negative");
  n_blocks_ = (n_pulses + kPulsesPerBlock - 1) / kPulsesPerBlock;
  done_ = n_blocks_ == 0;
}

void PhotonSource::generate_block(std::int64_t block) {
  Engine rng(derive_seed(seed_, seed_stream::kEmitterBlock + static_cast<std::uint64_t>(block)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> decay(1.0 / params_.tau1_ps);
  const double p_second = params_.p_one > 0.0 ? params_.p_two / params_.p_one : 0.0;

  const std::int64_t first = block * kPulsesPerBlock;
  const std::int64_t last = std::min(first + kPulsesPerBlock, n_pulses_);
  for (std::int64_t k = first; k < last; ++k) {
    if (unit(rng) >= params_.p_one) continue;
    const std::int64_t start = k * params_.t_rep_ps;
    const std::int64_t t1 = start + std::llround(decay(rng));
    pending_.push_back({t1, k, PhotonOrigin::primary});
    if (unit(rng) < p_second) {
      const std::int64_t t2 = t1 + std::llround(decay(rng));
      pending_.push_back({t2, k, PhotonOrigin::reexcitation});
    }
  }
}

PhotonSource::Chunk PhotonSource::next(std::int64_t blocks) {
  Chunk chunk;
  if (done_) {
    chunk.frontier_ps = std::numeric_limits<std::int64_t>::max();
    return chunk;
  }
  blocks = std::max<std::int64_t>(blocks, 1);
  for (std::int64_t i = 0; i < blocks && next_block_ < n_blocks_; ++i) {
    generate_block(next_block_++);
  }
  std::sort(pending_.begin(), pending_.end(), emission_order);

  if (next_block_ == n_blocks_) {
    done_ = true;
    chunk.frontier_ps = std::numeric_limits<std::int64_t>::max();
    chunk.photons = std::move(pending_);
    pending_.clear();
    return chunk;
  }
  chunk.frontier_ps = next_block_ * kPulsesPerBlock * params_.t_rep_ps;
  const auto split = std::partition_point(
      pending_.begin(), pending_.end(),
      [&](const PhotonRecord& p) { return p.emission_time_ps < chunk.frontier_ps; });
  chunk.photons.assign(pending_.begin(), split);
  pending_.erase(pending_.begin(), split);
  return chunk;
}

std::vector<PhotonRecord> generate_photons(const EmitterParams& params, std::int64_t n_pulses,
                                           std::uint64_t seed) {
  if (n_pulses < 1) throw std::invalid_argument("n_pulses must be at least 1");
  PhotonSource source(params, n_pulses, seed);
  std::vector<PhotonRecord> out;
  while (!source.done()) {
    auto chunk = source.next();
    if (out.empty()) {
      out = std::move(chunk.photons);
    } else {
      out.insert(out.end(), chunk.photons.begin(), chunk.photons.end());
    }
  }
  return out;
}

double expected_g2_zero(const EmitterParams& params) {
  if (!(params.p_one > 0.0)) throw std::invalid_argument("expected_g2_zero requires p_one > 0");
  const double mean = params.p_one + params.p_two;
  return 2.0 * params.p_two / (mean * mean);
}

double p_two_for_g2(double g2_zero, double p_one) {
  if (!(p_one > 0.0 && p_one <= 1.0)) throw std::invalid_argument("p_one must lie in (0,1]");
  if (!(g2_zero >= 0.0)) throw std::invalid_argument("g2_zero must be non-negative");
  if (g2_zero == 0.0) return 0.0;
  // Smaller root of g (p1 + p)^2 = 2 p.
  const double b = 2.0 - 2.0 * g2_zero * p_one;
  const double disc = b * b - 4.0 * g2_zero * g2_zero * p_one * p_one;
  if (disc < 0.0) throw std::invalid_argument("g2_zero not reachable for this p_one");
  // Rationalized form avoids cancellation for small g.
  const double p = 2.0 * g2_zero * p_one * p_one / (b + std::sqrt(disc));
  if (p > p_one) throw std::invalid_argument("g2_zero not reachable for this p_one");
  return p;
}

void write_photon_csv(std::span<const PhotonRecord> photons, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "pulse_index,origin,emission_time_ps\n";
  for (const auto& p : photons) {
    out << p.pulse_index << ','
        << (p.origin == PhotonOrigin::primary ? "primary" : "reexcitation") << ','
        << p.emission_time_ps << '\n';
  }
}

}  // namespace photocorr
