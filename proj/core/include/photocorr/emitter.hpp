#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace photocorr {

/// Pulsed quantum-dot source model. Times in picoseconds.
struct EmitterParams {
  std::int64_t t_rep_ps = 12'500;
  double tau1_ps = 3110.0;
  /// HOM-dip time constant; consumed by the interferometer model.
  double tau_dip_ps = 190.0;
  /// Probability that a pulse yields at least one photon.
  double p_one = 1.0;
  /// Probability that a pulse yields a second, re-excited photon.
  double p_two = 0.0;
  /// Ceiling on two-photon interference contrast.
  double v_intrinsic = 1.0;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

enum class PhotonOrigin : std::uint8_t { primary = 0, reexcitation = 1 };

struct PhotonRecord {
  std::int64_t emission_time_ps = 0;
  std::int64_t pulse_index = 0;
  PhotonOrigin origin = PhotonOrigin::primary;

  friend bool operator==(const PhotonRecord&, const PhotonRecord&) = default;
};

/// Pulses generated per independently seeded block. Output does not depend on
/// how blocks are scheduled.
inline constexpr std::int64_t kPulsesPerBlock = 1 << 16;

/// Streaming generator: yields photons in emission-time order, chunk by chunk,
/// so very long runs never need the full record in memory.
class PhotonSource {
 public:
  PhotonSource(const EmitterParams& params, std::int64_t n_pulses, std::uint64_t seed);

  struct Chunk {
    std::vector<PhotonRecord> photons;
    /// Every photon in later chunks has emission_time_ps >= frontier_ps.
    std::int64_t frontier_ps = 0;
  };

  bool done() const noexcept { return done_; }
  /// Generates up to `blocks` more pulse blocks and returns the photons that
  /// can no longer be preceded by later ones. The last chunk flushes all.
  Chunk next(std::int64_t blocks = 16);

 private:
  void generate_block(std::int64_t block);

  EmitterParams params_;
  std::int64_t n_pulses_;
  std::uint64_t seed_;
  std::int64_t next_block_ = 0;
  std::int64_t n_blocks_;
  std::vector<PhotonRecord> pending_;
  bool done_ = false;
};

/// Whole-run convenience wrapper over PhotonSource.
std::vector<PhotonRecord> generate_photons(const EmitterParams& params, std::int64_t n_pulses,
                                           std::uint64_t seed);

/// Normalized zero-delay peak area of the HBT correlation for this source in
/// the low-flux limit: 2 P(2) / <n>^2 with P(2) = p_two, <n> = p_one + p_two.
double expected_g2_zero(const EmitterParams& params);

/// Inverse of expected_g2_zero in p_two for fixed p_one.
double p_two_for_g2(double g2_zero, double p_one);

/// Debug dump: "pulse_index,origin,emission_time_ps".
void write_photon_csv(std::span<const PhotonRecord> photons, const std::filesystem::path& path);

}  // namespace photocorr
