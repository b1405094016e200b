#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "photocorr/correlator.hpp"
#include "photocorr/emitter.hpp"
#include "photocorr/optics.hpp"
#include "photocorr/timetag.hpp"

namespace photocorr {

/// Receives the two tag streams of a run in order. After a call, every later
/// tag on either stream is >= frontier_ps.
class TagSink {
 public:
  virtual ~TagSink() = default;
  virtual void consume(std::span<const TimeTag> a, std::span<const TimeTag> b,
                       std::int64_t frontier_ps) = 0;
  virtual void finish(std::int64_t /*duration_ps*/) {}
};

class CollectSink final : public TagSink {
 public:
  void consume(std::span<const TimeTag> a, std::span<const TimeTag> b, std::int64_t) override;
  void finish(std::int64_t duration_ps) override { duration_ps_ = duration_ps; }
  /// Streams labelled "det0"/"det1" (or `label_a`/`label_b`) with the run duration.
  std::pair<TagStream, TagStream> take(const std::string& label_a = "det0",
                                       const std::string& label_b = "det1");

 private:
  std::vector<TimeTag> a_;
  std::vector<TimeTag> b_;
  std::int64_t duration_ps_ = 0;
};

class FileSink final : public TagSink {
 public:
  FileSink(const std::filesystem::path& a, const std::filesystem::path& b,
           std::string label_a = "det0", std::string label_b = "det1");
  void consume(std::span<const TimeTag> a, std::span<const TimeTag> b, std::int64_t) override;
  void finish(std::int64_t duration_ps) override;

 private:
  TagFileWriter a_;
  TagFileWriter b_;
  std::string label_a_;
  std::string label_b_;
  std::uint16_t channel_a_ = 0;
  std::uint16_t channel_b_ = 1;
};

class CorrelatorSink final : public TagSink {
 public:
  explicit CorrelatorSink(const HistogramSpec& spec) : corr_(spec) {}
  void consume(std::span<const TimeTag> a, std::span<const TimeTag> b,
               std::int64_t frontier_ps) override {
    corr_.push(a, b, frontier_ps);
  }
  void finish(std::int64_t) override { result_ = corr_.finish(); }
  const CorrelationHistogram& histogram() const { return *result_; }

 private:
  StreamingCorrelator corr_;
  std::optional<CorrelationHistogram> result_;
};

class TeeSink final : public TagSink {
 public:
  explicit TeeSink(std::vector<TagSink*> sinks) : sinks_(std::move(sinks)) {}
  void consume(std::span<const TimeTag> a, std::span<const TimeTag> b,
               std::int64_t frontier_ps) override {
    for (auto* s : sinks_) s->consume(a, b, frontier_ps);
  }
  void finish(std::int64_t duration_ps) override {
    for (auto* s : sinks_) s->finish(duration_ps);
  }

 private:
  std::vector<TagSink*> sinks_;
};

struct RunSummary {
  std::int64_t n_pulses = 0;
  std::uint64_t n_photons = 0;
  std::uint64_t n_a = 0;
  std::uint64_t n_b = 0;
  std::int64_t duration_ps = 0;
};

/// Emitter into the HBT splitter. The emitter and optics draw from
/// independent streams derived from `seed`. Memory is bounded by the chunk
/// size, not by `n_pulses`.
RunSummary run_hbt(const EmitterParams& emitter, const HbtConfig& cfg, std::int64_t n_pulses,
                   std::uint64_t seed, TagSink& sink);

RunSummary run_hom(const EmitterParams& emitter, const HomConfig& cfg, std::int64_t n_pulses,
                   std::uint64_t seed, TagSink& sink);

/// Lifetime measurement: stream a is a jitter-free laser sync at k * t_rep,
/// stream b one detector watching the emitter directly.
RunSummary run_decay(const EmitterParams& emitter, const DetectorParams& detector,
                     std::int64_t n_pulses, std::uint64_t seed, TagSink& sink);

}  // namespace photocorr
