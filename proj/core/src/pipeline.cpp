#include "photocorr/pipeline.hpp"

#include <limits>

#include "photocorr/rng.hpp"

namespace photocorr {

namespace {

constexpr std::int64_t kEnd = std::numeric_limits<std::int64_t>::max();

std::int64_t span_end(const EmitterParams& e, std::int64_t n_pulses) {
  return n_pulses * e.t_rep_ps;
}

void check_pulses(std::int64_t n_pulses) {
  if (n_pulses < 0) throw std::invalid_argument("n_pulses must be non-negative");
}

struct Counter {
  RunSummary summary;
  std::int64_t last_tag = 0;

  void count(std::span<const TimeTag> a, std::span<const TimeTag> b) {
    summary.n_a += a.size();
    summary.n_b += b.size();
    if (!a.empty()) last_tag = std::max(last_tag, a.back().timestamp_ps);
    if (!b.empty()) last_tag = std::max(last_tag, b.back().timestamp_ps);
  }
};

template <typename Sim>
RunSummary drive(const EmitterParams& emitter, std::int64_t n_pulses, std::uint64_t seed,
                 Sim& sim, TagSink& sink) {
  PhotonSource source(emitter, n_pulses, derive_seed(seed, seed_stream::kEmitter));
  Counter counter;
  counter.summary.n_pulses = n_pulses;
  std::vector<TimeTag> out0;
  std::vector<TimeTag> out1;
  while (!source.done()) {
    const auto chunk = source.next();
    counter.summary.n_photons += chunk.photons.size();
    sim.push(chunk.photons, chunk.frontier_ps, out0, out1);
    counter.count(out0, out1);
    sink.consume(out0, out1, sim.output_frontier());
    out0.clear();
    out1.clear();
  }
  sim.finish(out0, out1);
  counter.count(out0, out1);
  sink.consume(out0, out1, kEnd);
  counter.summary.duration_ps = std::max(span_end(emitter, n_pulses), counter.last_tag);
  sink.finish(counter.summary.duration_ps);
  return counter.summary;
}

}  // namespace

void CollectSink::consume(std::span<const TimeTag> a, std::span<const TimeTag> b, std::int64_t) {
  a_.insert(a_.end(), a.begin(), a.end());
  b_.insert(b_.end(), b.begin(), b.end());
}

std::pair<TagStream, TagStream> CollectSink::take(const std::string& label_a,
                                                  const std::string& label_b) {
  const auto channel = [](const std::vector<TimeTag>& v, std::uint16_t fallback) {
    return v.empty() ? fallback : v.front().channel;
  };
  TagStream::Labels la{{channel(a_, 0), label_a}};
  TagStream::Labels lb{{channel(b_, 1), label_b}};
  auto a = TagStream::make(std::move(a_), duration_ps_, 1, std::move(la));
  auto b = TagStream::make(std::move(b_), duration_ps_, 1, std::move(lb));
  a_.clear();
  b_.clear();
  return {std::move(a), std::move(b)};
}

FileSink::FileSink(const std::filesystem::path& a, const std::filesystem::path& b,
                   std::string label_a, std::string label_b)
    : a_(a), b_(b), label_a_(std::move(label_a)), label_b_(std::move(label_b)) {}

void FileSink::consume(std::span<const TimeTag> a, std::span<const TimeTag> b, std::int64_t) {
  if (!a.empty()) channel_a_ = a.front().channel;
  if (!b.empty()) channel_b_ = b.front().channel;
  a_.append(a);
  b_.append(b);
}

void FileSink::finish(std::int64_t duration_ps) {
  a_.close(duration_ps, {{channel_a_, label_a_}});
  b_.close(duration_ps, {{channel_b_, label_b_}});
}

RunSummary run_hbt(const EmitterParams& emitter, const HbtConfig& cfg, std::int64_t n_pulses,
                   std::uint64_t seed, TagSink& sink) {
  check_pulses(n_pulses);
  emitter.validate();
  HbtSimulator sim(cfg, derive_seed(seed, seed_stream::kOptics), span_end(emitter, n_pulses));
  return drive(emitter, n_pulses, seed, sim, sink);
}

RunSummary run_hom(const EmitterParams& emitter, const HomConfig& cfg, std::int64_t n_pulses,
                   std::uint64_t seed, TagSink& sink) {
  check_pulses(n_pulses);
  emitter.validate();
  HomSimulator sim(cfg, TwoPhotonCoherence::of(emitter), derive_seed(seed, seed_stream::kOptics),
                   span_end(emitter, n_pulses));
  return drive(emitter, n_pulses, seed, sim, sink);
}

namespace {

// Laser sync on channel 0 plus one detector on channel 1.
class DecaySetup {
 public:
  DecaySetup(const EmitterParams& e, const DetectorParams& d, std::uint64_t seed,
             std::int64_t n_pulses)
      : t_rep_(e.t_rep_ps),
        n_pulses_(n_pulses),
        det_(d, derive_seed(seed, seed_stream::kDetector1), 1, span_end(e, n_pulses)) {}

  void push(std::span<const PhotonRecord> photons, std::int64_t frontier_ps,
            std::vector<TimeTag>& sync, std::vector<TimeTag>& out) {
    for (const auto& p : photons) det_.push(p.emission_time_ps);
    det_.advance(frontier_ps, out);
    emit_sync(det_.released_until(), sync);
  }
  void finish(std::vector<TimeTag>& sync, std::vector<TimeTag>& out) {
    det_.finish(out);
    emit_sync(kEnd, sync);
  }
  std::int64_t output_frontier() const { return det_.released_until(); }

 private:
  void emit_sync(std::int64_t limit, std::vector<TimeTag>& sync) {
    while (next_ < n_pulses_ && next_ * t_rep_ < limit) sync.push_back({next_++ * t_rep_, 0});
  }

  std::int64_t t_rep_;
  std::int64_t n_pulses_;
  std::int64_t next_ = 0;
  DetectorChannel det_;
};

}  // namespace

RunSummary run_decay(const EmitterParams& emitter, const DetectorParams& detector,
                     std::int64_t n_pulses, std::uint64_t seed, TagSink& sink) {
  check_pulses(n_pulses);
  emitter.validate();
  DecaySetup setup(emitter, detector, derive_seed(seed, seed_stream::kOptics), n_pulses);
  return drive(emitter, n_pulses, seed, setup, sink);
}

}  // namespace photocorr
