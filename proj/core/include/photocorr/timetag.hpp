#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace photocorr {

/// One detection event. Timestamps are integer picoseconds since acquisition
/// start; the channel is the detector index.
struct TimeTag {
  std::int64_t timestamp_ps = 0;
  std::uint16_t channel = 0;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::uint64_t byte_offset);
  std::uint64_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::uint64_t byte_offset_;
};

class OrderingError : public std::runtime_error {
 public:
  OrderingError(const std::string& what, std::size_t index);
  /// Index of the first tag whose timestamp precedes its predecessor.
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Ordered sequence of tags with acquisition metadata. Immutable once built;
/// construct through `TagStream::make` to get validation.
class TagStream {
 public:
  using Labels = std::map<std::uint16_t, std::string>;

  TagStream() = default;

  /// Validates timestamps (non-negative, non-decreasing). A `duration_ps` of
  /// 0 means "unknown" and is replaced by the largest timestamp. Throws
  /// OrderingError or std::invalid_argument.
  static TagStream make(std::vector<TimeTag> tags, std::int64_t duration_ps = 0,
                        std::uint32_t resolution_ps = 1, Labels labels = {});

  std::span<const TimeTag> tags() const noexcept { return tags_; }
  std::size_t size() const noexcept { return tags_.size(); }
  bool empty() const noexcept { return tags_.empty(); }
  std::int64_t duration_ps() const noexcept { return duration_ps_; }
  std::uint32_t resolution_ps() const noexcept { return resolution_ps_; }
  const Labels& channel_labels() const noexcept { return labels_; }

  friend bool operator==(const TagStream&, const TagStream&) = default;

 private:
  std::vector<TimeTag> tags_;
  std::int64_t duration_ps_ = 0;
  std::uint32_t resolution_ps_ = 1;
  Labels labels_;
};

/// Throws OrderingError at the first index where order breaks.
void check_sorted(std::span<const TimeTag> tags);

enum class TagFormat { binary, csv };

/// Picks csv for a ".csv" extension, binary otherwise.
TagFormat format_from_path(const std::filesystem::path& path);

TagStream read_tag_file(const std::filesystem::path& path, TagFormat format);
void write_tag_file(const TagStream& stream, const std::filesystem::path& path,
                    TagFormat format);

/// Path of the JSON metadata sidecar written next to a tag file.
std::filesystem::path metadata_sidecar_path(const std::filesystem::path& path);

inline constexpr std::size_t kPtagHeaderBytes = 32;
inline constexpr std::size_t kPtagRecordBytes = 16;

/// Incremental PTAG1 writer for streams too large to hold in memory. The
/// record count and duration in the header are patched on `close()`.
class TagFileWriter {
 public:
  TagFileWriter(const std::filesystem::path& path, std::uint32_t resolution_ps = 1);
  ~TagFileWriter();
  TagFileWriter(const TagFileWriter&) = delete;
  TagFileWriter& operator=(const TagFileWriter&) = delete;

  void append(std::span<const TimeTag> tags);
  /// Finalizes header and sidecar. Duration is max(duration_ps, last tag).
  void close(std::int64_t duration_ps, const TagStream::Labels& labels = {});

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Histogram bin geometry: left-closed right-open bins of fixed width
/// covering [delay_min_ps, delay_max_ps).
class HistogramSpec {
 public:
  /// Throws std::invalid_argument unless width > 0, min < max and both
  /// bounds are multiples of the width.
  HistogramSpec(std::int64_t bin_width_ps, std::int64_t delay_min_ps,
                std::int64_t delay_max_ps);

  /// Symmetric spec [-range, range).
  static HistogramSpec symmetric(std::int64_t bin_width_ps, std::int64_t range_ps) {
    return {bin_width_ps, -range_ps, range_ps};
  }

  std::int64_t bin_width_ps() const noexcept { return width_; }
  std::int64_t delay_min_ps() const noexcept { return min_; }
  std::int64_t delay_max_ps() const noexcept { return max_; }
  std::size_t bin_count() const noexcept {
    return static_cast<std::size_t>((max_ - min_) / width_);
  }
  double bin_center_ps(std::size_t index) const noexcept {
    return static_cast<double>(min_) +
           (static_cast<double>(index) + 0.5) * static_cast<double>(width_);
  }
  std::int64_t bin_lower_ps(std::size_t index) const noexcept {
    return min_ + static_cast<std::int64_t>(index) * width_;
  }

  friend bool operator==(const HistogramSpec&, const HistogramSpec&) = default;

 private:
  std::int64_t width_;
  std::int64_t min_;
  std::int64_t max_;
};

/// floor((delay - min) / width) for delays inside [min, max), else nullopt.
inline std::optional<std::size_t> histogram_bin_index(std::int64_t delay_ps,
                                                      const HistogramSpec& spec) noexcept {
  if (delay_ps < spec.delay_min_ps() || delay_ps >= spec.delay_max_ps()) return std::nullopt;
  return static_cast<std::size_t>((delay_ps - spec.delay_min_ps()) / spec.bin_width_ps());
}

/// Coincidence counts versus delay t_b - t_a.
struct CorrelationHistogram {
  HistogramSpec spec;
  std::vector<std::uint64_t> counts;
  std::uint64_t n_a = 0;
  std::uint64_t n_b = 0;
  std::uint64_t total_pairs = 0;

  explicit CorrelationHistogram(const HistogramSpec& s)
      : spec(s), counts(s.bin_count(), 0) {}

  friend bool operator==(const CorrelationHistogram&, const CorrelationHistogram&) = default;
};

}  // namespace photocorr
