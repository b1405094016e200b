#include "photocorr/timetag.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>
#include <system_error>

#include <nlohmann/json.hpp>

namespace photocorr {

namespace {

constexpr std::array<char, 8> kMagic = {'P', 'T', 'A', 'G', '1', '\0', '\0', '\0'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::string_view kCsvHeader = "channel,timestamp_ps";

template <typename T>
void put_le(char* out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<char>(static_cast<std::uint64_t>(value) >> (8 * i) & 0xFFu);
  }
}

template <typename T>
T get_le(const char* in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  }
  return static_cast<T>(v);
}

std::array<char, kPtagHeaderBytes> encode_header(std::uint32_t resolution_ps,
                                                 std::uint64_t duration_ps,
                                                 std::uint64_t count) {
  std::array<char, kPtagHeaderBytes> h{};
  std::memcpy(h.data(), kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(h.data() + 8, kFormatVersion);
  put_le<std::uint32_t>(h.data() + 12, resolution_ps);
  put_le<std::uint64_t>(h.data() + 16, duration_ps);
  put_le<std::uint64_t>(h.data() + 24, count);
  return h;
}

void encode_record(char* out, const TimeTag& tag) {
  std::memset(out, 0, kPtagRecordBytes);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(tag.timestamp_ps));
  put_le<std::uint16_t>(out + 8, tag.channel);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

struct Sidecar {
  std::optional<std::uint32_t> resolution_ps;
  std::optional<std::int64_t> duration_ps;
  TagStream::Labels labels;
};

std::optional<Sidecar> read_sidecar(const std::filesystem::path& path) {
  const auto side = metadata_sidecar_path(path);
  if (!std::filesystem::exists(side)) return std::nullopt;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_all(side));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed metadata sidecar " + side.string() + ": " + e.what(), e.byte);
  }
  Sidecar s;
  if (j.contains("resolution_ps")) s.resolution_ps = j.at("resolution_ps").get<std::uint32_t>();
  if (j.contains("duration_ps")) s.duration_ps = j.at("duration_ps").get<std::int64_t>();
  if (j.contains("channel_labels")) {
    for (const auto& [key, value] : j.at("channel_labels").items()) {
      s.labels[static_cast<std::uint16_t>(std::stoul(key))] = value.get<std::string>();
    }
  }
  return s;
}

void write_sidecar(const std::filesystem::path& path, std::uint32_t resolution_ps,
                   std::int64_t duration_ps, const TagStream::Labels& labels) {
  nlohmann::json j;
  j["resolution_ps"] = resolution_ps;
  j["duration_ps"] = duration_ps;
  nlohmann::json lab = nlohmann::json::object();
  for (const auto& [ch, name] : labels) lab[std::to_string(ch)] = name;
  j["channel_labels"] = lab;
  std::ofstream out(metadata_sidecar_path(path));
  if (!out) throw std::runtime_error("cannot write sidecar for " + path.string());
  out << j.dump(2) << '\n';
}

void remove_stale_sidecar(const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::remove(metadata_sidecar_path(path), ec);
}

TagStream read_binary(const std::filesystem::path& path) {
  const std::string data = read_all(path);
  if (data.size() < kPtagHeaderBytes) {
    throw ParseError("truncated PTAG1 header", data.size());
  }
  if (std::memcmp(data.data(), kMagic.data(), kMagic.size()) != 0) {
    throw ParseError("bad PTAG1 magic", 0);
  }
  const auto version = get_le<std::uint32_t>(data.data() + 8);
  if (version != kFormatVersion) {
    throw ParseError("unsupported PTAG1 version " + std::to_string(version), 8);
  }
  const auto resolution = get_le<std::uint32_t>(data.data() + 12);
  const auto duration = get_le<std::uint64_t>(data.data() + 16);
  const auto count = get_le<std::uint64_t>(data.data() + 24);
  if (duration > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    throw ParseError("duration out of range", 16);
  }
  const std::uint64_t payload = data.size() - kPtagHeaderBytes;
  if (count > payload / kPtagRecordBytes) {
    const std::uint64_t complete = payload / kPtagRecordBytes;
    throw ParseError("record count " + std::to_string(count) + " exceeds payload",
                     kPtagHeaderBytes + complete * kPtagRecordBytes);
  }
  if (payload != count * kPtagRecordBytes) {
    throw ParseError("trailing bytes after records", kPtagHeaderBytes + count * kPtagRecordBytes);
  }

  std::vector<TimeTag> tags;
  tags.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t offset = kPtagHeaderBytes + i * kPtagRecordBytes;
    const char* rec = data.data() + offset;
    const auto ts = get_le<std::uint64_t>(rec);
    if (ts > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      throw ParseError("timestamp out of range", offset);
    }
    for (std::size_t k = 10; k < kPtagRecordBytes; ++k) {
      if (rec[k] != 0) throw ParseError("non-zero reserved bytes in record", offset + k);
    }
    tags.push_back({static_cast<std::int64_t>(ts), get_le<std::uint16_t>(rec + 8)});
  }
  if (!tags.empty() && duration != 0 &&
      static_cast<std::uint64_t>(tags.back().timestamp_ps) > duration) {
    // Only meaningful when sorted; the ordering check below reports first.
    check_sorted(tags);
    throw ParseError("timestamp exceeds header duration", 16);
  }

  TagStream::Labels labels;
  if (auto side = read_sidecar(path)) labels = std::move(side->labels);
  return TagStream::make(std::move(tags), static_cast<std::int64_t>(duration), resolution,
                         std::move(labels));
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

TagStream read_csv(const std::filesystem::path& path) {
  const std::string data = read_all(path);
  std::vector<TimeTag> tags;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    std::string_view line(data.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t line_offset = pos;
    pos = end + 1;

    if (!header_seen) {
      if (line != kCsvHeader) throw ParseError("expected CSV header 'channel,timestamp_ps'", 0);
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw ParseError("missing ',' in record", line_offset);
    std::uint32_t channel = 0;
    std::int64_t ts = 0;
    if (!parse_int(line.substr(0, comma), channel) ||
        channel > std::numeric_limits<std::uint16_t>::max()) {
      throw ParseError("bad channel field", line_offset);
    }
    if (!parse_int(line.substr(comma + 1), ts) || ts < 0) {
      throw ParseError("bad timestamp field", line_offset + comma + 1);
    }
    tags.push_back({ts, static_cast<std::uint16_t>(channel)});
  }
  if (!header_seen) throw ParseError("empty CSV file, header missing", 0);

  std::int64_t duration = 0;
  std::uint32_t resolution = 1;
  TagStream::Labels labels;
  if (auto side = read_sidecar(path)) {
    duration = side->duration_ps.value_or(0);
    resolution = side->resolution_ps.value_or(1);
    labels = std::move(side->labels);
  }
  return TagStream::make(std::move(tags), duration, resolution, std::move(labels));
}

}  // namespace

ParseError::ParseError(const std::string& what, std::uint64_t byte_offset)
    : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
      byte_offset_(byte_offset) {}

OrderingError::OrderingError(const std::string& what, std::size_t index)
    : std::runtime_error(what + " (index " + std::to_string(index) + ")"), index_(index) {}

void check_sorted(std::span<const TimeTag> tags) {
  for (std::size_t i = 1; i < tags.size(); ++i) {
    if (tags[i].timestamp_ps < tags[i - 1].timestamp_ps) {
      throw OrderingError("time tags not sorted by timestamp", i);
    }
  }
}

TagStream TagStream::make(std::vector<TimeTag> tags, std::int64_t duration_ps,
                          std::uint32_t resolution_ps, Labels labels) {
  if (resolution_ps == 0) throw std::invalid_argument("resolution_ps must be positive");
  if (duration_ps < 0) throw std::invalid_argument("duration_ps must be non-negative");
  for (const auto& t : tags) {
    if (t.timestamp_ps < 0) throw std::invalid_argument("negative timestamp");
  }
  check_sorted(tags);
  const std::int64_t last = tags.empty() ? 0 : tags.back().timestamp_ps;
  if (duration_ps == 0) {
    duration_ps = last;
  } else if (last > duration_ps) {
    throw std::invalid_argument("timestamp " + std::to_string(last) + " exceeds duration " +
                                std::to_string(duration_ps));
  }
  TagStream s;
  s.tags_ = std::move(tags);
  s.duration_ps_ = duration_ps;
  s.resolution_ps_ = resolution_ps;
  s.labels_ = std::move(labels);
  return s;
}

TagFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? TagFormat::csv : TagFormat::binary;
}

std::filesystem::path metadata_sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".meta.json";
  return p;
}

TagStream read_tag_file(const std::filesystem::path& path, TagFormat format) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("tag file not found: " + path.string());
  }
  return format == TagFormat::binary ? read_binary(path) : read_csv(path);
}

void write_tag_file(const TagStream& stream, const std::filesystem::path& path,
                    TagFormat format) {
  if (format == TagFormat::binary) {
    TagFileWriter writer(path, stream.resolution_ps());
    writer.append(stream.tags());
    writer.close(stream.duration_ps(), stream.channel_labels());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << kCsvHeader << '\n';
  for (const auto& t : stream.tags()) out << t.channel << ',' << t.timestamp_ps << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
  out.close();
  write_sidecar(path, stream.resolution_ps(), stream.duration_ps(), stream.channel_labels());
}

struct TagFileWriter::Impl {
  std::filesystem::path path;
  std::ofstream out;
  std::uint32_t resolution_ps;
  std::uint64_t count = 0;
  std::int64_t last = 0;
  std::vector<char> buffer;
  bool closed = false;
};

TagFileWriter::TagFileWriter(const std::filesystem::path& path, std::uint32_t resolution_ps)
    : impl_(std::make_unique<Impl>()) {
  impl_->path = path;
  impl_->resolution_ps = resolution_ps;
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto header = encode_header(resolution_ps, 0, 0);
  impl_->out.write(header.data(), header.size());
}

TagFileWriter::~TagFileWriter() {
  if (impl_ && !impl_->closed) {
    try {
      close(impl_->last);
    } catch (...) {
    }
  }
}

void TagFileWriter::append(std::span<const TimeTag> tags) {
  if (tags.empty()) return;
  if (tags.front().timestamp_ps < impl_->last) {
    throw OrderingError("appended tags precede previously written ones", impl_->count);
  }
  check_sorted(tags);
  impl_->buffer.resize(tags.size() * kPtagRecordBytes);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].timestamp_ps < 0) throw std::invalid_argument("negative timestamp");
    encode_record(impl_->buffer.data() + i * kPtagRecordBytes, tags[i]);
  }
  impl_->out.write(impl_->buffer.data(), static_cast<std::streamsize>(impl_->buffer.size()));
  impl_->count += tags.size();
  impl_->last = tags.back().timestamp_ps;
}

void TagFileWriter::close(std::int64_t duration_ps, const TagStream::Labels& labels) {
  if (impl_->closed) return;
  impl_->closed = true;
  const std::int64_t duration = std::max(duration_ps, impl_->last);
  const auto header = encode_header(impl_->resolution_ps, static_cast<std::uint64_t>(duration),
                                    impl_->count);
  impl_->out.seekp(0);
  impl_->out.write(header.data(), header.size());
  impl_->out.close();
  if (!impl_->out) throw std::runtime_error("write failed: " + impl_->path.string());
  if (labels.empty()) {
    remove_stale_sidecar(impl_->path);
  } else {
    write_sidecar(impl_->path, impl_->resolution_ps, duration, labels);
  }
}

HistogramSpec::HistogramSpec(std::int64_t bin_width_ps, std::int64_t delay_min_ps,
                             std::int64_t delay_max_ps)
    : width_(bin_width_ps), min_(delay_min_ps), max_(delay_max_ps) {
  if (width_ <= 0) throw std::invalid_argument("bin width must be positive");
  if (min_ >= max_) throw std::invalid_argument("delay_min must be below delay_max");
  if (min_ % width_ != 0 || max_ % width_ != 0) {
    throw std::invalid_argument("delay bounds must be multiples of the bin width");
  }
}

}  // namespace photocorr
