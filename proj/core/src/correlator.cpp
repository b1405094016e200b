#include "photocorr/correlator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

namespace photocorr {

namespace {

// Counts pairs for a[first, last) against all of b. `lo` is the first b index
// that can still pair with a[first].
void correlate_block(std::span<const TimeTag> a, std::span<const TimeTag> b,
                     const HistogramSpec& spec, std::vector<std::uint64_t>& counts,
                     std::uint64_t& pairs) {
  const std::int64_t dmin = spec.delay_min_ps();
  const std::int64_t dmax = spec.delay_max_ps();
  const std::int64_t width = spec.bin_width_ps();
  const std::size_t nb = b.size();
  if (a.empty() || nb == 0) return;
  const std::int64_t first_needed = a.front().timestamp_ps + dmin;
  std::size_t lo = static_cast<std::size_t>(
      std::lower_bound(b.begin(), b.end(), first_needed,
                       [](const TimeTag& t, std::int64_t v) { return t.timestamp_ps < v; }) -
      b.begin());
  for (const TimeTag& tag : a) {
    const std::int64_t t = tag.timestamp_ps;
    while (lo < nb && b[lo].timestamp_ps - t < dmin) ++lo;
    for (std::size_t j = lo; j < nb; ++j) {
      const std::int64_t d = b[j].timestamp_ps - t;
      if (d >= dmax) break;
      ++counts[static_cast<std::size_t>((d - dmin) / width)];
      ++pairs;
    }
  }
}

std::string format_center(const HistogramSpec& spec, std::size_t i) {
  // Centre = lower + width/2; exact in half-integers.
  const std::int64_t twice = 2 * spec.bin_lower_ps(i) + spec.bin_width_ps();
  if (twice % 2 == 0) return std::to_string(twice / 2);
  const std::int64_t whole = (twice - 1) / 2;
  if (twice < 0) return "-" + std::to_string(-(twice + 1) / 2) + ".5";
  return std::to_string(whole) + ".5";
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::filesystem::path histogram_sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

}  // namespace

CorrelationHistogram correlate(std::span<const TimeTag> a, std::span<const TimeTag> b,
                               const HistogramSpec& spec, unsigned threads) {
  check_sorted(a);
  check_sorted(b);
  CorrelationHistogram hist(spec);
  hist.n_a = a.size();
  hist.n_b = b.size();
  threads = std::max(1u, threads);
  if (threads == 1 || a.size() < 4 * static_cast<std::size_t>(threads)) {
    correlate_block(a, b, spec, hist.counts, hist.total_pairs);
    return hist;
  }
  std::vector<std::vector<std::uint64_t>> partial(threads,
                                                  std::vector<std::uint64_t>(spec.bin_count()));
  std::vector<std::uint64_t> pairs(threads, 0);
  {
    std::vector<std::jthread> workers;
    const std::size_t block = (a.size() + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t first = std::min(a.size(), w * block);
      const std::size_t last = std::min(a.size(), first + block);
      workers.emplace_back([&, w, first, last] {
        correlate_block(a.subspan(first, last - first), b, spec, partial[w], pairs[w]);
      });
    }
  }
  for (unsigned w = 0; w < threads; ++w) {
    for (std::size_t i = 0; i < hist.counts.size(); ++i) hist.counts[i] += partial[w][i];
    hist.total_pairs += pairs[w];
  }
  return hist;
}

CorrelationHistogram correlate(const TagStream& a, const TagStream& b, const HistogramSpec& spec,
                               unsigned threads) {
  return correlate(a.tags(), b.tags(), spec, threads);
}

CorrelationHistogram correlate_start_stop(std::span<const TimeTag> a,
                                          std::span<const TimeTag> b,
                                          const HistogramSpec& spec) {
  check_sorted(a);
  check_sorted(b);
  CorrelationHistogram hist(spec);
  hist.n_a = a.size();
  hist.n_b = b.size();
  const std::int64_t dmin = spec.delay_min_ps();
  const std::int64_t dmax = spec.delay_max_ps();
  std::size_t lo = 0;
  for (const TimeTag& tag : a) {
    const std::int64_t t = tag.timestamp_ps;
    while (lo < b.size() && b[lo].timestamp_ps - t < dmin) ++lo;
    if (lo == b.size()) break;
    const std::int64_t d = b[lo].timestamp_ps - t;
    if (d < dmax) {
      ++hist.counts[static_cast<std::size_t>((d - dmin) / spec.bin_width_ps())];
      ++hist.total_pairs;
    }
  }
  return hist;
}

CorrelationHistogram correlate_start_stop(const TagStream& a, const TagStream& b,
                                          const HistogramSpec& spec) {
  return correlate_start_stop(a.tags(), b.tags(), spec);
}

StreamingCorrelator::StreamingCorrelator(const HistogramSpec& spec) : hist_(spec) {}

void StreamingCorrelator::push(std::span<const TimeTag> a, std::span<const TimeTag> b,
                               std::int64_t frontier_ps) {
  check_sorted(a);
  check_sorted(b);
  if (!a.empty()) {
    if (a.front().timestamp_ps < last_a_) {
      throw OrderingError("stream A chunk precedes earlier tags", hist_.n_a);
    }
    last_a_ = a.back().timestamp_ps;
  }
  if (!b.empty()) {
    if (b.front().timestamp_ps < last_b_) {
      throw OrderingError("stream B chunk precedes earlier tags", hist_.n_b);
    }
    last_b_ = b.back().timestamp_ps;
  }
  hist_.n_a += a.size();
  hist_.n_b += b.size();
  a_.insert(a_.end(), a.begin(), a.end());
  b_.insert(b_.end(), b.begin(), b.end());
  process(frontier_ps);
}

void StreamingCorrelator::process(std::int64_t frontier_ps) {
  const auto& spec = hist_.spec;
  const std::int64_t dmin = spec.delay_min_ps();
  const std::int64_t dmax = spec.delay_max_ps();
  const std::int64_t width = spec.bin_width_ps();
  const bool all = frontier_ps == std::numeric_limits<std::int64_t>::max();

  std::size_t i = 0;
  std::size_t lo = b_start_;
  const std::size_t nb = b_.size();
  for (; i < a_.size(); ++i) {
    const std::int64_t t = a_[i].timestamp_ps;
    if (!all && t + dmax > frontier_ps) break;
    while (lo < nb && b_[lo].timestamp_ps - t < dmin) ++lo;
    for (std::size_t j = lo; j < nb; ++j) {
      const std::int64_t d = b_[j].timestamp_ps - t;
      if (d >= dmax) break;
      ++hist_.counts[static_cast<std::size_t>((d - dmin) / width)];
      ++hist_.total_pairs;
    }
  }
  a_.erase(a_.begin(), a_.begin() + static_cast<std::ptrdiff_t>(i));
  // b-tags earlier than the next a-tag's window (or the frontier's, if no
  // a-tag is buffered) can never pair again.
  const std::int64_t next_a = a_.empty() ? frontier_ps : a_.front().timestamp_ps;
  if (!all) {
    while (lo < nb && b_[lo].timestamp_ps < next_a + dmin) ++lo;
  }
  b_start_ = lo;
  if (b_start_ > 4096 && b_start_ * 2 > b_.size()) {
    b_.erase(b_.begin(), b_.begin() + static_cast<std::ptrdiff_t>(b_start_));
    b_start_ = 0;
  }
}

CorrelationHistogram StreamingCorrelator::finish() {
  process(std::numeric_limits<std::int64_t>::max());
  a_.clear();
  b_.clear();
  b_start_ = 0;
  return hist_;
}

std::uint64_t integrate_counts(const CorrelationHistogram& hist, double lo_ps, double hi_ps) {
  const auto& spec = hist.spec;
  const double w = static_cast<double>(spec.bin_width_ps());
  const double base = static_cast<double>(spec.delay_min_ps());
  const double n = static_cast<double>(spec.bin_count());
  const double first = std::clamp(std::ceil((lo_ps - base) / w - 0.5), 0.0, n);
  const double last = std::clamp(std::ceil((hi_ps - base) / w - 0.5), 0.0, n);
  std::uint64_t sum = 0;
  for (auto i = static_cast<std::size_t>(first); i < static_cast<std::size_t>(last); ++i) {
    sum += hist.counts[i];
  }
  return sum;
}

std::map<int, std::uint64_t> peak_areas(const CorrelationHistogram& hist, double t_rep_ps,
                                        double window_ps, int n_peaks) {
  if (!(t_rep_ps > 0.0)) throw std::invalid_argument("t_rep_ps must be positive");
  if (!(window_ps > 0.0) || window_ps > t_rep_ps) {
    throw std::invalid_argument("window must lie in (0, t_rep]");
  }
  if (n_peaks < 0) throw std::invalid_argument("n_peaks must be non-negative");
  const double reach = n_peaks * t_rep_ps + window_ps / 2.0;
  if (-reach < static_cast<double>(hist.spec.delay_min_ps()) ||
      reach > static_cast<double>(hist.spec.delay_max_ps())) {
    throw std::out_of_range("peak windows exceed histogram range");
  }
  std::map<int, std::uint64_t> areas;
  for (int k = -n_peaks; k <= n_peaks; ++k) {
    const double centre = k * t_rep_ps;
    areas[k] = integrate_counts(hist, centre - window_ps / 2.0, centre + window_ps / 2.0);
  }
  return areas;
}

void write_histogram_csv(const CorrelationHistogram& hist, const std::filesystem::path& path) {
  {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "delay_ps,counts\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
      out << format_center(hist.spec, i) << ',' << hist.counts[i] << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
  }
  nlohmann::json j;
  j["bin_width_ps"] = hist.spec.bin_width_ps();
  j["delay_min_ps"] = hist.spec.delay_min_ps();
  j["delay_max_ps"] = hist.spec.delay_max_ps();
  j["bin_count"] = hist.spec.bin_count();
  j["n_a"] = hist.n_a;
  j["n_b"] = hist.n_b;
  j["total_pairs"] = hist.total_pairs;
  std::ofstream side(histogram_sidecar(path));
  side << j.dump(2) << '\n';
}

CorrelationHistogram read_histogram_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("histogram file not found: " + path.string());
  }
  const std::string data = slurp(path);
  std::vector<double> centres;
  std::vector<std::uint64_t> counts;
  std::size_t pos = 0;
  bool header = false;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    std::string_view line(data.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t offset = pos;
    pos = end + 1;
    if (!header) {
      if (line != "delay_ps,counts") throw ParseError("expected header 'delay_ps,counts'", 0);
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw ParseError("missing ',' in row", offset);
    double centre = 0.0;
    std::uint64_t count = 0;
    const auto cfield = line.substr(0, comma);
    const auto nfield = line.substr(comma + 1);
    auto r1 = std::from_chars(cfield.data(), cfield.data() + cfield.size(), centre);
    auto r2 = std::from_chars(nfield.data(), nfield.data() + nfield.size(), count);
    if (r1.ec != std::errc() || r1.ptr != cfield.data() + cfield.size()) {
      throw ParseError("bad delay field", offset);
    }
    if (r2.ec != std::errc() || r2.ptr != nfield.data() + nfield.size()) {
      throw ParseError("bad counts field", offset + comma + 1);
    }
    centres.push_back(centre);
    counts.push_back(count);
  }
  if (!header) throw ParseError("empty histogram file", 0);

  std::optional<HistogramSpec> spec;
  std::uint64_t n_a = 0, n_b = 0;
  std::optional<std::uint64_t> total;
  const auto side = histogram_sidecar(path);
  if (std::filesystem::exists(side)) {
    const auto j = nlohmann::json::parse(slurp(side));
    spec.emplace(j.at("bin_width_ps").get<std::int64_t>(), j.at("delay_min_ps").get<std::int64_t>(),
                 j.at("delay_max_ps").get<std::int64_t>());
    n_a = j.value("n_a", std::uint64_t{0});
    n_b = j.value("n_b", std::uint64_t{0});
    if (j.contains("total_pairs")) total = j.at("total_pairs").get<std::uint64_t>();
  } else {
    if (centres.size() < 2) throw ParseError("cannot infer bin geometry from < 2 rows", 0);
    const double w = centres[1] - centres[0];
    const double lo = centres[0] - w / 2.0;
    if (!(w > 0.0) || w != std::round(w) || lo != std::round(lo)) {
      throw ParseError("bin centres do not describe integer bin geometry", 0);
    }
    const auto width = static_cast<std::int64_t>(w);
    const auto min = static_cast<std::int64_t>(lo);
    spec.emplace(width, min, min + width * static_cast<std::int64_t>(centres.size()));
  }
  if (spec->bin_count() != counts.size()) {
    throw ParseError("row count does not match bin geometry", 0);
  }
  for (std::size_t i = 0; i < centres.size(); ++i) {
    if (std::abs(centres[i] - spec->bin_center_ps(i)) > 1e-6) {
      throw ParseError("bin centre mismatch at row " + std::to_string(i + 1), 0);
    }
  }
  CorrelationHistogram hist(*spec);
  hist.counts = std::move(counts);
  hist.n_a = n_a;
  hist.n_b = n_b;
  hist.total_pairs = std::accumulate(hist.counts.begin(), hist.counts.end(), std::uint64_t{0});
  if (total && *total != hist.total_pairs) {
    throw ParseError("sidecar total_pairs disagrees with summed counts", 0);
  }
  return hist;
}

}  // namespace photocorr
