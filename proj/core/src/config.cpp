#include "photocorr/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace photocorr {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& text, std::size_t line) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad number '" + text + "'", line);
  return v;
}

using Setter = std::function<void(RunConfig&, const std::string&, std::size_t)>;

template <typename T>
Setter set(T RunConfig::*group, auto field) {
  return [group, field](RunConfig& c, const std::string& v, std::size_t line) {
    auto& target = (c.*group).*field;
    target = parse_number<std::remove_reference_t<decltype(target)>>(v, line);
  };
}

template <auto Field>
Setter set_detector(int which) {
  return [which](RunConfig& c, const std::string& v, std::size_t line) {
    auto value = parse_number<std::remove_reference_t<decltype(c.hbt.det0.*Field)>>(v, line);
    DetectorParams& hbt = which == 0 ? c.hbt.det0 : c.hbt.det1;
    DetectorParams& hom = which == 0 ? c.hom.det0 : c.hom.det1;
    hbt.*Field = value;
    hom.*Field = value;
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t{
        {"t_rep_ps", set(&RunConfig::emitter, &EmitterParams::t_rep_ps)},
        {"tau1_ps", set(&RunConfig::emitter, &EmitterParams::tau1_ps)},
        {"tau_dip_ps", set(&RunConfig::emitter, &EmitterParams::tau_dip_ps)},
        {"p_one", set(&RunConfig::emitter, &EmitterParams::p_one)},
        {"p_two", set(&RunConfig::emitter, &EmitterParams::p_two)},
        {"v_intrinsic", set(&RunConfig::emitter, &EmitterParams::v_intrinsic)},
        {"splitting_ratio", set(&RunConfig::hbt, &HbtConfig::splitting_ratio)},
        {"delay_ps", set(&RunConfig::hom, &HomConfig::delay_ps)},
        {"bs1_ratio", set(&RunConfig::hom, &HomConfig::bs1_ratio)},
        {"bs2_ratio", set(&RunConfig::hom, &HomConfig::bs2_ratio)},
        {"pairing",
         [](RunConfig& c, const std::string& v, std::size_t line) {
           if (v == "subsequent_cycles") {
             c.hom.pairing = HomPairing::subsequent_cycles;
           } else if (v == "any_overlap") {
             c.hom.pairing = HomPairing::any_overlap;
           } else {
             throw ConfigError("pairing must be subsequent_cycles or any_overlap", line);
           }
         }},
    };
    for (const int d : {0, 1}) {
      const std::string prefix = "det" + std::to_string(d) + ".";
      t[prefix + "efficiency"] = set_detector<&DetectorParams::efficiency>(d);
      t[prefix + "jitter_fwhm_ps"] = set_detector<&DetectorParams::jitter_fwhm_ps>(d);
      t[prefix + "dark_rate_hz"] = set_detector<&DetectorParams::dark_rate_hz>(d);
      t[prefix + "dead_time_ps"] = set_detector<&DetectorParams::dead_time_ps>(d);
    }
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  emitter.validate();
  hbt.validate();
  hom.validate();
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(std::string_view(raw).substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line);
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown key '" + key + "'", line);
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'", line);
    it->second(cfg, value, line);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), line);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse_config(in);
}

std::string format_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "t_rep_ps = " << c.emitter.t_rep_ps << '\n'
      << "tau1_ps = " << c.emitter.tau1_ps << '\n'
      << "tau_dip_ps = " << c.emitter.tau_dip_ps << '\n'
      << "p_one = " << c.emitter.p_one << '\n'
      << "p_two = " << c.emitter.p_two << '\n'
      << "v_intrinsic = " << c.emitter.v_intrinsic << '\n'
      << "splitting_ratio = " << c.hbt.splitting_ratio << '\n'
      << "delay_ps = " << c.hom.delay_ps << '\n'
      << "bs1_ratio = " << c.hom.bs1_ratio << '\n'
      << "bs2_ratio = " << c.hom.bs2_ratio << '\n'
      << "pairing = "
      << (c.hom.pairing == HomPairing::subsequent_cycles ? "subsequent_cycles" : "any_overlap")
      << '\n';
  for (const int d : {0, 1}) {
    const DetectorParams& p = d == 0 ? c.hbt.det0 : c.hbt.det1;
    const std::string prefix = "det" + std::to_string(d) + ".";
    out << prefix << "efficiency = " << p.efficiency << '\n'
        << prefix << "jitter_fwhm_ps = " << p.jitter_fwhm_ps << '\n'
        << prefix << "dark_rate_hz = " << p.dark_rate_hz << '\n'
        << prefix << "dead_time_ps = " << p.dead_time_ps << '\n';
  }
  return out.str();
}

}  // namespace photocorr
