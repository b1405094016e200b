#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>

#include "photocorr/emitter.hpp"
#include "photocorr/optics.hpp"

namespace photocorr {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Simulation settings. Keys in the text form match the field names;
/// detector keys are prefixed `det0.` / `det1.` and apply to both setups.
struct RunConfig {
  EmitterParams emitter;
  HbtConfig hbt;
  HomConfig hom;

  void validate() const;
};

/// Flat `key = value` lines; `#` starts a comment. Unknown keys, duplicate
/// keys and malformed numbers throw ConfigError.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);
/// Text form of `cfg` that parse_config reads back to the same values.
std::string format_config(const RunConfig& cfg);

}  // namespace photocorr
