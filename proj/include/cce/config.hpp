#pragma once

#include <map>
#include <ostream>
#include <string>

#include "cce/lm_train.hpp"
#include "cce/ner.hpp"

namespace cce::cli {

// Top-level tool configuration. Unknown keys are rejected at every level;
// defaults are applied for missing keys and echoed with their provenance.
struct Config {
  int format_version = 1;
  lm::LmConfig lm;
  ner::NerConfig ner;
  std::map<std::string, std::string> paths;  // optional; must exist on disk

  nlohmann::json to_json() const;

  // `echo`, when given, receives one "config <key> = <value> (file|default)"
  // line per setting.
  static Config load(const std::string& path, std::ostream* echo = nullptr);
};

}  // namespace cce::cli
