#include "cce/config.hpp"

#include <filesystem>

#include "cce/checkpoint.hpp"

namespace cce::cli {

namespace {

void echo_section(std::ostream& out, const std::string& prefix,
                  const nlohmann::json& effective, const nlohmann::json& given) {
  for (const auto& [key, value] : effective.items()) {
    const bool from_file = given.is_object() && given.contains(key);
    out << "config " << prefix << key << " = " << value.dump() << " ("
        << (from_file ? "file" : "default") << ")\n";
  }
}

}  // namespace

nlohmann::json Config::to_json() const {
  nlohmann::json lm_json, ner_json;
  lm::to_json(lm_json, lm);
  ner::to_json(ner_json, ner);
  nlohmann::json j{{"format_version", format_version},
                   {"lm", lm_json},
                   {"ner", ner_json}};
  if (!paths.empty()) j["paths"] = paths;
  return j;
}

Config Config::load(const std::string& path, std::ostream* echo) {
  const nlohmann::json j = ckpt::read_json_file(path);
  if (!j.is_object()) {
    throw ValidationError(path + ": config must be a JSON object");
  }
  Config config;
  nlohmann::json lm_given = nlohmann::json::object();
  nlohmann::json ner_given = nlohmann::json::object();
  for (const auto& [key, value] : j.items()) {
    if (key == "format_version") {
      if (!value.is_number_integer() || value.get<int>() != 1) {
        throw ValidationError(path + ": unsupported format_version");
      }
    } else if (key == "lm") {
      lm_given = value;
      config.lm = lm::lm_config_from_json(value, path + ": lm");
    } else if (key == "ner") {
      ner_given = value;
      config.ner = ner::ner_config_from_json(value, path + ": ner");
    } else if (key == "paths") {
      try {
        config.paths = value.get<std::map<std::string, std::string>>();
      } catch (const nlohmann::json::exception&) {
        throw ValidationError(path +
                              ": 'paths' must map names to path strings");
      }
      for (const auto& [name, p] : config.paths) {
        if (!std::filesystem::exists(p)) {
          throw ValidationError(path + ": paths." + name + " = '" + p +
                                "' does not exist");
        }
      }
    } else {
      throw ValidationError(path + ": unknown key '" + key + "'");
    }
  }
  if (echo) {
    nlohmann::json lm_json, ner_json;
    lm::to_json(lm_json, config.lm);
    ner::to_json(ner_json, config.ner);
    echo_section(*echo, "lm.", lm_json, lm_given);
    echo_section(*echo, "ner.", ner_json, ner_given);
  }
  return config;
}

}  // namespace cce::cli
