#include "trav/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "trav/errors.hpp"

namespace trav {

using nlohmann::json;

namespace {

const ConfigField* find_field(const std::vector<ConfigField>& fields, const std::string& key) {
  for (const auto& f : fields) {
    if (f.name == key) return &f;
  }
  return nullptr;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) throw ConfigError("invalid value '" + text + "' for key '" + key + "'");
  return value;
}

}  // namespace

std::string fields_to_json(const std::vector<ConfigField>& fields) {
  json j = json::object();
  for (const auto& f : fields) {
    std::visit([&](auto* p) { j[f.name] = *p; }, f.target);
  }
  return j.dump();
}

void fields_from_json(const std::vector<ConfigField>& fields, const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(origin + ": config must be a flat JSON object");
  for (const auto& [key, value] : j.items()) {
    const ConfigField* f = find_field(fields, key);
    if (!f) throw ConfigError(origin + ": unknown config key '" + key + "'");
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          bool ok = false;
          if constexpr (std::is_same_v<T, bool>) {
            ok = value.is_boolean();
          } else if constexpr (std::is_same_v<T, std::string>) {
            ok = value.is_string();
          } else if constexpr (std::is_same_v<T, double>) {
            ok = value.is_number();
          } else {
            ok = value.is_number_integer();
          }
          if (!ok) throw ConfigError(origin + ": wrong type for key '" + key + "'");
          *p = value.get<T>();
        },
        f->target);
  }
}

void set_field(const std::vector<ConfigField>& fields, const std::string& key, const std::string& value) {
  const ConfigField* f = find_field(fields, key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (value == "true" || value == "1") {
            *p = true;
          } else if (value == "false" || value == "0") {
            *p = false;
          } else {
            throw ConfigError("invalid boolean '" + value + "' for key '" + key + "'");
          }
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = value;
        } else {
          *p = parse_number<T>(key, value);
        }
      },
      f->target);
}

std::pair<std::string, std::string> split_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' is not key=value");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace trav
