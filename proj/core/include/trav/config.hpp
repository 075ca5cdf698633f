#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace trav {

/// Binding of a config key to a struct member, used for flat JSON config
/// files and key=value overrides.
struct ConfigField {
  std::string name;
  std::variant<int*, double*, bool*, std::string*, std::uint64_t*> target;
};

/// Flat JSON object with keys sorted (canonical form).
std::string fields_to_json(const std::vector<ConfigField>& fields);

/// Assigns every key of a flat JSON object; unknown keys and type mismatches
/// throw ConfigError naming the key.
void fields_from_json(const std::vector<ConfigField>& fields, const std::string& json_text, const std::string& origin);

/// Parses `value` according to the field type; unknown keys throw ConfigError.
void set_field(const std::vector<ConfigField>& fields, const std::string& key, const std::string& value);

/// Splits "key=value"; throws ConfigError when there is no '='.
std::pair<std::string, std::string> split_override(const std::string& text);

std::string read_text_file(const std::string& path);

}  // namespace trav
