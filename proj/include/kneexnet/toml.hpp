#pragma once

// Reader and writer for the TOML subset used by experiment configs: tables,
// dotted table headers, basic and literal strings, integers, floats, booleans,
// (multi-line) arrays and inline tables. Documents map onto nlohmann::json.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace kneexnet::toml {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

nlohmann::json parse(std::string_view text);
nlohmann::json parse_file(const std::filesystem::path& path);

/// Emits top-level scalars first, then one [section] per nested object.
std::string dump(const nlohmann::json& doc);

}  // namespace kneexnet::toml
