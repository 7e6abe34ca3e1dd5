#pragma once

// Internal JSONL plumbing shared by the loaders and writers. Not installed.

#include <cstddef>
#include <fstream>
#include <functional>
#include <string>

#include "json.hpp"

#include "sciret/types.hpp"

namespace sciret::detail {

using json = nlohmann::ordered_json;

std::ifstream open_in(const std::string& path);   // throws InputError
std::ofstream open_out(const std::string& path);  // throws InputError

// Calls fn(line_number, value) for every non-blank line; line numbers are
// 1-based so error messages point at the right spot.
void for_each_jsonl(const std::string& path,
                    const std::function<void(std::size_t, const json&)>& fn);

// Fetch a required field, with a path+line prefixed error on absence.
const json& require_field(const json& obj, const char* key, const std::string& path,
                          std::size_t line);

std::string require_string(const json& obj, const char* key, const std::string& path,
                           std::size_t line);

}  // namespace sciret::detail
