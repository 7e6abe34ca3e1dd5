#include "jsonl.hpp"

namespace sciret::detail {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path + " for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  return out;
}

void for_each_jsonl(const std::string& path,
                    const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json value = json::parse(line, nullptr, false);
    if (value.is_discarded()) {
      throw InputError(path + ":" + std::to_string(lineno) + ": invalid JSON");
    }
    fn(lineno, value);
  }
}

const json& require_field(const json& obj, const char* key, const std::string& path,
                          std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw InputError(path + ":" + std::to_string(line) + ": missing field \"" +
                     key + "\"");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& path,
                           std::size_t line) {
  const json& value = require_field(obj, key, path, line);
  if (!value.is_string()) {
    throw InputError(path + ":" + std::to_string(line) + ": field \"" + key +
                     "\" must be a string");
  }
  return value.get<std::string>();
}

}  // namespace sciret::detail
