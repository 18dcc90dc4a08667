#pragma once

// Private helpers shared by the JSON document readers and writers.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "metroplan/error.hpp"

namespace metroplan::detail {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write to " + path.string() + " failed");
}

// Parses text, turning syntax errors into ParseError with a line number.
inline nlohmann::json parse_document(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t upto = std::min(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < upto; ++i)
      if (text[i] == '\n') ++line;
    throw ParseError(what + ": syntax error at line " + std::to_string(line) + ": " + e.what());
  }
}

// Typed access to an object's fields; failures name the JSON path.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {}

  std::string path(const std::string& key) const { return prefix_ + "." + key; }

  const nlohmann::json& at(const std::string& key) const {
    if (!obj_.is_object()) throw ParseError(prefix_ + ": expected an object");
    auto it = obj_.find(key);
    if (it == obj_.end()) throw ParseError(path(key) + ": missing field");
    return *it;
  }

  double number(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number()) throw ParseError(path(key) + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(path(key) + ": not finite");
    return d;
  }

  double number_or(const std::string& key, double fallback) const {
    return obj_.is_object() && obj_.contains(key) ? number(key) : fallback;
  }

  int integer(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) throw ParseError(path(key) + ": expected an integer");
    return v.get<int>();
  }

  std::string string(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw ParseError(path(key) + ": expected a string");
    return v.get<std::string>();
  }

  const nlohmann::json& array(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_array()) throw ParseError(path(key) + ": expected an array");
    return v;
  }

  std::vector<double> number_array(const std::string& key) const {
    std::vector<double> out;
    const auto& v = array(key);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ParseError(path(key) + "[" + std::to_string(i) + "]: expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<int> int_array(const std::string& key) const { return to_ints(array(key), path(key)); }

  // For an array-valued reader: element n as an integer array.
  std::vector<int> int_array_at(std::size_t n) const {
    const std::string where = prefix_ + "[" + std::to_string(n) + "]";
    if (!obj_.is_array() || n >= obj_.size()) throw ParseError(where + ": missing");
    if (!obj_[n].is_array()) throw ParseError(where + ": expected an array");
    return to_ints(obj_[n], where);
  }

 private:
  static std::vector<int> to_ints(const nlohmann::json& v, const std::string& where) {
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) throw ParseError(where + "[" + std::to_string(i) + "]: expected an integer");
      out.push_back(v[i].get<int>());
    }
    return out;
  }

  const nlohmann::json& obj_;
  std::string prefix_;
};

}  // namespace metroplan::detail
