// Copyright 2026 The weldad Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace weldad {

/// UTF-8 key-value text document.
///
///   # comment
///   key = value
///   [section]
///   free-form line
///
/// Lines before the first section header are key-value pairs; lines inside a
/// section are kept verbatim (trimmed) in order.
class KvDocument {
 public:
  static KvDocument parse(const std::string& text);
  static KvDocument load(const std::filesystem::path& path);

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, std::optional<double> fallback = {}) const;
  std::int64_t get_int(const std::string& key, std::optional<std::int64_t> fallback = {}) const;
  std::uint64_t get_u64(const std::string& key, std::optional<std::uint64_t> fallback = {}) const;
  bool get_bool(const std::string& key, std::optional<bool> fallback = {}) const;

  std::vector<std::string>& section(const std::string& name);
  const std::vector<std::string>& section(const std::string& name) const;
  bool has_section(const std::string& name) const { return sections_.count(name) != 0; }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return order_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, std::string>> order_;
  std::map<std::string, std::vector<std::string>> sections_;
  std::vector<std::string> section_order_;
};

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace weldad
