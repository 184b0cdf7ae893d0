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

#include "weldad/kv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "weldad/tensor.hpp"

namespace weldad {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

KvDocument KvDocument::parse(const std::string& text) {
  KvDocument doc;
  std::istringstream is(text);
  std::string raw;
  std::string current;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      current = trim(line.substr(1, line.size() - 2));
      if (!doc.sections_.count(current)) doc.section_order_.push_back(current);
      doc.sections_[current];
      continue;
    }
    if (!current.empty()) {
      doc.sections_[current].push_back(line);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    doc.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return doc;
}

KvDocument KvDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<std::string>& KvDocument::section(const std::string& name) {
  if (!sections_.count(name)) section_order_.push_back(name);
  return sections_[name];
}

std::string KvDocument::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : order_) os << k << " = " << v << '\n';
  for (const auto& name : section_order_) {
    os << '[' << name << "]\n";
    for (const auto& line : sections_.at(name)) os << line << '\n';
  }
  return os.str();
}

void KvDocument::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << serialize();
}

void KvDocument::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw Error("empty key");
  auto it = values_.find(key);
  if (it == values_.end()) {
    values_[key] = value;
    order_.emplace_back(key, value);
    return;
  }
  it->second = value;
  for (auto& kv : order_) {
    if (kv.first == key) kv.second = value;
  }
}

void KvDocument::set(const std::string& key, double value) { set(key, format_double(value)); }
void KvDocument::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
void KvDocument::set(const std::string& key, std::uint64_t value) {
  set(key, std::to_string(value));
}

std::string KvDocument::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("missing key '" + key + "'");
  return it->second;
}

std::string KvDocument::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

namespace {

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N value{};
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error("key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

double KvDocument::get_double(const std::string& key, std::optional<double> fallback) const {
  if (!has(key)) {
    if (fallback) return *fallback;
    throw Error("missing key '" + key + "'");
  }
  return parse_number<double>(key, values_.at(key));
}

std::int64_t KvDocument::get_int(const std::string& key,
                                 std::optional<std::int64_t> fallback) const {
  if (!has(key)) {
    if (fallback) return *fallback;
    throw Error("missing key '" + key + "'");
  }
  return parse_number<std::int64_t>(key, values_.at(key));
}

std::uint64_t KvDocument::get_u64(const std::string& key,
                                  std::optional<std::uint64_t> fallback) const {
  if (!has(key)) {
    if (fallback) return *fallback;
    throw Error("missing key '" + key + "'");
  }
  return parse_number<std::uint64_t>(key, values_.at(key));
}

bool KvDocument::get_bool(const std::string& key, std::optional<bool> fallback) const {
  if (!has(key)) {
    if (fallback) return *fallback;
    throw Error("missing key '" + key + "'");
  }
  const std::string v = values_.at(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("key '" + key + "': expected a boolean, got '" + v + "'");
}

const std::vector<std::string>& KvDocument::section(const std::string& name) const {
  auto it = sections_.find(name);
  if (it == sections_.end()) throw Error("missing section [" + name + "]");
  return it->second;
}

}  // namespace weldad
