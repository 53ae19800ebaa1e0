/*
 * Copyright 2026 The semisup Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SEMISUP_MANIFEST_HPP
#define SEMISUP_MANIFEST_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semisup/dataset.hpp"
#include "semisup/error.hpp"

namespace semisup {

/// One manifest record: {"id":N,"label":N,"score":X}, score optional.
struct ManifestEntry {
  ExampleId id;
  ClassIndex label = 0;
  std::optional<double> score;

  friend bool operator==(const ManifestEntry& a, const ManifestEntry& b) {
    if (a.id != b.id || a.label != b.label || a.score.has_value() != b.score.has_value()) {
      return false;
    }
    return !a.score || std::bit_cast<std::uint64_t>(*a.score) ==
                           std::bit_cast<std::uint64_t>(*b.score);
  }
};

/// Formats a single record with fixed key order. Doubles are printed in the
/// shortest form that parses back to the same value.
inline std::string format_manifest_line(const ManifestEntry& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id.value;
  j["label"] = e.label;
  if (e.score) {
    if (!std::isfinite(*e.score)) {
      throw DataError("manifest entry " + std::to_string(e.id.value) + ": non-finite score");
    }
    j["score"] = *e.score;
  }
  return j.dump();
}

inline void write_manifest(std::span<const ManifestEntry> entries, std::ostream& out) {
  for (const auto& e : entries) out << format_manifest_line(e) << '\n';
}

inline void write_manifest(std::span<const ManifestEntry> entries,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_manifest(entries, out);
  if (!out) throw DataError("write failed for " + path.string());
}

inline std::vector<ManifestEntry> read_manifest(std::istream& in,
                                                const std::string& source = "<stream>") {
  std::vector<ManifestEntry> entries;
  std::set<std::pair<std::uint64_t, ClassIndex>> seen;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw DataError(source + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) fail("empty line");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) fail("record is not a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (key != "id" && key != "label" && key != "score") fail("unknown key \"" + key + "\"");
    }
    if (!j.contains("id") || !j["id"].is_number_unsigned()) {
      fail("\"id\" missing or not a non-negative integer");
    }
    if (!j.contains("label") || !j["label"].is_number_unsigned() ||
        j["label"].get<std::uint64_t>() > UINT32_MAX) {
      fail("\"label\" missing or not a non-negative 32-bit integer");
    }
    ManifestEntry e;
    e.id = ExampleId{j["id"].get<std::uint64_t>()};
    e.label = static_cast<ClassIndex>(j["label"].get<std::uint64_t>());
    if (j.contains("score")) {
      if (!j["score"].is_number()) fail("\"score\" is not a number");
      e.score = j["score"].get<double>();
      if (!std::isfinite(*e.score)) fail("non-finite score");
    }
    if (!seen.emplace(e.id.value, e.label).second) {
      fail("duplicate (id, label) pair (" + std::to_string(e.id.value) + ", " +
           std::to_string(e.label) + ")");
    }
    entries.push_back(e);
  }
  return entries;
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for reading");
  return read_manifest(in, path.string());
}

inline std::vector<ManifestEntry> to_manifest(const ConstructedDataset& data) {
  std::vector<ManifestEntry> out;
  out.reserve(data.size());
  for (const auto& e : data.entries()) out.push_back({e.id, e.label, e.score});
  return out;
}

/// Entries without a score get 1.0.
inline ConstructedDataset from_manifest(std::span<const ManifestEntry> entries) {
  ConstructedDataset out;
  for (const auto& e : entries) out.add({e.id, e.label, e.score.value_or(1.0)});
  return out;
}

}  // namespace semisup

#endif  // SEMISUP_MANIFEST_HPP
