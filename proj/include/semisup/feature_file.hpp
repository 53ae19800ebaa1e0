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

#ifndef SEMISUP_FEATURE_FILE_HPP
#define SEMISUP_FEATURE_FILE_HPP

// Binary feature file, little-endian:
//
//   "SSLF" | u8 version (0x01) | u64 count | u32 dim | u8 flags
//   per example:
//     u64 id | dim x f32 features
//     [flags bit0] u16 tag count | count x u32 tags
//     [flags bit1] u32 label

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "semisup/dataset.hpp"
#include "semisup/error.hpp"

namespace semisup {

inline constexpr std::array<char, 4> kFeatureMagic = {'S', 'S', 'L', 'F'};
inline constexpr std::uint8_t kFeatureVersion = 0x01;
inline constexpr std::uint8_t kFlagTags = 0x01;
inline constexpr std::uint8_t kFlagLabels = 0x02;
inline constexpr std::size_t kFeatureHeaderSize = 18;

struct FeatureFileHeader {
  std::uint64_t count = 0;
  std::uint32_t dim = 0;
  std::uint8_t flags = 0;

  bool has_tags() const noexcept { return (flags & kFlagTags) != 0; }
  bool has_labels() const noexcept { return (flags & kFlagLabels) != 0; }
};

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
    }
  }
  void put_f32(float value) { put(std::bit_cast<std::uint32_t>(value)); }
  void put_f64(double value) { put(std::bit_cast<std::uint64_t>(value)); }
  void put_bytes(std::string_view bytes) { out_.append(bytes); }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  template <typename T>
  T get(const char* what) {
    static_assert(std::is_integral_v<T>);
    need(sizeof(T), what);
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(value);
  }
  float get_f32(const char* what) { return std::bit_cast<float>(get<std::uint32_t>(what)); }
  double get_f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }
  std::string_view get_bytes(std::size_t n, const char* what) {
    need(n, what);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& message) const {
    throw DataError(source_ + ": " + message + " at byte offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) fail(std::string("truncated file while reading ") + what);
  }

  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

inline void write_header(ByteWriter& w, std::uint64_t count, std::size_t dim, std::uint8_t flags) {
  w.put_bytes(std::string_view(kFeatureMagic.data(), kFeatureMagic.size()));
  w.put(kFeatureVersion);
  w.put(count);
  w.put(static_cast<std::uint32_t>(dim));
  w.put(flags);
}

inline FeatureFileHeader read_header(ByteReader& r) {
  auto magic = r.get_bytes(4, "magic");
  if (magic != std::string_view(kFeatureMagic.data(), kFeatureMagic.size())) {
    r.fail("bad magic (expected \"SSLF\")");
  }
  const auto version = r.get<std::uint8_t>("version");
  if (version != kFeatureVersion) r.fail("unsupported version " + std::to_string(version));
  FeatureFileHeader h;
  h.count = r.get<std::uint64_t>("example count");
  h.dim = r.get<std::uint32_t>("dim");
  h.flags = r.get<std::uint8_t>("flags");
  if ((h.flags & ~(kFlagTags | kFlagLabels)) != 0) {
    r.fail("unknown flag bits " + std::to_string(h.flags));
  }
  if (h.dim == 0) r.fail("dim must be positive");
  return h;
}

inline void read_features_into(ByteReader& r, std::uint32_t dim, std::uint64_t index,
                               std::vector<float>& out) {
  out.resize(dim);
  for (std::uint32_t j = 0; j < dim; ++j) {
    const float v = r.get_f32("features");
    if (!std::isfinite(v)) {
      r.fail("non-finite feature (example " + std::to_string(index) + ", component " +
             std::to_string(j) + ")");
    }
    out[j] = v;
  }
}

}  // namespace detail

inline std::string encode_features(const UnlabeledPool& pool) {
  detail::ByteWriter w;
  detail::write_header(w, pool.size(), pool.dim(), pool.tagged() ? kFlagTags : 0);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    w.put(pool.id(i).value);
    for (float v : pool.features(i)) w.put_f32(v);
    if (pool.tagged()) {
      const auto tags = pool.tags(i);
      if (tags.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw DataError("example " + std::to_string(pool.id(i).value) + ": too many tags");
      }
      w.put(static_cast<std::uint16_t>(tags.size()));
      for (ClassIndex t : tags) w.put(static_cast<std::uint32_t>(t));
    }
  }
  return w.take();
}

inline std::string encode_features(const LabeledDataset& data) {
  detail::ByteWriter w;
  detail::write_header(w, data.size(), data.dim(), kFlagLabels);
  for (std::size_t i = 0; i < data.size(); ++i) {
    w.put(data.id(i).value);
    for (float v : data.features(i)) w.put_f32(v);
    w.put(static_cast<std::uint32_t>(data.label(i)));
  }
  return w.take();
}

inline FeatureFileHeader decode_feature_header(std::string_view bytes,
                                               const std::string& source = "<memory>") {
  detail::ByteReader r(bytes, source);
  return detail::read_header(r);
}

/// Decodes a pool. `num_classes` bounds tag indices; the file does not store it.
inline UnlabeledPool decode_pool(std::string_view bytes, std::size_t num_classes,
                                 const std::string& source = "<memory>") {
  detail::ByteReader r(bytes, source);
  const auto h = detail::read_header(r);
  if (h.has_labels()) r.fail("file holds a labeled dataset, expected a pool");
  UnlabeledPool pool(h.dim, num_classes, h.has_tags());
  std::vector<float> features;
  std::vector<ClassIndex> tags;
  for (std::uint64_t i = 0; i < h.count; ++i) {
    const ExampleId id{r.get<std::uint64_t>("id")};
    detail::read_features_into(r, h.dim, i, features);
    tags.clear();
    if (h.has_tags()) {
      const auto n = r.get<std::uint16_t>("tag count");
      for (std::uint16_t t = 0; t < n; ++t) {
        const auto tag = r.get<std::uint32_t>("tag");
        if (tag >= num_classes) {
          r.fail("tag " + std::to_string(tag) + " >= num_classes " + std::to_string(num_classes) +
                 " (example " + std::to_string(i) + ")");
        }
        tags.push_back(tag);
      }
    }
    try {
      pool.add(id, features, tags);
    } catch (const DataError& e) {
      r.fail(e.what());
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last example");
  return pool;
}

/// Decodes a labeled dataset. Labels must be below `num_classes`.
inline LabeledDataset decode_labeled(std::string_view bytes, std::size_t num_classes,
                                     const std::string& source = "<memory>") {
  detail::ByteReader r(bytes, source);
  const auto h = detail::read_header(r);
  if (!h.has_labels()) r.fail("file holds no labels, expected a labeled dataset");
  LabeledDataset data(h.dim, num_classes);
  std::vector<float> features;
  for (std::uint64_t i = 0; i < h.count; ++i) {
    const ExampleId id{r.get<std::uint64_t>("id")};
    detail::read_features_into(r, h.dim, i, features);
    if (h.has_tags()) {
      const auto n = r.get<std::uint16_t>("tag count");
      r.get_bytes(std::size_t{n} * 4, "tags");
    }
    const auto label = r.get<std::uint32_t>("label");
    if (label >= num_classes) {
      r.fail("label " + std::to_string(label) + " >= num_classes " + std::to_string(num_classes) +
             " (example " + std::to_string(i) + ")");
    }
    try {
      data.add(id, features, label);
    } catch (const DataError& e) {
      r.fail(e.what());
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last example");
  return data;
}

inline void write_features(const UnlabeledPool& pool, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_features(pool));
}

inline void write_features(const LabeledDataset& data, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_features(data));
}

inline FeatureFileHeader read_feature_header(const std::filesystem::path& path) {
  return decode_feature_header(detail::read_file_bytes(path), path.string());
}

inline UnlabeledPool read_pool(const std::filesystem::path& path, std::size_t num_classes) {
  return decode_pool(detail::read_file_bytes(path), num_classes, path.string());
}

inline LabeledDataset read_labeled(const std::filesystem::path& path, std::size_t num_classes) {
  return decode_labeled(detail::read_file_bytes(path), num_classes, path.string());
}

}  // namespace semisup

#endif  // SEMISUP_FEATURE_FILE_HPP
