// Copyright 2026 The turbovaed Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Named f32 tensor container and its TVWD file format.
//
// File layout (all integers little-endian):
//   bytes 0..3    magic "TVWD"
//   bytes 4..7    u32 version (1)
//   bytes 8..15   u64 header length L
//   bytes 16..    L bytes of UTF-8 JSON, space-padded so the payload starts on
//                 a 64-byte boundary
//   payload       raw f32 data; every entry offset is relative to the payload
//                 start and 64-byte aligned
//
// The header carries the entry table, payload_bytes, a zlib CRC-32 of the
// payload and a CRC-32 of the header itself (header_crc32, computed over the
// compact JSON dump without that key). See docs/format.md for an annotated
// example.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "turbovaed/tensor.hpp"

namespace turbovaed {

struct DecoderConfig;

inline constexpr std::uint32_t kTvwdVersion = 1;
inline constexpr std::size_t kTvwdAlignment = 64;

struct WeightEntry {
  std::vector<std::int64_t> shape;  // 0 to 5 extents
  std::vector<float> data;

  std::int64_t numel() const;
};

class WeightStore {
 public:
  using Map = std::map<std::string, WeightEntry>;

  // Throws ValidationError on a bad name, a duplicate, or a size mismatch.
  void insert(const std::string& name, std::vector<std::int64_t> shape, std::vector<float> data);
  // Like insert but replaces an existing entry.
  void set(const std::string& name, std::vector<std::int64_t> shape, std::vector<float> data);
  void insert_tensor(const std::string& name, const Tensor5& t);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const WeightEntry& at(const std::string& name) const;
  // The entry viewed as a 5-D tensor; shorter shapes are left-padded with 1s.
  Tensor5 tensor(const std::string& name) const;
  bool erase(const std::string& name) { return entries_.erase(name) != 0; }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<std::string> names() const;
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  // Bitwise equality of names, shapes and payload bits.
  friend bool operator==(const WeightStore& a, const WeightStore& b);

 private:
  Map entries_;
};

// Nonempty printable ASCII, '/'-separated, no empty segments.
bool is_valid_entry_name(std::string_view name);

std::string serialize(const WeightStore& store);
// Throws FormatError, CorruptionError or ValidationError; never reads outside
// `bytes`.
WeightStore deserialize(std::string_view bytes);

void save(const WeightStore& store, const std::string& path);
WeightStore load(const std::string& path);
// Whole file contents; IoError if unreadable.
std::string read_file(const std::string& path);

struct TvwdEntryInfo {
  std::string name;
  std::vector<std::int64_t> shape;
  std::uint64_t offset = 0;  // relative to the payload start
  std::uint64_t nbytes = 0;
};

struct TvwdInfo {
  std::uint32_t version = 0;
  std::uint64_t header_bytes = 0;
  std::uint64_t payload_bytes = 0;
  std::uint32_t payload_crc32 = 0;
  std::uint64_t file_bytes = 0;
  std::vector<TvwdEntryInfo> entries;  // file order
};

// Layout summary of a file that passes full validation (same errors as
// deserialize).
TvwdInfo describe(std::string_view bytes);

// Single-tensor .tvt files hold one entry named "tensor".
inline constexpr const char* kTensorEntryName = "tensor";
void save_tensor(const Tensor5& t, const std::string& path);
Tensor5 load_tensor(const std::string& path);

struct ShapeMismatch {
  std::string name;
  std::vector<std::int64_t> expected;
  std::vector<std::int64_t> actual;
};

struct ValidationReport {
  std::vector<std::string> missing;
  std::vector<std::string> extra;
  std::vector<ShapeMismatch> shape_mismatch;

  bool ok() const { return missing.empty() && extra.empty() && shape_mismatch.empty(); }
  std::size_t issue_count() const { return missing.size() + extra.size() + shape_mismatch.size(); }
  std::string to_string() const;
};

ValidationReport validate_against(const WeightStore& store, const DecoderConfig& cfg);

std::string shape_to_string(const std::vector<std::int64_t>& shape);

}  // namespace turbovaed
