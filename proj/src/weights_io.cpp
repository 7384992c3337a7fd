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


#include "turbovaed/weights_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "turbovaed/decoder_config.hpp"

namespace turbovaed {

static_assert(std::endian::native == std::endian::little, "TVWD I/O assumes a little-endian host");

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'T', 'V', 'W', 'D'};
constexpr std::size_t kPreamble = 16;
constexpr std::uint64_t kMaxHeaderBytes = std::uint64_t{1} << 30;

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (const auto e : shape) {
    if (e < 0) throw ValidationError("negative extent in shape " + shape_to_string(shape));
    if (e != 0 && n > std::numeric_limits<std::int64_t>::max() / 8 / e) {
      throw ValidationError("shape " + shape_to_string(shape) + " overflows");
    }
    n *= e;
  }
  return n;
}

std::size_t align_up(std::size_t v) { return (v + kTvwdAlignment - 1) / kTvwdAlignment * kTvwdAlignment; }

std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename U>
U read_le(std::string_view bytes, std::size_t at) {
  U v;
  std::memcpy(&v, bytes.data() + at, sizeof(U));
  return v;
}

template <typename U>
void append_le(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

}  // namespace

std::string shape_to_string(const std::vector<std::int64_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::int64_t WeightEntry::numel() const { return shape_numel(shape); }

bool is_valid_entry_name(std::string_view name) {
  if (name.empty() || name.front() == '/' || name.back() == '/') return false;
  char prev = 0;
  for (const char ch : name) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 0x21 || u > 0x7e) return false;
    if (ch == '/' && prev == '/') return false;
    prev = ch;
  }
  return true;
}

void WeightStore::insert(const std::string& name, std::vector<std::int64_t> shape, std::vector<float> data) {
  if (contains(name)) throw ValidationError("duplicate entry '" + name + "'");
  set(name, std::move(shape), std::move(data));
}

void WeightStore::set(const std::string& name, std::vector<std::int64_t> shape, std::vector<float> data) {
  if (!is_valid_entry_name(name)) throw ValidationError("invalid entry name '" + name + "'");
  if (shape.size() > 5) throw ValidationError("entry '" + name + "' has more than 5 extents");
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw ValidationError("entry '" + name + "': " + std::to_string(data.size()) + " values for shape " +
                          shape_to_string(shape));
  }
  entries_[name] = WeightEntry{std::move(shape), std::move(data)};
}

void WeightStore::insert_tensor(const std::string& name, const Tensor5& t) {
  insert(name, {t.n(), t.c(), t.t(), t.h(), t.w()}, t.flatten());
}

const WeightEntry& WeightStore::at(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw LoadError("missing entry '" + name + "'");
  return it->second;
}

Tensor5 WeightStore::tensor(const std::string& name) const {
  const auto& e = at(name);
  Shape5 s{1, 1, 1, 1, 1};
  const std::size_t pad = 5 - e.shape.size();
  for (std::size_t i = 0; i < e.shape.size(); ++i) s[pad + i] = e.shape[i];
  return Tensor5(s, e.data);
}

std::vector<std::string> WeightStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

bool operator==(const WeightStore& a, const WeightStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (auto ia = a.entries_.begin(), ib = b.entries_.begin(); ia != a.entries_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape != ib->second.shape) return false;
    const auto& da = ia->second.data;
    const auto& db = ib->second.data;
    if (da.size() != db.size()) return false;
    if (!da.empty() && std::memcmp(da.data(), db.data(), da.size() * sizeof(float)) != 0) return false;
  }
  return true;
}

namespace {

// CRC-32 of the compact dump of everything in the header except the CRC
// itself. Padding whitespace is not covered.
std::uint32_t table_crc32(const json& header) {
  json covered = header;
  covered.erase("header_crc32");
  const std::string text = covered.dump();
  return crc32_of(text.data(), text.size());
}

}  // namespace

std::string serialize(const WeightStore& store) {
  json entries = json::array();
  std::size_t offset = 0;
  for (const auto& [name, e] : store) {
    const std::size_t nbytes = e.data.size() * sizeof(float);
    entries.push_back({{"name", name}, {"dtype", "f32"}, {"shape", e.shape}, {"offset", offset}, {"nbytes", nbytes}});
    offset = align_up(offset + nbytes);
  }
  const std::size_t payload_bytes = offset;
  std::string payload(payload_bytes, '\0');
  std::size_t at = 0;
  for (const auto& [name, e] : store) {
    const std::size_t nbytes = e.data.size() * sizeof(float);
    if (nbytes) std::memcpy(payload.data() + at, e.data.data(), nbytes);
    at = align_up(at + nbytes);
  }
  json header = {{"entries", entries},
                 {"payload_bytes", payload_bytes},
                 {"payload_crc32", crc32_of(payload.data(), payload.size())}};
  header["header_crc32"] = table_crc32(header);
  std::string text = header.dump();
  text.resize(align_up(kPreamble + text.size()) - kPreamble, ' ');

  std::string out;
  out.reserve(kPreamble + text.size() + payload.size());
  out.append(kMagic, 4);
  append_le<std::uint32_t>(out, kTvwdVersion);
  append_le<std::uint64_t>(out, text.size());
  out += text;
  out += payload;
  return out;
}

WeightStore deserialize(std::string_view bytes) {
  if (bytes.size() < kPreamble) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) {
      throw CorruptionError("truncated preamble (" + std::to_string(bytes.size()) + " bytes)");
    }
    throw FormatError("not a TVWD file: too short for the preamble");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic, expected \"TVWD\"");
  const auto version = read_le<std::uint32_t>(bytes, 4);
  if (version != kTvwdVersion) throw FormatError("unsupported TVWD version " + std::to_string(version));
  const auto header_len = read_le<std::uint64_t>(bytes, 8);
  if (header_len > kMaxHeaderBytes) throw FormatError("implausible header length " + std::to_string(header_len));
  if (header_len > bytes.size() - kPreamble) {
    throw CorruptionError("truncated header: declares " + std::to_string(header_len) + " bytes, " +
                          std::to_string(bytes.size() - kPreamble) + " available");
  }
  json header;
  try {
    header = json::parse(bytes.substr(kPreamble, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("header is not valid JSON: ") + e.what());
  }

  const std::size_t payload_start = kPreamble + header_len;
  std::uint64_t payload_bytes = 0;
  std::uint32_t expected_crc = 0;
  struct Row {
    std::string name;
    std::vector<std::int64_t> shape;
    std::uint64_t offset = 0;
    std::uint64_t nbytes = 0;
  };
  std::vector<Row> rows;
  try {
    if (!header.is_object() || !header.contains("entries") || !header.at("entries").is_array()) {
      throw FormatError("header lacks an 'entries' array");
    }
    payload_bytes = header.at("payload_bytes").get<std::uint64_t>();
    expected_crc = header.at("payload_crc32").get<std::uint32_t>();
    const auto header_crc = header.at("header_crc32").get<std::uint32_t>();
    if (table_crc32(header) != header_crc) throw CorruptionError("header CRC-32 mismatch");
    for (const auto& je : header.at("entries")) {
      Row r;
      r.name = je.at("name").get<std::string>();
      const auto dtype = je.at("dtype").get<std::string>();
      if (dtype != "f32") throw FormatError("entry '" + r.name + "': unsupported dtype '" + dtype + "'");
      r.shape = je.at("shape").get<std::vector<std::int64_t>>();
      r.offset = je.at("offset").get<std::uint64_t>();
      r.nbytes = je.at("nbytes").get<std::uint64_t>();
      rows.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed header: ") + e.what());
  }

  std::set<std::string> seen;
  for (const auto& r : rows) {
    if (!is_valid_entry_name(r.name)) throw ValidationError("invalid entry name '" + r.name + "'");
    if (!seen.insert(r.name).second) throw ValidationError("duplicate entry '" + r.name + "'");
    if (r.shape.size() > 5) throw ValidationError("entry '" + r.name + "' has more than 5 extents");
    const auto numel = static_cast<std::uint64_t>(shape_numel(r.shape));
    if (r.nbytes != numel * sizeof(float)) {
      throw ValidationError("entry '" + r.name + "': nbytes " + std::to_string(r.nbytes) + " disagrees with shape " +
                            shape_to_string(r.shape));
    }
    if (r.offset % kTvwdAlignment) throw ValidationError("entry '" + r.name + "': offset not 64-byte aligned");
    if (r.offset > payload_bytes || r.nbytes > payload_bytes - r.offset) {
      throw CorruptionError("entry '" + r.name + "' extends past the declared payload");
    }
  }
  std::vector<const Row*> by_offset;
  for (const auto& r : rows) {
    if (r.nbytes) by_offset.push_back(&r);
  }
  std::sort(by_offset.begin(), by_offset.end(), [](const Row* a, const Row* b) { return a->offset < b->offset; });
  for (std::size_t i = 1; i < by_offset.size(); ++i) {
    if (by_offset[i]->offset < by_offset[i - 1]->offset + by_offset[i - 1]->nbytes) {
      throw ValidationError("entries '" + by_offset[i - 1]->name + "' and '" + by_offset[i]->name + "' overlap");
    }
  }

  if (payload_start % kTvwdAlignment) throw FormatError("payload is not 64-byte aligned");
  const std::size_t available = bytes.size() - payload_start;
  if (payload_bytes > available) {
    throw CorruptionError("truncated payload: declares " + std::to_string(payload_bytes) + " bytes, " +
                          std::to_string(available) + " available");
  }
  if (payload_bytes < available) throw CorruptionError("trailing bytes after the payload");
  const char* payload = bytes.data() + payload_start;
  if (crc32_of(payload, payload_bytes) != expected_crc) throw CorruptionError("payload CRC-32 mismatch");

  WeightStore store;
  for (const auto& r : rows) {
    std::vector<float> data(r.nbytes / sizeof(float));
    if (r.nbytes) std::memcpy(data.data(), payload + r.offset, r.nbytes);
    store.insert(r.name, r.shape, std::move(data));
  }
  return store;
}

void save(const WeightStore& store, const std::string& path) {
  const std::string bytes = serialize(store);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

WeightStore load(const std::string& path) { return deserialize(read_file(path)); }

TvwdInfo describe(std::string_view bytes) {
  deserialize(bytes);
  TvwdInfo info;
  info.version = read_le<std::uint32_t>(bytes, 4);
  info.header_bytes = read_le<std::uint64_t>(bytes, 8);
  info.file_bytes = bytes.size();
  const json header = json::parse(bytes.substr(kPreamble, info.header_bytes));
  info.payload_bytes = header.at("payload_bytes").get<std::uint64_t>();
  info.payload_crc32 = header.at("payload_crc32").get<std::uint32_t>();
  for (const auto& je : header.at("entries")) {
    info.entries.push_back({je.at("name").get<std::string>(), je.at("shape").get<std::vector<std::int64_t>>(),
                            je.at("offset").get<std::uint64_t>(), je.at("nbytes").get<std::uint64_t>()});
  }
  return info;
}

void save_tensor(const Tensor5& t, const std::string& path) {
  WeightStore s;
  s.insert_tensor(kTensorEntryName, t);
  save(s, path);
}

Tensor5 load_tensor(const std::string& path) {
  const WeightStore s = load(path);
  if (!s.contains(kTensorEntryName) || s.size() != 1) {
    throw FormatError("'" + path + "' is not a single-tensor file (expected one entry named \"tensor\")");
  }
  return s.tensor(kTensorEntryName);
}

std::string ValidationReport::to_string() const {
  if (ok()) return "weights match the config\n";
  std::ostringstream os;
  for (const auto& m : missing) os << "missing: " << m << "\n";
  for (const auto& e : extra) os << "extra: " << e << "\n";
  for (const auto& s : shape_mismatch) {
    os << "shape mismatch: " << s.name << " expected " << shape_to_string(s.expected) << " got "
       << shape_to_string(s.actual) << "\n";
  }
  return os.str();
}

ValidationReport validate_against(const WeightStore& store, const DecoderConfig& cfg) {
  ValidationReport report;
  std::set<std::string> expected;
  for (const auto& spec : param_specs(cfg)) {
    expected.insert(spec.name);
    if (!store.contains(spec.name)) {
      report.missing.push_back(spec.name);
    } else if (store.at(spec.name).shape != spec.shape) {
      report.shape_mismatch.push_back({spec.name, spec.shape, store.at(spec.name).shape});
    }
  }
  for (const auto& name : store.names()) {
    if (!expected.count(name)) report.extra.push_back(name);
  }
  return report;
}

}  // namespace turbovaed
