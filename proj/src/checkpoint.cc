// Copyright (c) 2026 The dfmamba Authors. All Rights Reserved.
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

#include "dfm/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dfm/error.h"

namespace dfm {

namespace {

constexpr char kMagic[8] = {'D', 'F', 'M', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    out_.append(static_cast<const char*>(p), n);
  }
  template <typename T>
  void le(T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    const auto bits = std::bit_cast<U>(v);
    for (std::size_t b = 0; b < sizeof(U); ++b)
      out_.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
  void str(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <typename T>
  T le(const char* what) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    need(sizeof(U), what);
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b)
      bits |= static_cast<U>(static_cast<unsigned char>(in_[pos_ + b])) << (8 * b);
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }
  std::string str(const char* what) {
    const auto n = le<std::uint32_t>(what);
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n)
      throw FormatError(std::string("checkpoint truncated while reading ") + what,
                        static_cast<std::int64_t>(pos_));
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.le(kCheckpointVersion);
  w.le(ckpt.config_hash);
  w.le(ckpt.step);
  w.le(ckpt.epoch);
  w.le(ckpt.heldout_mpjpe);
  w.str(ckpt.config_text);
  w.le(static_cast<std::uint32_t>(ckpt.blobs.size()));
  for (const auto& b : ckpt.blobs) {
    w.le(static_cast<std::uint8_t>(b.kind));
    w.str(b.name);
    w.le(static_cast<std::uint64_t>(b.values.size()));
    for (double v : b.values) w.le(v);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.need(sizeof(kMagic), "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a checkpoint (bad magic)", 0);
  r.skip(sizeof(kMagic));
  const auto version_at = static_cast<std::int64_t>(r.pos());
  const auto version = r.le<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  Checkpoint ckpt;
  ckpt.config_hash = r.le<std::uint64_t>("config hash");
  ckpt.step = r.le<std::int64_t>("step");
  ckpt.epoch = r.le<std::int64_t>("epoch");
  ckpt.heldout_mpjpe = r.le<double>("held-out MPJPE");
  const auto config_at = static_cast<std::int64_t>(r.pos());
  ckpt.config_text = r.str("config");
  if (fnv1a(ckpt.config_text) != ckpt.config_hash)
    throw FormatError("checkpoint config hash does not match its config text", config_at);
  const auto count = r.le<std::uint32_t>("blob count");
  for (std::uint32_t i = 0; i < count; ++i) {
    Blob b;
    const auto kind_at = static_cast<std::int64_t>(r.pos());
    const auto kind = r.le<std::uint8_t>("blob kind");
    if (kind > 3) throw FormatError("invalid blob kind " + std::to_string(kind), kind_at);
    b.kind = static_cast<BlobKind>(kind);
    b.name = r.str("blob name");
    const auto numel = r.le<std::uint64_t>("blob size");
    if (numel > r.remaining() / 8)
      throw FormatError("checkpoint truncated inside blob '" + b.name + "'",
                        static_cast<std::int64_t>(r.pos()));
    b.values.resize(numel);
    for (auto& v : b.values) v = r.le<double>("blob values");
    ckpt.blobs.push_back(std::move(b));
  }
  if (r.remaining() != 0)
    throw FormatError("trailing bytes after checkpoint", static_cast<std::int64_t>(r.pos()));
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    const auto bytes = serialize_checkpoint(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes);
}

}  // namespace dfm
