#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "genviews/core/errors.hpp"

namespace genviews::io {

// Single-file binary container: magic, JSON header, raw payload. Used by
// generator handles and encoder checkpoints.
inline constexpr char kBlobMagic[8] = {'G', 'V', 'B', 'L', 'O', 'B', '1', '\0'};

inline void write_blob(const std::string& path, const std::string& header_json,
                       const std::string& payload) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(kBlobMagic, 8);
  const std::uint64_t hlen = header_json.size(), plen = payload.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(header_json.data(), std::streamsize(hlen));
  f.write(reinterpret_cast<const char*>(&plen), 8);
  f.write(payload.data(), std::streamsize(plen));
  if (!f) throw IoError("write failed: " + path);
}

struct Blob {
  std::string header_json;
  std::string payload;
};

inline Blob read_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != std::string(kBlobMagic, 8))
    throw IoError("not a genviews blob: " + path);
  std::uint64_t hlen = 0, plen = 0;
  Blob b;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  b.header_json.resize(hlen);
  f.read(b.header_json.data(), std::streamsize(hlen));
  f.read(reinterpret_cast<char*>(&plen), 8);
  b.payload.resize(plen);
  f.read(b.payload.data(), std::streamsize(plen));
  if (!f) throw IoError("truncated blob: " + path);
  return b;
}

}  // namespace genviews::io
