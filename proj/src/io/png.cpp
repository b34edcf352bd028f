#include "genviews/io/png.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "genviews/core/errors.hpp"

namespace genviews::io {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

void write_chunk(std::vector<std::uint8_t>& out, const char* type,
                 const std::vector<std::uint8_t>& data) {
  put_u32(out, std::uint32_t(data.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc =
      crc32(0, out.data() + crc_start, uInt(out.size() - crc_start));
  put_u32(out, std::uint32_t(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

}  // namespace

void write_png_rgb8(const std::string& path, int height, int width,
                    const std::vector<std::uint8_t>& rgb) {
  if (int(rgb.size()) != height * width * 3) throw IoError("write_png: size mismatch");
  std::vector<std::uint8_t> raw;
  raw.reserve(std::size_t(height) * (1 + std::size_t(width) * 3));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), rgb.begin() + std::size_t(y) * width * 3,
               rgb.begin() + std::size_t(y + 1) * width * 3);
  }
  uLongf comp_len = compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw IoError("write_png: deflate failed");
  comp.resize(comp_len);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, std::uint32_t(width));
  put_u32(ihdr, std::uint32_t(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  write_chunk(out, "IHDR", ihdr);
  write_chunk(out, "IDAT", comp);
  write_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

PngImage read_png_rgb8(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0)
    throw IoError("not a png: " + path);

  PngImage img;
  int channels = 0, bit_depth = 0;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  while (pos + 8 <= file.size()) {
    const std::uint32_t len = get_u32(&file[pos]);
    const std::string type(reinterpret_cast<const char*>(&file[pos + 4]), 4);
    const std::uint8_t* data = &file[pos + 8];
    if (type == "IHDR") {
      img.width = int(get_u32(data));
      img.height = int(get_u32(data + 4));
      bit_depth = data[8];
      const int color_type = data[9];
      if (bit_depth != 8) throw IoError("read_png: only 8-bit supported");
      if (data[12] != 0) throw IoError("read_png: interlaced not supported");
      switch (color_type) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 6: channels = 4; break;
        default: throw IoError("read_png: unsupported color type");
      }
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  if (img.width <= 0 || img.height <= 0 || idat.empty()) throw IoError("read_png: malformed file");

  const std::size_t stride = std::size_t(img.width) * std::size_t(channels);
  std::vector<std::uint8_t> raw(std::size_t(img.height) * (stride + 1));
  uLongf raw_len = uLongf(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw IoError("read_png: inflate failed");

  // de-filter
  std::vector<std::uint8_t> px(std::size_t(img.height) * stride);
  const int bpp = channels;
  for (int y = 0; y < img.height; ++y) {
    const std::uint8_t filter = raw[std::size_t(y) * (stride + 1)];
    const std::uint8_t* src = &raw[std::size_t(y) * (stride + 1) + 1];
    std::uint8_t* dst = &px[std::size_t(y) * stride];
    const std::uint8_t* up = y > 0 ? &px[std::size_t(y - 1) * stride] : nullptr;
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = x >= std::size_t(bpp) ? dst[x - bpp] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x >= std::size_t(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw IoError("read_png: bad filter");
      }
      dst[x] = std::uint8_t(v);
    }
  }

  img.rgb.resize(std::size_t(img.height) * img.width * 3);
  for (std::size_t i = 0; i < std::size_t(img.height) * img.width; ++i) {
    if (channels == 1) {
      img.rgb[3 * i] = img.rgb[3 * i + 1] = img.rgb[3 * i + 2] = px[i];
    } else {
      img.rgb[3 * i] = px[i * channels];
      img.rgb[3 * i + 1] = px[i * channels + 1];
      img.rgb[3 * i + 2] = px[i * channels + 2];
    }
  }
  return img;
}

std::vector<std::uint8_t> to_rgb8(const ImageBatch& batch, int index) {
  std::vector<std::uint8_t> rgb(std::size_t(batch.h) * batch.w * 3);
  const int plane = batch.h * batch.w;
  const float* img = batch.data.col(index).data();
  for (int p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) {
      const float v = std::min(std::max(img[c * plane + p], 0.f), 1.f);
      rgb[std::size_t(p) * 3 + c] = std::uint8_t(std::lround(v * 255.f));
    }
  return rgb;
}

void from_rgb8(const std::vector<std::uint8_t>& rgb, ImageBatch& batch, int index) {
  const int plane = batch.h * batch.w;
  float* img = batch.data.col(index).data();
  for (int p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c)
      img[c * plane + p] = float(rgb[std::size_t(p) * 3 + c]) / 255.f;
}

void save_image_png(const std::string& path, const ImageBatch& batch, int index) {
  write_png_rgb8(path, batch.h, batch.w, to_rgb8(batch, index));
}

}  // namespace genviews::io
