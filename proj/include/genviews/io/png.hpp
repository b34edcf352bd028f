#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genviews/core/types.hpp"

namespace genviews::io {

// Minimal 8-bit RGB PNG reader/writer (zlib-backed). Covers exactly the
// files this project emits plus standard non-interlaced RGB/RGBA/gray input.
void write_png_rgb8(const std::string& path, int height, int width,
                    const std::vector<std::uint8_t>& rgb_interleaved);

struct PngImage {
  int height = 0, width = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, 3 channels
};

PngImage read_png_rgb8(const std::string& path);

// [0,1] float image (channel-planar column) <-> 8-bit interleaved RGB.
std::vector<std::uint8_t> to_rgb8(const ImageBatch& batch, int index);
void from_rgb8(const std::vector<std::uint8_t>& rgb, ImageBatch& batch, int index);

void save_image_png(const std::string& path, const ImageBatch& batch, int index);

}  // namespace genviews::io
