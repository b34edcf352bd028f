#pragma once

#include <array>

#include "genviews/core/rng.hpp"
#include "genviews/core/types.hpp"

namespace genviews::views {

// SimCLR-family pixel transformation stack T_x: random resized crop,
// horizontal flip, color jitter, random grayscale. Defaults follow the usual
// SimCLR recipe; gaussian blur is deliberately omitted at 32x32 (the kernel
// would dominate the image).
struct PixelAugConfig {
  std::array<double, 2> crop_scale_range{0.2, 1.0};  // fraction of area
  double flip_prob = 0.5;
  std::array<double, 4> jitter_strengths{0.4, 0.4, 0.4, 0.1};  // brightness, contrast, saturation, hue
  double jitter_prob = 0.8;
  double grayscale_prob = 0.2;
  int out_h = 32, out_w = 32;

  static PixelAugConfig identity(int h, int w) {
    PixelAugConfig c;
    c.crop_scale_range = {1.0, 1.0};
    c.flip_prob = 0.0;
    c.jitter_strengths = {0.0, 0.0, 0.0, 0.0};
    c.jitter_prob = 0.0;
    c.grayscale_prob = 0.0;
    c.out_h = h;
    c.out_w = w;
    return c;
  }

  bool is_identity() const;
  void validate(int in_h, int in_w) const;
};

// [OP] apply_pixel_views: each image independently transformed; output size
// cfg.out_h x cfg.out_w, values kept in [0,1].
ImageBatch apply_pixel_views(const ImageBatch& x, const PixelAugConfig& cfg, Rng& rng);

}  // namespace genviews::views
