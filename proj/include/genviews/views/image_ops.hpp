#pragma once

#include "genviews/core/types.hpp"

namespace genviews::views {

inline float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

// Bilinear lookup with edge-clamped coordinates on one channel plane.
float sample_bilinear(const float* plane, int h, int w, float y, float x);

// Crop rectangle (x0, y0, cw, ch) of `src` image `i`, bilinearly resized into
// `dst` image `j`. A same-size full-frame crop is an exact copy.
void crop_resize(const ImageBatch& src, int i, int x0, int y0, int cw, int ch, ImageBatch& dst,
                 int j);

// dst(y, x) = src(a*x + b*y + c, d*x + e*y + f) with edge replication.
struct AffineMap {
  float a, b, c;  // src_x = a*x + b*y + c
  float d, e, f;  // src_y = d*x + e*y + f
};
void warp_affine(const ImageBatch& src, int i, const AffineMap& m, ImageBatch& dst, int j);

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v);
void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b);

}  // namespace genviews::views
