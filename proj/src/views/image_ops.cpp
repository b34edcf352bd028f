#include "genviews/views/image_ops.hpp"

#include <algorithm>
#include <cmath>

namespace genviews::views {

float sample_bilinear(const float* plane, int h, int w, float y, float x) {
  const int x0 = int(std::floor(x));
  const int y0 = int(std::floor(y));
  const float fx = x - float(x0);
  const float fy = y - float(y0);
  const auto cx = [&](int v) { return std::clamp(v, 0, w - 1); };
  const auto cy = [&](int v) { return std::clamp(v, 0, h - 1); };
  const float v00 = plane[cy(y0) * w + cx(x0)];
  const float v01 = plane[cy(y0) * w + cx(x0 + 1)];
  const float v10 = plane[cy(y0 + 1) * w + cx(x0)];
  const float v11 = plane[cy(y0 + 1) * w + cx(x0 + 1)];
  const float top = v00 + (v01 - v00) * fx;
  const float bot = v10 + (v11 - v10) * fx;
  return top + (bot - top) * fy;
}

void crop_resize(const ImageBatch& src, int i, int x0, int y0, int cw, int ch, ImageBatch& dst,
                 int j) {
  const float sx = float(cw) / float(dst.w);
  const float sy = float(ch) / float(dst.h);
  for (int c = 0; c < src.c; ++c) {
    const float* plane = src.data.col(i).data() + std::int64_t(c) * src.h * src.w;
    float* out = dst.data.col(j).data() + std::int64_t(c) * dst.h * dst.w;
    for (int oy = 0; oy < dst.h; ++oy) {
      const float fy = y0 + (oy + 0.5f) * sy - 0.5f;
      for (int ox = 0; ox < dst.w; ++ox) {
        const float fx = x0 + (ox + 0.5f) * sx - 0.5f;
        out[oy * dst.w + ox] = sample_bilinear(plane, src.h, src.w, fy, fx);
      }
    }
  }
}

void warp_affine(const ImageBatch& src, int i, const AffineMap& m, ImageBatch& dst, int j) {
  for (int c = 0; c < src.c; ++c) {
    const float* plane = src.data.col(i).data() + std::int64_t(c) * src.h * src.w;
    float* out = dst.data.col(j).data() + std::int64_t(c) * dst.h * dst.w;
    for (int y = 0; y < dst.h; ++y)
      for (int x = 0; x < dst.w; ++x) {
        const float sxf = m.a * x + m.b * y + m.c;
        const float syf = m.d * x + m.e * y + m.f;
        out[y * dst.w + x] = sample_bilinear(plane, src.h, src.w, syf, sxf);
      }
  }
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float d = mx - mn;
  v = mx;
  s = mx > 0.f ? d / mx : 0.f;
  if (d <= 0.f) {
    h = 0.f;
    return;
  }
  if (mx == r) {
    h = std::fmod((g - b) / d, 6.f);
  } else if (mx == g) {
    h = (b - r) / d + 2.f;
  } else {
    h = (r - g) / d + 4.f;
  }
  h /= 6.f;
  if (h < 0.f) h += 1.f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  const float hh = (h - std::floor(h)) * 6.f;
  const int sector = int(hh) % 6;
  const float f = hh - std::floor(hh);
  const float p = v * (1.f - s);
  const float q = v * (1.f - s * f);
  const float t = v * (1.f - s * (1.f - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace genviews::views
