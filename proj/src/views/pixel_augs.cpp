#include "genviews/views/pixel_augs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "genviews/views/image_ops.hpp"

namespace genviews::views {

namespace {

constexpr double kAspectLo = 3.0 / 4.0;
constexpr double kAspectHi = 4.0 / 3.0;

struct CropRect {
  int x0, y0, w, h;
};

CropRect sample_crop(int h, int w, double lo, double hi, Rng& rng) {
  const double area = double(h) * double(w);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(lo, hi);
    const double ratio = std::exp(rng.uniform(std::log(kAspectLo), std::log(kAspectHi)));
    const int cw = int(std::lround(std::sqrt(target * ratio)));
    const int ch = int(std::lround(std::sqrt(target / ratio)));
    if (cw > 0 && ch > 0 && cw <= w && ch <= h) {
      const int x0 = cw < w ? int(rng.integer(std::uint64_t(w - cw + 1))) : 0;
      const int y0 = ch < h ? int(rng.integer(std::uint64_t(h - ch + 1))) : 0;
      return {x0, y0, cw, ch};
    }
  }
  // center fallback with aspect clamped into range
  const double in_ratio = double(w) / double(h);
  int cw, ch;
  if (in_ratio < kAspectLo) {
    cw = w;
    ch = int(std::lround(cw / kAspectLo));
  } else if (in_ratio > kAspectHi) {
    ch = h;
    cw = int(std::lround(ch * kAspectHi));
  } else {
    cw = w;
    ch = h;
  }
  return {(w - cw) / 2, (h - ch) / 2, cw, ch};
}

void hflip_inplace(ImageBatch& b, int i) {
  for (int c = 0; c < b.c; ++c) {
    float* plane = b.data.col(i).data() + std::int64_t(c) * b.h * b.w;
    for (int y = 0; y < b.h; ++y)
      std::reverse(plane + std::int64_t(y) * b.w, plane + std::int64_t(y + 1) * b.w);
  }
}

void clamp01(ImageBatch& b, int i) {
  b.data.col(i) = b.data.col(i).cwiseMax(0.f).cwiseMin(1.f);
}

void apply_brightness(ImageBatch& b, int i, float f) {
  b.data.col(i) *= f;
  clamp01(b, i);
}

void apply_contrast(ImageBatch& b, int i, float f) {
  const int plane = b.h * b.w;
  const float* img = b.data.col(i).data();
  double mean_gray = 0.0;
  for (int p = 0; p < plane; ++p)
    mean_gray += luma(img[p], img[plane + p], img[2 * plane + p]);
  const float m = float(mean_gray / plane);
  b.data.col(i) = f * b.data.col(i).array() + (1.f - f) * m;
  clamp01(b, i);
}

void apply_saturation(ImageBatch& b, int i, float f) {
  const int plane = b.h * b.w;
  float* img = b.data.col(i).data();
  for (int p = 0; p < plane; ++p) {
    const float l = luma(img[p], img[plane + p], img[2 * plane + p]);
    img[p] = f * img[p] + (1.f - f) * l;
    img[plane + p] = f * img[plane + p] + (1.f - f) * l;
    img[2 * plane + p] = f * img[2 * plane + p] + (1.f - f) * l;
  }
  clamp01(b, i);
}

void apply_hue(ImageBatch& b, int i, float delta) {
  const int plane = b.h * b.w;
  float* img = b.data.col(i).data();
  for (int p = 0; p < plane; ++p) {
    float h, s, v;
    rgb_to_hsv(img[p], img[plane + p], img[2 * plane + p], h, s, v);
    hsv_to_rgb(h + delta, s, v, img[p], img[plane + p], img[2 * plane + p]);
  }
  clamp01(b, i);
}

void apply_grayscale(ImageBatch& b, int i) {
  const int plane = b.h * b.w;
  float* img = b.data.col(i).data();
  for (int p = 0; p < plane; ++p) {
    const float l = luma(img[p], img[plane + p], img[2 * plane + p]);
    img[p] = img[plane + p] = img[2 * plane + p] = l;
  }
}

}  // namespace

bool PixelAugConfig::is_identity() const {
  const bool jitter_off =
      jitter_prob == 0.0 || (jitter_strengths[0] == 0.0 && jitter_strengths[1] == 0.0 &&
                             jitter_strengths[2] == 0.0 && jitter_strengths[3] == 0.0);
  return crop_scale_range[0] == 1.0 && crop_scale_range[1] == 1.0 && flip_prob == 0.0 &&
         jitter_off && grayscale_prob == 0.0;
}

void PixelAugConfig::validate(int in_h, int in_w) const {
  const auto [lo, hi] = crop_scale_range;
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0))
    throw ConfigError("pixel augs: crop_scale_range must satisfy 0 < low <= high <= 1");
  for (double p : {flip_prob, jitter_prob, grayscale_prob})
    if (p < 0.0 || p > 1.0) throw ConfigError("pixel augs: probability outside [0,1]");
  for (double s : jitter_strengths)
    if (s < 0.0) throw ConfigError("pixel augs: negative jitter strength");
  if (jitter_strengths[3] > 0.5) throw ConfigError("pixel augs: hue strength > 0.5");
  if (out_h < 1 || out_w < 1) throw ConfigError("pixel augs: bad output size");
  // smallest sampleable crop must still cover at least one pixel per side
  const double min_area = lo * double(in_h) * double(in_w);
  if (std::sqrt(min_area / kAspectHi) < 1.0 || std::sqrt(min_area * kAspectLo) < 1.0)
    throw ConfigError("pixel augs: crop window would be smaller than 1px");
}

ImageBatch apply_pixel_views(const ImageBatch& x, const PixelAugConfig& cfg, Rng& rng) {
  check_image_range(x, "apply_pixel_views");
  if (x.c != 3) throw ContractError("apply_pixel_views: expects 3-channel images");
  cfg.validate(x.h, x.w);

  ImageBatch out(x.n, cfg.out_h, cfg.out_w, x.c);
  for (int i = 0; i < x.n; ++i) {
    const CropRect crop = sample_crop(x.h, x.w, cfg.crop_scale_range[0], cfg.crop_scale_range[1], rng);
    crop_resize(x, i, crop.x0, crop.y0, crop.w, crop.h, out, i);

    if (rng.uniform() < cfg.flip_prob) hflip_inplace(out, i);

    if (rng.uniform() < cfg.jitter_prob) {
      std::array<int, 4> order{0, 1, 2, 3};
      std::shuffle(order.begin(), order.end(), rng.engine());
      for (int op : order) {
        const double s = cfg.jitter_strengths[std::size_t(op)];
        if (s == 0.0) continue;
        switch (op) {
          case 0: apply_brightness(out, i, float(rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s))); break;
          case 1: apply_contrast(out, i, float(rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s))); break;
          case 2: apply_saturation(out, i, float(rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s))); break;
          default: apply_hue(out, i, float(rng.uniform(-s, s))); break;
        }
      }
    }

    if (rng.uniform() < cfg.grayscale_prob) apply_grayscale(out, i);
  }
  return out;
}

}  // namespace genviews::views
