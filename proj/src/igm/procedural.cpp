#include "genviews/igm/procedural.hpp"

#include <algorithm>
#include <cmath>

namespace genviews::igm {
namespace {

struct V2 {
  float x, y;
};

inline float len(V2 p) { return std::sqrt(p.x * p.x + p.y * p.y); }
inline float clampf(float v, float lo, float hi) { return std::min(std::max(v, lo), hi); }
inline float signf(float v) { return v > 0.f ? 1.f : (v < 0.f ? -1.f : 0.f); }

float sd_circle(V2 p, float r) { return len(p) - r; }

float sd_ellipse_approx(V2 p, float rx, float ry) {
  V2 q{p.x / rx, p.y / ry};
  return (len(q) - 1.f) * std::min(rx, ry);
}

float sd_box(V2 p, float bx, float by) {
  const float dx = std::abs(p.x) - bx, dy = std::abs(p.y) - by;
  const float ox = std::max(dx, 0.f), oy = std::max(dy, 0.f);
  return std::sqrt(ox * ox + oy * oy) + std::min(std::max(dx, dy), 0.f);
}

float sd_equilateral_triangle(V2 p, float r) {
  const float k = std::sqrt(3.f);
  p.x = std::abs(p.x) - r;
  p.y = p.y + r / k;
  if (p.x + k * p.y > 0.f) p = V2{(p.x - k * p.y) * 0.5f, (-k * p.x - p.y) * 0.5f};
  p.x -= clampf(p.x, -2.f * r, 0.f);
  return -len(p) * signf(p.y);
}

float sd_regular_polygon(V2 p, float r, int n) {
  const float an = float(M_PI) / float(n);
  const float ca = std::cos(an), sa = std::sin(an);
  float bn = std::fmod(std::atan2(p.x, p.y), 2.f * an);
  if (bn < 0.f) bn += 2.f * an;
  bn -= an;
  const float l = len(p);
  V2 q{l * std::cos(bn), l * std::abs(std::sin(bn))};
  q.x -= r * ca;
  q.y -= r * sa;
  q.y += clampf(-q.y, 0.f, r * sa);
  return len(q) * signf(q.x);
}

float sd_star5(V2 p, float r, float rf) {
  const V2 k1{0.809016994375f, -0.587785252292f};
  const V2 k2{-k1.x, k1.y};
  p.x = std::abs(p.x);
  float d1 = std::max(k1.x * p.x + k1.y * p.y, 0.f);
  p = V2{p.x - 2.f * d1 * k1.x, p.y - 2.f * d1 * k1.y};
  float d2 = std::max(k2.x * p.x + k2.y * p.y, 0.f);
  p = V2{p.x - 2.f * d2 * k2.x, p.y - 2.f * d2 * k2.y};
  p.x = std::abs(p.x);
  p.y -= r;
  const V2 ba{rf * -k1.y - 0.f, rf * k1.x - 1.f};
  const float h = clampf((p.x * ba.x + p.y * ba.y) / (ba.x * ba.x + ba.y * ba.y), 0.f, r);
  const V2 d{p.x - ba.x * h, p.y - ba.y * h};
  return len(d) * signf(p.y * ba.x - p.x * ba.y);
}

float sd_cross(V2 p, float bx, float by) {
  p = V2{std::abs(p.x), std::abs(p.y)};
  if (p.y > p.x) std::swap(p.x, p.y);
  const V2 q{p.x - bx, p.y - by};
  const float k = std::max(q.y, q.x);
  const V2 w = k > 0.f ? q : V2{by - p.x, -k};
  const V2 m{std::max(w.x, 0.f), std::max(w.y, 0.f)};
  return signf(k) * len(m);
}

float sd_ring(V2 p, float mid, float half) { return std::abs(len(p) - mid) - half; }

float sd_moon(V2 p, float d, float ra, float rb) {
  p.y = std::abs(p.y);
  const float a = (ra * ra - rb * rb + d * d) / (2.f * d);
  const float b = std::sqrt(std::max(ra * ra - a * a, 0.f));
  if (d * (p.x * b - p.y * a) > d * d * std::max(b - p.y, 0.f))
    return len(V2{p.x - a, p.y - b});
  return std::max(len(p) - ra, -(len(V2{p.x - d, p.y}) - rb));
}

// Shape order is frozen; adjacent class bins intentionally alternate between
// round and angular silhouettes.
float shape_sdf(int shape, V2 q) {
  switch (shape) {
    case 0: return sd_circle(q, 0.95f);
    case 1: return sd_equilateral_triangle(q, 0.95f);
    case 2: return sd_ring(q, 0.68f, 0.30f);
    case 3: return sd_box(q, 0.72f, 0.72f);
    case 4: return sd_star5(q, 1.0f, 0.45f);
    case 5: return sd_ellipse_approx(q, 1.0f, 0.55f);
    case 6: return sd_cross(q, 0.95f, 0.32f);
    case 7: return sd_regular_polygon(q, 0.92f, 5);
    case 8: return sd_moon(q, 0.5f, 0.95f, 0.75f);
    default: return sd_regular_polygon(q, 0.92f, 6);
  }
}

}  // namespace

GeneratorSpec ProceduralGenerator::default_spec(bool conditional, int num_classes, int height,
                                                int width) {
  GeneratorSpec s;
  s.backend = Backend::procedural;
  s.conditional = conditional;
  s.num_classes = num_classes;
  s.latent_dim = conditional ? 8 : 9;
  s.height = height;
  s.width = width;
  s.channels = 3;
  s.default_prior = TruncatedNormalSpec::isotropic(s.latent_dim, 0.0, 1.0, 2.0);
  return s;
}

ProceduralGenerator::ProceduralGenerator(const GeneratorSpec& spec) : Generator(spec) {
  if (spec_.channels != 3) throw InvalidSpecError("procedural: channels must be 3");
  const int need = spec_.conditional ? 8 : 9;
  if (spec_.latent_dim != need)
    throw InvalidSpecError("procedural: latent_dim must be 8 (conditional) or 9 (unconditional)");
  const int m = spec_.num_classes;
  if (m < 2 || m > 10) throw InvalidSpecError("procedural: num_classes must be in [2,10]");

  if (!spec_.conditional) {
    const double mu = spec_.default_prior.mu[class_dim()];
    const double sg = spec_.default_prior.sigma[class_dim()];
    for (int j = 1; j < m; ++j)
      class_edges_.push_back(mu + sg * truncated_quantile(double(j) / m, spec_.default_prior.t));
  }
  {
    const double mu = spec_.default_prior.mu[4];
    const double sg = spec_.default_prior.sigma[4];
    for (int j = 1; j < 5; ++j)
      color_edges_.push_back(mu + sg * truncated_quantile(double(j) / 5.0, spec_.default_prior.t));
  }
}

ClassLabel ProceduralGenerator::class_bin(float z_class) const {
  int bin = 0;
  for (double e : class_edges_) bin += z_class >= e ? 1 : 0;
  return bin;
}

ClassLabel ProceduralGenerator::color_bin(const LatentVector& z, int bins) const {
  if (bins == 5) {
    int bin = 0;
    for (double e : color_edges_) bin += z[4] >= e ? 1 : 0;
    return bin;
  }
  const double mu = spec_.default_prior.mu[4];
  const double sg = spec_.default_prior.sigma[4];
  int bin = 0;
  for (int j = 1; j < bins; ++j)
    bin += z[4] >= mu + sg * truncated_quantile(double(j) / bins, spec_.default_prior.t) ? 1 : 0;
  return bin;
}

std::optional<ClassLabel> ProceduralGenerator::true_class(const LatentVector& z,
                                                          std::optional<ClassLabel> y) const {
  if (spec_.conditional) return y;
  if (z.size() <= class_dim()) return std::nullopt;
  return class_bin(z[class_dim()]);
}

void ProceduralGenerator::render(const LatentVector& z, ClassLabel y, ImageBatch& out,
                                 int slot) const {
  const int h = spec_.height, w = spec_.width;
  const float cx = 0.5f * w + z[0] * (w / 8.0f);
  const float cy = 0.5f * h + z[1] * (w / 8.0f);
  const float radius = 0.22f * std::min(h, w) * std::exp(0.25f * z[2]);
  const float theta = z[3] * float(M_PI) / 8.0f;
  const float col[3] = {clampf(0.55f + 0.15f * z[4], 0.f, 1.f),
                        clampf(0.55f + 0.15f * z[5], 0.f, 1.f),
                        clampf(0.55f + 0.15f * z[6], 0.f, 1.f)};
  const float bg = clampf(0.5f + 0.2f * z[7], 0.f, 1.f);
  const int shape = spec_.conditional ? y : class_bin(z[class_dim()]);

  const float ct = std::cos(-theta), st = std::sin(-theta);
  float* img = out.data.col(slot).data();
  const int plane = h * w;
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const float dx = px + 0.5f - cx, dy = py + 0.5f - cy;
      const V2 q{(ct * dx - st * dy) / radius, (st * dx + ct * dy) / radius};
      const float sd_px = shape_sdf(shape, q) * radius;
      const float cov = clampf(0.5f - sd_px, 0.f, 1.f);
      const int idx = py * w + px;
      img[idx] = bg + (col[0] - bg) * cov;
      img[plane + idx] = bg + (col[1] - bg) * cov;
      img[2 * plane + idx] = bg + (col[2] - bg) * cov;
    }
  }
}

}  // namespace genviews::igm
