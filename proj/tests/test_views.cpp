#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "genviews/igm/procedural.hpp"
#include "genviews/views/latent_views.hpp"
#include "genviews/views/pixel_augs.hpp"
#include "test_util.hpp"

using namespace genviews;
using namespace genviews::views;

namespace {

ImageBatch render_batch(int n, std::uint64_t seed) {
  auto g = igm::make_procedural_generator(igm::ProceduralGenerator::default_spec(false));
  Rng rng(seed);
  LatentBatch z = igm::sample_latents(g->spec().default_prior, n, rng);
  return g->generate(z);
}

}  // namespace

TEST_CASE("pixel views: identity configuration is the exact identity") {
  ImageBatch x = render_batch(6, 1);
  Rng rng(2);
  ImageBatch out = apply_pixel_views(x, PixelAugConfig::identity(32, 32), rng);
  CHECK(out.data == x.data);
}

TEST_CASE("pixel views: flip-only is the exact horizontal mirror") {
  ImageBatch x = render_batch(3, 3);
  PixelAugConfig cfg = PixelAugConfig::identity(32, 32);
  cfg.flip_prob = 1.0;
  Rng rng(4);
  ImageBatch out = apply_pixel_views(x, cfg, rng);
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int px = 0; px < 32; ++px)
          CHECK(out.at(i, c, y, px) == x.at(i, c, y, 31 - px));
}

TEST_CASE("pixel views: default config is stochastic across streams") {
  ImageBatch x = render_batch(100, 5);
  PixelAugConfig cfg;  // defaults
  Rng r1(6), r2(7);
  ImageBatch a = apply_pixel_views(x, cfg, r1);
  ImageBatch b = apply_pixel_views(x, cfg, r2);
  int differing = 0;
  for (int i = 0; i < x.n; ++i)
    if ((a.data.col(i) - b.data.col(i)).cwiseAbs().maxCoeff() > 1e-6f) ++differing;
  CHECK(differing == 100);

  // same stream twice -> identical
  Rng r3a(8), r3b(8);
  CHECK(apply_pixel_views(x, cfg, r3a).data == apply_pixel_views(x, cfg, r3b).data);
}

TEST_CASE("pixel views: output stays in range and at configured size") {
  ImageBatch x = render_batch(40, 9);
  PixelAugConfig cfg;
  cfg.out_h = 24;
  cfg.out_w = 24;
  Rng rng(10);
  ImageBatch out = apply_pixel_views(x, cfg, rng);
  CHECK(out.h == 24);
  CHECK(out.w == 24);
  CHECK(out.n == 40);
  CHECK(double(out.data.minCoeff()) >= 0.0);
  CHECK(double(out.data.maxCoeff()) <= 1.0);
}

TEST_CASE("pixel views: degenerate crop window rejected") {
  ImageBatch x = render_batch(1, 11);
  PixelAugConfig cfg;
  cfg.crop_scale_range = {1e-5, 1.0};
  Rng rng(12);
  CHECK_THROWS_AS(apply_pixel_views(x, cfg, rng), ConfigError);

  PixelAugConfig bad;
  bad.crop_scale_range = {0.9, 0.2};
  CHECK_THROWS_AS(apply_pixel_views(x, bad, rng), ConfigError);
}

TEST_CASE("gaussian view: sigma=0 returns z exactly") {
  Rng rng(13);
  LatentVector z(9);
  for (int i = 0; i < 9; ++i) z[i] = float(rng.normal());
  auto off = igm::TruncatedNormalSpec::isotropic(9, 0.0, 0.0, 2.0);
  CHECK(gaussian_view(z, off, rng) == z);
}

TEST_CASE("gaussian view: offsets respect the truncation bound") {
  Rng rng(14);
  LatentVector z = LatentVector::Zero(9);
  auto off = igm::TruncatedNormalSpec::isotropic(9, 0.0, 0.2, 2.0);
  for (int i = 0; i < 2000; ++i) {
    LatentVector v = gaussian_view(z, off, rng);
    CHECK(double(v.cwiseAbs().maxCoeff()) <= 0.4 + 1e-6);
  }
}

TEST_CASE("gaussian view: nonzero offset mean rejected") {
  Rng rng(15);
  LatentVector z = LatentVector::Zero(4);
  auto off = igm::TruncatedNormalSpec::isotropic(4, 0.5, 0.2, 2.0);
  CHECK_THROWS_AS(gaussian_view(z, off, rng), ConfigError);
}

TEST_CASE("gaussian view: offset moments match the truncated-normal oracle") {
  // componentwise mean/std at n=1e5: |mean| < 3*stderr, std within 1%
  Rng rng(16);
  const double sigma = 0.2, t = 2.0;
  auto off = igm::TruncatedNormalSpec::isotropic(1, 0.0, sigma, t);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  LatentVector z = LatentVector::Zero(1);
  for (int i = 0; i < n; ++i) {
    const double v = double(gaussian_view(z, off, rng)[0]);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double std = std::sqrt(sumsq / n - mean * mean);
  const double expected_std = sigma * igm::truncated_std(t);
  CHECK(expected_std == doctest::Approx(0.176).epsilon(0.01));
  CHECK(std::abs(mean) < 3.0 * expected_std / std::sqrt(double(n)));
  CHECK(std::abs(std - expected_std) / expected_std < 0.01);
}

TEST_CASE("gaussian view: million-draw offset std hits 0.176 +/- 0.002") {
  Rng rng(17);
  const int n = 1000000;
  double sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = igm::sample_truncated_component(0.0, 0.2, 2.0, rng);
    sumsq += v * v;
  }
  CHECK(std::abs(std::sqrt(sumsq / n) - 0.176) < 0.002);
}

TEST_CASE("independent view: uncorrelated with the anchor") {
  Rng rng(18);
  auto prior = igm::TruncatedNormalSpec::isotropic(1, 0.0, 1.0, 2.0);
  const int n = 10000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    const double a = double(igm::sample_truncated(prior, rng)[0]);  // anchor component
    const double b = double(independent_view(prior, rng)[0]);
    sa += a;
    sb += b;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr = cov / std::sqrt((saa / n - (sa / n) * (sa / n)) * (sbb / n - (sb / n) * (sb / n)));
  CHECK(std::abs(corr) < 0.05);
}

TEST_CASE("latent view config: kind-field pairing enforced") {
  LatentViewConfig c;
  c.kind = LatentViewKind::independent;
  c.walkset_ref = "w";
  CHECK_THROWS_AS(c.validate(), ConfigError);

  LatentViewConfig s;
  s.kind = LatentViewKind::steered;
  CHECK_THROWS_AS(s.validate(), ConfigError);

  LatentViewConfig g;
  g.kind = LatentViewKind::gaussian;
  g.gauss_spec = igm::TruncatedNormalSpec::isotropic(9, 0.0, 0.2, 2.0);
  g.validate();
}
