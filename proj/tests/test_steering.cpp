#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "genviews/igm/learned.hpp"
#include "genviews/igm/procedural.hpp"
#include "genviews/steering/steering.hpp"
#include "test_util.hpp"

using namespace genviews;
using namespace genviews::steering;

namespace {

ImageBatch render_batch(int n, std::uint64_t seed) {
  auto g = igm::make_procedural_generator(igm::ProceduralGenerator::default_spec(false));
  Rng rng(seed);
  return g->generate(igm::sample_latents(g->spec().default_prior, n, rng));
}

double cosine(const VecXf& a, const VecXf& b) {
  return double(a.dot(b)) / (double(a.norm()) * double(b.norm()) + 1e-12);
}

}  // namespace

TEST_CASE("pixel edit: identity alphas leave images unchanged") {
  ImageBatch x = render_batch(4, 1);
  for (Transform t : kAllTransforms) {
    auto spec = TargetTransformSpec::defaults(t, 32);
    ImageBatch out = pixel_edit(x, spec, identity_alpha(t));
    CHECK(double((out.data - x.data).cwiseAbs().maxCoeff()) < 1e-6);
  }
}

TEST_CASE("pixel edit: color_r on mid-gray adds exactly in the red channel") {
  ImageBatch x(2, 32, 32, 3);
  x.data.setConstant(0.5f);
  auto spec = TargetTransformSpec::defaults(Transform::color_r, 32);
  ImageBatch out = pixel_edit(x, spec, 0.2);
  const int plane = 32 * 32;
  CHECK(double((out.data.topRows(plane).array() - 0.7f).abs().maxCoeff()) < 1e-6);
  CHECK(double((out.data.bottomRows(2 * plane).array() - 0.5f).abs().maxCoeff()) < 1e-6);
}

TEST_CASE("pixel edit: integer shift is an exact translate with edge fill") {
  ImageBatch x = render_batch(2, 2);
  auto spec = TargetTransformSpec::defaults(Transform::shiftx, 32);
  ImageBatch out = pixel_edit(x, spec, 3.0);
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y) {
        for (int px = 3; px < 32; ++px)
          CHECK(out.at(i, c, y, px) == doctest::Approx(x.at(i, c, y, px - 3)).epsilon(1e-6));
        for (int px = 0; px < 3; ++px)
          CHECK(out.at(i, c, y, px) == doctest::Approx(x.at(i, c, y, 0)).epsilon(1e-6));
      }
}

TEST_CASE("pixel edit: zoom round trip recovers the original") {
  ImageBatch x = render_batch(100, 3);
  auto spec = TargetTransformSpec::defaults(Transform::zoom, 32);
  ImageBatch zoomed = pixel_edit(x, spec, 2.0);
  ImageBatch back = pixel_edit(zoomed, spec, 0.5);
  double total = 0.0;
  for (int i = 0; i < x.n; ++i)
    total += double((back.data.col(i) - x.data.col(i)).cwiseAbs().mean());
  MESSAGE("zoom round-trip mean abs diff: ", total / x.n);
  CHECK(total / x.n < 0.02);
}

TEST_CASE("pixel edit: alpha range enforced") {
  ImageBatch x = render_batch(1, 4);
  auto spec = TargetTransformSpec::defaults(Transform::shiftx, 32);
  CHECK_THROWS_AS(pixel_edit(x, spec, 100.0), DomainError);
  auto zoom = TargetTransformSpec::defaults(Transform::zoom, 32);
  CHECK_THROWS_AS(pixel_edit(x, zoom, 0.0), DomainError);
  CHECK_THROWS_AS(alpha_coordinate(Transform::zoom, -1.0), DomainError);
}

TEST_CASE("compose walk: trivial identities and linearity") {
  WalkSet ws;
  ws.latent_dim = 9;
  ws.trained = true;
  Rng rng(5);
  for (const char* name : {"shiftx", "shifty", "zoom", "rot2d"}) {
    VecXf w(9);
    for (int i = 0; i < 9; ++i) w[i] = float(rng.normal());
    ws.directions[name] = w;
  }

  // identity alphas -> zero offset
  std::map<std::string, double> ids{{"shiftx", 0.0}, {"shifty", 0.0}, {"zoom", 1.0}, {"rot2d", 0.0}};
  CHECK(double(compose_walk(ws, ids).norm()) == 0.0);

  // single transform
  std::map<std::string, double> only{{"shiftx", 2.0}};
  CHECK(compose_walk(ws, only) == VecXf(2.f * ws.directions.at("shiftx")));

  // zoom alpha=e -> coefficient 1
  std::map<std::string, double> zoom_e{{"zoom", std::exp(1.0)}};
  CHECK(double((compose_walk(ws, zoom_e) - ws.directions.at("zoom")).norm()) < 1e-5);

  // linearity by superposition on random alpha pairs (in alpha~ coordinates)
  for (int trial = 0; trial < 10; ++trial) {
    std::map<std::string, double> a{{"shiftx", rng.uniform(-3, 3)}, {"rot2d", rng.uniform(-20, 20)}};
    std::map<std::string, double> b{{"shiftx", rng.uniform(-3, 3)}, {"rot2d", rng.uniform(-20, 20)}};
    std::map<std::string, double> sum{{"shiftx", a["shiftx"] + b["shiftx"]},
                                      {"rot2d", a["rot2d"] + b["rot2d"]}};
    VecXf lhs = compose_walk(ws, sum);
    VecXf rhs = compose_walk(ws, a) + compose_walk(ws, b);
    CHECK(double((lhs - rhs).norm()) < 1e-4);
  }

  // untrained / missing direction
  WalkSet untrained;
  untrained.latent_dim = 9;
  CHECK_THROWS_AS(compose_walk(untrained, only), StateError);
  std::map<std::string, double> missing{{"color_r", 0.1}};
  CHECK_THROWS_AS(compose_walk(ws, missing), StateError);
}

TEST_CASE("walkset: json round trip") {
  WalkSet ws;
  ws.latent_dim = 3;
  ws.trained = true;
  ws.directions["shiftx"] = VecXf::LinSpaced(3, 0.1f, 0.3f);
  ws.directions["zoom"] = VecXf::LinSpaced(3, -1.f, 1.f);
  ws.fit_report["shiftx"] = 0.011;
  ws.fit_report["zoom"] = 0.022;
  const std::string dir = testutil::temp_dir("walkset");
  ws.save(dir + "/w.json");
  WalkSet back = WalkSet::load(dir + "/w.json");
  CHECK(back.trained);
  CHECK(back.latent_dim == 3);
  CHECK(back.directions.at("shiftx") == ws.directions.at("shiftx"));
  CHECK(back.fit_report.at("zoom") == doctest::Approx(0.022));
}

TEST_CASE("learn walk: identity target keeps w near zero") {
  auto g = igm::make_procedural_generator(igm::ProceduralGenerator::default_spec(false));
  TargetTransformSpec spec = TargetTransformSpec::defaults(Transform::shiftx, 32);
  spec.pixel_edit_override = [](const ImageBatch& x, double) { return x; };
  WalkOptConfig opt;
  opt.iterations = 60;
  opt.batch = 4;
  opt.lr = 0.02;
  Rng rng(6);
  auto fit = learn_walk(*g, spec, opt, rng);
  MESSAGE("identity walk norm: ", fit.direction.norm());
  CHECK(double(fit.direction.norm()) <= 1e-3);
  CHECK(fit.final_loss < 1e-6);
}

TEST_CASE("learn walk: recovers the renderer's shiftx axis") {
  auto g = igm::make_procedural_generator(igm::ProceduralGenerator::default_spec(false));
  TargetTransformSpec spec = TargetTransformSpec::defaults(Transform::shiftx, 32);
  WalkOptConfig opt;
  opt.iterations = 250;
  opt.batch = 6;
  Rng rng(7);
  auto fit = learn_walk(*g, spec, opt, rng);
  VecXf axis = VecXf::Zero(9);
  axis[0] = 1.f;
  MESSAGE("cos(w, e0) = ", cosine(fit.direction, axis), " |w| = ", fit.direction.norm());
  CHECK(std::abs(cosine(fit.direction, axis)) >= 0.9);
}

TEST_CASE("learn walk: smoothed loss is non-increasing within 10%") {
  auto g = igm::make_procedural_generator(igm::ProceduralGenerator::default_spec(false));
  TargetTransformSpec spec = TargetTransformSpec::defaults(Transform::shifty, 32);
  WalkOptConfig opt;
  opt.iterations = 250;
  opt.batch = 6;
  opt.record_loss = true;
  Rng rng(8);
  auto fit = learn_walk(*g, spec, opt, rng);
  REQUIRE(fit.loss_history.size() == 250);
  std::vector<double> windows;
  for (std::size_t start = 0; start + 50 <= fit.loss_history.size(); start += 50) {
    double mean = 0.0;
    for (std::size_t i = start; i < start + 50; ++i) mean += fit.loss_history[i];
    windows.push_back(mean / 50);
  }
  for (std::size_t i = 1; i < windows.size(); ++i) CHECK(windows[i] <= windows[i - 1] * 1.10);
}

TEST_CASE("learn walk: color walk on the learned backend moves the red channel") {
  // fit a small decoder on procedural renders, then steer its latent space
  auto g = igm::make_procedural_generator(igm::ProceduralGenerator::default_spec(false));
  Rng data_rng(9);
  LatentBatch z = igm::sample_latents(g->spec().default_prior, 400, data_rng);
  ImageBatch dataset = g->generate(z);
  igm::LearnedFitConfig fit_cfg;
  fit_cfg.latent_dim = 12;
  fit_cfg.epochs = 25;
  fit_cfg.batch = 50;
  Rng fit_rng(10);
  auto learned = igm::fit_learned_igm(dataset, nullptr, fit_cfg, fit_rng);

  TargetTransformSpec spec = TargetTransformSpec::defaults(Transform::color_r, 32);
  WalkOptConfig opt;
  opt.iterations = 150;
  opt.batch = 6;
  opt.lr = 0.08;
  Rng rng(11);
  auto walk = learn_walk(*learned, spec, opt, rng);

  // statistical effect over 500 samples at alpha = 0.2
  Rng eval_rng(12);
  LatentBatch ze = igm::sample_latents(learned->spec().default_prior, 500, eval_rng);
  ImageBatch base = learned->generate(ze);
  LatentBatch shifted = ze;
  for (int i = 0; i < 500; ++i) shifted.col(i) += 0.2f * walk.direction;
  ImageBatch moved = learned->generate(shifted);

  const int plane = 32 * 32;
  double d_r = 0, d_g = 0, d_b = 0;
  for (int i = 0; i < 500; ++i) {
    d_r += double((moved.data.col(i).segment(0, plane) - base.data.col(i).segment(0, plane)).mean());
    d_g += double(
        (moved.data.col(i).segment(plane, plane) - base.data.col(i).segment(plane, plane)).mean());
    d_b += double(
        (moved.data.col(i).segment(2 * plane, plane) - base.data.col(i).segment(2 * plane, plane))
            .mean());
  }
  d_r /= 500;
  d_g /= 500;
  d_b /= 500;
  MESSAGE("channel deltas at alpha=0.2: r=", d_r, " g=", d_g, " b=", d_b);
  CHECK(std::abs(d_r - 0.2) < 0.05);
  CHECK(std::abs(d_g) < 0.05);
  CHECK(std::abs(d_b) < 0.05);
}

TEST_CASE("steered views on procedural G preserve the ground-truth class") {
  auto spec = igm::ProceduralGenerator::default_spec(false);
  auto g = std::make_shared<igm::ProceduralGenerator>(spec);
  auto ranges = default_alpha_ranges(32);
  WalkOptConfig opt;
  opt.iterations = 200;
  opt.batch = 6;
  Rng rng(13);
  WalkSet ws = learn_walkset(*g, ranges, opt, rng);

  Rng view_rng(14);
  int agree = 0, moved = 0;
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    LatentVector z = igm::sample_truncated(spec.default_prior, view_rng);
    LatentVector zv = sample_steered_view(z, ws, ranges, view_rng);
    if (*g->true_class(z, std::nullopt) == *g->true_class(zv, std::nullopt)) ++agree;
    ImageBatch a = g->generate_one(z), b = g->generate_one(zv);
    if (double((a.data - b.data).cwiseAbs().mean()) > 0.005) ++moved;
  }
  MESSAGE("steered class agreement: ", double(agree) / n, ", detectably moved: ",
          double(moved) / n);
  CHECK(double(agree) / n >= 0.99);
  CHECK(double(moved) / n > 0.9);
}
