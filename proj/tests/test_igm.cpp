#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "genviews/igm/dataset_cache.hpp"
#include "genviews/igm/learned.hpp"
#include "genviews/igm/procedural.hpp"
#include "test_util.hpp"

using namespace genviews;
using namespace genviews::igm;

namespace {

// Numerical-integration oracle for the truncated-normal second moment:
// Simpson's rule on x^2 phi(x) over [-t, t], normalized by the interval mass.
double truncated_std_quadrature(double t) {
  const int n = 4000;  // even
  const double h = 2 * t / n;
  auto f = [](double x) { return x * x * norm_pdf(x); };
  double second = f(-t) + f(t);
  double mass = norm_pdf(-t) + norm_pdf(t);
  for (int i = 1; i < n; ++i) {
    const double x = -t + i * h;
    const double w = (i % 2 == 1) ? 4.0 : 2.0;
    second += w * f(x);
    mass += w * norm_pdf(x);
  }
  return std::sqrt(second / mass);
}

}  // namespace

TEST_CASE("truncated normal: sigma=0 forces the mean") {
  auto spec = TruncatedNormalSpec::isotropic(4, 0.0, 0.0, 2.0);
  Rng rng(1);
  LatentBatch z = sample_latents(spec, 5, rng);
  CHECK(z.cols() == 5);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("truncated normal: rejection bound holds exactly") {
  auto spec = TruncatedNormalSpec::isotropic(9, 0.0, 1.0, 2.0);
  Rng rng(2);
  LatentBatch z = sample_latents(spec, 5000, rng);
  CHECK(double(z.cwiseAbs().maxCoeff()) <= 2.0);

  auto shifted = TruncatedNormalSpec::isotropic(3, 1.5, 0.7, 1.5);
  LatentBatch z2 = sample_latents(shifted, 3000, rng);
  CHECK(double((z2.array() - 1.5f).abs().maxCoeff()) <= 1.5 * 0.7 + 1e-6);
}

TEST_CASE("truncated normal: monte-carlo std matches the quadrature oracle") {
  const double oracle = truncated_std_quadrature(2.0);
  CHECK(oracle == doctest::Approx(truncated_std(2.0)).epsilon(1e-6));  // two routes agree
  CHECK(oracle == doctest::Approx(0.8796).epsilon(1e-3));

  auto spec = TruncatedNormalSpec::isotropic(1, 0.0, 1.0, 2.0);
  Rng rng(3);
  const int n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_truncated_component(0.0, 1.0, 2.0, rng);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double std = std::sqrt(sumsq / n - mean * mean);
  CHECK(std == doctest::Approx(oracle).epsilon(0.005));
  CHECK(std::abs(std - 0.88) < 0.01);
  (void)spec;
}

TEST_CASE("truncated normal: invalid specs are rejected") {
  Rng rng(4);
  auto bad_sigma = TruncatedNormalSpec::isotropic(2, 0.0, -1.0, 2.0);
  CHECK_THROWS_AS(sample_latents(bad_sigma, 1, rng), InvalidSpecError);
  auto bad_t = TruncatedNormalSpec::isotropic(2, 0.0, 1.0, 0.0);
  CHECK_THROWS_AS(sample_latents(bad_t, 1, rng), InvalidSpecError);
  auto bad_mu = TruncatedNormalSpec::isotropic(2, std::nan(""), 1.0, 2.0);
  CHECK_THROWS_AS(sample_latents(bad_mu, 1, rng), InvalidSpecError);
  auto ok = TruncatedNormalSpec::isotropic(2, 0.0, 1.0, 2.0);
  CHECK_THROWS_AS(sample_latents(ok, 0, rng), ContractError);
}

TEST_CASE("procedural: deterministic and centered at z=0") {
  auto g = make_procedural_generator(ProceduralGenerator::default_spec(true));
  LatentVector z = LatentVector::Zero(8);
  ImageBatch a = g->generate_one(z, 0);
  ImageBatch b = g->generate_one(z, 0);
  CHECK(a.data == b.data);
  CHECK(a.h == 32);
  CHECK(double(a.data.minCoeff()) >= 0.0);
  CHECK(double(a.data.maxCoeff()) <= 1.0);

  // mid-gray background in the corners, shape mass in the center
  CHECK(a.at(0, 0, 0, 0) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(a.at(0, 1, 31, 31) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(a.at(0, 0, 16, 16) == doctest::Approx(0.55).epsilon(1e-4));

  // horizontal symmetry for the unrotated centered circle (class 0)
  for (int x = 0; x < 16; ++x)
    CHECK(a.at(0, 0, 16, x) == doctest::Approx(a.at(0, 0, 16, 31 - x)).epsilon(1e-4));
}

TEST_CASE("procedural: contract errors") {
  auto cond = make_procedural_generator(ProceduralGenerator::default_spec(true));
  auto uncond = make_procedural_generator(ProceduralGenerator::default_spec(false));
  LatentBatch z8 = LatentBatch::Zero(8, 2);
  LatentBatch z9 = LatentBatch::Zero(9, 2);
  std::vector<ClassLabel> y{1, 2};
  CHECK_THROWS_AS(cond->generate(z8, nullptr), ContractError);   // missing y
  CHECK_THROWS_AS(uncond->generate(z9, &y), ContractError);      // extra y
  CHECK_THROWS_AS(cond->generate(z9, &y), ContractError);        // dim mismatch
  std::vector<ClassLabel> bad{1, 99};
  CHECK_THROWS_AS(cond->generate(z8, &bad), ContractError);
}

TEST_CASE("procedural: smoothness constant under small latent moves") {
  auto g = make_procedural_generator(ProceduralGenerator::default_spec(false));
  const auto& prior = g->spec().default_prior;
  std::vector<double> constants;
  for (std::uint64_t seed : {101u, 202u, 303u}) {
    Rng rng(seed);
    double total = 0.0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      LatentVector z = sample_truncated(prior, rng);
      LatentVector delta(9);
      for (int d = 0; d < 9; ++d) delta[d] = float(rng.normal());
      delta *= 0.05f / delta.norm();
      ImageBatch a = g->generate_one(z);
      ImageBatch b = g->generate_one(LatentVector(z + delta));
      total += double((a.data - b.data).cwiseAbs().mean());
    }
    constants.push_back(total / n);
    CHECK(total / n < 0.05);
  }
  // stability across seeds within +/-20%
  const double mid = constants[0];
  for (double c : constants) CHECK(std::abs(c - mid) / mid < 0.2);
  MESSAGE("smoothness constant: ", constants[0]);
}

TEST_CASE("procedural: class coverage over 10*M conditional draws") {
  auto g = make_procedural_generator(ProceduralGenerator::default_spec(true));
  const int m = g->spec().num_classes;
  const auto coverage = [&](std::uint64_t seed) {
    Rng rng(seed);
    DatasetCache cache = build_anchor_cache(*g, 10 * m, false, rng);
    std::vector<int> seen(std::size_t(m), 0);
    for (const auto& y : cache.labels) ++seen[std::size_t(*y)];
    for (int c : seen)
      if (c == 0) return false;
    return true;
  };
  if (!coverage(7)) {
    // violation probability < 1e-3 at M=10; rerun once with a logged seed
    MESSAGE("class coverage rerun with seed 8");
    CHECK(coverage(8));
  }
}

TEST_CASE("procedural: unconditional class bins are balanced and frozen") {
  auto spec = ProceduralGenerator::default_spec(false);
  ProceduralGenerator g(spec);
  Rng rng(9);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    ++counts[std::size_t(g.class_bin(float(sample_truncated_component(0, 1, 2, rng))))];
  for (int c : counts) {
    // multinomial 5-sigma band around n/10
    const double sd = std::sqrt(n * 0.1 * 0.9);
    CHECK(std::abs(c - n / 10) < 5 * sd);
  }
}

TEST_CASE("procedural: save/load round trip") {
  auto g = make_procedural_generator(ProceduralGenerator::default_spec(false));
  const std::string dir = testutil::temp_dir("gen_roundtrip");
  g->save(dir + "/gen.ckpt");
  auto loaded = Generator::load(dir + "/gen.ckpt");
  Rng rng(10);
  LatentBatch z = sample_latents(g->spec().default_prior, 4, rng);
  CHECK(g->generate(z).data == loaded->generate(z).data);
}

TEST_CASE("learned igm: one repeated image is reproduced for any z") {
  auto g = make_procedural_generator(ProceduralGenerator::default_spec(false));
  Rng rng(11);
  LatentBatch z1 = sample_latents(g->spec().default_prior, 1, rng);
  ImageBatch one = g->generate(z1);
  ImageBatch dataset(32, one.h, one.w, one.c);
  for (int i = 0; i < 32; ++i) dataset.data.col(i) = one.data.col(0);

  LearnedFitConfig cfg;
  cfg.latent_dim = 4;
  cfg.epochs = 120;
  cfg.batch = 32;
  cfg.lr = 3e-3;
  Rng fit_rng(12);
  auto handle = fit_learned_igm(dataset, nullptr, cfg, fit_rng);

  Rng zrng(13);
  LatentBatch zs = sample_latents(handle->spec().default_prior, 8, zrng);
  ImageBatch out = handle->generate(zs);
  for (int i = 0; i < out.n; ++i)
    CHECK(double((out.data.col(i) - one.data.col(0)).cwiseAbs().mean()) < 0.05);
}

TEST_CASE("learned igm: invalid latent dim") {
  ImageBatch dataset(1, 32, 32, 3);
  LearnedFitConfig cfg;
  cfg.latent_dim = 0;
  Rng rng(14);
  CHECK_THROWS_AS(fit_learned_igm(dataset, nullptr, cfg, rng), InvalidSpecError);
}

TEST_CASE("learned igm: fitting beats an untrained decoder on held-out data") {
  auto g = make_procedural_generator(ProceduralGenerator::default_spec(false));
  Rng rng(15);
  igm::DatasetCache cache = build_anchor_cache(*g, 300, false, rng);

  LearnedFitConfig cfg;
  cfg.latent_dim = 12;
  cfg.epochs = 12;
  cfg.batch = 50;
  Rng fit_rng(16);
  auto fitted = fit_learned_igm(cache.images, nullptr, cfg, fit_rng);
  const double fitted_mae = nlohmann::json::parse(fitted->metadata_json()).at("heldout_mae");

  Rng base_rng(17);
  auto untrained = make_untrained_learned_igm(32, 32, cfg, base_rng);
  const auto* raw = dynamic_cast<const LearnedGenerator*>(untrained.get());
  std::vector<int> hold_idx;
  for (int i = 270; i < 300; ++i) hold_idx.push_back(i);
  ImageBatch hold = cache.images.slice(hold_idx);
  const double untrained_mae = raw->reconstruction_mae(hold, nullptr);

  MESSAGE("fitted=", fitted_mae, " untrained=", untrained_mae);
  CHECK(fitted_mae < untrained_mae);
}

TEST_CASE("learned igm: save/load round trip is bit exact") {
  ImageBatch dataset(8, 32, 32, 3);
  Rng img_rng(18);
  for (Eigen::Index i = 0; i < dataset.data.size(); ++i)
    dataset.data.data()[i] = float(img_rng.uniform());
  LearnedFitConfig cfg;
  cfg.latent_dim = 3;
  cfg.epochs = 2;
  cfg.batch = 8;
  Rng rng(19);
  auto handle = fit_learned_igm(dataset, nullptr, cfg, rng);
  const std::string dir = testutil::temp_dir("learned_roundtrip");
  handle->save(dir + "/g.ckpt");
  auto loaded = Generator::load(dir + "/g.ckpt");
  Rng zrng(20);
  LatentBatch z = sample_latents(handle->spec().default_prior, 3, zrng);
  CHECK(handle->generate(z).data == loaded->generate(z).data);
}

TEST_CASE("dataset cache: byte-identical rerun and round trip") {
  auto g = make_procedural_generator(ProceduralGenerator::default_spec(true));
  const std::string dir_a = testutil::temp_dir("cache_a");
  const std::string dir_b = testutil::temp_dir("cache_b");
  {
    Rng rng(21);
    write_dataset_cache(dir_a, build_anchor_cache(*g, 10, false, rng));
  }
  {
    Rng rng(21);
    write_dataset_cache(dir_b, build_anchor_cache(*g, 10, false, rng));
  }
  CHECK(testutil::file_bytes(dir_a + "/metadata.jsonl") ==
        testutil::file_bytes(dir_b + "/metadata.jsonl"));
  for (int i = 0; i < 10; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "/images/%06d.png", i);
    CHECK(testutil::file_bytes(dir_a + name) == testutil::file_bytes(dir_b + name));
  }

  DatasetCache cache = read_dataset_cache(dir_a);
  CHECK(cache.size() == 10);
  CHECK(cache.all_labeled());
  CHECK(cache.latents.rows() == 8);
  // pixels survive the 8-bit round trip within quantization error
  Rng rng(21);
  DatasetCache fresh = build_anchor_cache(*g, 10, false, rng);
  CHECK(double((cache.images.data - fresh.images.data).cwiseAbs().maxCoeff()) < 0.5 / 255.0 + 1e-6);
}

TEST_CASE("dataset cache: balanced conditional quota") {
  auto g = make_procedural_generator(ProceduralGenerator::default_spec(true));
  Rng rng(22);
  DatasetCache cache = build_anchor_cache(*g, 100, true, rng);
  std::vector<int> counts(10, 0);
  for (const auto& y : cache.labels) ++counts[std::size_t(*y)];
  for (int c : counts) CHECK(c == 10);
}
