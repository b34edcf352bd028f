#include "genviews/eval/suites.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace genviews::eval {

using sampling::BatchSampler;
using sampling::Scheme;
using training::train_encoder;

ProbeSets make_probe_sets(const igm::ProceduralGenerator& g, int n_train, int n_test,
                          std::uint64_t seed) {
  Rng rng(seed);
  const auto& spec = g.spec();
  ProbeSets out;
  const auto draw = [&](int n, ImageBatch& images, std::vector<ClassLabel>& labels,
                        std::vector<ClassLabel>& attrs, Rng& r) {
    LatentBatch z = igm::sample_latents(spec.default_prior, n, r);
    std::vector<ClassLabel> ys;
    if (spec.conditional)
      for (int i = 0; i < n; ++i) ys.push_back(ClassLabel(r.integer(spec.num_classes)));
    images = g.generate(z, spec.conditional ? &ys : nullptr);
    for (int i = 0; i < n; ++i) {
      labels.push_back(*g.true_class(z.col(i), spec.conditional
                                                   ? std::optional<ClassLabel>(ys[std::size_t(i)])
                                                   : std::nullopt));
      attrs.push_back(g.color_bin(z.col(i)));
    }
  };
  Rng r1 = rng.fork(1), r2 = rng.fork(2);
  draw(n_train, out.train_images, out.train_labels, out.train_attr, r1);
  draw(n_test, out.test_images, out.test_labels, out.test_attr, r2);
  return out;
}

double CellResult::mean_top1() const {
  double s = 0.0;
  for (const auto& r : runs) s += r.class_probe.top1;
  return runs.empty() ? 0.0 : s / double(runs.size());
}

double CellResult::std_top1() const {
  if (runs.size() < 2) return 0.0;
  const double m = mean_top1();
  double s = 0.0;
  for (const auto& r : runs) s += (r.class_probe.top1 - m) * (r.class_probe.top1 - m);
  return std::sqrt(s / double(runs.size() - 1));
}

namespace {

views::LatentViewConfig gaussian_view_cfg(int dim, double sigma) {
  views::LatentViewConfig cfg;
  cfg.kind = views::LatentViewKind::gaussian;
  cfg.gauss_spec = igm::TruncatedNormalSpec::isotropic(dim, 0.0, sigma, 2.0);
  return cfg;
}

}  // namespace

CellConfig cell_tx_only(Scheme scheme) {
  return {"tx_only", "igm", scheme, std::nullopt, true};
}

CellConfig cell_tz_only(double sigma, Scheme scheme) {
  CellConfig c{"gauss_tz_only", "igm", scheme, std::nullopt, false};
  c.latent_view = gaussian_view_cfg(1, sigma);  // dim patched to the generator's in run_cell
  return c;
}

CellConfig cell_tz_tx(double sigma, Scheme scheme) {
  CellConfig c{"gauss_tz_tx", "igm", scheme, std::nullopt, true};
  c.latent_view = gaussian_view_cfg(1, sigma);
  return c;
}

CellConfig cell_independent(bool with_tx) {
  CellConfig c{with_tx ? "independent_tx" : "independent_only", "igm", Scheme::igm_supcon,
               std::nullopt, with_tx};
  views::LatentViewConfig v;
  v.kind = views::LatentViewKind::independent;
  c.latent_view = v;
  return c;
}

CellConfig cell_steered(bool with_tx, Scheme scheme,
                        const std::map<std::string, std::array<double, 2>>& ranges) {
  CellConfig c{with_tx ? "steer_tz_tx" : "steer_tz_only", "igm", scheme, std::nullopt, with_tx};
  views::LatentViewConfig v;
  v.kind = views::LatentViewKind::steered;
  v.walkset_ref = "walkset";
  v.alpha_ranges = ranges;
  c.latent_view = v;
  return c;
}

CellConfig cell_inverter() { return {"inverter", "igm", Scheme::inverter, std::nullopt, false}; }

CellConfig cell_classifier() {
  return {"classifier", "igm", Scheme::classifier, std::nullopt, true};
}

CellConfig cell_real(Scheme scheme) { return {"real", "real", scheme, std::nullopt, true}; }

CellRun run_cell(const ExperimentContext& ctx, const CellConfig& cell, std::uint64_t seed) {
  Rng rng(seed);
  const auto& gspec = ctx.generator->spec();

  std::optional<views::LatentViewConfig> latent_view = cell.latent_view;
  if (latent_view && latent_view->kind == views::LatentViewKind::gaussian &&
      latent_view->gauss_spec.dim() != gspec.latent_dim) {
    latent_view = gaussian_view_cfg(gspec.latent_dim, latent_view->gauss_spec.sigma[0]);
  }

  std::optional<views::PixelAugConfig> aug;
  if (cell.pixel_augs) aug = ctx.aug;

  std::optional<sampling::RealDataset> real;
  std::optional<sampling::IgmSource> igm_src;
  Rng pool_rng = rng.fork(0);

  if (cell.source == "real") {
    igm::DatasetCache cache = igm::build_anchor_cache(*ctx.generator, ctx.anchor_n,
                                                      /*balanced=*/false, pool_rng);
    const bool labeled = cell.scheme == Scheme::supcon;
    real = sampling::RealDataset::from_cache(cache, labeled);
  } else {
    sampling::IgmSource src;
    src.generator = ctx.generator;
    LatentBatch pool = igm::sample_latents(gspec.default_prior, ctx.anchor_n, pool_rng);
    src.anchor_pool = std::move(pool);
    if (gspec.conditional) {
      for (int i = 0; i < ctx.anchor_n; ++i)
        src.anchor_labels.push_back(ClassLabel(pool_rng.integer(gspec.num_classes)));
    }
    src.latent_view = latent_view;
    src.walkset = ctx.walkset;
    igm_src = std::move(src);
  }

  training::TrainConfig tc = ctx.train;
  tc.seed = seed;
  BatchSampler sampler(cell.scheme, std::move(real), std::move(igm_src), aug, tc.batch,
                       rng.fork(1));
  training::TrainOutput trained = train_encoder(sampler, ctx.encoder, tc);

  nn::EncoderNetF net = trained.checkpoint.instantiate();
  const MatXf train_feats = training::embed(net, ctx.probe_sets.train_images, false).vectors;
  const MatXf test_feats = training::embed(net, ctx.probe_sets.test_images, false).vectors;

  CellRun run;
  run.seed = seed;
  run.final_loss = trained.metrics.empty() ? 0.0 : trained.metrics.back().loss;
  run.class_probe = linear_probe(train_feats, ctx.probe_sets.train_labels, test_feats,
                                 ctx.probe_sets.test_labels, ctx.probe);
  run.attr_probe = linear_probe(train_feats, ctx.probe_sets.train_attr, test_feats,
                                ctx.probe_sets.test_attr, ctx.probe);
  return run;
}

namespace {

// Sweep/grid cells are independent deterministic jobs; run them on a small
// worker pool.
void run_jobs(int n_jobs, int parallel, const std::function<void(int)>& fn) {
  if (parallel <= 1) {
    for (int j = 0; j < n_jobs; ++j) fn(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(parallel, n_jobs); ++t)
    pool.emplace_back([&] {
      for (;;) {
        const int j = next.fetch_add(1);
        if (j >= n_jobs) return;
        fn(j);
      }
    });
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<CellResult> run_ablation_grid(const ExperimentContext& ctx,
                                          const std::vector<CellConfig>& cells,
                                          const std::vector<std::uint64_t>& seeds,
                                          int parallel_cells) {
  std::vector<CellResult> results(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    results[i].config = cells[i];
    results[i].runs.resize(seeds.size());
  }
  struct Job {
    std::size_t cell;
    std::size_t seed_idx;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t s = 0; s < seeds.size(); ++s) jobs.push_back({i, s});

  std::vector<std::string> errors(jobs.size());
  run_jobs(int(jobs.size()), parallel_cells, [&](int j) {
    const auto [cell, seed_idx] = jobs[std::size_t(j)];
    try {
      results[cell].runs[seed_idx] = run_cell(ctx, cells[cell], seeds[seed_idx]);
    } catch (const std::exception& e) {
      errors[std::size_t(j)] = e.what();
    }
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!errors[j].empty()) {
      results[jobs[j].cell].failed = true;
      results[jobs[j].cell].error = errors[j];
    }
  }
  return results;
}

namespace {

SweepResult sweep_from_grid(const std::string& axis, const std::vector<double>& values,
                            const std::vector<CellResult>& grid) {
  SweepResult out;
  out.axis_name = axis;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (grid[i].failed) throw TrainingError("sweep cell failed: " + grid[i].error);
    SweepPoint p;
    p.axis_value = values[i];
    p.runs = grid[i].runs;
    p.mean = grid[i].mean_top1();
    p.stddev = grid[i].std_top1();
    out.points.push_back(std::move(p));
  }
  return out;
}

}  // namespace

SweepResult sweep_sigma(const ExperimentContext& ctx, const std::vector<double>& sigmas,
                        const std::vector<std::uint64_t>& seeds, int parallel_cells) {
  if (sigmas.size() < 4) throw ConfigError("sweep_sigma: needs at least 4 sigma values");
  {
    double lo = 1e30, hi = 0.0;
    for (double s : sigmas)
      if (s > 0.0) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
    if (hi / lo < 20.0) throw ConfigError("sweep_sigma: sigma span must cover at least 20x");
  }
  std::vector<CellConfig> cells;
  for (double s : sigmas) {
    const Scheme scheme = ctx.generator->spec().conditional ? Scheme::igm_supcon
                                                            : Scheme::igm_contrastive;
    CellConfig c = cell_tz_only(s, scheme);
    c.name = "sigma_" + std::to_string(s);
    cells.push_back(c);
  }
  return sweep_from_grid("sigma", sigmas, run_ablation_grid(ctx, cells, seeds, parallel_cells));
}

SweepResult sweep_samples(const ExperimentContext& ctx, const std::vector<int>& pool_sizes,
                          const std::vector<std::uint64_t>& seeds, int parallel_cells) {
  if (ctx.train.iterations <= 0)
    throw ConfigError("sweep_samples: fixed-iteration budget required (set train.iterations)");
  std::vector<double> axis;
  std::vector<CellResult> grid;
  for (int n : pool_sizes) {
    ExperimentContext local = ctx;
    local.anchor_n = n;
    const Scheme scheme = ctx.generator->spec().conditional ? Scheme::igm_supcon
                                                            : Scheme::igm_contrastive;
    CellConfig c = cell_tz_tx(0.2, scheme);
    c.name = "n_" + std::to_string(n);
    auto part = run_ablation_grid(local, {c}, seeds, parallel_cells);
    grid.push_back(std::move(part[0]));
    axis.push_back(double(n));
  }
  return sweep_from_grid("anchor_pool", axis, grid);
}

SweepResult mix_experiment(const ExperimentContext& ctx, const ImageBatch& real_images,
                           const igm::Generator& learned, const std::vector<double>& fractions,
                           const std::vector<std::uint64_t>& seeds, int parallel_cells) {
  if (learned.spec().backend != igm::Backend::learned)
    throw ContractError("mix_experiment: needs a learned generator");
  for (double f : fractions)
    if (f < 0.0 || f > 1.0) throw DomainError("mix_experiment: fraction outside [0,1]");

  const int n = real_images.n;
  SweepResult out;
  out.axis_name = "synthetic_fraction";
  out.points.resize(fractions.size());

  struct Job {
    std::size_t f_idx, s_idx;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    out.points[i].axis_value = fractions[i];
    out.points[i].runs.resize(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) jobs.push_back({i, s});
  }

  run_jobs(int(jobs.size()), parallel_cells, [&](int j) {
    const auto [f_idx, s_idx] = jobs[std::size_t(j)];
    const double f = fractions[f_idx];
    const std::uint64_t seed = seeds[s_idx];
    Rng rng(seed);

    ImageBatch mixed = real_images;
    const int n_replace = int(std::floor(f * n));
    if (n_replace > 0) {
      Rng gen_rng = rng.fork(7);
      LatentBatch z = igm::sample_latents(learned.spec().default_prior, n_replace, gen_rng);
      ImageBatch synth = learned.generate(z, nullptr);
      for (int i = 0; i < n_replace; ++i) mixed.data.col(i) = synth.data.col(i);
    }

    sampling::RealDataset src;
    src.images = std::move(mixed);
    src.labels.assign(std::size_t(n), std::nullopt);
    training::TrainConfig tc = ctx.train;
    tc.seed = seed;
    BatchSampler sampler(Scheme::simclr, std::move(src), std::nullopt, ctx.aug, tc.batch,
                         rng.fork(1));
    training::TrainOutput trained = train_encoder(sampler, ctx.encoder, tc);
    nn::EncoderNetF net = trained.checkpoint.instantiate();
    const MatXf train_feats = training::embed(net, ctx.probe_sets.train_images, false).vectors;
    const MatXf test_feats = training::embed(net, ctx.probe_sets.test_images, false).vectors;
    CellRun run;
    run.seed = seed;
    run.final_loss = trained.metrics.empty() ? 0.0 : trained.metrics.back().loss;
    run.class_probe = linear_probe(train_feats, ctx.probe_sets.train_labels, test_feats,
                                   ctx.probe_sets.test_labels, ctx.probe);
    out.points[f_idx].runs[s_idx] = std::move(run);
  });

  for (auto& p : out.points) {
    double mean = 0.0;
    for (const auto& r : p.runs) mean += r.class_probe.top1;
    mean /= double(p.runs.size());
    double var = 0.0;
    for (const auto& r : p.runs) var += (r.class_probe.top1 - mean) * (r.class_probe.top1 - mean);
    p.mean = mean;
    p.stddev = p.runs.size() > 1 ? std::sqrt(var / double(p.runs.size() - 1)) : 0.0;
  }
  return out;
}

}  // namespace genviews::eval
