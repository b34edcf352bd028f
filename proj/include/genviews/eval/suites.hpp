#pragma once

#include <optional>
#include <string>

#include "genviews/eval/probe.hpp"
#include "genviews/igm/learned.hpp"
#include "genviews/igm/procedural.hpp"
#include "genviews/training/trainer.hpp"

namespace genviews::eval {

// Fixed labeled render sets used to fit and score linear probes. Shared
// across all cells of a grid/sweep so rows stay comparable; `attr_labels` is
// the renderer's color-bin attribute for the held-out-task probe.
struct ProbeSets {
  ImageBatch train_images, test_images;
  std::vector<ClassLabel> train_labels, test_labels;
  std::vector<ClassLabel> train_attr, test_attr;
};

ProbeSets make_probe_sets(const igm::ProceduralGenerator& g, int n_train, int n_test,
                          std::uint64_t seed);

// Everything a single training cell needs besides its own (T_z, T_x,
// objective) switches.
struct ExperimentContext {
  std::shared_ptr<const igm::Generator> generator;
  std::shared_ptr<const steering::WalkSet> walkset;  // needed only for steered cells
  int anchor_n = 2048;
  views::PixelAugConfig aug;  // applied when a cell enables T_x
  nn::EncoderConfig encoder;
  training::TrainConfig train;
  ProbeConfig probe;
  ProbeSets probe_sets;
};

// One grid row: data source x T_z x T_x x objective.
struct CellConfig {
  std::string name;
  std::string source = "igm";  // "igm" | "real"
  sampling::Scheme scheme = sampling::Scheme::igm_contrastive;
  std::optional<views::LatentViewConfig> latent_view;
  bool pixel_augs = true;
};

struct CellRun {
  std::uint64_t seed = 0;
  ProbeResult class_probe;
  ProbeResult attr_probe;
  double final_loss = 0.0;
};

struct CellResult {
  CellConfig config;
  std::vector<CellRun> runs;
  bool failed = false;
  std::string error;

  double mean_top1() const;
  double std_top1() const;
};

// Labels for standard rows.
CellConfig cell_tx_only(sampling::Scheme scheme);
CellConfig cell_tz_only(double sigma, sampling::Scheme scheme);
CellConfig cell_tz_tx(double sigma, sampling::Scheme scheme);
CellConfig cell_independent(bool with_tx);
CellConfig cell_steered(bool with_tx, sampling::Scheme scheme,
                        const std::map<std::string, std::array<double, 2>>& ranges);
CellConfig cell_inverter();
CellConfig cell_classifier();
CellConfig cell_real(sampling::Scheme scheme);

// Runs one cell once; `seed` drives the anchor pool, the init and the batch
// order. Probe sets and probe seeds stay fixed.
CellRun run_cell(const ExperimentContext& ctx, const CellConfig& cell, std::uint64_t seed);

// [OP] run_ablation_grid: per-cell failures are recorded, not propagated.
std::vector<CellResult> run_ablation_grid(const ExperimentContext& ctx,
                                          const std::vector<CellConfig>& cells,
                                          const std::vector<std::uint64_t>& seeds,
                                          int parallel_cells = 1);

struct SweepPoint {
  double axis_value = 0.0;
  std::vector<CellRun> runs;
  double mean = 0.0, stddev = 0.0;
};

struct SweepResult {
  std::string axis_name;
  std::vector<SweepPoint> points;
};

// [OP] sweep_sigma: Gaussian T_z-only cells over the given sigmas.
SweepResult sweep_sigma(const ExperimentContext& ctx, const std::vector<double>& sigmas,
                        const std::vector<std::uint64_t>& seeds, int parallel_cells = 1);

// [OP] sweep_samples: anchor-pool sizes with a fixed gradient-step budget
// (ctx.train.iterations must be set).
SweepResult sweep_samples(const ExperimentContext& ctx, const std::vector<int>& pool_sizes,
                          const std::vector<std::uint64_t>& seeds, int parallel_cells = 1);

// [OP] mix_experiment: replaces floor(f*N) of a fixed real set with samples
// from the learned generator and trains the T_x-only contrastive row.
SweepResult mix_experiment(const ExperimentContext& ctx, const ImageBatch& real_images,
                           const igm::Generator& learned, const std::vector<double>& fractions,
                           const std::vector<std::uint64_t>& seeds, int parallel_cells = 1);

}  // namespace genviews::eval
