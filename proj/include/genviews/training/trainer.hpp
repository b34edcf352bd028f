#pragma once

#include <functional>

#include "genviews/nn/encoder.hpp"
#include "genviews/nn/optim.hpp"
#include "genviews/sampling/batches.hpp"

namespace genviews::training {

struct EmbeddingBatch {
  MatXf vectors;  // e x B, one sample per column
  bool normalized = false;
};

struct TrainConfig {
  int epochs = 0;        // either epochs or iterations must be set
  long iterations = 0;   // exact gradient-step budget (used by scaling sweeps)
  int batch = 128;
  double lr = 0.06;
  bool cosine = true;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double tau = 10.0;       // contrastive inverse temperature (multiplies similarities)
  double ce_weight = 1.0;  // conditional inverter auxiliary CE weight
  std::uint64_t seed = 0;

  void validate() const {
    if ((epochs <= 0) == (iterations <= 0))
      throw ConfigError("train: exactly one of epochs/iterations must be positive");
    if (batch < 2) throw ConfigError("train: batch must be >= 2");
    if (lr <= 0.0 || momentum < 0.0 || momentum >= 1.0 || weight_decay < 0.0)
      throw ConfigError("train: bad optimizer parameters");
    if (tau < 0.0) throw ConfigError("train: tau must be >= 0");
  }
};

struct MetricRecord {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double wall_time = 0.0;  // seconds since run start
};

struct Checkpoint {
  nn::EncoderConfig encoder;
  nn::HeadSpec head;
  VecXf params;
  std::string config_hash;
  long iteration = 0;
  std::string rng_state;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  nn::EncoderNetF instantiate() const;
};

struct TrainOutput {
  Checkpoint checkpoint;
  std::vector<MetricRecord> metrics;
  long anchors_consumed = 0;  // iterations * batch, exact
};

// Worker threads for batch-chunk parallelism (GENVIEWS_THREADS overrides).
int worker_threads();

// [OP] train_encoder: runs the loop for the configured budget, recording the
// loss every step. `epoch_hook`, when set, fires at each epoch boundary with
// a checkpoint snapshot.
TrainOutput train_encoder(sampling::BatchSampler& sampler, const nn::EncoderConfig& enc_cfg,
                          const TrainConfig& train_cfg, const std::string& config_hash = "",
                          const std::function<void(long, const Checkpoint&)>& epoch_hook = {});

// [OP] embed: use_head=true returns the normalized projection output (only
// for contrastive checkpoints); false returns unnormalized pooled features.
EmbeddingBatch embed(const nn::EncoderNetF& net, const ImageBatch& images, bool use_head);

inline EmbeddingBatch embed(const Checkpoint& ckpt, const ImageBatch& images, bool use_head) {
  nn::EncoderNetF net = ckpt.instantiate();
  return embed(net, images, use_head);
}

}  // namespace genviews::training
