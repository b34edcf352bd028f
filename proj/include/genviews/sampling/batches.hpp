#pragma once

#include <memory>
#include <optional>

#include "genviews/igm/dataset_cache.hpp"
#include "genviews/steering/steering.hpp"
#include "genviews/views/latent_views.hpp"
#include "genviews/views/pixel_augs.hpp"

namespace genviews::sampling {

// Anchors and positives aligned by index; negatives are in-batch (anchor i
// faces the other B-1 positives). Labels present iff the scheme is
// supervised / class-conditional.
struct ContrastiveBatch {
  ImageBatch anchors, positives;
  std::vector<ClassLabel> labels;
};

struct InverterBatch {
  ImageBatch images;
  LatentBatch true_z;
  std::vector<ClassLabel> labels;  // conditional only
};

struct RealDataset {
  ImageBatch images;
  std::vector<std::optional<ClassLabel>> labels;
  int num_classes = 0;  // 0 when unlabeled

  static RealDataset from_cache(const igm::DatasetCache& cache, bool keep_labels);
};

// IGM source: a generator handle plus a fixed pre-generated pool of anchor
// latents (and labels when conditional). Positives' latent transforms are
// sampled fresh at every batch; the anchors stay fixed.
struct IgmSource {
  std::shared_ptr<const igm::Generator> generator;
  LatentBatch anchor_pool;
  std::vector<ClassLabel> anchor_labels;
  std::optional<views::LatentViewConfig> latent_view;
  std::shared_ptr<const steering::WalkSet> walkset;

  void validate_views(bool aug_enabled) const;
  LatentVector transform_latent(const LatentVector& z, Rng& rng) const;
};

// --- spec-level single-batch operations (uniform draws, no epoch state) ---

ContrastiveBatch sample_simclr_batch(const RealDataset& src, const views::PixelAugConfig& aug,
                                     int batch, Rng& rng);

ContrastiveBatch sample_supcon_batch(const RealDataset& src, const views::PixelAugConfig& aug,
                                     int batch, Rng& rng);

ContrastiveBatch sample_igm_batch(const IgmSource& src,
                                  const std::optional<views::PixelAugConfig>& aug, int batch,
                                  Rng& rng);

// --- epoch-based samplers used by the trainer (shuffled epochs, drop-last) ---

enum class Scheme { simclr, supcon, igm_contrastive, igm_supcon, inverter, classifier };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

class BatchSampler {
 public:
  // Exactly one of `real` / `igm` is used, depending on the scheme.
  BatchSampler(Scheme scheme, std::optional<RealDataset> real, std::optional<IgmSource> igm,
               std::optional<views::PixelAugConfig> aug, int batch, Rng rng);

  ContrastiveBatch next_contrastive();
  InverterBatch next_inverter();
  // classifier scheme: T_x-augmented images with labels
  InverterBatch next_classifier();

  int pool_size() const { return pool_size_; }
  int batch_size() const { return batch_; }
  Scheme scheme() const { return scheme_; }

  // Source introspection for head sizing.
  int source_latent_dim() const;
  int source_num_classes() const;
  bool source_conditional() const;

 private:
  std::vector<int> next_indices();

  Scheme scheme_;
  std::optional<RealDataset> real_;
  std::optional<IgmSource> igm_;
  std::optional<views::PixelAugConfig> aug_;
  int batch_;
  int pool_size_ = 0;
  Rng rng_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
};

}  // namespace genviews::sampling
