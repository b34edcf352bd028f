#pragma once

#include <optional>
#include <string>
#include <vector>

#include "genviews/igm/generator.hpp"

namespace genviews::igm {

// On-disk sample cache: <dir>/images/<id>.png plus <dir>/metadata.jsonl with
// one record per image: {id, z, y, backend, seed}. Byte-identical for a given
// (generator, latents, labels, seed).
struct DatasetCache {
  ImageBatch images;
  LatentBatch latents;                       // d x n (empty if unavailable)
  std::vector<std::optional<ClassLabel>> labels;
  std::string backend;
  std::uint64_t seed = 0;

  int size() const { return images.n; }

  bool all_labeled() const {
    for (const auto& y : labels)
      if (!y) return false;
    return !labels.empty();
  }

  std::vector<ClassLabel> label_values() const {
    std::vector<ClassLabel> out;
    out.reserve(labels.size());
    for (const auto& y : labels) out.push_back(y.value_or(-1));
    return out;
  }
};

void write_dataset_cache(const std::string& dir, const DatasetCache& cache);
DatasetCache read_dataset_cache(const std::string& dir);

// Renders n anchors from the generator and assembles the cache in memory.
// Conditional generators draw labels uniformly (or balanced round-robin);
// the procedural unconditional backend records its ground-truth class bin.
DatasetCache build_anchor_cache(const Generator& g, int n, bool balanced_classes, Rng& rng);

}  // namespace genviews::igm
