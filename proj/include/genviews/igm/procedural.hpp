#pragma once

#include <array>

#include "genviews/igm/generator.hpp"

namespace genviews::igm {

// Deterministic 2D shape renderer with a fixed latent map:
//   dims 0-1  object center offset, linear; the full truncation range of the
//             default prior spans +/-25% of the image width
//   dim 2     object size, exponential map
//   dim 3     in-plane rotation, linear, +/-45 deg over the truncation range
//   dims 4-6  object RGB tint, additive, clamped
//   dim 7     background gray level
//   dim 8     (unconditional only) shape identity via equal-probability
//             quantile bins of the truncated prior
// Output is a continuous function of dims 0-7; only the class-bin edges on
// dim 8 are discontinuous.
class ProceduralGenerator final : public Generator {
 public:
  explicit ProceduralGenerator(const GeneratorSpec& spec);

  std::optional<ClassLabel> true_class(const LatentVector& z,
                                       std::optional<ClassLabel> y) const override;

  // Quantile-bin class of an unconditional latent (uses dim 8 of z).
  ClassLabel class_bin(float z_class) const;

  // Held-out attribute for the transfer-style probe: quantile bin of the
  // red-tint dimension (dim 4) into `bins` equal-mass bins.
  ClassLabel color_bin(const LatentVector& z, int bins = 5) const;

  // Ground-truth latent axes (unit vectors) for steered-walk recovery tests.
  int axis_shiftx() const { return 0; }
  int axis_shifty() const { return 1; }
  int axis_zoom() const { return 2; }
  int axis_rot2d() const { return 3; }

  static GeneratorSpec default_spec(bool conditional, int num_classes = 10,
                                    int height = 32, int width = 32);

 protected:
  void render(const LatentVector& z, ClassLabel y, ImageBatch& out, int slot) const override;

 private:
  int class_dim() const { return 8; }
  std::vector<double> class_edges_;  // interior quantile edges for dim 8
  std::vector<double> color_edges_;  // interior quantile edges for dim 4 (5 bins)
};

}  // namespace genviews::igm
