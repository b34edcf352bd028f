#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>

#include "genviews/igm/generator.hpp"

namespace genviews::steering {

// Target pixel-space transformations T(x, alpha). Alpha units: pixels for
// shifts, scale factor for zoom, degrees for rot2d, additive channel value
// for color. Identity alpha is 0 except zoom, where it is 1; in latent space
// zoom walks use log(alpha) as the step coordinate.
enum class Transform { shiftx, shifty, zoom, rot2d, color_r, color_g, color_b };

inline constexpr std::array<Transform, 7> kAllTransforms = {
    Transform::shiftx, Transform::shifty, Transform::zoom,   Transform::rot2d,
    Transform::color_r, Transform::color_g, Transform::color_b};

std::string to_string(Transform t);
Transform transform_from_string(const std::string& s);

inline double identity_alpha(Transform t) { return t == Transform::zoom ? 1.0 : 0.0; }

// Latent-space coordinate of a pixel-space strength.
inline double alpha_coordinate(Transform t, double alpha) {
  if (t != Transform::zoom) return alpha;
  if (alpha <= 0.0) throw DomainError("zoom alpha must be > 0");
  return std::log(alpha);
}

struct TargetTransformSpec {
  Transform name = Transform::shiftx;
  std::array<double, 2> alpha_range{-6.0, 6.0};
  // Test hook: overrides the builtin edit (e.g. an identity edit).
  std::function<ImageBatch(const ImageBatch&, double)> pixel_edit_override;

  static TargetTransformSpec defaults(Transform t, int image_width);
};

// Default alpha ranges at a given resolution: shifts +/- w/5 px (6 px at 32),
// zoom [0.5, 2], rot2d +/- 30 deg, color +/- 0.3.
std::map<std::string, std::array<double, 2>> default_alpha_ranges(int image_width);

// [OP] pixel_edit: deterministic edit; shifts/rotations/zooms fill exposed
// pixels with edge replication; color edits clamp to [0,1].
ImageBatch pixel_edit(const ImageBatch& x, const TargetTransformSpec& spec, double alpha);

// Learned latent directions, one per transform.
struct WalkSet {
  std::map<std::string, VecXf> directions;
  std::map<std::string, double> fit_report;  // final objective value per transform
  int latent_dim = 0;
  bool trained = false;

  const VecXf& direction(Transform t) const;
  void save(const std::string& path) const;
  static WalkSet load(const std::string& path);
};

struct WalkOptConfig {
  int iterations = 500;
  int batch = 8;
  double lr = 0.05;
  double fd_step = 0.02;  // central-difference step on walk coordinates
  std::uint64_t seed = 0;
  bool record_loss = false;
};

struct WalkFitResult {
  VecXf direction;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // populated when record_loss is set
};

// [OP] learn_walk: fits w to minimize E_{z,alpha} of the mean squared
// per-pixel error between G(z + alpha~ * w) and T(G(z), alpha). The generator
// is treated as a black box: gradients come from central finite differences
// on the walk coordinates, optimized with Adam.
WalkFitResult learn_walk(const igm::Generator& g, const TargetTransformSpec& spec,
                         const WalkOptConfig& opt, Rng& rng);

// Fits every transform in `ranges` and assembles a trained WalkSet.
WalkSet learn_walkset(const igm::Generator& g,
                      const std::map<std::string, std::array<double, 2>>& ranges,
                      const WalkOptConfig& opt, Rng& rng);

// [OP] compose_walk: sum of alpha~_i * w_i over the requested transforms.
VecXf compose_walk(const WalkSet& walkset, const std::map<std::string, double>& alphas);

// [OP] steered_view: z + composed walk offset.
inline LatentVector steered_view(const LatentVector& z, const WalkSet& walkset,
                                 const std::map<std::string, double>& alphas) {
  if (int(z.size()) != walkset.latent_dim)
    throw ContractError("steered_view: latent dimension mismatch");
  return z + compose_walk(walkset, alphas);
}

// Draws alpha_i uniformly from each configured range and applies the walk.
LatentVector sample_steered_view(const LatentVector& z, const WalkSet& walkset,
                                 const std::map<std::string, std::array<double, 2>>& ranges,
                                 Rng& rng);

}  // namespace genviews::steering
