#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>

#include "genviews/igm/truncated_normal.hpp"

namespace genviews::views {

enum class LatentViewKind { independent, gaussian, steered };

std::string to_string(LatentViewKind k);
LatentViewKind latent_view_kind_from_string(const std::string& s);

// T_z configuration. Exactly the fields for its kind are meaningful:
// gaussian uses gauss_spec, steered uses walkset_ref + alpha_ranges.
struct LatentViewConfig {
  LatentViewKind kind = LatentViewKind::gaussian;
  igm::TruncatedNormalSpec gauss_spec;
  std::string walkset_ref;
  std::map<std::string, std::array<double, 2>> alpha_ranges;

  void validate() const {
    switch (kind) {
      case LatentViewKind::independent:
        if (!walkset_ref.empty() || !alpha_ranges.empty())
          throw ConfigError("latent view: independent kind takes no steering fields");
        break;
      case LatentViewKind::gaussian:
        gauss_spec.validate();
        if (!walkset_ref.empty() || !alpha_ranges.empty())
          throw ConfigError("latent view: gaussian kind takes no steering fields");
        break;
      case LatentViewKind::steered:
        if (walkset_ref.empty()) throw ConfigError("latent view: steered kind needs walkset_ref");
        if (alpha_ranges.empty()) throw ConfigError("latent view: steered kind needs alpha_ranges");
        break;
    }
  }
};

// [OP] independent_view: a fresh draw from the prior, independent of any anchor.
inline LatentVector independent_view(const igm::TruncatedNormalSpec& prior, Rng& rng) {
  return igm::sample_truncated(prior, rng);
}

// [OP] gaussian_view: z + w with w ~ N^t(0, sigma, t). Offsets are centered
// perturbations, so a nonzero mu is rejected. The sum is not re-truncated
// against the anchor prior; it may leave that prior's support.
inline LatentVector gaussian_view(const LatentVector& z, const igm::TruncatedNormalSpec& offset_spec,
                                  Rng& rng) {
  offset_spec.validate();
  if ((offset_spec.mu.array() != 0.0).any())
    throw ConfigError("gaussian_view: offset spec must have mu = 0");
  if (offset_spec.dim() != int(z.size()))
    throw ContractError("gaussian_view: offset dimension mismatch");
  return z + igm::sample_truncated(offset_spec, rng);
}

}  // namespace genviews::views
