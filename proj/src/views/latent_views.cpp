#include "genviews/views/latent_views.hpp"

namespace genviews::views {

std::string to_string(LatentViewKind k) {
  switch (k) {
    case LatentViewKind::independent: return "independent";
    case LatentViewKind::gaussian: return "gaussian";
    default: return "steered";
  }
}

LatentViewKind latent_view_kind_from_string(const std::string& s) {
  if (s == "independent") return LatentViewKind::independent;
  if (s == "gaussian") return LatentViewKind::gaussian;
  if (s == "steered") return LatentViewKind::steered;
  throw ConfigError("unknown latent view kind: " + s);
}

}  // namespace genviews::views
