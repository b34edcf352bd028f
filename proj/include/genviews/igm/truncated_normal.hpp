#pragma once

#include <cmath>

#include "genviews/core/rng.hpp"
#include "genviews/core/types.hpp"

namespace genviews::igm {

// Componentwise truncated normal N^t(mu, sigma, t): each component is
// resampled until it lands within t*sigma of mu. Rejection, not clipping,
// so the density has no atoms at the bounds.
struct TruncatedNormalSpec {
  VecXd mu;     // per-dimension mean
  VecXd sigma;  // per-dimension std, >= 0
  double t = 2.0;  // truncation bound in sigma units, > 0

  TruncatedNormalSpec() = default;
  TruncatedNormalSpec(VecXd mu_, VecXd sigma_, double t_)
      : mu(std::move(mu_)), sigma(std::move(sigma_)), t(t_) {}

  static TruncatedNormalSpec isotropic(int dim, double mu, double sigma, double t) {
    return {VecXd::Constant(dim, mu), VecXd::Constant(dim, sigma), t};
  }

  int dim() const { return int(mu.size()); }

  void validate() const {
    if (mu.size() == 0 || mu.size() != sigma.size())
      throw InvalidSpecError("truncated normal: mu/sigma dimension mismatch");
    if (!mu.allFinite() || !sigma.allFinite())
      throw InvalidSpecError("truncated normal: non-finite mu or sigma");
    if ((sigma.array() < 0.0).any()) throw InvalidSpecError("truncated normal: sigma < 0");
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidSpecError("truncated normal: t <= 0");
  }
};

inline double sample_truncated_component(double mu, double sigma, double t, Rng& rng) {
  if (sigma == 0.0) return mu;
  const double bound = t * sigma;
  for (;;) {
    const double x = sigma * rng.normal();
    if (std::abs(x) <= bound) return mu + x;
  }
}

inline LatentVector sample_truncated(const TruncatedNormalSpec& spec, Rng& rng) {
  spec.validate();
  LatentVector z(spec.dim());
  for (int i = 0; i < spec.dim(); ++i)
    z[i] = float(sample_truncated_component(spec.mu[i], spec.sigma[i], spec.t, rng));
  return z;
}

// [OP] sample_latents: n i.i.d. draws, one latent per column.
inline LatentBatch sample_latents(const TruncatedNormalSpec& spec, int n, Rng& rng) {
  spec.validate();
  if (n < 1) throw ContractError("sample_latents: n < 1");
  LatentBatch out(spec.dim(), n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < spec.dim(); ++i)
      out(i, j) = float(sample_truncated_component(spec.mu[i], spec.sigma[i], spec.t, rng));
  return out;
}

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Std of the standard normal truncated to [-t, t], from the closed-form
// second moment. For t=2 this is ~0.8796.
inline double truncated_std(double t) {
  const double z = norm_cdf(t) - norm_cdf(-t);
  return std::sqrt(1.0 - 2.0 * t * norm_pdf(t) / z);
}

// Quantile of the standard normal truncated to [-t, t], by bisection.
inline double truncated_quantile(double p, double t) {
  const double lo_cdf = norm_cdf(-t);
  const double mass = norm_cdf(t) - lo_cdf;
  const double target = lo_cdf + p * mass;
  double lo = -t, hi = t;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (norm_cdf(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace genviews::igm
