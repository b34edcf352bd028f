#include "genviews/sampling/batches.hpp"

#include <algorithm>
#include <numeric>

namespace genviews::sampling {

using views::LatentViewKind;

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::simclr: return "simclr";
    case Scheme::supcon: return "supcon";
    case Scheme::igm_contrastive: return "igm_contrastive";
    case Scheme::igm_supcon: return "igm_supcon";
    case Scheme::inverter: return "inverter";
    default: return "classifier";
  }
}

Scheme scheme_from_string(const std::string& s) {
  for (Scheme k : {Scheme::simclr, Scheme::supcon, Scheme::igm_contrastive, Scheme::igm_supcon,
                   Scheme::inverter, Scheme::classifier})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown sampling scheme: " + s);
}

RealDataset RealDataset::from_cache(const igm::DatasetCache& cache, bool keep_labels) {
  RealDataset d;
  d.images = cache.images;
  if (keep_labels) {
    d.labels = cache.labels;
    int mx = -1;
    for (const auto& y : cache.labels)
      if (y) mx = std::max(mx, *y);
    d.num_classes = mx + 1;
  } else {
    d.labels.assign(std::size_t(cache.size()), std::nullopt);
  }
  return d;
}

void IgmSource::validate_views(bool aug_enabled) const {
  if (!generator) throw ContractError("igm source: missing generator");
  if (anchor_pool.cols() < 1) throw ContractError("igm source: empty anchor pool");
  if (anchor_pool.rows() != generator->spec().latent_dim)
    throw ContractError("igm source: anchor pool dimension mismatch");
  if (generator->spec().conditional &&
      Eigen::Index(anchor_labels.size()) != anchor_pool.cols())
    throw ContractError("igm source: conditional pool needs anchor labels");
  if (latent_view) {
    latent_view->validate();
    if (latent_view->kind == LatentViewKind::steered) {
      if (!walkset || !walkset->trained)
        throw StateError("igm source: steered views need a trained walkset");
      if (walkset->latent_dim != generator->spec().latent_dim)
        throw ContractError("igm source: walkset dimension mismatch");
    }
  } else if (!aug_enabled) {
    throw ContractError(
        "igm source: with no latent view and no pixel transform, every positive would equal "
        "its anchor");
  }
}

LatentVector IgmSource::transform_latent(const LatentVector& z, Rng& rng) const {
  if (!latent_view) return z;
  switch (latent_view->kind) {
    case LatentViewKind::independent:
      return views::independent_view(generator->spec().default_prior, rng);
    case LatentViewKind::gaussian:
      return views::gaussian_view(z, latent_view->gauss_spec, rng);
    default:
      return steering::sample_steered_view(z, *walkset, latent_view->alpha_ranges, rng);
  }
}

namespace {

std::vector<int> draw_without_replacement(int n, int k, Rng& rng) {
  if (k > n) throw SamplingError("batch larger than dataset");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i)
    std::swap(idx[std::size_t(i)], idx[std::size_t(i) + rng.integer(std::uint64_t(n - i))]);
  idx.resize(std::size_t(k));
  return idx;
}

ContrastiveBatch build_simclr(const RealDataset& src, const std::vector<int>& idx,
                              const views::PixelAugConfig& aug, Rng& rng) {
  const ImageBatch picked = src.images.slice(idx);
  ContrastiveBatch out;
  out.anchors = views::apply_pixel_views(picked, aug, rng);
  out.positives = views::apply_pixel_views(picked, aug, rng);
  return out;
}

ContrastiveBatch build_supcon(const RealDataset& src,
                              const std::vector<std::vector<int>>& by_class, int batch,
                              const views::PixelAugConfig& aug, Rng& rng) {
  const int m = int(by_class.size());
  std::vector<int> idx;
  std::vector<ClassLabel> labels;
  for (int i = 0; i < batch; ++i) {
    const int y = int(rng.integer(std::uint64_t(m)));
    const auto& members = by_class[std::size_t(y)];
    if (members.empty())
      throw SamplingError("supcon: class " + std::to_string(y) + " has no images");
    idx.push_back(members[rng.integer(members.size())]);
    labels.push_back(y);
  }
  const ImageBatch picked = src.images.slice(idx);
  ContrastiveBatch out;
  out.anchors = views::apply_pixel_views(picked, aug, rng);
  out.positives = views::apply_pixel_views(picked, aug, rng);  // the special positive
  out.labels = std::move(labels);
  return out;
}

ContrastiveBatch build_igm(const IgmSource& src, const std::vector<int>& idx,
                           const std::optional<views::PixelAugConfig>& aug, Rng& rng) {
  const auto& g = *src.generator;
  const bool conditional = g.spec().conditional;
  const int b = int(idx.size());

  LatentBatch za(src.anchor_pool.rows(), b), zp(src.anchor_pool.rows(), b);
  std::vector<ClassLabel> ys;
  for (int i = 0; i < b; ++i) {
    za.col(i) = src.anchor_pool.col(idx[std::size_t(i)]);
    if (conditional) ys.push_back(src.anchor_labels[std::size_t(idx[std::size_t(i)])]);
  }
  // Conditional batches keep one positive on the anchor's own z (different
  // pixel transform only), SupCon-style; the slot is drawn per batch.
  const int same_z_slot = conditional ? int(rng.integer(std::uint64_t(b))) : -1;
  for (int i = 0; i < b; ++i)
    zp.col(i) = (i == same_z_slot) ? za.col(i) : LatentVector(src.transform_latent(za.col(i), rng));

  ContrastiveBatch out;
  const std::vector<ClassLabel>* lab = conditional ? &ys : nullptr;
  ImageBatch anchor_imgs = g.generate(za, lab);
  ImageBatch pos_imgs = g.generate(zp, lab);
  if (aug) {
    out.anchors = views::apply_pixel_views(anchor_imgs, *aug, rng);
    out.positives = views::apply_pixel_views(pos_imgs, *aug, rng);
  } else {
    out.anchors = std::move(anchor_imgs);
    out.positives = std::move(pos_imgs);
  }
  if (conditional) out.labels = std::move(ys);
  return out;
}

std::vector<std::vector<int>> group_by_class(const RealDataset& src) {
  if (src.num_classes < 2) throw SamplingError("supcon: needs >= 2 classes");
  std::vector<std::vector<int>> by_class(std::size_t(src.num_classes));
  for (int i = 0; i < src.images.n; ++i) {
    if (!src.labels[std::size_t(i)]) throw SamplingError("supcon: unlabeled image in source");
    by_class[std::size_t(*src.labels[std::size_t(i)])].push_back(i);
  }
  return by_class;
}

}  // namespace

ContrastiveBatch sample_simclr_batch(const RealDataset& src, const views::PixelAugConfig& aug,
                                     int batch, Rng& rng) {
  if (batch < 2) throw SamplingError("simclr: batch must be >= 2");
  const auto idx = draw_without_replacement(src.images.n, batch, rng);
  return build_simclr(src, idx, aug, rng);
}

ContrastiveBatch sample_supcon_batch(const RealDataset& src, const views::PixelAugConfig& aug,
                                     int batch, Rng& rng) {
  if (batch < 2) throw SamplingError("supcon: batch must be >= 2");
  return build_supcon(src, group_by_class(src), batch, aug, rng);
}

ContrastiveBatch sample_igm_batch(const IgmSource& src,
                                  const std::optional<views::PixelAugConfig>& aug, int batch,
                                  Rng& rng) {
  if (batch < 2) throw SamplingError("igm batch: batch must be >= 2");
  src.validate_views(aug && !aug->is_identity());
  const auto idx = draw_without_replacement(int(src.anchor_pool.cols()), batch, rng);
  return build_igm(src, idx, aug, rng);
}

BatchSampler::BatchSampler(Scheme scheme, std::optional<RealDataset> real,
                           std::optional<IgmSource> igm,
                           std::optional<views::PixelAugConfig> aug, int batch, Rng rng)
    : scheme_(scheme),
      real_(std::move(real)),
      igm_(std::move(igm)),
      aug_(std::move(aug)),
      batch_(batch),
      rng_(rng) {
  const bool needs_real = scheme == Scheme::simclr || scheme == Scheme::supcon;
  if (needs_real) {
    if (!real_) throw ContractError("sampler: scheme needs a real dataset");
    pool_size_ = real_->images.n;
    if (!aug_) throw ContractError("sampler: pixel-transform schemes need an aug config");
  } else {
    if (!igm_) throw ContractError("sampler: scheme needs an igm source");
    pool_size_ = int(igm_->anchor_pool.cols());
    if (scheme == Scheme::igm_contrastive || scheme == Scheme::igm_supcon)
      igm_->validate_views(aug_ && !aug_->is_identity());
    if (scheme == Scheme::igm_supcon && !igm_->generator->spec().conditional)
      throw ContractError("sampler: igm_supcon needs a conditional generator");
    if (scheme == Scheme::classifier && !igm_->generator->spec().conditional)
      throw ContractError("sampler: classifier scheme needs a conditional generator");
    if (scheme == Scheme::classifier && !aug_)
      throw ContractError("sampler: classifier scheme needs an aug config");
  }
  if (batch_ < 1 || batch_ > pool_size_)
    throw SamplingError("sampler: batch size must be in [1, pool size]");
}

int BatchSampler::source_latent_dim() const {
  if (!igm_) throw ContractError("sampler: no igm source");
  return int(igm_->anchor_pool.rows());
}

int BatchSampler::source_num_classes() const {
  if (igm_) return igm_->generator->spec().num_classes;
  if (real_) return real_->num_classes;
  return 0;
}

bool BatchSampler::source_conditional() const {
  return igm_ && igm_->generator->spec().conditional;
}

std::vector<int> BatchSampler::next_indices() {
  if (cursor_ + std::size_t(batch_) > order_.size()) {
    order_.resize(std::size_t(pool_size_));
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_.engine());
    cursor_ = 0;
  }
  std::vector<int> idx(order_.begin() + std::ptrdiff_t(cursor_),
                       order_.begin() + std::ptrdiff_t(cursor_) + batch_);
  cursor_ += std::size_t(batch_);
  return idx;
}

ContrastiveBatch BatchSampler::next_contrastive() {
  switch (scheme_) {
    case Scheme::simclr: return build_simclr(*real_, next_indices(), *aug_, rng_);
    case Scheme::supcon: return build_supcon(*real_, group_by_class(*real_), batch_, *aug_, rng_);
    case Scheme::igm_contrastive:
    case Scheme::igm_supcon: return build_igm(*igm_, next_indices(), aug_, rng_);
    default: throw ContractError("sampler: not a contrastive scheme");
  }
}

InverterBatch BatchSampler::next_inverter() {
  if (scheme_ != Scheme::inverter) throw ContractError("sampler: not an inverter scheme");
  const auto idx = next_indices();
  InverterBatch out;
  const auto& g = *igm_->generator;
  out.true_z.resize(igm_->anchor_pool.rows(), batch_);
  for (int i = 0; i < batch_; ++i) {
    out.true_z.col(i) = igm_->anchor_pool.col(idx[std::size_t(i)]);
    if (g.spec().conditional)
      out.labels.push_back(igm_->anchor_labels[std::size_t(idx[std::size_t(i)])]);
  }
  // Inverter inputs are raw generator samples; z is not invariant to pixel
  // transformations, so none are applied.
  out.images = g.generate(out.true_z, g.spec().conditional ? &out.labels : nullptr);
  return out;
}

InverterBatch BatchSampler::next_classifier() {
  if (scheme_ != Scheme::classifier) throw ContractError("sampler: not a classifier scheme");
  const auto idx = next_indices();
  InverterBatch out;
  const auto& g = *igm_->generator;
  out.true_z.resize(igm_->anchor_pool.rows(), batch_);
  for (int i = 0; i < batch_; ++i) {
    out.true_z.col(i) = igm_->anchor_pool.col(idx[std::size_t(i)]);
    out.labels.push_back(igm_->anchor_labels[std::size_t(idx[std::size_t(i)])]);
  }
  ImageBatch imgs = g.generate(out.true_z, &out.labels);
  out.images = views::apply_pixel_views(imgs, *aug_, rng_);
  return out;
}

}  // namespace genviews::sampling
