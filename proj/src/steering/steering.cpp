#include "genviews/steering/steering.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

#include "genviews/nn/optim.hpp"
#include "genviews/views/image_ops.hpp"

namespace genviews::steering {

using nlohmann::json;

std::string to_string(Transform t) {
  switch (t) {
    case Transform::shiftx: return "shiftx";
    case Transform::shifty: return "shifty";
    case Transform::zoom: return "zoom";
    case Transform::rot2d: return "rot2d";
    case Transform::color_r: return "color_r";
    case Transform::color_g: return "color_g";
    default: return "color_b";
  }
}

Transform transform_from_string(const std::string& s) {
  for (Transform t : kAllTransforms)
    if (to_string(t) == s) return t;
  throw ConfigError("unknown transform: " + s);
}

TargetTransformSpec TargetTransformSpec::defaults(Transform t, int image_width) {
  TargetTransformSpec spec;
  spec.name = t;
  const double shift = image_width / 5.0;
  switch (t) {
    case Transform::shiftx:
    case Transform::shifty: spec.alpha_range = {-shift, shift}; break;
    case Transform::zoom: spec.alpha_range = {0.5, 2.0}; break;
    case Transform::rot2d: spec.alpha_range = {-30.0, 30.0}; break;
    default: spec.alpha_range = {-0.3, 0.3}; break;
  }
  return spec;
}

std::map<std::string, std::array<double, 2>> default_alpha_ranges(int image_width) {
  std::map<std::string, std::array<double, 2>> out;
  for (Transform t : kAllTransforms)
    out[to_string(t)] = TargetTransformSpec::defaults(t, image_width).alpha_range;
  return out;
}

ImageBatch pixel_edit(const ImageBatch& x, const TargetTransformSpec& spec, double alpha) {
  if (alpha < spec.alpha_range[0] || alpha > spec.alpha_range[1])
    throw DomainError("pixel_edit: alpha out of range");
  if (spec.pixel_edit_override) return spec.pixel_edit_override(x, alpha);

  ImageBatch out(x.n, x.h, x.w, x.c);
  const float cx = (x.w - 1) / 2.0f, cy = (x.h - 1) / 2.0f;
  switch (spec.name) {
    case Transform::shiftx:
    case Transform::shifty: {
      views::AffineMap m{1.f, 0.f, spec.name == Transform::shiftx ? -float(alpha) : 0.f,
                         0.f, 1.f, spec.name == Transform::shifty ? -float(alpha) : 0.f};
      for (int i = 0; i < x.n; ++i) views::warp_affine(x, i, m, out, i);
      break;
    }
    case Transform::zoom: {
      if (alpha <= 0.0) throw DomainError("pixel_edit: zoom alpha must be > 0");
      const float inv = 1.0f / float(alpha);
      views::AffineMap m{inv, 0.f, cx * (1.f - inv), 0.f, inv, cy * (1.f - inv)};
      for (int i = 0; i < x.n; ++i) views::warp_affine(x, i, m, out, i);
      break;
    }
    case Transform::rot2d: {
      const float th = float(alpha * M_PI / 180.0);
      const float c = std::cos(th), s = std::sin(th);
      // inverse rotation about the image center
      views::AffineMap m{c, s, cx - c * cx - s * cy, -s, c, cy + s * cx - c * cy};
      for (int i = 0; i < x.n; ++i) views::warp_affine(x, i, m, out, i);
      break;
    }
    default: {
      const int ch = spec.name == Transform::color_r ? 0 : (spec.name == Transform::color_g ? 1 : 2);
      out.data = x.data;
      const int plane = x.h * x.w;
      for (int i = 0; i < x.n; ++i)
        out.data.col(i).segment(Eigen::Index(ch) * plane, plane) =
            (x.data.col(i).segment(Eigen::Index(ch) * plane, plane).array() + float(alpha))
                .cwiseMax(0.f)
                .cwiseMin(1.f);
      break;
    }
  }
  return out;
}

const VecXf& WalkSet::direction(Transform t) const {
  auto it = directions.find(to_string(t));
  if (it == directions.end())
    throw StateError("walkset: missing direction for " + to_string(t));
  return it->second;
}

void WalkSet::save(const std::string& path) const {
  json j;
  j["latent_dim"] = latent_dim;
  j["trained"] = trained;
  json dirs = json::object(), convs = json::object(), report = json::object();
  for (const auto& [name, w] : directions) {
    dirs[name] = std::vector<float>(w.data(), w.data() + w.size());
    convs[name] = (name == "zoom") ? "log_alpha" : "alpha";
  }
  for (const auto& [name, loss] : fit_report) report[name] = loss;
  j["directions"] = dirs;
  j["alpha_conventions"] = convs;
  j["fit_report"] = report;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write walkset: " + path);
  f << j.dump(2) << "\n";
}

WalkSet WalkSet::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read walkset: " + path);
  json j = json::parse(f);
  WalkSet ws;
  ws.latent_dim = j.at("latent_dim").get<int>();
  ws.trained = j.at("trained").get<bool>();
  for (const auto& [name, arr] : j.at("directions").items()) {
    auto v = arr.get<std::vector<float>>();
    ws.directions[name] = Eigen::Map<VecXf>(v.data(), Eigen::Index(v.size()));
  }
  for (const auto& [name, loss] : j.at("fit_report").items())
    ws.fit_report[name] = loss.get<double>();
  return ws;
}

namespace {

// Mean squared per-pixel error of G(z_i + c_i w) against fixed targets.
double walk_objective(const igm::Generator& g, const LatentBatch& anchors,
                      const std::vector<ClassLabel>* labels, const VecXd& coords,
                      const ImageBatch& targets, const VecXd& w) {
  LatentBatch shifted = anchors;
  for (int i = 0; i < int(anchors.cols()); ++i)
    shifted.col(i) += (coords[i] * w).cast<float>();
  const ImageBatch rendered = g.generate(shifted, labels);
  return double((rendered.data - targets.data).squaredNorm()) / double(targets.data.size());
}

}  // namespace

WalkFitResult learn_walk(const igm::Generator& g, const TargetTransformSpec& spec,
                         const WalkOptConfig& opt, Rng& rng) {
  const auto& gspec = g.spec();
  const int d = gspec.latent_dim;
  VecXd w = VecXd::Zero(d);
  nn::Adam<double> adam;
  adam.lr = opt.lr;

  WalkFitResult result;
  double loss = 0.0;
  for (int iter = 0; iter < opt.iterations; ++iter) {
    LatentBatch anchors = igm::sample_latents(gspec.default_prior, opt.batch, rng);
    std::vector<ClassLabel> labels;
    if (gspec.conditional)
      for (int i = 0; i < opt.batch; ++i)
        labels.push_back(ClassLabel(rng.integer(gspec.num_classes)));
    const std::vector<ClassLabel>* lab = gspec.conditional ? &labels : nullptr;

    VecXd coords(opt.batch);
    ImageBatch targets;
    {
      const ImageBatch base = g.generate(anchors, lab);
      targets = ImageBatch(opt.batch, base.h, base.w, base.c);
      for (int i = 0; i < opt.batch; ++i) {
        const double alpha = rng.uniform(spec.alpha_range[0], spec.alpha_range[1]);
        coords[i] = alpha_coordinate(spec.name, alpha);
        ImageBatch one(1, base.h, base.w, base.c);
        one.data.col(0) = base.data.col(i);
        targets.data.col(i) = pixel_edit(one, spec, alpha).data.col(0);
      }
    }

    loss = walk_objective(g, anchors, lab, coords, targets, w);
    if (!std::isfinite(loss))
      throw TrainingError("learn_walk: non-finite loss at iteration " + std::to_string(iter), iter);
    if (opt.record_loss) result.loss_history.push_back(loss);

    VecXd grad(d);
    for (int j = 0; j < d; ++j) {
      VecXd wp = w, wm = w;
      wp[j] += opt.fd_step;
      wm[j] -= opt.fd_step;
      const double lp = walk_objective(g, anchors, lab, coords, targets, wp);
      const double lm = walk_objective(g, anchors, lab, coords, targets, wm);
      grad[j] = (lp - lm) / (2.0 * opt.fd_step);
    }
    adam.step(w, grad);
  }

  result.direction = w.cast<float>();
  result.final_loss = loss;
  return result;
}

WalkSet learn_walkset(const igm::Generator& g,
                      const std::map<std::string, std::array<double, 2>>& ranges,
                      const WalkOptConfig& opt, Rng& rng) {
  WalkSet ws;
  ws.latent_dim = g.spec().latent_dim;
  std::uint64_t stream = 0;
  for (const auto& [name, range] : ranges) {
    TargetTransformSpec spec;
    spec.name = transform_from_string(name);
    spec.alpha_range = range;
    Rng walk_rng = rng.fork(stream++);
    WalkFitResult fit = learn_walk(g, spec, opt, walk_rng);
    ws.directions[name] = fit.direction;
    ws.fit_report[name] = fit.final_loss;
  }
  ws.trained = true;
  return ws;
}

VecXf compose_walk(const WalkSet& walkset, const std::map<std::string, double>& alphas) {
  if (!walkset.trained) throw StateError("compose_walk: walkset not trained");
  VecXf offset = VecXf::Zero(walkset.latent_dim);
  for (const auto& [name, alpha] : alphas) {
    auto it = walkset.directions.find(name);
    if (it == walkset.directions.end())
      throw StateError("compose_walk: missing direction for " + name);
    offset += float(alpha_coordinate(transform_from_string(name), alpha)) * it->second;
  }
  return offset;
}

LatentVector sample_steered_view(const LatentVector& z, const WalkSet& walkset,
                                 const std::map<std::string, std::array<double, 2>>& ranges,
                                 Rng& rng) {
  std::map<std::string, double> alphas;
  for (const auto& [name, range] : ranges) alphas[name] = rng.uniform(range[0], range[1]);
  return steered_view(z, walkset, alphas);
}

}  // namespace genviews::steering
