#include "genviews/igm/learned.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstring>
#include <numeric>

#include "genviews/nn/optim.hpp"

namespace genviews::igm {

using nlohmann::json;
using nn::Conv2d;
using nn::Linear;

namespace {

struct NetGrads {
  Conv2d<float>::Grad ec1, ec2, dc1, dc2, dc3;
  Linear<float>::Grad efc, dfc;
};

template <typename Fn>
void visit_net(LearnedGenerator::Net& net, NetGrads& g, Fn&& fn) {
  fn(net.enc_c1.w, g.ec1.w);
  fn(net.enc_c1.b, g.ec1.b);
  fn(net.enc_c2.w, g.ec2.w);
  fn(net.enc_c2.b, g.ec2.b);
  fn(net.enc_fc.w, g.efc.w);
  fn(net.enc_fc.b, g.efc.b);
  fn(net.dec_fc.w, g.dfc.w);
  fn(net.dec_fc.b, g.dfc.b);
  fn(net.dec_c1.w, g.dc1.w);
  fn(net.dec_c1.b, g.dc1.b);
  fn(net.dec_c2.w, g.dc2.w);
  fn(net.dec_c2.b, g.dc2.b);
  fn(net.dec_c3.w, g.dc3.w);
  fn(net.dec_c3.b, g.dc3.b);
}

NetGrads make_net_grads(const LearnedGenerator::Net& n) {
  return NetGrads{n.enc_c1.make_grad(), n.enc_c2.make_grad(), n.dec_c1.make_grad(),
                  n.dec_c2.make_grad(), n.dec_c3.make_grad(), n.enc_fc.make_grad(),
                  n.dec_fc.make_grad()};
}

VecXf flatten_net(LearnedGenerator::Net& net) {
  NetGrads g = make_net_grads(net);
  std::vector<float> out;
  visit_net(net, g, [&](auto& v, auto&) { out.insert(out.end(), v.data(), v.data() + v.size()); });
  return Eigen::Map<VecXf>(out.data(), Eigen::Index(out.size()));
}

void set_net(LearnedGenerator::Net& net, const VecXf& flat) {
  NetGrads g = make_net_grads(net);
  Eigen::Index off = 0;
  visit_net(net, g, [&](auto& v, auto&) {
    Eigen::Map<VecXf>(v.data(), v.size()) = flat.segment(off, v.size());
    off += v.size();
  });
  if (off != flat.size()) throw ContractError("learned igm: payload size mismatch");
}

struct FwdCache {
  MatXf x, e1, e1r, e2, e2r, code, code_noisy, dec_in, d0, d0r, u1, d1, d1r, u2, d2, d2r, d3, recon;
  MatXf cols;
};

// Full autoencoder pass; dec_in = [code + noise; onehot] for conditional nets.
void forward_ae(const LearnedGenerator::Net& n, const MatXf& x, const MatXf* onehot,
                const MatXf* noise, FwdCache& c) {
  c.x = x;
  n.enc_c1.forward(x, c.e1, c.cols);
  nn::relu_forward(c.e1, c.e1r);
  n.enc_c2.forward(c.e1r, c.e2, c.cols);
  nn::relu_forward(c.e2, c.e2r);
  n.enc_fc.forward(c.e2r, c.code);
  c.code_noisy = noise ? MatXf(c.code + *noise) : c.code;
  if (onehot) {
    c.dec_in.resize(n.code + n.cond, x.cols());
    c.dec_in.topRows(n.code) = c.code_noisy;
    c.dec_in.bottomRows(n.cond) = *onehot;
  } else {
    c.dec_in = c.code_noisy;
  }
  n.dec_fc.forward(c.dec_in, c.d0);
  nn::relu_forward(c.d0, c.d0r);
  const int qh = n.h / 4, qw = n.w / 4;
  nn::upsample2x_forward(c.d0r, LearnedGenerator::Net::kBase, qh, qw, c.u1);
  n.dec_c1.forward(c.u1, c.d1, c.cols);
  nn::relu_forward(c.d1, c.d1r);
  nn::upsample2x_forward(c.d1r, LearnedGenerator::Net::kMid, qh * 2, qw * 2, c.u2);
  n.dec_c2.forward(c.u2, c.d2, c.cols);
  nn::relu_forward(c.d2, c.d2r);
  n.dec_c3.forward(c.d2r, c.d3, c.cols);
  nn::sigmoid_forward(c.d3, c.recon);
}

void backward_ae(const LearnedGenerator::Net& n, FwdCache& c, const MatXf& d_recon,
                 const MatXf& d_code_direct, NetGrads& g) {
  MatXf d, d2, dx;
  nn::sigmoid_backward(c.recon, d_recon, d);
  n.dec_c3.backward(c.d2r, d, d2, g.dc3, c.cols);
  nn::relu_backward(c.d2r, d2, d);
  const int qh = n.h / 4, qw = n.w / 4;
  n.dec_c2.backward(c.u2, d, d2, g.dc2, c.cols);
  nn::upsample2x_backward(d2, LearnedGenerator::Net::kMid, qh * 2, qw * 2, d);
  nn::relu_backward(c.d1r, d, d2);
  n.dec_c1.backward(c.u1, d2, d, g.dc1, c.cols);
  nn::upsample2x_backward(d, LearnedGenerator::Net::kBase, qh, qw, d2);
  nn::relu_backward(c.d0r, d2, d);
  n.dec_fc.backward(c.dec_in, d, d2, g.dfc);
  MatXf d_code = d2.topRows(n.code) + d_code_direct;
  n.enc_fc.backward(c.e2r, d_code, d, g.efc);
  nn::relu_backward(c.e2r, d, d2);
  n.enc_c2.backward(c.e1r, d2, d, g.ec2, c.cols);
  nn::relu_backward(c.e1r, d, d2);
  n.enc_c1.backward(c.x, d2, dx, g.ec1, c.cols);
}

}  // namespace

void LearnedGenerator::Net::build(int h_, int w_, int code_, int cond_, Rng& rng) {
  if (h_ % 4 != 0 || w_ % 4 != 0) throw InvalidSpecError("learned igm: image size must be /4");
  h = h_;
  w = w_;
  code = code_;
  cond = cond_;
  enc_c1.build(3, kNarrow, 3, 2, h, w, rng);
  enc_c2.build(kNarrow, kBase, 3, 2, h / 2, w / 2, rng);
  enc_fc.build(kBase * (h / 4) * (w / 4), code, rng, std::sqrt(1.0 / (kBase * (h / 4) * (w / 4))));
  dec_fc.build(code + cond, kBase * (h / 4) * (w / 4), rng);
  dec_c1.build(kBase, kMid, 3, 1, h / 2, w / 2, rng);
  dec_c2.build(kMid, kNarrow, 3, 1, h, w, rng);
  dec_c3.build(kNarrow, 3, 3, 1, h, w, rng);
}

VecXf LearnedGenerator::Net::decode(const VecXf& code_and_cond) const {
  MatXf in = code_and_cond, t1, t2, cols;
  dec_fc.forward(in, t1);
  nn::relu_forward(t1, t2);
  MatXf u1, d1, d1r, u2, d2, d2r, d3, out;
  nn::upsample2x_forward(t2, kBase, h / 4, w / 4, u1);
  dec_c1.forward(u1, d1, cols);
  nn::relu_forward(d1, d1r);
  nn::upsample2x_forward(d1r, kMid, h / 2, w / 2, u2);
  dec_c2.forward(u2, d2, cols);
  nn::relu_forward(d2, d2r);
  dec_c3.forward(d2r, d3, cols);
  nn::sigmoid_forward(d3, out);
  return out.col(0);
}

VecXf LearnedGenerator::Net::encode(const VecXf& image) const {
  MatXf in = image, t1, t2, t3, t4, code, cols;
  enc_c1.forward(in, t1, cols);
  nn::relu_forward(t1, t2);
  enc_c2.forward(t2, t3, cols);
  nn::relu_forward(t3, t4);
  enc_fc.forward(t4, code);
  return code.col(0);
}

LearnedGenerator::LearnedGenerator(GeneratorSpec spec, Net net, std::string metadata_json)
    : Generator(std::move(spec)), net_(std::move(net)) {
  metadata_json_ = std::move(metadata_json);
}

void LearnedGenerator::render(const LatentVector& z, ClassLabel y, ImageBatch& out,
                              int slot) const {
  VecXf in(net_.code + net_.cond);
  in.head(net_.code) = z;
  if (net_.cond > 0) {
    in.tail(net_.cond).setZero();
    in[net_.code + y] = 1.f;
  }
  out.data.col(slot) = net_.decode(in);
}

double LearnedGenerator::reconstruction_mae(const ImageBatch& images,
                                            const std::vector<ClassLabel>* labels) const {
  double total = 0.0;
  for (int i = 0; i < images.n; ++i) {
    VecXf code = net_.encode(images.image(i));
    VecXf in(net_.code + net_.cond);
    in.head(net_.code) = code;
    if (net_.cond > 0) {
      in.tail(net_.cond).setZero();
      in[net_.code + (labels ? (*labels)[std::size_t(i)] : 0)] = 1.f;
    }
    total += (net_.decode(in) - images.image(i)).cwiseAbs().mean();
  }
  return total / images.n;
}

std::string LearnedGenerator::payload_bytes() const {
  Net copy = net_;
  VecXf flat = flatten_net(copy);
  return {reinterpret_cast<const char*>(flat.data()), flat.size() * sizeof(float)};
}

std::shared_ptr<Generator> make_learned_from_payload(const GeneratorSpec& spec,
                                                     const std::string& payload) {
  Rng rng(0);
  LearnedGenerator::Net net;
  net.build(spec.height, spec.width, spec.latent_dim, spec.conditional ? spec.num_classes : 0, rng);
  VecXf flat(Eigen::Index(payload.size() / sizeof(float)));
  std::memcpy(flat.data(), payload.data(), payload.size());
  set_net(net, flat);
  return std::make_shared<LearnedGenerator>(spec, std::move(net), "{}");
}

std::shared_ptr<Generator> make_untrained_learned_igm(int h, int w, const LearnedFitConfig& config,
                                                      Rng& rng) {
  GeneratorSpec spec;
  spec.backend = Backend::learned;
  spec.latent_dim = config.latent_dim;
  spec.conditional = false;
  spec.height = h;
  spec.width = w;
  spec.channels = 3;
  spec.default_prior = TruncatedNormalSpec::isotropic(config.latent_dim, 0.0, 1.0, 2.0);
  LearnedGenerator::Net net;
  net.build(h, w, config.latent_dim, 0, rng);
  return std::make_shared<LearnedGenerator>(spec, std::move(net), "{}");
}

std::shared_ptr<Generator> fit_learned_igm(const ImageBatch& dataset,
                                           const std::vector<ClassLabel>* labels,
                                           const LearnedFitConfig& config, Rng& rng) {
  if (dataset.n < 1) throw InvalidSpecError("fit_learned_igm: empty dataset");
  if (config.latent_dim < 2) throw InvalidSpecError("fit_learned_igm: latent_dim < 2");
  if (labels && Eigen::Index(labels->size()) != dataset.n)
    throw ContractError("fit_learned_igm: label count mismatch");
  check_image_range(dataset, "fit_learned_igm");

  const bool conditional = labels != nullptr;
  int num_classes = 0;
  if (conditional) num_classes = *std::max_element(labels->begin(), labels->end()) + 1;

  LearnedGenerator::Net net;
  net.build(dataset.h, dataset.w, config.latent_dim, conditional ? num_classes : 0, rng);

  // held-out split (at least one image when possible)
  const int n_hold = dataset.n >= 10 ? dataset.n / 10 : (dataset.n > 1 ? 1 : 0);
  const int n_train = dataset.n - n_hold;
  std::vector<int> order(std::size_t(dataset.n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());

  const double target_m2 = truncated_std(2.0) * truncated_std(2.0);
  nn::Adam<float> adam;
  adam.lr = config.lr;
  VecXf theta = flatten_net(net);
  FwdCache cache;
  long iter = 0;
  double last_loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.begin() + n_train, rng.engine());
    for (int start = 0; start < n_train; start += config.batch) {
      const int m = std::min(config.batch, n_train - start);
      MatXf x(dataset.pixels_per_image(), m);
      MatXf onehot;
      if (conditional) onehot = MatXf::Zero(num_classes, m);
      for (int j = 0; j < m; ++j) {
        x.col(j) = dataset.image(order[std::size_t(start + j)]);
        if (conditional) onehot((*labels)[std::size_t(order[std::size_t(start + j)])], j) = 1.f;
      }
      MatXf noise(config.latent_dim, m);
      for (Eigen::Index k = 0; k < noise.size(); ++k)
        noise.data()[k] = float(config.noise_std * rng.normal());

      forward_ae(net, x, conditional ? &onehot : nullptr, &noise, cache);

      const double n_el = double(x.size());
      const double mse = (cache.recon - x).squaredNorm() / n_el;
      const double m2 = cache.code.squaredNorm() / double(cache.code.size());
      const double loss = mse + config.prior_weight * (m2 - target_m2) * (m2 - target_m2);
      last_loss = loss;
      if (!std::isfinite(loss))
        throw TrainingError("fit_learned_igm: non-finite loss at iteration " + std::to_string(iter),
                            iter);

      MatXf d_recon = (2.0f / float(n_el)) * (cache.recon - x);
      MatXf d_code = float(config.prior_weight * 2.0 * (m2 - target_m2) * 2.0 /
                           double(cache.code.size())) *
                     cache.code;
      NetGrads g = make_net_grads(net);
      backward_ae(net, cache, d_recon, d_code, g);
      VecXf gflat(theta.size());
      {
        Eigen::Index off = 0;
        visit_net(net, g, [&](auto&, auto& gv) {
          gflat.segment(off, gv.size()) = Eigen::Map<VecXf>(gv.data(), gv.size());
          off += gv.size();
        });
      }
      adam.step(theta, gflat);
      set_net(net, theta);
      ++iter;
    }
  }

  GeneratorSpec spec;
  spec.backend = Backend::learned;
  spec.latent_dim = config.latent_dim;
  spec.conditional = conditional;
  spec.num_classes = conditional ? num_classes : 10;
  spec.height = dataset.h;
  spec.width = dataset.w;
  spec.channels = 3;
  spec.default_prior = TruncatedNormalSpec::isotropic(config.latent_dim, 0.0, 1.0, 2.0);

  double heldout_mae = -1.0;
  if (n_hold > 0) {
    double total = 0.0;
    for (int k = n_train; k < dataset.n; ++k) {
      const int i = order[std::size_t(k)];
      VecXf code = net.encode(dataset.image(i));
      VecXf in(net.code + net.cond);
      in.head(net.code) = code;
      if (net.cond > 0) {
        in.tail(net.cond).setZero();
        in[net.code + (*labels)[std::size_t(i)]] = 1.f;
      }
      total += (net.decode(in) - dataset.image(i)).cwiseAbs().mean();
    }
    heldout_mae = total / n_hold;
  }
  json meta;
  meta["final_loss"] = last_loss;
  meta["heldout_mae"] = heldout_mae;
  meta["epochs"] = config.epochs;
  meta["train_images"] = n_train;
  return std::make_shared<LearnedGenerator>(spec, std::move(net), meta.dump());
}

}  // namespace genviews::igm
