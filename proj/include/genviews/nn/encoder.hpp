#pragma once

#include <string>
#include <vector>

#include "genviews/nn/layers.hpp"

namespace genviews::nn {

// Small residual convnet for 32x32-class inputs: stem conv, one or more
// residual blocks per stage (stride 2 at each stage entry after the first),
// global average pooling into the feature vector, then an objective-specific
// head. Linear probes read the pooled features; contrastive losses read the
// normalized projection-head output.
struct EncoderConfig {
  std::vector<int> stage_widths{16, 32, 64};
  std::vector<int> stage_blocks{1, 1, 1};
  int gn_groups = 8;
  int proj_hidden = 64;
  int embed_dim = 32;  // e
  int in_h = 32, in_w = 32, in_c = 3;

  int feature_dim() const { return stage_widths.back(); }

  void validate() const {
    if (stage_widths.empty() || stage_widths.size() != stage_blocks.size())
      throw InvalidSpecError("encoder: stage widths/blocks mismatch");
    for (std::size_t i = 0; i < stage_widths.size(); ++i) {
      if (stage_widths[i] < 1 || stage_blocks[i] < 1)
        throw InvalidSpecError("encoder: non-positive stage descriptor");
      if (stage_widths[i] % gn_groups != 0)
        throw InvalidSpecError("encoder: stage width not divisible by gn_groups");
    }
    if (embed_dim < 2) throw InvalidSpecError("encoder: embed_dim < 2");
    if (feature_dim() < embed_dim) throw InvalidSpecError("encoder: feature_dim < embed_dim");
    const int down = 1 << int(stage_widths.size() - 1);
    if (in_h % down != 0 || in_w % down != 0)
      throw InvalidSpecError("encoder: input not divisible by total stride");
    if (in_h < 8 || in_w < 8 || in_c < 1) throw InvalidSpecError("encoder: bad input shape");
  }
};

enum class HeadKind { projection, regression, classifier, regression_aux };

struct HeadSpec {
  HeadKind kind = HeadKind::projection;
  int out_dim = 0;  // regression target dim or class count
  int aux_dim = 0;  // auxiliary classifier classes (regression_aux)
};

template <typename S>
class EncoderNet {
 public:
  struct Block {
    Conv2d<S> c1, c2, proj;
    GroupNorm<S> g1, g2, gp;
    bool has_proj = false;
  };

  struct BlockCache {
    MatX<S> x_in, r1, out;
    typename GroupNorm<S>::Cache gn1, gn2, gnp;
  };

  struct BlockGrad {
    typename Conv2d<S>::Grad c1, c2, proj;
    typename GroupNorm<S>::Grad g1, g2, gp;
  };

  struct Cache {
    MatX<S> x0, stem_out, feat;
    typename GroupNorm<S>::Cache stem_gn;
    std::vector<BlockCache> blocks;
    // head intermediates
    MatX<S> fc1_out, fc1_relu, fc2_out, emb;
    VecX<S> norms;
    MatX<S> cols;  // shared im2col scratch
  };

  struct Grads {
    typename Conv2d<S>::Grad stem;
    typename GroupNorm<S>::Grad stem_gn;
    std::vector<BlockGrad> blocks;
    typename Linear<S>::Grad fc1, fc2, out_head, aux_head;
  };

  EncoderNet() = default;

  EncoderNet(const EncoderConfig& cfg, const HeadSpec& head, Rng& rng) : cfg_(cfg), head_(head) {
    cfg_.validate();
    int h = cfg_.in_h, w = cfg_.in_w;
    stem_.build(cfg_.in_c, cfg_.stage_widths[0], 3, 1, h, w, rng);
    stem_gn_.build(cfg_.stage_widths[0], cfg_.gn_groups, h * w);
    int cin = cfg_.stage_widths[0];
    for (std::size_t s = 0; s < cfg_.stage_widths.size(); ++s) {
      const int width = cfg_.stage_widths[s];
      for (int bidx = 0; bidx < cfg_.stage_blocks[s]; ++bidx) {
        const int stride = (s > 0 && bidx == 0) ? 2 : 1;
        Block blk;
        blk.c1.build(cin, width, 3, stride, h, w, rng);
        const int oh = blk.c1.out_h, ow = blk.c1.out_w;
        blk.g1.build(width, cfg_.gn_groups, oh * ow);
        blk.c2.build(width, width, 3, 1, oh, ow, rng);
        blk.g2.build(width, cfg_.gn_groups, oh * ow);
        blk.has_proj = (stride != 1 || cin != width);
        if (blk.has_proj) {
          blk.proj.build(cin, width, 1, stride, h, w, rng);
          blk.gp.build(width, cfg_.gn_groups, oh * ow);
        }
        blocks_.push_back(std::move(blk));
        h = oh;
        w = ow;
        cin = width;
      }
    }
    final_h_ = h;
    final_w_ = w;
    const int fd = cfg_.feature_dim();
    if (head_.kind == HeadKind::projection) {
      fc1_.build(fd, cfg_.proj_hidden, rng);
      fc2_.build(cfg_.proj_hidden, cfg_.embed_dim, rng);
    } else if (head_.kind == HeadKind::regression || head_.kind == HeadKind::regression_aux) {
      out_head_.build(fd, head_.out_dim, rng, std::sqrt(1.0 / fd));
      if (head_.kind == HeadKind::regression_aux)
        aux_head_.build(fd, head_.aux_dim, rng, std::sqrt(1.0 / fd));
    } else {
      out_head_.build(fd, head_.out_dim, rng, std::sqrt(1.0 / fd));
    }
  }

  const EncoderConfig& config() const { return cfg_; }
  const HeadSpec& head() const { return head_; }

  Grads make_grads() const {
    Grads g;
    g.stem = stem_.make_grad();
    g.stem_gn = stem_gn_.make_grad();
    for (const Block& b : blocks_) {
      BlockGrad bg;
      bg.c1 = b.c1.make_grad();
      bg.g1 = b.g1.make_grad();
      bg.c2 = b.c2.make_grad();
      bg.g2 = b.g2.make_grad();
      if (b.has_proj) {
        bg.proj = b.proj.make_grad();
        bg.gp = b.gp.make_grad();
      }
      g.blocks.push_back(std::move(bg));
    }
    if (head_.kind == HeadKind::projection) {
      g.fc1 = fc1_.make_grad();
      g.fc2 = fc2_.make_grad();
    } else {
      g.out_head = out_head_.make_grad();
      if (head_.kind == HeadKind::regression_aux) g.aux_head = aux_head_.make_grad();
    }
    return g;
  }

  // Backbone forward: images (chw x m) -> pooled features (feature_dim x m).
  void forward_features(const MatX<S>& x, Cache& cache) const {
    cache.x0 = x;
    MatX<S> t1, t2;
    stem_.forward(x, t1, cache.cols);
    stem_gn_.forward(t1, t2, cache.stem_gn);
    relu_forward(t2, cache.stem_out);
    cache.blocks.resize(blocks_.size());
    const MatX<S>* cur = &cache.stem_out;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      block_forward(blocks_[i], *cur, cache.blocks[i], cache.cols);
      cur = &cache.blocks[i].out;
    }
    global_avg_pool_forward(*cur, cfg_.feature_dim(), final_h_ * final_w_, cache.feat);
  }

  // Projection-head forward; requires forward_features first.
  void forward_embedding(Cache& cache) const {
    fc1_.forward(cache.feat, cache.fc1_out);
    relu_forward(cache.fc1_out, cache.fc1_relu);
    fc2_.forward(cache.fc1_relu, cache.fc2_out);
    l2norm_forward(cache.fc2_out, cache.emb, cache.norms);
  }

  void forward_out(const Cache& cache, MatX<S>& out) const { out_head_.forward(cache.feat, out); }
  void forward_aux(const Cache& cache, MatX<S>& out) const { aux_head_.forward(cache.feat, out); }

  // Backward from d(embedding); accumulates into g.
  void backward_embedding(const MatX<S>& d_emb, Cache& cache, Grads& g) const {
    MatX<S> d1, d2, d3, dfeat;
    l2norm_backward(cache.emb, cache.norms, d_emb, d1);
    fc2_.backward(cache.fc1_relu, d1, d2, g.fc2);
    relu_backward(cache.fc1_relu, d2, d3);
    fc1_.backward(cache.feat, d3, dfeat, g.fc1);
    backward_features(dfeat, cache, g);
  }

  // Backward from d(out_head output) and optional d(aux output).
  void backward_out(const MatX<S>& d_out, const MatX<S>* d_aux, Cache& cache, Grads& g) const {
    MatX<S> dfeat, dfeat2;
    out_head_.backward(cache.feat, d_out, dfeat, g.out_head);
    if (d_aux) {
      aux_head_.backward(cache.feat, *d_aux, dfeat2, g.aux_head);
      dfeat += dfeat2;
    }
    backward_features(dfeat, cache, g);
  }

  void backward_features(const MatX<S>& dfeat, Cache& cache, Grads& g) const {
    MatX<S> d = MatX<S>();
    global_avg_pool_backward(dfeat, cfg_.feature_dim(), final_h_ * final_w_, d);
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      MatX<S> dx;
      block_backward(blocks_[i], cache.blocks[i], d, dx, g.blocks[i], cache.cols);
      d = std::move(dx);
    }
    MatX<S> d2, d3, dx0;
    relu_backward(cache.stem_out, d, d2);
    stem_gn_.backward(d2, cache.stem_gn, d3, g.stem_gn);
    stem_.backward(cache.x0, d3, dx0, g.stem, cache.cols);
  }

  // Parameter traversal in a fixed order. fn(value, grad, is_decayed_weight).
  template <typename Fn>
  void for_each_param(Grads& g, Fn&& fn) {
    fn(stem_.w, g.stem.w, true);
    fn(stem_.b, g.stem.b, false);
    fn(stem_gn_.gamma, g.stem_gn.gamma, false);
    fn(stem_gn_.beta, g.stem_gn.beta, false);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      Block& b = blocks_[i];
      BlockGrad& bg = g.blocks[i];
      fn(b.c1.w, bg.c1.w, true);
      fn(b.c1.b, bg.c1.b, false);
      fn(b.g1.gamma, bg.g1.gamma, false);
      fn(b.g1.beta, bg.g1.beta, false);
      fn(b.c2.w, bg.c2.w, true);
      fn(b.c2.b, bg.c2.b, false);
      fn(b.g2.gamma, bg.g2.gamma, false);
      fn(b.g2.beta, bg.g2.beta, false);
      if (b.has_proj) {
        fn(b.proj.w, bg.proj.w, true);
        fn(b.proj.b, bg.proj.b, false);
        fn(b.gp.gamma, bg.gp.gamma, false);
        fn(b.gp.beta, bg.gp.beta, false);
      }
    }
    if (head_.kind == HeadKind::projection) {
      fn(fc1_.w, g.fc1.w, true);
      fn(fc1_.b, g.fc1.b, false);
      fn(fc2_.w, g.fc2.w, true);
      fn(fc2_.b, g.fc2.b, false);
    } else {
      fn(out_head_.w, g.out_head.w, true);
      fn(out_head_.b, g.out_head.b, false);
      if (head_.kind == HeadKind::regression_aux) {
        fn(aux_head_.w, g.aux_head.w, true);
        fn(aux_head_.b, g.aux_head.b, false);
      }
    }
  }

  VecX<S> flatten_params() {
    Grads g = make_grads();
    std::vector<S> out;
    for_each_param(g, [&](auto& v, auto&, bool) {
      const S* p = v.data();
      out.insert(out.end(), p, p + v.size());
    });
    return Eigen::Map<VecX<S>>(out.data(), Eigen::Index(out.size()));
  }

  void set_params(const VecX<S>& flat) {
    Grads g = make_grads();
    Eigen::Index off = 0;
    for_each_param(g, [&](auto& v, auto&, bool) {
      Eigen::Map<VecX<S>>(v.data(), v.size()) = flat.segment(off, v.size());
      off += v.size();
    });
    if (off != flat.size()) throw ContractError("set_params: size mismatch");
  }

  int final_h() const { return final_h_; }
  int final_w() const { return final_w_; }

 private:
  void block_forward(const Block& blk, const MatX<S>& x, BlockCache& c, MatX<S>& cols) const {
    c.x_in = x;
    MatX<S> t1, t2, t3, t4, sc;
    blk.c1.forward(x, t1, cols);
    blk.g1.forward(t1, t2, c.gn1);
    relu_forward(t2, c.r1);
    blk.c2.forward(c.r1, t3, cols);
    blk.g2.forward(t3, t4, c.gn2);
    if (blk.has_proj) {
      MatX<S> p;
      blk.proj.forward(x, p, cols);
      blk.gp.forward(p, sc, c.gnp);
    } else {
      sc = x;
    }
    relu_forward(MatX<S>(t4 + sc), c.out);
  }

  void block_backward(const Block& blk, BlockCache& c, const MatX<S>& d_out, MatX<S>& dx,
                      BlockGrad& g, MatX<S>& cols) const {
    MatX<S> d_sum, d_t4, d_r1a, d_t2, d_t1, dx_main, dx_sc;
    relu_backward(c.out, d_out, d_sum);
    blk.g2.backward(d_sum, c.gn2, d_t4, g.g2);
    blk.c2.backward(c.r1, d_t4, d_r1a, g.c2, cols);
    relu_backward(c.r1, d_r1a, d_t2);
    blk.g1.backward(d_t2, c.gn1, d_t1, g.g1);
    blk.c1.backward(c.x_in, d_t1, dx_main, g.c1, cols);
    if (blk.has_proj) {
      MatX<S> d_p;
      blk.gp.backward(d_sum, c.gnp, d_p, g.gp);
      blk.proj.backward(c.x_in, d_p, dx_sc, g.proj, cols);
      dx = dx_main + dx_sc;
    } else {
      dx = dx_main + d_sum;
    }
  }

  EncoderConfig cfg_;
  HeadSpec head_;
  Conv2d<S> stem_;
  GroupNorm<S> stem_gn_;
  std::vector<Block> blocks_;
  Linear<S> fc1_, fc2_, out_head_, aux_head_;
  int final_h_ = 0, final_w_ = 0;
};

using EncoderNetF = EncoderNet<float>;

}  // namespace genviews::nn
