#pragma once

#include <cmath>

#include "genviews/core/rng.hpp"
#include "genviews/core/types.hpp"

// Minimal dense-layer toolkit. Activations are stored one sample per column,
// images flattened channel-planar (matching ImageBatch). Layers are const
// during forward/backward; parameter gradients go to caller-owned Grad
// buffers so batch chunks can run on parallel workers and be reduced in a
// fixed order.

namespace genviews::nn {

template <typename S>
void he_init(MatX<S>& w, int fan_in, Rng& rng) {
  const double std = std::sqrt(2.0 / double(fan_in));
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = S(std * rng.normal());
}

// ---------------------------------------------------------------- Conv2d --
// 3x3 (pad 1) or 1x1 (pad 0) convolution, arbitrary stride, via im2col + GEMM.
template <typename S>
struct Conv2d {
  int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  MatX<S> w;  // cout x (cin*k*k)
  VecX<S> b;  // cout

  struct Grad {
    MatX<S> w;
    VecX<S> b;
  };

  void build(int cin_, int cout_, int k_, int stride_, int in_h_, int in_w_, Rng& rng) {
    cin = cin_;
    cout = cout_;
    k = k_;
    stride = stride_;
    pad = (k == 3) ? 1 : 0;
    in_h = in_h_;
    in_w = in_w_;
    out_h = (in_h + 2 * pad - k) / stride + 1;
    out_w = (in_w + 2 * pad - k) / stride + 1;
    w.resize(cout, cin * k * k);
    he_init(w, cin * k * k, rng);
    b = VecX<S>::Zero(cout);
  }

  Grad make_grad() const { return Grad{MatX<S>::Zero(w.rows(), w.cols()), VecX<S>::Zero(b.size())}; }

  void im2col(const MatX<S>& x, MatX<S>& cols) const {
    const int m = int(x.cols());
    const int ohw = out_h * out_w;
    const int kk = k * k;
    cols.resize(cin * kk, Eigen::Index(ohw) * m);
    for (int j = 0; j < m; ++j) {
      const S* src = x.col(j).data();
      for (int c = 0; c < cin; ++c) {
        const S* plane = src + std::int64_t(c) * in_h * in_w;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const int row = (c * k + ky) * k + kx;
            for (int oy = 0; oy < out_h; ++oy) {
              const int iy = oy * stride - pad + ky;
              S* dst = &cols(row, Eigen::Index(j) * ohw + Eigen::Index(oy) * out_w);
              if (iy < 0 || iy >= in_h) {
                for (int ox = 0; ox < out_w; ++ox) dst[std::int64_t(ox) * cols.rows()] = S(0);
                continue;
              }
              const S* srow = plane + std::int64_t(iy) * in_w;
              for (int ox = 0; ox < out_w; ++ox) {
                const int ix = ox * stride - pad + kx;
                dst[std::int64_t(ox) * cols.rows()] =
                    (ix >= 0 && ix < in_w) ? srow[ix] : S(0);
              }
            }
          }
        }
      }
    }
  }

  void col2im_add(const MatX<S>& dcols, MatX<S>& dx) const {
    const int m = int(dx.cols());
    const int ohw = out_h * out_w;
    for (int j = 0; j < m; ++j) {
      S* dst = dx.col(j).data();
      for (int c = 0; c < cin; ++c) {
        S* plane = dst + std::int64_t(c) * in_h * in_w;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const int row = (c * k + ky) * k + kx;
            for (int oy = 0; oy < out_h; ++oy) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= in_h) continue;
              const S* srow = &dcols(row, Eigen::Index(j) * ohw + Eigen::Index(oy) * out_w);
              S* drow = plane + std::int64_t(iy) * in_w;
              for (int ox = 0; ox < out_w; ++ox) {
                const int ix = ox * stride - pad + kx;
                if (ix >= 0 && ix < in_w) drow[ix] += srow[std::int64_t(ox) * dcols.rows()];
              }
            }
          }
        }
      }
    }
  }

  // x: (cin*in_h*in_w) x m  ->  y: (cout*out_h*out_w) x m
  void forward(const MatX<S>& x, MatX<S>& y, MatX<S>& cols_scratch) const {
    const int m = int(x.cols());
    const int ohw = out_h * out_w;
    im2col(x, cols_scratch);
    MatX<S> block(cout, Eigen::Index(ohw) * m);
    block.noalias() = w * cols_scratch;
    block.colwise() += b;
    y.resize(Eigen::Index(cout) * ohw, m);
    for (int j = 0; j < m; ++j) {
      Eigen::Map<MatX<S>> dst(y.col(j).data(), ohw, cout);
      dst = block.middleCols(Eigen::Index(j) * ohw, ohw).transpose();
    }
  }

  void backward(const MatX<S>& x, const MatX<S>& dy, MatX<S>& dx, Grad& g,
                MatX<S>& cols_scratch) const {
    const int m = int(x.cols());
    const int ohw = out_h * out_w;
    MatX<S> dblock(cout, Eigen::Index(ohw) * m);
    for (int j = 0; j < m; ++j) {
      Eigen::Map<const MatX<S>> src(dy.col(j).data(), ohw, cout);
      dblock.middleCols(Eigen::Index(j) * ohw, ohw) = src.transpose();
    }
    im2col(x, cols_scratch);
    g.w.noalias() += dblock * cols_scratch.transpose();
    g.b.noalias() += dblock.rowwise().sum();
    MatX<S> dcols(cols_scratch.rows(), cols_scratch.cols());
    dcols.noalias() = w.transpose() * dblock;
    dx = MatX<S>::Zero(x.rows(), x.cols());
    col2im_add(dcols, dx);
  }
};

// ------------------------------------------------------------- GroupNorm --
template <typename S>
struct GroupNorm {
  int ch = 0, groups = 1, hw = 0;
  S eps = S(1e-5);
  VecX<S> gamma, beta;  // per channel

  struct Grad {
    VecX<S> gamma, beta;
  };
  struct Cache {
    MatX<S> xhat;     // normalized activations
    MatX<S> inv_std;  // groups x m
  };

  void build(int ch_, int groups_, int hw_) {
    if (ch_ % groups_ != 0) throw ContractError("group norm: channels not divisible by groups");
    ch = ch_;
    groups = groups_;
    hw = hw_;
    gamma = VecX<S>::Ones(ch);
    beta = VecX<S>::Zero(ch);
  }

  Grad make_grad() const { return Grad{VecX<S>::Zero(ch), VecX<S>::Zero(ch)}; }

  void forward(const MatX<S>& x, MatX<S>& y, Cache& cache) const {
    const int m = int(x.cols());
    const int gsz = (ch / groups) * hw;
    cache.xhat.resize(x.rows(), m);
    cache.inv_std.resize(groups, m);
    y.resize(x.rows(), m);
    for (int j = 0; j < m; ++j) {
      for (int g = 0; g < groups; ++g) {
        auto seg = x.col(j).segment(Eigen::Index(g) * gsz, gsz);
        const S mu = seg.mean();
        const S var = (seg.array() - mu).square().mean();
        const S inv = S(1) / std::sqrt(var + eps);
        cache.inv_std(g, j) = inv;
        cache.xhat.col(j).segment(Eigen::Index(g) * gsz, gsz) = (seg.array() - mu) * inv;
      }
      for (int c = 0; c < ch; ++c)
        y.col(j).segment(Eigen::Index(c) * hw, hw) =
            gamma[c] * cache.xhat.col(j).segment(Eigen::Index(c) * hw, hw).array() + beta[c];
    }
  }

  void backward(const MatX<S>& dy, const Cache& cache, MatX<S>& dx, Grad& g) const {
    const int m = int(dy.cols());
    const int cpg = ch / groups;
    const int gsz = cpg * hw;
    dx.resize(dy.rows(), m);
    for (int j = 0; j < m; ++j) {
      for (int c = 0; c < ch; ++c) {
        auto d = dy.col(j).segment(Eigen::Index(c) * hw, hw);
        auto xh = cache.xhat.col(j).segment(Eigen::Index(c) * hw, hw);
        g.beta[c] += d.sum();
        g.gamma[c] += d.dot(xh);
      }
      for (int grp = 0; grp < groups; ++grp) {
        auto xh = cache.xhat.col(j).segment(Eigen::Index(grp) * gsz, gsz);
        VecX<S> dxhat(gsz);
        for (int cc = 0; cc < cpg; ++cc)
          dxhat.segment(Eigen::Index(cc) * hw, hw) =
              dy.col(j).segment((Eigen::Index(grp) * cpg + cc) * hw, hw) * gamma[grp * cpg + cc];
        const S mean_d = dxhat.mean();
        const S mean_dx = S(dxhat.dot(xh)) / S(gsz);
        dx.col(j).segment(Eigen::Index(grp) * gsz, gsz) =
            cache.inv_std(grp, j) * (dxhat.array() - mean_d - xh.array() * mean_dx);
      }
    }
  }
};

// ---------------------------------------------------------------- Linear --
template <typename S>
struct Linear {
  MatX<S> w;  // out x in
  VecX<S> b;

  struct Grad {
    MatX<S> w;
    VecX<S> b;
  };

  void build(int in, int out, Rng& rng, double scale = -1.0) {
    w.resize(out, in);
    if (scale < 0) {
      he_init(w, in, rng);
    } else {
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = S(scale * rng.normal());
    }
    b = VecX<S>::Zero(out);
  }

  Grad make_grad() const { return Grad{MatX<S>::Zero(w.rows(), w.cols()), VecX<S>::Zero(b.size())}; }

  void forward(const MatX<S>& x, MatX<S>& y) const {
    y.noalias() = w * x;
    y.colwise() += b;
  }

  void backward(const MatX<S>& x, const MatX<S>& dy, MatX<S>& dx, Grad& g) const {
    g.w.noalias() += dy * x.transpose();
    g.b.noalias() += dy.rowwise().sum();
    dx.noalias() = w.transpose() * dy;
  }
};

// ------------------------------------------------------------ activations --
template <typename S>
void relu_forward(const MatX<S>& x, MatX<S>& y) {
  y = x.cwiseMax(S(0));
}

template <typename S>
void relu_backward(const MatX<S>& y, const MatX<S>& dy, MatX<S>& dx) {
  dx = (y.array() > S(0)).template cast<S>() * dy.array();
}

template <typename S>
void sigmoid_forward(const MatX<S>& x, MatX<S>& y) {
  y = (S(1) / (S(1) + (-x.array()).exp())).matrix();
}

template <typename S>
void sigmoid_backward(const MatX<S>& y, const MatX<S>& dy, MatX<S>& dx) {
  dx = (dy.array() * y.array() * (S(1) - y.array())).matrix();
}

// Mean over spatial positions per channel: (ch*hw) x m -> ch x m.
template <typename S>
void global_avg_pool_forward(const MatX<S>& x, int ch, int hw, MatX<S>& y) {
  const int m = int(x.cols());
  y.resize(ch, m);
  for (int j = 0; j < m; ++j)
    for (int c = 0; c < ch; ++c)
      y(c, j) = x.col(j).segment(Eigen::Index(c) * hw, hw).mean();
}

template <typename S>
void global_avg_pool_backward(const MatX<S>& dy, int ch, int hw, MatX<S>& dx) {
  const int m = int(dy.cols());
  dx.resize(Eigen::Index(ch) * hw, m);
  for (int j = 0; j < m; ++j)
    for (int c = 0; c < ch; ++c)
      dx.col(j).segment(Eigen::Index(c) * hw, hw).setConstant(dy(c, j) / S(hw));
}

// Row unit-normalization per column vector.
template <typename S>
void l2norm_forward(const MatX<S>& x, MatX<S>& y, VecX<S>& norms) {
  const int m = int(x.cols());
  y.resize(x.rows(), m);
  norms.resize(m);
  for (int j = 0; j < m; ++j) {
    const S n = std::max(x.col(j).norm(), S(1e-12));
    norms[j] = n;
    y.col(j) = x.col(j) / n;
  }
}

template <typename S>
void l2norm_backward(const MatX<S>& y, const VecX<S>& norms, const MatX<S>& dy, MatX<S>& dx) {
  const int m = int(dy.cols());
  dx.resize(dy.rows(), m);
  for (int j = 0; j < m; ++j)
    dx.col(j) = (dy.col(j) - y.col(j) * y.col(j).dot(dy.col(j))) / norms[j];
}

// Nearest-neighbor 2x upsampling on channel-planar columns.
template <typename S>
void upsample2x_forward(const MatX<S>& x, int ch, int h, int w, MatX<S>& y) {
  const int m = int(x.cols());
  const int oh = h * 2, ow = w * 2;
  y.resize(Eigen::Index(ch) * oh * ow, m);
  for (int j = 0; j < m; ++j) {
    const S* src = x.col(j).data();
    S* dst = y.col(j).data();
    for (int c = 0; c < ch; ++c)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx)
          dst[(std::int64_t(c) * oh + yy) * ow + xx] =
              src[(std::int64_t(c) * h + yy / 2) * w + xx / 2];
  }
}

template <typename S>
void upsample2x_backward(const MatX<S>& dy, int ch, int h, int w, MatX<S>& dx) {
  const int m = int(dy.cols());
  const int oh = h * 2, ow = w * 2;
  dx = MatX<S>::Zero(Eigen::Index(ch) * h * w, m);
  for (int j = 0; j < m; ++j) {
    const S* src = dy.col(j).data();
    S* dst = dx.col(j).data();
    for (int c = 0; c < ch; ++c)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx)
          dst[(std::int64_t(c) * h + yy / 2) * w + xx / 2] +=
              src[(std::int64_t(c) * oh + yy) * ow + xx];
  }
}

}  // namespace genviews::nn
