#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "genviews/core/errors.hpp"

namespace genviews {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, 1>;

using MatXf = MatX<float>;
using VecXf = VecX<float>;
using MatXd = MatX<double>;
using VecXd = VecX<double>;

// A latent point z. Batches store one latent per column.
using LatentVector = VecXf;
using LatentBatch = MatXf;

using ClassLabel = int;

// N images, each stored channel-planar (c * h * w + y * w + x) in one column.
// Values live in [0, 1].
template <typename S>
struct ImageBatchT {
  int n = 0, h = 0, w = 0, c = 0;
  MatX<S> data;  // (h*w*c) x n

  ImageBatchT() = default;
  ImageBatchT(int n_, int h_, int w_, int c_)
      : n(n_), h(h_), w(w_), c(c_), data(MatX<S>::Zero(std::int64_t(h_) * w_ * c_, n_)) {}

  std::int64_t pixels_per_image() const { return std::int64_t(h) * w * c; }

  S& at(int i, int ch, int y, int x) { return data((std::int64_t(ch) * h + y) * w + x, i); }
  S at(int i, int ch, int y, int x) const { return data((std::int64_t(ch) * h + y) * w + x, i); }

  auto image(int i) { return data.col(i); }
  auto image(int i) const { return data.col(i); }

  // One channel plane of image i as an h x w row-major view.
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> plane(int i, int ch) {
    return {data.col(i).data() + std::int64_t(ch) * h * w, h, w};
  }
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> plane(int i, int ch) const {
    return {data.col(i).data() + std::int64_t(ch) * h * w, h, w};
  }

  ImageBatchT slice(const std::vector<int>& idx) const {
    ImageBatchT out(int(idx.size()), h, w, c);
    for (std::size_t k = 0; k < idx.size(); ++k) out.data.col(Eigen::Index(k)) = data.col(idx[k]);
    return out;
  }

  bool same_shape(const ImageBatchT& o) const { return h == o.h && w == o.w && c == o.c; }
};

using ImageBatch = ImageBatchT<float>;

template <typename S>
void check_image_range(const ImageBatchT<S>& b, const char* where) {
  if (b.n < 1) throw ContractError(std::string(where) + ": empty image batch");
  if (!b.data.allFinite() || b.data.minCoeff() < S(0) || b.data.maxCoeff() > S(1))
    throw ContractError(std::string(where) + ": image values outside [0,1]");
}

// Concatenate batches along the sample axis.
template <typename S>
ImageBatchT<S> concat(const ImageBatchT<S>& a, const ImageBatchT<S>& b) {
  if (!a.same_shape(b)) throw ContractError("concat: image shape mismatch");
  ImageBatchT<S> out(a.n + b.n, a.h, a.w, a.c);
  out.data.leftCols(a.n) = a.data;
  out.data.rightCols(b.n) = b.data;
  return out;
}

}  // namespace genviews
