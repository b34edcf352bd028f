#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "genviews/core/rng.hpp"
#include "genviews/core/types.hpp"

namespace testutil {

inline std::string temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("genviews_test_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

inline std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Random unit-norm embedding columns.
template <typename S>
genviews::MatX<S> random_unit_columns(int dim, int n, genviews::Rng& rng) {
  genviews::MatX<S> m(dim, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < dim; ++i) m(i, j) = S(rng.normal());
    m.col(j).normalize();
  }
  return m;
}

// Max relative error between analytic and finite-difference gradients,
// with an absolute floor to avoid 0/0 on tiny entries.
template <typename S>
double grad_rel_error(const genviews::MatX<S>& analytic, const genviews::MatX<S>& fd) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = double(analytic.data()[i]);
    const double f = double(fd.data()[i]);
    const double denom = std::max({std::abs(a), std::abs(f), 1e-6});
    worst = std::max(worst, std::abs(a - f) / denom);
  }
  return worst;
}

}  // namespace testutil
