#pragma once

#include <vector>

#include "genviews/core/rng.hpp"
#include "genviews/core/types.hpp"

namespace genviews::eval {

struct ProbeConfig {
  std::vector<double> lr_sweep{0.1, 0.3, 1.0, 3.0};
  int iterations = 400;
  double momentum = 0.9;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  double top1 = 0.0;
  std::vector<double> per_class;
  std::vector<int> per_class_counts;
  double chosen_lr = 0.0;
  int n_train = 0, n_test = 0;
};

// [OP] linear_probe: multinomial logistic regression on frozen features
// (full-batch gradient descent, standardized inputs). The learning rate is
// swept and chosen on a validation split, then the probe is refit on the full
// training set. Deterministic given (features, labels, cfg, seed).
ProbeResult linear_probe(const MatXf& train_features, const std::vector<ClassLabel>& train_labels,
                         const MatXf& test_features, const std::vector<ClassLabel>& test_labels,
                         const ProbeConfig& cfg);

}  // namespace genviews::eval
