#include "genviews/eval/probe.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "genviews/nn/optim.hpp"
#include "genviews/objectives/losses.hpp"

namespace genviews::eval {

namespace {

struct Standardizer {
  VecXf mean, inv_std;

  static Standardizer fit(const MatXf& x) {
    Standardizer s;
    s.mean = x.rowwise().mean();
    VecXf var = (x.colwise() - s.mean).array().square().matrix().rowwise().mean();
    s.inv_std = (var.array() + 1e-8f).sqrt().inverse();
    return s;
  }

  MatXf apply(const MatXf& x) const {
    return (x.colwise() - mean).array().colwise() * inv_std.array();
  }
};

struct LogisticModel {
  MatXf w;  // m x d
  VecXf b;

  MatXf logits(const MatXf& x) const { return (w * x).colwise() + b; }

  int predict(const MatXf& x, int col) const {
    Eigen::Index arg;
    VecXf l = w * x.col(col) + b;
    l.maxCoeff(&arg);
    return int(arg);
  }
};

LogisticModel fit_logistic(const MatXf& x, const std::vector<ClassLabel>& labels, int m,
                           double lr, int iterations, double momentum) {
  LogisticModel model;
  model.w = MatXf::Zero(m, x.rows());
  model.b = VecXf::Zero(m);
  MatXf vw = MatXf::Zero(m, x.rows());
  VecXf vb = VecXf::Zero(m);
  const int n = int(x.cols());
  for (int it = 0; it < iterations; ++it) {
    const double cur_lr = nn::cosine_lr(lr, it, iterations);
    auto ce = objectives::classifier_loss<float>(model.logits(x), labels);
    MatXf gw = ce.d_logits * x.transpose();
    VecXf gb = ce.d_logits.rowwise().sum();
    vw = float(momentum) * vw + gw;
    vb = float(momentum) * vb + gb;
    model.w -= float(cur_lr) * vw;
    model.b -= float(cur_lr) * vb;
    (void)n;
  }
  return model;
}

double accuracy(const LogisticModel& model, const MatXf& x, const std::vector<ClassLabel>& y) {
  int correct = 0;
  for (int i = 0; i < int(x.cols()); ++i)
    if (model.predict(x, i) == y[std::size_t(i)]) ++correct;
  return double(correct) / double(x.cols());
}

}  // namespace

ProbeResult linear_probe(const MatXf& train_features, const std::vector<ClassLabel>& train_labels,
                         const MatXf& test_features, const std::vector<ClassLabel>& test_labels,
                         const ProbeConfig& cfg) {
  const int n_train = int(train_features.cols());
  const int n_test = int(test_features.cols());
  if (int(train_labels.size()) != n_train || int(test_labels.size()) != n_test)
    throw ContractError("linear_probe: label count mismatch");
  if (train_features.rows() != test_features.rows())
    throw ContractError("linear_probe: feature dimension mismatch");
  if (cfg.lr_sweep.empty()) throw ConfigError("linear_probe: empty lr sweep");

  std::set<ClassLabel> classes(train_labels.begin(), train_labels.end());
  if (classes.size() < 2) throw DegenerateBatchError("linear_probe: single-class training set");
  const int m = *classes.rbegin() + 1;

  const Standardizer std_fit = Standardizer::fit(train_features);
  const MatXf x_train = std_fit.apply(train_features);
  const MatXf x_test = std_fit.apply(test_features);

  // lr selection on a held-out validation slice
  double best_lr = cfg.lr_sweep.front();
  if (cfg.lr_sweep.size() > 1 && cfg.val_fraction > 0.0 && n_train >= 10) {
    Rng rng(splitmix64(cfg.seed ^ 0x9e0fbeefull));
    std::vector<int> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    const int n_val = std::max(1, int(n_train * cfg.val_fraction));
    const int n_fit = n_train - n_val;
    MatXf xf(x_train.rows(), n_fit), xv(x_train.rows(), n_val);
    std::vector<ClassLabel> yf, yv;
    for (int i = 0; i < n_fit; ++i) {
      xf.col(i) = x_train.col(order[std::size_t(i)]);
      yf.push_back(train_labels[std::size_t(order[std::size_t(i)])]);
    }
    for (int i = 0; i < n_val; ++i) {
      xv.col(i) = x_train.col(order[std::size_t(n_fit + i)]);
      yv.push_back(train_labels[std::size_t(order[std::size_t(n_fit + i)])]);
    }
    if (std::set<ClassLabel>(yf.begin(), yf.end()).size() < 2)
      throw DegenerateBatchError("linear_probe: validation split left a single-class fit set");
    double best_acc = -1.0;
    for (double lr : cfg.lr_sweep) {
      const LogisticModel mdl = fit_logistic(xf, yf, m, lr, cfg.iterations, cfg.momentum);
      const double acc = accuracy(mdl, xv, yv);
      if (acc > best_acc + 1e-12) {
        best_acc = acc;
        best_lr = lr;
      }
    }
  }

  const LogisticModel model =
      fit_logistic(x_train, train_labels, m, best_lr, cfg.iterations, cfg.momentum);

  ProbeResult out;
  out.chosen_lr = best_lr;
  out.n_train = n_train;
  out.n_test = n_test;
  out.per_class.assign(std::size_t(m), 0.0);
  out.per_class_counts.assign(std::size_t(m), 0);
  std::vector<int> correct(std::size_t(m), 0);
  for (int i = 0; i < n_test; ++i) {
    const int y = test_labels[std::size_t(i)];
    ++out.per_class_counts[std::size_t(y)];
    if (model.predict(x_test, i) == y) ++correct[std::size_t(y)];
  }
  int total_correct = 0;
  for (int c = 0; c < m; ++c) {
    total_correct += correct[std::size_t(c)];
    out.per_class[std::size_t(c)] = out.per_class_counts[std::size_t(c)] > 0
                                        ? double(correct[std::size_t(c)]) /
                                              double(out.per_class_counts[std::size_t(c)])
                                        : 0.0;
  }
  out.top1 = double(total_correct) / double(n_test);
  return out;
}

}  // namespace genviews::eval
