#pragma once

#include "genviews/core/types.hpp"

namespace genviews::nn {

// Flat-vector optimizers. Nets expose flatten/set of parameters and
// gradients in a fixed traversal order, so optimizer state is just vectors.

template <typename Net, typename S>
VecX<S> flatten_grads(Net& net, typename Net::Grads& g) {
  std::vector<S> out;
  net.for_each_param(g, [&](auto&, auto& gv, bool) {
    const S* p = gv.data();
    out.insert(out.end(), p, p + gv.size());
  });
  return Eigen::Map<VecX<S>>(out.data(), Eigen::Index(out.size()));
}

template <typename Net, typename S>
VecX<S> weight_decay_mask(Net& net) {
  typename Net::Grads g = net.make_grads();
  std::vector<S> out;
  net.for_each_param(g, [&](auto& v, auto&, bool is_weight) {
    out.insert(out.end(), std::size_t(v.size()), is_weight ? S(1) : S(0));
  });
  return Eigen::Map<VecX<S>>(out.data(), Eigen::Index(out.size()));
}

// SGD with classic momentum; weight decay applies only where mask = 1.
template <typename S>
struct SgdMomentum {
  double momentum = 0.9;
  double weight_decay = 0.0;
  VecX<S> velocity;

  void step(VecX<S>& theta, const VecX<S>& grad, const VecX<S>& decay_mask, double lr) {
    if (velocity.size() == 0) velocity = VecX<S>::Zero(theta.size());
    VecX<S> g = grad;
    if (weight_decay != 0.0)
      g.array() += S(weight_decay) * decay_mask.array() * theta.array();
    velocity = S(momentum) * velocity + g;
    theta -= S(lr) * velocity;
  }
};

template <typename S>
struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  VecX<S> m, v;

  void step(VecX<S>& theta, const VecX<S>& grad) {
    if (m.size() == 0) {
      m = VecX<S>::Zero(theta.size());
      v = VecX<S>::Zero(theta.size());
    }
    ++t;
    m = S(beta1) * m + S(1 - beta1) * grad;
    v = (S(beta2) * v.array() + S(1 - beta2) * grad.array().square()).matrix();
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    theta.array() -=
        S(lr) * (m.array() / S(bc1)) / ((v.array() / S(bc2)).sqrt() + S(eps));
  }
};

inline double cosine_lr(double base_lr, long step, long total_steps) {
  if (total_steps <= 0) return base_lr;
  const double p = double(step) / double(total_steps);
  return 0.5 * base_lr * (1.0 + std::cos(M_PI * std::min(p, 1.0)));
}

}  // namespace genviews::nn
