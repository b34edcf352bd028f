#pragma once

#include <cmath>
#include <vector>

#include "genviews/core/types.hpp"

// Loss functions, one sample per column. All are numerically stabilized by
// max-subtraction so tau * similarity up to ~1e3 stays finite. Each returns
// its value together with analytic gradients w.r.t. the inputs.

namespace genviews::objectives {

template <typename S>
void check_normalized(const MatX<S>& emb, const char* where) {
  for (Eigen::Index j = 0; j < emb.cols(); ++j)
    if (std::abs(emb.col(j).norm() - S(1)) > S(1e-5))
      throw ContractError(std::string(where) + ": embeddings must be L2-normalized");
}

template <typename S>
void check_tau(S tau) {
  if (!(tau >= S(0)) || !std::isfinite(double(tau)))
    throw DomainError("tau must be a finite value >= 0");
}

// ------------------------------------------------------------------- NCE --
// L = -log( e^{tau s_p} / (e^{tau s_p} + sum_k e^{tau s_k}) ), s = inner
// products of the anchor with the positive / negatives.
template <typename S>
struct NceResult {
  S value;
  VecX<S> d_anchor, d_positive;
  MatX<S> d_negatives;
};

template <typename S>
NceResult<S> nce_loss(const VecX<S>& anchor, const VecX<S>& positive, const MatX<S>& negatives,
                      S tau, bool with_grad = true, bool check_norm = true) {
  check_tau(tau);
  const int k = int(negatives.cols());
  if (k == 0) throw DomainError("nce_loss: needs at least one negative");
  if (positive.size() != anchor.size() || negatives.rows() != anchor.size())
    throw ContractError("nce_loss: embedding dimension mismatch");
  MatX<S> all(anchor.size(), 1 + k);
  all.col(0) = positive;
  all.rightCols(k) = negatives;
  if (check_norm) {
    check_normalized(MatX<S>(anchor), "nce_loss");
    check_normalized(all, "nce_loss");
  }

  VecX<S> logits = tau * (all.transpose() * anchor);
  const S mx = logits.maxCoeff();
  VecX<S> ex = (logits.array() - mx).exp();
  const S z = ex.sum();
  NceResult<S> out;
  out.value = -(logits[0] - mx) + std::log(z);
  if (!with_grad) return out;

  VecX<S> q = ex / z;
  q[0] -= S(1);  // d loss / d logits
  out.d_anchor = tau * (all * q);
  out.d_positive = tau * q[0] * anchor;
  out.d_negatives = tau * anchor * q.tail(k).transpose();
  return out;
}

// In-batch InfoNCE: anchors and positives are (e x B); anchor i's negatives
// are the other B-1 positives, so each anchor faces exactly K = B-1
// candidates.
template <typename S>
struct BatchNceResult {
  S value;
  MatX<S> d_anchors, d_positives;
};

template <typename S>
BatchNceResult<S> nce_batch_loss(const MatX<S>& anchors, const MatX<S>& positives, S tau,
                                 bool with_grad = true, bool check_norm = true) {
  check_tau(tau);
  const int b = int(anchors.cols());
  if (b < 2) throw DomainError("nce_batch_loss: batch must be >= 2");
  if (anchors.rows() != positives.rows() || positives.cols() != b)
    throw ContractError("nce_batch_loss: shape mismatch");
  if (check_norm) {
    check_normalized(anchors, "nce_batch_loss");
    check_normalized(positives, "nce_batch_loss");
  }

  MatX<S> logits = tau * (anchors.transpose() * positives);  // (i, j) = a_i . p_j
  S total = S(0);
  MatX<S> grad_logits;
  if (with_grad) grad_logits.resize(b, b);
  for (int i = 0; i < b; ++i) {
    const S mx = logits.row(i).maxCoeff();
    VecX<S> ex = (logits.row(i).array() - mx).exp();
    const S z = ex.sum();
    total += -(logits(i, i) - mx) + std::log(z);
    if (with_grad) {
      VecX<S> q = ex / z;
      q[i] -= S(1);
      grad_logits.row(i) = q.transpose() / S(b);
    }
  }
  BatchNceResult<S> out;
  out.value = total / S(b);
  if (with_grad) {
    out.d_anchors = tau * positives * grad_logits.transpose();
    out.d_positives = tau * anchors * grad_logits;
  }
  return out;
}

// ---------------------------------------------------------------- SupCon --
// "Out" averaging: mean over anchors with nonempty positive sets of
//   -(1/|P(i)|) sum_{p in P(i)} log( e^{tau s_ip} / sum_{a != i} e^{tau s_ia} ).
// Anchors without any positive are skipped and counted.
template <typename S>
struct SupconResult {
  S value;
  int skipped_anchors = 0;
  MatX<S> d_embeddings;
};

template <typename S>
SupconResult<S> supcon_loss(const MatX<S>& embeddings, const std::vector<ClassLabel>& labels,
                            S tau, bool with_grad = true, bool check_norm = true) {
  check_tau(tau);
  const int b = int(embeddings.cols());
  if (b < 2) throw DomainError("supcon_loss: batch must be >= 2");
  if (int(labels.size()) != b) throw ContractError("supcon_loss: label count mismatch");
  if (check_norm) check_normalized(embeddings, "supcon_loss");

  MatX<S> sim = tau * (embeddings.transpose() * embeddings);
  std::vector<std::vector<int>> positives(static_cast<std::size_t>(b));
  int valid = 0;
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j)
      if (j != i && labels[std::size_t(j)] == labels[std::size_t(i)])
        positives[std::size_t(i)].push_back(j);
    if (!positives[std::size_t(i)].empty()) ++valid;
  }
  if (valid == 0) throw DegenerateBatchError("supcon_loss: no anchor has a positive");

  S total = S(0);
  MatX<S> grad_sim = MatX<S>::Zero(b, b);
  for (int i = 0; i < b; ++i) {
    const auto& pos = positives[std::size_t(i)];
    if (pos.empty()) continue;
    S mx = -std::numeric_limits<S>::infinity();
    for (int j = 0; j < b; ++j)
      if (j != i) mx = std::max(mx, sim(i, j));
    S z = S(0);
    for (int j = 0; j < b; ++j)
      if (j != i) z += std::exp(sim(i, j) - mx);
    const S logz = std::log(z) + mx;
    S li = S(0);
    for (int p : pos) li += -(sim(i, p) - logz);
    total += li / S(pos.size());
    if (with_grad) {
      const S inv_p = S(1) / S(pos.size());
      for (int j = 0; j < b; ++j) {
        if (j == i) continue;
        grad_sim(i, j) += std::exp(sim(i, j) - logz) / S(valid);
      }
      for (int p : pos) grad_sim(i, p) -= inv_p / S(valid);
    }
  }

  SupconResult<S> out;
  out.value = total / S(valid);
  out.skipped_anchors = b - valid;
  if (with_grad)
    out.d_embeddings = tau * embeddings * (grad_sim + grad_sim.transpose());
  return out;
}

// ----------------------------------------------------- cross entropy core --
template <typename S>
struct CeResult {
  S value;
  MatX<S> d_logits;
};

template <typename S>
CeResult<S> classifier_loss(const MatX<S>& logits, const std::vector<ClassLabel>& labels,
                            bool with_grad = true) {
  const int b = int(logits.cols());
  if (b < 1) throw ContractError("classifier_loss: empty batch");
  if (int(labels.size()) != b) throw ContractError("classifier_loss: label count mismatch");
  const int m = int(logits.rows());
  for (ClassLabel y : labels)
    if (y < 0 || y >= m) throw ContractError("classifier_loss: label out of range");

  CeResult<S> out;
  out.value = S(0);
  if (with_grad) out.d_logits.resize(m, b);
  for (int j = 0; j < b; ++j) {
    const S mx = logits.col(j).maxCoeff();
    VecX<S> ex = (logits.col(j).array() - mx).exp();
    const S z = ex.sum();
    out.value += -(logits(labels[std::size_t(j)], j) - mx) + std::log(z);
    if (with_grad) {
      VecX<S> q = ex / z;
      q[labels[std::size_t(j)]] -= S(1);
      out.d_logits.col(j) = q / S(b);
    }
  }
  out.value /= S(b);
  return out;
}

// -------------------------------------------------------------- inverter --
// Mean squared error over latent dims (and batch), plus ce_weight times an
// auxiliary cross-entropy when class logits/labels are given.
template <typename S>
struct InverterResult {
  S value;
  MatX<S> d_pred;
  MatX<S> d_logits;  // empty when unconditional
};

template <typename S>
InverterResult<S> inverter_loss(const MatX<S>& pred_z, const MatX<S>& true_z,
                                const MatX<S>* logits, const std::vector<ClassLabel>* labels,
                                S ce_weight, bool with_grad = true) {
  if (pred_z.rows() != true_z.rows() || pred_z.cols() != true_z.cols())
    throw ContractError("inverter_loss: latent shape mismatch");
  if ((logits == nullptr) != (labels == nullptr))
    throw ContractError("inverter_loss: logits and labels must be given together");
  const S n = S(pred_z.size());
  InverterResult<S> out;
  out.value = (pred_z - true_z).squaredNorm() / n;
  if (with_grad) out.d_pred = S(2) * (pred_z - true_z) / n;
  if (logits) {
    CeResult<S> ce = classifier_loss(*logits, *labels, with_grad);
    out.value += ce_weight * ce.value;
    if (with_grad) out.d_logits = ce_weight * ce.d_logits;
  }
  return out;
}

}  // namespace genviews::objectives
