#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/QR>

#include "genviews/objectives/losses.hpp"
#include "test_util.hpp"

using namespace genviews;
using namespace genviews::objectives;

namespace {

// Independent scalar re-computation of the NCE formula, no shared code with
// the implementation.
double nce_by_hand(const VecXd& a, const VecXd& p, const MatXd& negs, double tau) {
  const double sp = std::exp(tau * a.dot(p));
  double denom = sp;
  for (int k = 0; k < negs.cols(); ++k) denom += std::exp(tau * a.dot(negs.col(k)));
  return -std::log(sp / denom);
}

// Brute-force SupCon oracle: enumerates P(i) and the denominator sums.
double supcon_by_hand(const MatXd& z, const std::vector<int>& y, double tau, int* skipped = nullptr) {
  const int b = int(z.cols());
  double total = 0.0;
  int valid = 0;
  for (int i = 0; i < b; ++i) {
    std::vector<int> pos;
    for (int j = 0; j < b; ++j)
      if (j != i && y[size_t(j)] == y[size_t(i)]) pos.push_back(j);
    if (pos.empty()) continue;
    ++valid;
    double denom = 0.0;
    for (int k = 0; k < b; ++k)
      if (k != i) denom += std::exp(tau * z.col(i).dot(z.col(k)));
    double li = 0.0;
    for (int p : pos) li += -std::log(std::exp(tau * z.col(i).dot(z.col(p))) / denom);
    total += li / double(pos.size());
  }
  if (skipped) *skipped = b - valid;
  return total / valid;
}

}  // namespace

TEST_CASE("nce frozen values") {
  VecXd a(2), p(2);
  a << 1, 0;
  p << 1, 0;
  MatXd negs(2, 1);
  negs << 0, 1;
  auto r = nce_loss<double>(a, p, negs, 1.0);
  CHECK(r.value == doctest::Approx(0.313262).epsilon(1e-6));
  CHECK(r.value == doctest::Approx(nce_by_hand(a, p, negs, 1.0)).epsilon(1e-9));

  // equal similarities -> ln(K+1), any tau
  MatXd same_neg = p;
  auto eq = nce_loss<double>(a, p, same_neg, 7.3);
  CHECK(eq.value == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(eq.value == doctest::Approx(0.693147).epsilon(1e-6));

  Rng rng(11);
  for (int k : {1, 4, 9}) {
    MatXd z = testutil::random_unit_columns<double>(6, k + 2, rng);
    auto r0 = nce_loss<double>(VecXd(z.col(0)), VecXd(z.col(1)), MatXd(z.rightCols(k)), 0.0);
    CHECK(r0.value == doctest::Approx(std::log(double(k + 1))).epsilon(1e-9));
  }
}

TEST_CASE("nce errors and domain") {
  Rng rng(3);
  MatXd z = testutil::random_unit_columns<double>(4, 3, rng);
  CHECK_THROWS_AS(nce_loss<double>(VecXd(z.col(0)), VecXd(z.col(1)), MatXd(4, 0), 1.0),
                  DomainError);
  CHECK_THROWS_AS(nce_loss<double>(VecXd(z.col(0)), VecXd(z.col(1)), MatXd(z.rightCols(1)), -1.0),
                  DomainError);
  VecXd bad = 2.0 * z.col(0);
  CHECK_THROWS_AS(nce_loss<double>(bad, VecXd(z.col(1)), MatXd(z.rightCols(1)), 1.0),
                  ContractError);
}

TEST_CASE("nce gradient matches central finite differences") {
  Rng rng(17);
  const double h = 1e-4;
  for (int trial = 0; trial < 4; ++trial) {
    const int dim = 5, k = 6;
    MatXd z = testutil::random_unit_columns<double>(dim, k + 2, rng);
    VecXd a = z.col(0), p = z.col(1);
    MatXd negs = z.rightCols(k);
    const double tau = 0.5 + 2.0 * rng.uniform();
    auto r = nce_loss<double>(a, p, negs, tau);

    MatXd fd_a(dim, 1);
    for (int i = 0; i < dim; ++i) {
      VecXd ap = a, am = a;
      ap[i] += h;
      am[i] -= h;
      fd_a(i, 0) = (nce_loss<double>(ap, p, negs, tau, false, false).value -
                    nce_loss<double>(am, p, negs, tau, false, false).value) /
                   (2 * h);
    }
    CHECK(testutil::grad_rel_error<double>(MatXd(r.d_anchor), fd_a) < 1e-4);

    MatXd fd_n(dim, k);
    for (int c = 0; c < k; ++c)
      for (int i = 0; i < dim; ++i) {
        MatXd np = negs, nm = negs;
        np(i, c) += h;
        nm(i, c) -= h;
        fd_n(i, c) = (nce_loss<double>(a, p, np, tau, false, false).value -
                      nce_loss<double>(a, p, nm, tau, false, false).value) /
                     (2 * h);
      }
    CHECK(testutil::grad_rel_error<double>(r.d_negatives, fd_n) < 1e-4);
  }
}

TEST_CASE("batch nce gradient and structure") {
  Rng rng(23);
  const int b = 7, dim = 5;
  MatXd anchors = testutil::random_unit_columns<double>(dim, b, rng);
  MatXd positives = testutil::random_unit_columns<double>(dim, b, rng);
  const double tau = 3.0;
  auto r = nce_batch_loss<double>(anchors, positives, tau);

  // value agrees with per-anchor hand computation over K = B-1 negatives
  double hand = 0.0;
  for (int i = 0; i < b; ++i) {
    MatXd negs(dim, b - 1);
    int c = 0;
    for (int j = 0; j < b; ++j)
      if (j != i) negs.col(c++) = positives.col(j);
    hand += nce_by_hand(anchors.col(i), positives.col(i), negs, tau);
  }
  CHECK(r.value == doctest::Approx(hand / b).epsilon(1e-9));

  const double h = 1e-4;
  MatXd fd(dim, b);
  for (int j = 0; j < b; ++j)
    for (int i = 0; i < dim; ++i) {
      MatXd ap = anchors, am = anchors;
      ap(i, j) += h;
      am(i, j) -= h;
      fd(i, j) = (nce_batch_loss<double>(ap, positives, tau, false, false).value -
                  nce_batch_loss<double>(am, positives, tau, false, false).value) /
                 (2 * h);
    }
  CHECK(testutil::grad_rel_error<double>(r.d_anchors, fd) < 1e-4);

  for (int j = 0; j < b; ++j)
    for (int i = 0; i < dim; ++i) {
      MatXd pp = positives, pm = positives;
      pp(i, j) += h;
      pm(i, j) -= h;
      fd(i, j) = (nce_batch_loss<double>(anchors, pp, tau, false, false).value -
                  nce_batch_loss<double>(anchors, pm, tau, false, false).value) /
                 (2 * h);
    }
  CHECK(testutil::grad_rel_error<double>(r.d_positives, fd) < 1e-4);
}

TEST_CASE("nce invariance to a common orthogonal rotation") {
  Rng rng(31);
  const int dim = 8, k = 5;
  MatXd z = testutil::random_unit_columns<double>(dim, k + 2, rng);
  MatXd gauss(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) gauss(i, j) = rng.normal();
  const MatXd q = Eigen::HouseholderQR<MatXd>(gauss).householderQ();

  const double before =
      nce_loss<double>(VecXd(z.col(0)), VecXd(z.col(1)), MatXd(z.rightCols(k)), 4.0).value;
  MatXd zr = q * z;
  const double after =
      nce_loss<double>(VecXd(zr.col(0)), VecXd(zr.col(1)), MatXd(zr.rightCols(k)), 4.0, true, false)
          .value;
  CHECK(std::abs(before - after) < 1e-6);
}

TEST_CASE("nce monotone in positive similarity") {
  // grid of s_p with fixed negatives, via 2-d embeddings at controlled angle
  double prev = 1e9;
  MatXd negs(2, 3);
  negs << 0, -1, 0.5, 1, 0, std::sqrt(0.75);
  VecXd a(2);
  a << 1, 0;
  for (double sp : {-0.8, -0.4, 0.0, 0.4, 0.8, 0.99}) {
    VecXd p(2);
    p << sp, std::sqrt(1 - sp * sp);
    const double v = nce_loss<double>(a, p, negs, 5.0).value;
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("nce stability at extreme tau") {
  Rng rng(41);
  MatXd z = testutil::random_unit_columns<double>(3, 8, rng);
  // adversarial: positive nearly opposite, negatives nearly identical
  VecXd a = z.col(0);
  VecXd p = -a;
  p += 1e-3 * VecXd(z.col(1));
  p.normalize();
  MatXd negs(3, 6);
  for (int i = 0; i < 6; ++i) negs.col(i) = a;
  auto r = nce_loss<double>(a, p, negs, 100.0);
  CHECK(std::isfinite(r.value));
  CHECK(std::isfinite(r.d_anchor.norm()));
  auto rf = nce_loss<float>(a.cast<float>(), p.cast<float>(), MatXf(negs.cast<float>()), 1000.0f);
  CHECK(std::isfinite(rf.value));
}

TEST_CASE("supcon frozen and oracle values") {
  // B=2, same label, identical embeddings -> 0
  MatXd z(3, 2);
  z.col(0) << 1, 0, 0;
  z.col(1) << 1, 0, 0;
  auto r = supcon_loss<double>(z, {4, 4}, 9.0);
  CHECK(r.value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.skipped_anchors == 0);

  // all labels distinct -> degenerate
  Rng rng(5);
  MatXd z4 = testutil::random_unit_columns<double>(3, 4, rng);
  CHECK_THROWS_AS(supcon_loss<double>(z4, {0, 1, 2, 3}, 1.0), DegenerateBatchError);

  // B=4, two classes, hand-chosen 2-d embeddings vs brute force
  MatXd e(2, 4);
  e.col(0) << 1, 0;
  e.col(1) << 0, 1;
  e.col(2) << std::sqrt(0.5), std::sqrt(0.5);
  e.col(3) << -1, 0;
  std::vector<int> y{0, 1, 0, 1};
  auto rr = supcon_loss<double>(e, y, 2.0);
  CHECK(rr.value == doctest::Approx(supcon_by_hand(e, y, 2.0)).epsilon(1e-6));

  // random instances against the oracle, including skipped anchors
  for (int trial = 0; trial < 5; ++trial) {
    const int b = 6;
    MatXd emb = testutil::random_unit_columns<double>(4, b, rng);
    std::vector<int> labels;
    for (int i = 0; i < b; ++i) labels.push_back(int(rng.integer(3)));
    int hand_skipped = 0;
    const double hand = supcon_by_hand(emb, labels, 1.7, &hand_skipped);
    if (hand_skipped == b) continue;
    auto got = supcon_loss<double>(emb, labels, 1.7);
    CHECK(got.value == doctest::Approx(hand).epsilon(1e-9));
    CHECK(got.skipped_anchors == hand_skipped);
  }
}

TEST_CASE("supcon gradient matches finite differences") {
  Rng rng(59);
  const double h = 1e-4;
  const int b = 6, dim = 4;
  MatXd z = testutil::random_unit_columns<double>(dim, b, rng);
  std::vector<int> y{0, 1, 0, 1, 2, 2};
  auto r = supcon_loss<double>(z, y, 2.5);
  MatXd fd(dim, b);
  for (int j = 0; j < b; ++j)
    for (int i = 0; i < dim; ++i) {
      MatXd zp = z, zm = z;
      zp(i, j) += h;
      zm(i, j) -= h;
      fd(i, j) = (supcon_loss<double>(zp, y, 2.5, false, false).value -
                  supcon_loss<double>(zm, y, 2.5, false, false).value) /
                 (2 * h);
    }
  CHECK(testutil::grad_rel_error<double>(r.d_embeddings, fd) < 1e-4);
}

TEST_CASE("supcon all-same-label batch keeps finite gradients") {
  Rng rng(61);
  MatXd z = testutil::random_unit_columns<double>(4, 5, rng);
  auto r = supcon_loss<double>(z, {2, 2, 2, 2, 2}, 10.0);
  CHECK(std::isfinite(r.value));
  CHECK(std::isfinite(r.d_embeddings.norm()));
}

TEST_CASE("classifier loss values and gradient") {
  // uniform logits, M=100 -> ln 100
  MatXd logits = MatXd::Zero(100, 3);
  auto r = classifier_loss<double>(logits, {0, 57, 99});
  CHECK(r.value == doctest::Approx(std::log(100.0)).epsilon(1e-9));
  CHECK(r.value == doctest::Approx(4.60517).epsilon(1e-5));

  // one-hot-correct extreme logits -> < 1e-4
  MatXd sharp = MatXd::Zero(10, 2);
  sharp(3, 0) = 50.0;
  sharp(7, 1) = 50.0;
  CHECK(classifier_loss<double>(sharp, {3, 7}).value < 1e-4);

  // random batch vs independent scalar computation
  Rng rng(71);
  MatXd rl(6, 5);
  for (Eigen::Index i = 0; i < rl.size(); ++i) rl.data()[i] = 3.0 * rng.normal();
  std::vector<int> y{0, 5, 2, 2, 4};
  double hand = 0.0;
  for (int j = 0; j < 5; ++j) {
    double denom = 0.0;
    for (int c = 0; c < 6; ++c) denom += std::exp(rl(c, j));
    hand += -std::log(std::exp(rl(y[size_t(j)], j)) / denom);
  }
  auto rr = classifier_loss<double>(rl, y);
  CHECK(rr.value == doctest::Approx(hand / 5).epsilon(1e-6));

  const double h = 1e-4;
  MatXd fd(6, 5);
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 6; ++i) {
      MatXd lp = rl, lm = rl;
      lp(i, j) += h;
      lm(i, j) -= h;
      fd(i, j) =
          (classifier_loss<double>(lp, y, false).value - classifier_loss<double>(lm, y, false).value) /
          (2 * h);
    }
  CHECK(testutil::grad_rel_error<double>(rr.d_logits, fd) < 1e-4);
}

TEST_CASE("inverter loss values and gradient") {
  MatXd pred = MatXd::Zero(9, 4), truth = MatXd::Zero(9, 4);
  CHECK(inverter_loss<double>(pred, truth, nullptr, nullptr, 1.0).value ==
        doctest::Approx(0.0));

  pred.array() += 1.0;
  CHECK(inverter_loss<double>(pred, truth, nullptr, nullptr, 1.0).value ==
        doctest::Approx(1.0).epsilon(1e-12));

  // conditional with uniform logits over M=10: CE term = ln 10
  MatXd logits = MatXd::Zero(10, 4);
  std::vector<int> y{1, 2, 3, 4};
  const double with_ce = inverter_loss<double>(pred, truth, &logits, &y, 0.5).value;
  CHECK(with_ce == doctest::Approx(1.0 + 0.5 * std::log(10.0)).epsilon(1e-9));
  CHECK(std::log(10.0) == doctest::Approx(2.302585).epsilon(1e-6));

  CHECK_THROWS_AS(inverter_loss<double>(pred, MatXd::Zero(8, 4), nullptr, nullptr, 1.0),
                  ContractError);
  CHECK_THROWS_AS(inverter_loss<double>(pred, truth, &logits, nullptr, 1.0), ContractError);

  Rng rng(83);
  MatXd rp(5, 3), rt(5, 3), rl(4, 3);
  for (Eigen::Index i = 0; i < rp.size(); ++i) {
    rp.data()[i] = rng.normal();
    rt.data()[i] = rng.normal();
  }
  for (Eigen::Index i = 0; i < rl.size(); ++i) rl.data()[i] = rng.normal();
  std::vector<int> labels{0, 3, 1};
  auto r = inverter_loss<double>(rp, rt, &rl, &labels, 0.7);
  const double h = 1e-4;
  MatXd fd(5, 3);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 5; ++i) {
      MatXd pp = rp, pm = rp;
      pp(i, j) += h;
      pm(i, j) -= h;
      fd(i, j) = (inverter_loss<double>(pp, rt, &rl, &labels, 0.7, false).value -
                  inverter_loss<double>(pm, rt, &rl, &labels, 0.7, false).value) /
                 (2 * h);
    }
  CHECK(testutil::grad_rel_error<double>(r.d_pred, fd) < 1e-4);

  MatXd fdl(4, 3);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 4; ++i) {
      MatXd lp = rl, lm = rl;
      lp(i, j) += h;
      lm(i, j) -= h;
      fdl(i, j) = (inverter_loss<double>(rp, rt, &lp, &labels, 0.7, false).value -
                   inverter_loss<double>(rp, rt, &lm, &labels, 0.7, false).value) /
                  (2 * h);
    }
  CHECK(testutil::grad_rel_error<double>(r.d_logits, fdl) < 1e-4);
}
