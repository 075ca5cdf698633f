#include "trav/objectives.hpp"

#include <cmath>

#include "trav/errors.hpp"

namespace trav {

template <typename S>
S occ_score(const Eigen::Ref<const Vector<S>>& z, const OCCHead<S>& head) {
  if (z.size() != head.center.size()) throw InputError("occ_score: dimension mismatch");
  return std::exp(-(z - head.center).squaredNorm() / head.temperature);
}

template <typename S>
OccLoss<S> occ_loss(const RowMatrix<S>& z, std::span<const PixelLabel> labels, const OCCHead<S>& head) {
  if (static_cast<std::size_t>(z.rows()) != labels.size()) throw InputError("occ_loss: label count mismatch");
  if (z.cols() != head.center.size()) throw InputError("occ_loss: dimension mismatch");
  OccLoss<S> out;
  out.grad = RowMatrix<S>::Zero(z.rows(), z.cols());
  for (auto l : labels) (l == PixelLabel::Positive ? out.positives : out.unlabeled) += 1;
  if (out.positives == 0) {
    out.skipped = true;
    return out;
  }
  const S inv_pos = S(1) / static_cast<S>(out.positives);
  const S inv_unl = out.unlabeled > 0 ? S(1) / static_cast<S>(out.unlabeled) : S(0);
  S pos_sum = 0;
  S unl_sum = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Vector<S> d = z.row(i).transpose() - head.center;
    if (labels[static_cast<std::size_t>(i)] == PixelLabel::Positive) {
      pos_sum += d.squaredNorm();
      out.grad.row(i) = (S(2) * inv_pos) * d.transpose();
    } else {
      const S dist = d.norm();
      const S gap = head.margin - dist;
      if (gap > S(0)) {
        unl_sum += gap * gap;
        // Gradient direction is undefined at the center; use zero there.
        if (dist > S(0)) out.grad.row(i) = (-S(2) * head.unlabeled_weight * inv_unl * gap / dist) * d.transpose();
      }
    }
  }
  out.value = pos_sum * inv_pos + head.unlabeled_weight * unl_sum * inv_unl;
  return out;
}

template <typename S>
AssignmentMatrix<S> sinkhorn(const RowMatrix<S>& scores, S epsilon, int iters) {
  if (!(epsilon > S(0))) throw InputError("sinkhorn: epsilon must be positive");
  if (iters < 1) throw InputError("sinkhorn: iters must be positive");
  if (scores.rows() == 0 || scores.cols() == 0) throw InputError("sinkhorn: empty score matrix");
  if (!scores.allFinite()) throw InputError("sinkhorn: non-finite scores");
  const Eigen::Index b = scores.rows();
  const Eigen::Index k = scores.cols();
  AssignmentMatrix<S> out;
  out.q.resize(b, k);
  for (Eigen::Index i = 0; i < b; ++i) {
    const S m = scores.row(i).maxCoeff();
    out.q.row(i) = ((scores.row(i).array() - m) / epsilon).exp().matrix();
  }
  const S column_target = static_cast<S>(b) / static_cast<S>(k);
  for (int it = 0; it < iters; ++it) {
    const Vector<S> col = out.q.colwise().sum().transpose();
    for (Eigen::Index j = 0; j < k; ++j) {
      if (col(j) > S(0)) out.q.col(j) *= column_target / col(j);
    }
    const Vector<S> row = out.q.rowwise().sum();
    for (Eigen::Index i = 0; i < b; ++i) {
      if (row(i) > S(0)) out.q.row(i) /= row(i);
    }
  }
  return out;
}

template <typename S>
void PrototypeBank<S>::renormalize() {
  for (Eigen::Index i = 0; i < prototypes.rows(); ++i) {
    const S n = prototypes.row(i).norm();
    if (n > S(0)) prototypes.row(i) /= n;
  }
}

template <typename S>
RowMatrix<S> row_softmax(const RowMatrix<S>& logits) {
  RowMatrix<S> p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const S m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

namespace {

template <typename S>
RowMatrix<S> row_log_softmax(const RowMatrix<S>& logits) {
  RowMatrix<S> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const S m = logits.row(i).maxCoeff();
    const S lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = (logits.row(i).array() - lse).matrix();
  }
  return out;
}

}  // namespace

template <typename S>
SwappedPredictionLoss<S> swapped_prediction_loss(const RowMatrix<S>& z1, const RowMatrix<S>& z2,
                                                 const PrototypeBank<S>& bank, const SwappedPredictionParams& params,
                                                 const AssignmentMatrix<S>* targets1,
                                                 const AssignmentMatrix<S>* targets2) {
  if (z1.rows() < 2) throw InputError("swapped_prediction_loss: need at least two pixels");
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) throw InputError("swapped_prediction_loss: view shape mismatch");
  const RowMatrix<S>& c = bank.prototypes;
  if (c.cols() != z1.cols()) throw InputError("swapped_prediction_loss: prototype dimension mismatch");
  const S tau = static_cast<S>(params.temperature);
  const S eps = static_cast<S>(params.epsilon);
  const auto b = static_cast<S>(z1.rows());

  const RowMatrix<S> scores1 = z1 * c.transpose();
  const RowMatrix<S> scores2 = z2 * c.transpose();

  SwappedPredictionLoss<S> out;
  out.targets1 = targets1 ? *targets1 : sinkhorn<S>(scores1, eps, params.sinkhorn_iters);
  out.targets2 = targets2 ? *targets2 : sinkhorn<S>(scores2, eps, params.sinkhorn_iters);
  const RowMatrix<S>& q1 = out.targets1.q;
  const RowMatrix<S>& q2 = out.targets2.q;

  const RowMatrix<S> logits1 = scores1 / tau;
  const RowMatrix<S> logits2 = scores2 / tau;
  const RowMatrix<S> logp1 = row_log_softmax<S>(logits1);
  const RowMatrix<S> logp2 = row_log_softmax<S>(logits2);
  const S ce12 = -(q1.cwiseProduct(logp2)).sum() / b;
  const S ce21 = -(q2.cwiseProduct(logp1)).sum() / b;
  out.value = S(0.5) * (ce12 + ce21);

  // d CE(Q, softmax(l)) / d l = softmax(l) * rowsum(Q) - Q, per row.
  const RowMatrix<S> p1 = logp1.array().exp().matrix();
  const RowMatrix<S> p2 = logp2.array().exp().matrix();
  const RowMatrix<S> d_scores2 =
      (p2.array().colwise() * q1.rowwise().sum().array() - q1.array()).matrix() * (S(0.5) / (b * tau));
  const RowMatrix<S> d_scores1 =
      (p1.array().colwise() * q2.rowwise().sum().array() - q2.array()).matrix() * (S(0.5) / (b * tau));
  out.grad_z1 = d_scores1 * c;
  out.grad_z2 = d_scores2 * c;
  out.grad_prototypes = d_scores1.transpose() * z1 + d_scores2.transpose() * z2;
  return out;
}

template <typename S>
InfoNceLoss<S> info_nce(const RowMatrix<S>& z1, const RowMatrix<S>& z2, S temperature) {
  const Eigen::Index n = z1.rows();
  if (n < 2) throw InputError("info_nce: need at least two pairs");
  if (z2.rows() != n || z2.cols() != z1.cols()) throw InputError("info_nce: view shape mismatch");
  if (!(temperature > S(0))) throw InputError("info_nce: temperature must be positive");
  const RowMatrix<S> logits = (z1 * z2.transpose()) / temperature;
  const RowMatrix<S> logits_t = logits.transpose();
  const RowMatrix<S> lp = row_log_softmax<S>(logits);
  const RowMatrix<S> lp_t = row_log_softmax<S>(logits_t);
  const auto inv_n = S(1) / static_cast<S>(n);
  InfoNceLoss<S> out;
  out.value = -S(0.5) * inv_n * (lp.diagonal().sum() + lp_t.diagonal().sum());

  RowMatrix<S> g = lp.array().exp().matrix();
  g.diagonal().array() -= S(1);
  RowMatrix<S> g_t = lp_t.array().exp().matrix();
  g_t.diagonal().array() -= S(1);
  const RowMatrix<S> d_logits = (g + g_t.transpose()) * (S(0.5) * inv_n / temperature);
  out.grad_z1 = d_logits * z2;
  out.grad_z2 = d_logits.transpose() * z1;
  return out;
}

#define TRAV_INSTANTIATE(S)                                                                                     \
  template S occ_score<S>(const Eigen::Ref<const Vector<S>>&, const OCCHead<S>&);                              \
  template OccLoss<S> occ_loss<S>(const RowMatrix<S>&, std::span<const PixelLabel>, const OCCHead<S>&);         \
  template AssignmentMatrix<S> sinkhorn<S>(const RowMatrix<S>&, S, int);                                        \
  template struct PrototypeBank<S>;                                                                             \
  template RowMatrix<S> row_softmax<S>(const RowMatrix<S>&);                                                    \
  template SwappedPredictionLoss<S> swapped_prediction_loss<S>(const RowMatrix<S>&, const RowMatrix<S>&,        \
                                                               const PrototypeBank<S>&,                         \
                                                               const SwappedPredictionParams&,                  \
                                                               const AssignmentMatrix<S>*,                      \
                                                               const AssignmentMatrix<S>*);                     \
  template InfoNceLoss<S> info_nce<S>(const RowMatrix<S>&, const RowMatrix<S>&, S);

TRAV_INSTANTIATE(float)
TRAV_INSTANTIATE(double)

#undef TRAV_INSTANTIATE

}  // namespace trav
