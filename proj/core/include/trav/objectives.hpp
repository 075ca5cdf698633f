#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include <Eigen/Core>

namespace trav {

template <typename S>
using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// One-class classification

/// SVDD-style head: a fixed center in the OCC projection space.
template <typename S>
struct OCCHead {
  Vector<S> center;
  S temperature = S(1);      // tau_occ
  S unlabeled_weight = S(0.1);  // pi
  S margin = S(1);           // m
};

/// exp(-||z - c||^2 / tau).
template <typename S>
S occ_score(const Eigen::Ref<const Vector<S>>& z, const OCCHead<S>& head);

enum class PixelLabel : std::uint8_t { Unlabeled = 0, Positive = 1 };

template <typename S>
struct OccLoss {
  S value = S(0);
  bool skipped = false;  // no positives in the batch
  RowMatrix<S> grad;     // d value / d z, same shape as the input
  std::size_t positives = 0;
  std::size_t unlabeled = 0;
};

/// mean_pos ||z-c||^2 + pi * mean_unl max(0, m - ||z-c||)^2 over the rows of z.
template <typename S>
OccLoss<S> occ_loss(const RowMatrix<S>& z, std::span<const PixelLabel> labels, const OCCHead<S>& head);

// ---------------------------------------------------------------------------
// Balanced clustering

/// Soft assignments whose rows sum to 1 and columns to B/K.
template <typename S>
struct AssignmentMatrix {
  RowMatrix<S> q;
};

/// Sinkhorn-Knopp on exp(scores / epsilon): `iters` rounds of column
/// normalization (to B/K) followed by row normalization (to 1).
template <typename S>
AssignmentMatrix<S> sinkhorn(const RowMatrix<S>& scores, S epsilon, int iters);

template <typename S>
struct PrototypeBank {
  RowMatrix<S> prototypes;  // K x D, unit rows

  int size() const { return static_cast<int>(prototypes.rows()); }
  void renormalize();
};

template <typename S>
struct SwappedPredictionLoss {
  S value = S(0);
  RowMatrix<S> grad_z1;
  RowMatrix<S> grad_z2;
  RowMatrix<S> grad_prototypes;
  AssignmentMatrix<S> targets1;
  AssignmentMatrix<S> targets2;
};

struct SwappedPredictionParams {
  double epsilon = 0.05;
  int sinkhorn_iters = 3;
  double temperature = 0.1;  // tau_clu
};

/// 1/2 [CE(Q1, softmax(z2 C^T / tau)) + CE(Q2, softmax(z1 C^T / tau))] with
/// Q = sinkhorn(z C^T) treated as constants. Targets may be supplied to
/// evaluate the loss with frozen assignments.
template <typename S>
SwappedPredictionLoss<S> swapped_prediction_loss(const RowMatrix<S>& z1, const RowMatrix<S>& z2,
                                                 const PrototypeBank<S>& bank, const SwappedPredictionParams& params,
                                                 const AssignmentMatrix<S>* targets1 = nullptr,
                                                 const AssignmentMatrix<S>* targets2 = nullptr);

// ---------------------------------------------------------------------------
// Contrastive

template <typename S>
struct InfoNceLoss {
  S value = S(0);
  RowMatrix<S> grad_z1;
  RowMatrix<S> grad_z2;
};

/// Symmetric InfoNCE over paired rows of z1 and z2 with in-batch negatives.
template <typename S>
InfoNceLoss<S> info_nce(const RowMatrix<S>& z1, const RowMatrix<S>& z2, S temperature);

/// Row-wise softmax with max subtraction.
template <typename S>
RowMatrix<S> row_softmax(const RowMatrix<S>& logits);

}  // namespace trav
