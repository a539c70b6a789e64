#pragma once

#include <optional>
#include <span>
#include <vector>

#include "emmkgr/graph.hpp"
#include "emmkgr/rng.hpp"
#include "emmkgr/types.hpp"

namespace emmkgr {

/// log(1 + e^x) without overflow.
double softplus(double x);
/// log sigma(x) = -softplus(-x).
double log_sigmoid(double x);
double sigmoid(double x);

/// Rotation distance ||h o r - t||^2 with h, t read as d/2 complex pairs
/// (x[2k], x[2k+1]) and r_k = exp(i phase_k).
template <typename Scalar>
Scalar rotate_score(std::span<const Scalar> head, std::span<const Scalar> phases, std::span<const Scalar> tail);

/// out = h o r.
template <typename Scalar>
void rotate(std::span<const Scalar> head, std::span<const Scalar> phases, std::span<Scalar> out);

struct KgSample {
  Triple positive;
  Index negative_tail = 0;
};

struct BprTriple {
  Index user = 0;
  Index positive = 0;
  Index negative = 0;
};

/// Sum over the batch of log sigma(f(h,r,t) - f(h,r,t')), times `scale`.
/// Minimizing it drives positive distances below negative ones. When the
/// gradient outputs are non-null, d(loss) is accumulated into them
/// (node_grad matches node_embeddings, phase_grad matches phases).
template <typename Scalar>
Scalar kg_loss(std::span<const KgSample> batch, const Mat<Scalar>& node_embeddings, const Mat<Scalar>& phases,
               Mat<Scalar>* node_grad, Mat<Scalar>* phase_grad, Scalar scale = Scalar(1));

/// -sum log sigma(u.i - u.j) over the batch, times `scale`, with gradients
/// accumulated into user_grad / item_grad when non-null.
template <typename Scalar>
Scalar bpr_loss(std::span<const BprTriple> batch, const Mat<Scalar>& user_vecs, const Mat<Scalar>& item_vecs,
                Mat<Scalar>* user_grad, Mat<Scalar>* item_grad, Scalar scale = Scalar(1));

/// Uniform tails from the relation's tail block, never the positive tail.
std::vector<Index> sample_kg_negatives(const MMGraph& graph, const Triple& positive, Index count, Rng& rng);

/// Uniform negatives over items a user has no train interaction with.
class BprNegativeSampler {
 public:
  BprNegativeSampler(const std::vector<std::vector<Index>>& train_items_by_user, Index num_items);

  /// std::nullopt is the skip-user signal: the user interacted with every item.
  std::optional<std::vector<Index>> sample(Index user, Index count, Rng& rng) const;

 private:
  bool interacted(Index user, Index item) const;

  Index num_items_;
  std::vector<std::vector<Index>> positives_;   // sorted
  std::vector<std::vector<Index>> complement_;  // only for users with more than half the catalog
};

}  // namespace emmkgr
