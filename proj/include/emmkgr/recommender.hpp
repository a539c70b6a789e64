#pragma once

#include <span>
#include <string>
#include <vector>

#include "emmkgr/datastore.hpp"
#include "emmkgr/evaluator.hpp"
#include "emmkgr/types.hpp"

namespace emmkgr {

/// Propagated embeddings served from a parameter snapshot.
struct EmbeddingSnapshot {
  MatF user;              // U x d, interaction graph
  MatF item_interaction;  // N x d, interaction graph
  MatF item_multimodal;   // N x d, item block of the knowledge-graph propagation; empty when disabled
  MatF node_multimodal;   // every knowledge-graph node, for export

  bool has_multimodal() const { return item_multimodal.size() > 0; }
};

struct RankedList {
  Index user = 0;
  std::vector<Index> items;
  std::vector<double> scores;
  bool truncated = false;  // K exceeded the unmasked item count
};

/// H_item = H_item^IN + H_item^MM.
template <typename Scalar>
Mat<Scalar> fuse_items(const Mat<Scalar>& interaction_items, const Mat<Scalar>& multimodal_items);

/// Top-K of `scores` by (score desc, index asc), skipping the sorted `masked` indices.
RankedList top_k(std::span<const double> scores, std::span<const Index> masked, Index k);

/// Dot-product scores of one user against every item row, accumulated in double.
std::vector<double> score_items(std::span<const float> user_vec, const MatF& item_vecs);

/// Fused unified-item ranking with the user's train items masked.
RankedList recommend(const EmbeddingSnapshot& snapshot, Index user, Index k, std::span<const Index> train_items);

/// Interaction-only ranking (item embeddings from the interaction graph alone).
RankedList recommend_baseline(const EmbeddingSnapshot& snapshot, Index user, Index k,
                              std::span<const Index> train_items);

/// Ranks every user that has `which`-split pairs and scores against them.
MetricReport evaluate_recommendations(const EmbeddingSnapshot& snapshot, const InteractionData& data, Split which,
                                      const std::vector<Index>& cutoffs, bool baseline = false,
                                      std::vector<RankedList>* lists = nullptr);

/// TSV "user_id<TAB>rank<TAB>item_id<TAB>score", rank starting at 1.
void write_ranked_lists(const std::vector<RankedList>& lists, const std::vector<std::string>& user_ids,
                        const std::vector<std::string>& item_ids, const std::string& path);

}  // namespace emmkgr
