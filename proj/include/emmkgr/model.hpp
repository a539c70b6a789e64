#pragma once

#include <string>
#include <vector>

#include "emmkgr/datastore.hpp"
#include "emmkgr/graph.hpp"
#include "emmkgr/rng.hpp"
#include "emmkgr/types.hpp"

namespace emmkgr {

struct ModelShape {
  Index num_items = 0;
  Index num_users = 0;
  Index dim = 64;
  std::vector<std::string> modality_types;
  std::vector<Index> modality_dims;
  bool separate_item_tables = false;

  Index num_modalities() const { return static_cast<Index>(modality_dims.size()); }
};

/// Mutable view of one parameter tensor.
template <typename Scalar>
struct ParamGroup {
  std::string name;
  std::string family;  // item_embedding, user_embedding, projection_weight, projection_bias, relation_phase
  Scalar* data = nullptr;
  Index rows = 0;
  Index cols = 0;

  Index size() const { return rows * cols; }
};

/// All learnable tensors.
template <typename Scalar>
struct ParamSet {
  Mat<Scalar> item_embedding;                    // N x d, shared by both graphs
  Mat<Scalar> user_embedding;                    // U x d
  Mat<Scalar> interaction_item_embedding;        // N x d when tables are separate, else empty
  std::vector<Mat<Scalar>> projection_weight;    // per modality d_k x d
  std::vector<Vec<Scalar>> projection_bias;      // per modality d
  Mat<Scalar> relation_phase;                    // 2T x d/2, radians
  std::vector<std::string> modality_types;

  Index dim() const { return item_embedding.cols(); }
  Index num_items() const { return item_embedding.rows(); }
  Index num_users() const { return user_embedding.rows(); }
  Index num_modalities() const { return static_cast<Index>(projection_weight.size()); }
  bool separate_item_tables() const { return interaction_item_embedding.size() > 0; }

  /// Tensor the interaction graph reads for items at layer 0.
  const Mat<Scalar>& interaction_items() const {
    return separate_item_tables() ? interaction_item_embedding : item_embedding;
  }

  /// Fixed order: item, user, [interaction item], weights, biases, phases.
  std::vector<ParamGroup<Scalar>> groups();
  /// Same shapes, all zeros.
  ParamSet zeros_like() const;

  template <typename Other>
  ParamSet<Other> cast() const {
    ParamSet<Other> out;
    out.item_embedding = item_embedding.template cast<Other>();
    out.user_embedding = user_embedding.template cast<Other>();
    out.interaction_item_embedding = interaction_item_embedding.template cast<Other>();
    for (const auto& w : projection_weight) out.projection_weight.push_back(w.template cast<Other>());
    for (const auto& b : projection_bias) out.projection_bias.push_back(b.template cast<Other>());
    out.relation_phase = relation_phase.template cast<Other>();
    out.modality_types = modality_types;
    return out;
  }
};

ModelShape shape_of(const FeatureStore& store, Index num_users, Index dim, bool separate_item_tables);

/// Xavier-uniform tables and weights, zero biases, phases uniform in [0, 2pi).
/// Throws kInvalidArgument for odd or non-positive dim.
template <typename Scalar>
ParamSet<Scalar> init_params(const ModelShape& shape, Rng& rng);

/// Z_k = M_k W_k + 1 b_k^T for every modality.
template <typename Scalar>
std::vector<Mat<Scalar>> project(const std::vector<Mat<Scalar>>& features, const ParamSet<Scalar>& params);

std::vector<MatF> project(const FeatureStore& store, const ParamSet<float>& params);

/// Affine map of raw rows through modality k's projection.
template <typename Scalar>
Mat<Scalar> project_rows(const Mat<Scalar>& raw, Index k, const ParamSet<Scalar>& params);

/// [E_item; Z_0; ...; Z_{T-1}].
template <typename Scalar>
Mat<Scalar> stack_embeddings(const ParamSet<Scalar>& params, const std::vector<Mat<Scalar>>& z);

/// Layer-0 matrix matching `graph`'s node layout: the stacked blocks, plus the
/// user table for the interaction variant; for item_item, E_item + mean_k Z_k.
template <typename Scalar>
Mat<Scalar> layer0_for_graph(const MMGraph& graph, const ParamSet<Scalar>& params,
                             const std::vector<Mat<Scalar>>& z);

/// [E_user; E_item] for the interaction graph.
template <typename Scalar>
Mat<Scalar> layer0_for_interactions(const ParamSet<Scalar>& params);

template <typename Scalar>
struct PropagationResult {
  Mat<Scalar> mean;                 // (1/(L+1)) sum_l H^(l)
  std::vector<Mat<Scalar>> layers;  // H^(0..L) when requested
};

/// Y = A X with one task per output row.
template <typename Scalar>
Mat<Scalar> spmm(const Csr<Scalar>& op, const Mat<Scalar>& x);

/// Layer-mean propagation H = (1/(L+1)) sum_{l=0..L} A^l E0.
template <typename Scalar>
PropagationResult<Scalar> propagate(const Csr<Scalar>& op, const Mat<Scalar>& e0, Index layers,
                                    bool keep_layers = false);

}  // namespace emmkgr
