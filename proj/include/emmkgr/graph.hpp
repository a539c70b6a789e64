#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emmkgr/datastore.hpp"
#include "emmkgr/hash.hpp"
#include "emmkgr/knn.hpp"
#include "emmkgr/types.hpp"

namespace emmkgr {

enum class GraphVariant { kOriginal, kInteraction, kInterModal, kItemItem };

/// Accepts "original", "interaction", "inter_modal", "item_item".
GraphVariant parse_variant(std::string_view tag);
std::string to_string(GraphVariant variant);

/// (head node, relation id, tail node).
struct Triple {
  Index head = 0;
  Index relation = 0;
  Index tail = 0;
};

struct EdgeCounts {
  Index item_modal = 0;
  Index modal_modal = 0;
  Index inter_modal = 0;
  Index user_item = 0;
  Index item_item = 0;

  Index total() const { return item_modal + modal_modal + inter_modal + user_item + item_item; }
};

/// The multimodal knowledge graph over items and per-item modality instances.
///
/// Node layout: item j -> j; modality k of item j -> (k+1)N + j; in the
/// interaction variant, user u -> (1+T)N + u. The item_item variant has only
/// the N item nodes. Relation 2k is "<type_k>_of" (modality -> item) and
/// relation 2k+1 is "similar_<type_k>".
struct MMGraph {
  GraphVariant variant = GraphVariant::kOriginal;
  Index num_items = 0;
  Index num_modalities = 0;
  Index num_users = 0;  // user nodes present in the graph
  Index knn = 0;
  std::vector<std::string> modality_types;
  std::vector<std::string> relation_names;
  std::vector<Triple> triples;
  EdgeCounts edges;
  Csr<double> adjacency;              // binary, symmetric, zero diagonal
  std::vector<Csr<double>> item_layers;  // item_item only: per-modality item kNN graphs

  Index num_nodes() const { return adjacency.rows(); }
  Index num_modality_nodes() const {
    return variant == GraphVariant::kItemItem ? 0 : num_items * num_modalities;
  }
  Index modality_node(Index k, Index item) const { return (k + 1) * num_items + item; }
  Index user_node(Index user) const { return (1 + num_modalities) * num_items + user; }

  /// Node range [first, second) that legal tails of `relation` come from.
  std::pair<Index, Index> tail_block(Index relation) const;
  Index relation_edge_count(Index relation) const;
};

MMGraph assemble_mmkg(const FeatureStore& store, const std::vector<NeighborList>& neighbors);

/// Ablation graphs. `interactions` must be split; only train pairs are used.
MMGraph assemble_variant(const FeatureStore& store, const std::vector<NeighborList>& neighbors,
                         const InteractionData& interactions, GraphVariant variant);

/// assemble_mmkg for kOriginal, assemble_variant otherwise.
MMGraph assemble_graph(const FeatureStore& store, const std::vector<NeighborList>& neighbors,
                       const InteractionData& interactions, GraphVariant variant);

struct NormalizedOperator {
  Csr<double> matrix;
  VecD degree;

  Index rows() const { return matrix.rows(); }
  template <typename Scalar>
  Csr<Scalar> as() const { return matrix.cast<Scalar>(); }
};

/// D^{-1/2} A D^{-1/2}; zero-degree rows and columns stay zero. Throws
/// kContractViolation for asymmetric input or a non-zero diagonal.
NormalizedOperator normalize(const Csr<double>& adjacency);

/// Propagation operator for a graph: normalize(adjacency), or for item_item
/// the unweighted mean of the per-modality normalized item graphs.
NormalizedOperator graph_operator(const MMGraph& graph);

/// Bipartite user-item graph from train pairs; users 0..U-1, items U..U+N-1.
struct InteractionGraph {
  Index num_users = 0;
  Index num_items = 0;
  Csr<double> adjacency;
};

InteractionGraph assemble_interaction_graph(const InteractionData& data);

/// Builds a symmetric binary matrix from undirected (a, b) pairs, a != b.
Csr<double> undirected_adjacency(Index nodes, std::vector<std::pair<Index, Index>> edges);

// --------------------------------------------------------------- fingerprint

struct GraphFingerprint {
  std::map<std::string, std::string> fields;  // rendered key/value lines
  Digest hash{};

  std::string render() const;
};

GraphFingerprint fingerprint(const MMGraph& graph, const std::vector<NeighborList>& neighbors);
GraphFingerprint parse_fingerprint(const std::string& text);
void write_fingerprint(const GraphFingerprint& fp, const std::string& path);
GraphFingerprint read_fingerprint(const std::string& path);

}  // namespace emmkgr
