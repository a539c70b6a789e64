#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "emmkgr/types.hpp"

namespace emmkgr {

// ------------------------------------------------------------------ features

/// One modality's feature rows, aligned to an ID map.
struct FeatureSlice {
  std::vector<std::string> item_ids;
  MatF matrix;
};

/// Reads an EMFM feature-matrix file (magic, u32 version, u64 rows, u64 cols,
/// row-major f32 payload, all little-endian).
MatF read_feature_matrix(const std::string& path);
void write_feature_matrix(const MatF& matrix, const std::string& path);
std::string encode_feature_matrix(const MatF& matrix);
MatF decode_feature_matrix(const std::string& bytes);

/// One identifier per line; duplicates raise kDuplicateId.
std::vector<std::string> read_id_map(const std::string& path);
void write_id_map(const std::vector<std::string>& ids, const std::string& path);

FeatureSlice load_features(const std::string& path, const std::string& id_map_path);

/// Per-modality feature matrices over a shared item catalog.
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::vector<std::string> item_ids);

  void add_modality(const std::string& type, MatF matrix);

  Index num_items() const { return static_cast<Index>(item_ids_.size()); }
  Index num_modalities() const { return static_cast<Index>(types_.size()); }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::vector<std::string>& modality_types() const { return types_; }
  const MatF& features(Index k) const { return matrices_.at(static_cast<std::size_t>(k)); }
  MatF& mutable_features(Index k) { return matrices_.at(static_cast<std::size_t>(k)); }
  Index dim(Index k) const { return features(k).cols(); }

  /// -1 when the type is unknown.
  Index modality_index(const std::string& type) const;
  /// -1 when the item is not in the catalog.
  Index item_index(const std::string& id) const;

 private:
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, Index> item_lookup_;
  std::vector<std::string> types_;
  std::vector<MatF> matrices_;
};

// -------------------------------------------------------------- interactions

enum class Split : std::uint8_t { kTrain = 0, kValidation = 1, kTest = 2, kUnassigned = 3 };

struct Interaction {
  Index user = 0;
  Index item = 0;
};

struct InteractionData {
  std::vector<std::string> user_ids;
  Index num_items = 0;
  std::vector<Interaction> pairs;
  std::vector<Split> split;  // parallel to pairs; kUnassigned before splitting

  Index num_users() const { return static_cast<Index>(user_ids.size()); }

  /// Sorted item lists per user for one split label.
  std::vector<std::vector<Index>> items_by_user(Split which) const;
};

struct InteractionLoadReport {
  std::size_t lines = 0;
  std::size_t duplicates = 0;
};

/// TSV "user_id<TAB>item_id[<TAB>timestamp]"; items resolved against the catalog.
InteractionData load_interactions(const std::string& path, const FeatureStore& catalog,
                                  InteractionLoadReport* report = nullptr);
void write_interactions(const InteractionData& data, const std::vector<std::string>& item_ids,
                        const std::string& path);

/// Per-user seeded shuffle; first ceil(0.8k) train, next floor(0.1k) validation,
/// remainder test.
InteractionData split_interactions(const InteractionData& data, std::uint64_t seed);

struct SplitSizes {
  Index train = 0;
  Index validation = 0;
  Index test = 0;
};
SplitSizes split_sizes(Index k);

// ------------------------------------------------------------------- dataset

/// Directory layout: items.txt, modalities.txt ("type<TAB>file" per line, in
/// modality order), one EMFM file per modality, interactions.tsv.
struct Dataset {
  FeatureStore store;
  InteractionData interactions;
  InteractionLoadReport report;
};

Dataset load_dataset(const std::string& dir);
void write_dataset(const Dataset& dataset, const std::string& dir);

// ----------------------------------------------------------------- synthetic

struct SyntheticSpec {
  Index num_items = 300;
  Index num_users = 200;
  std::vector<Index> modality_dims = {16, 16};
  Index num_clusters = 10;
  Index interactions_per_user = 20;
  double preference = 0.9;  // probability an interaction hits a preferred cluster
  double noise = 0.1;
  std::uint64_t seed = 42;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<Index> item_cluster;                   // planted label per item
  std::vector<MatF> centroids;                       // per modality: C x d_k, unit rows
  std::vector<std::vector<Index>> user_clusters;     // preferred clusters per user
};

/// Planted-cluster features and cluster-preferring users, fully seed-determined.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Type tags used by the generator: image, description, review, caption, m4, ...
std::string synthetic_modality_name(Index k);

}  // namespace emmkgr
