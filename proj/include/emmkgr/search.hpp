#pragma once

#include <span>
#include <string>
#include <vector>

#include "emmkgr/datastore.hpp"
#include "emmkgr/evaluator.hpp"
#include "emmkgr/model.hpp"
#include "emmkgr/types.hpp"

namespace emmkgr {

/// A precomputed query vector from one modality's encoder.
struct Query {
  std::string id;
  std::string modality;
  VecF vector;
  std::vector<std::string> relevant_items;
};

/// JSON lines: {"query_id", "modality", "vector", "relevant_items"}.
std::vector<Query> read_queries(const std::string& path);
void write_queries(const std::vector<Query>& queries, const std::string& path);

/// Checks the modality tag, the vector dimension and the relevant IDs against
/// the catalog; returns catalog indices of the relevant items.
std::vector<Index> resolve_query(const Query& query, const FeatureStore& store);

/// h_q: the query's raw vector through its modality's affine projection.
VecF encode_query(const Query& query, const FeatureStore& store, const ParamSet<float>& params);

struct SearchResult {
  std::vector<Index> items;
  std::vector<double> similarities;
  bool clamped = false;
};

/// Cosine similarity in double; a zero vector scores 0 against everything.
double cosine(std::span<const float> a, std::span<const float> b);

/// Exact cosine top-N over item rows, ties to the smaller index; N_out > N is clamped.
SearchResult search_topn(std::span<const float> query, const MatF& items, Index n_out);

/// Vector-retrieval baseline: per item, the best cosine between the raw query
/// vector and any of the item's raw modality vectors of matching dimension.
SearchResult search_baseline(std::span<const float> raw_query, const FeatureStore& store, Index n_out);

/// TSV "query_id<TAB>rank<TAB>item_id<TAB>similarity".
void write_search_results(const std::vector<Query>& queries, const std::vector<SearchResult>& results,
                          const std::vector<std::string>& item_ids, const std::string& path);

MetricReport evaluate_search(const std::vector<Query>& queries, const std::vector<SearchResult>& results,
                             const FeatureStore& store, const std::vector<Index>& cutoffs, std::string label);

/// Fine-grained queries (one item's modality vector plus noise, that item
/// relevant) and coarse-grained queries (a cluster centroid plus noise, the
/// whole cluster relevant) for a synthetic catalog.
std::vector<Query> generate_synthetic_queries(const SyntheticData& data, Index fine, Index coarse, double noise,
                                              std::uint64_t seed);

}  // namespace emmkgr
