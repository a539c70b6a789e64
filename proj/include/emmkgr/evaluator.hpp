#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "emmkgr/types.hpp"

namespace emmkgr {

// Binary relevance throughout. `relevant` lists must be non-empty; the
// aggregate report skips and counts empty ones.

/// |top-K ∩ relevant| / |relevant|.
double recall_at_k(std::span<const Index> ranked, std::span<const Index> relevant, Index k);

/// DCG with gain 1/log2(rank+1) over the top K, divided by the ideal DCG.
double ndcg_at_k(std::span<const Index> ranked, std::span<const Index> relevant, Index k);

/// Average precision truncated at K, normalized by min(|relevant|, K).
double average_precision_at_k(std::span<const Index> ranked, std::span<const Index> relevant, Index k);

struct CutoffMetrics {
  Index k = 0;
  double recall = 0.0;
  double ndcg = 0.0;
  double map = 0.0;
};

struct MetricReport {
  std::string label;
  std::vector<Index> cutoffs;
  std::vector<CutoffMetrics> mean;                // one per cutoff
  std::vector<std::string> entity_ids;            // evaluated users / queries
  std::vector<std::vector<CutoffMetrics>> per_entity;
  Index skipped = 0;

  const CutoffMetrics& at(Index k) const;
  nlohmann::ordered_json to_json(bool include_per_entity = false) const;
  std::string table() const;
};

/// Metrics for every (ranked, relevant) pair; ids label the per-entity rows.
MetricReport evaluate_rankings(const std::vector<std::vector<Index>>& ranked,
                               const std::vector<std::vector<Index>>& relevant, const std::vector<Index>& cutoffs,
                               const std::vector<std::string>& ids = {}, std::string label = {});

// ------------------------------------------------------------------ k-means

struct KMeansResult {
  std::vector<Index> assignments;
  MatD centroids;
  double inertia = 0.0;
  Index iterations = 0;
};

/// k-means++ seeding then Lloyd iterations until the largest centroid shift
/// drops below 1e-6 or 300 iterations; an empty cluster is re-seeded with the
/// point farthest from its centroid. Throws kInvalidArgument when K > N.
KMeansResult kmeans(const MatF& embeddings, Index k, std::uint64_t seed);

// ----------------------------------------------------------------- cohesion

struct CohesionEntry {
  std::optional<double> intra;  // missing when no cluster has two members
  std::optional<double> inter;  // missing with a single cluster
  std::optional<double> gap;
  std::int64_t intra_pairs = 0;
  std::int64_t inter_pairs = 0;
};

struct CohesionReport {
  Index clusters = 0;
  std::vector<Index> assignments;
  std::map<std::string, CohesionEntry> sources;

  nlohmann::ordered_json to_json() const;
};

/// Mean pairwise cosine within and across clusters for each embedding source.
/// Pair means are exact: sums over unit vectors reduce to per-cluster vector
/// sums, so no pair sampling is needed at any N.
CohesionReport cohesion(const std::map<std::string, MatF>& embeddings_by_source,
                        const std::vector<Index>& assignments);

}  // namespace emmkgr
