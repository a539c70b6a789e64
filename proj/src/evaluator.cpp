#include "emmkgr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "emmkgr/error.hpp"
#include "emmkgr/rng.hpp"

namespace emmkgr {

namespace {

std::unordered_set<Index> as_set(std::span<const Index> values) {
  return {values.begin(), values.end()};
}

Index cutoff(std::span<const Index> ranked, Index k) {
  return std::min<Index>(k, static_cast<Index>(ranked.size()));
}

}  // namespace

double recall_at_k(std::span<const Index> ranked, std::span<const Index> relevant, Index k) {
  const auto rel = as_set(relevant);
  if (rel.empty()) throw Error(ErrorKind::kInvalidArgument, "recall_at_k: empty relevant set");
  Index hits = 0;
  for (Index r = 0; r < cutoff(ranked, k); ++r) hits += rel.count(ranked[static_cast<std::size_t>(r)]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rel.size());
}

double ndcg_at_k(std::span<const Index> ranked, std::span<const Index> relevant, Index k) {
  const auto rel = as_set(relevant);
  if (rel.empty()) throw Error(ErrorKind::kInvalidArgument, "ndcg_at_k: empty relevant set");
  double dcg = 0.0;
  for (Index r = 0; r < cutoff(ranked, k); ++r) {
    if (rel.count(ranked[static_cast<std::size_t>(r)])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  double ideal = 0.0;
  const Index ideal_hits = std::min<Index>(k, static_cast<Index>(rel.size()));
  for (Index r = 0; r < ideal_hits; ++r) ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return ideal > 0.0 ? dcg / ideal : 0.0;
}

double average_precision_at_k(std::span<const Index> ranked, std::span<const Index> relevant, Index k) {
  const auto rel = as_set(relevant);
  if (rel.empty()) throw Error(ErrorKind::kInvalidArgument, "average_precision_at_k: empty relevant set");
  double sum = 0.0;
  Index hits = 0;
  for (Index r = 0; r < cutoff(ranked, k); ++r) {
    if (rel.count(ranked[static_cast<std::size_t>(r)])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  const Index norm = std::min<Index>(static_cast<Index>(rel.size()), k);
  return norm > 0 ? sum / static_cast<double>(norm) : 0.0;
}

const CutoffMetrics& MetricReport::at(Index k) const {
  for (const auto& m : mean) {
    if (m.k == k) return m;
  }
  throw Error(ErrorKind::kInvalidArgument, "metric report has no cutoff " + std::to_string(k));
}

nlohmann::ordered_json MetricReport::to_json(bool include_per_entity) const {
  nlohmann::ordered_json j;
  if (!label.empty()) j["label"] = label;
  j["evaluated"] = per_entity.size();
  j["skipped"] = skipped;
  for (const auto& m : mean) {
    const std::string k = std::to_string(m.k);
    j["recall@" + k] = m.recall;
    j["ndcg@" + k] = m.ndcg;
    j["map@" + k] = m.map;
  }
  if (include_per_entity) {
    auto& rows = j["per_entity"];
    rows = nlohmann::ordered_json::array();
    for (std::size_t e = 0; e < per_entity.size(); ++e) {
      nlohmann::ordered_json row;
      row["id"] = e < entity_ids.size() ? entity_ids[e] : std::to_string(e);
      for (const auto& m : per_entity[e]) {
        const std::string k = std::to_string(m.k);
        row["recall@" + k] = m.recall;
        row["ndcg@" + k] = m.ndcg;
        row["map@" + k] = m.map;
      }
      rows.push_back(std::move(row));
    }
  }
  return j;
}

std::string MetricReport::table() const {
  std::ostringstream out;
  if (!label.empty()) out << label << "\n";
  out << std::left << std::setw(8) << "K" << std::setw(12) << "Recall" << std::setw(12) << "NDCG"
      << std::setw(12) << "MAP" << "\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& m : mean) {
    out << std::left << std::setw(8) << m.k << std::setw(12) << m.recall << std::setw(12) << m.ndcg
        << std::setw(12) << m.map << "\n";
  }
  out << "evaluated " << per_entity.size() << ", skipped " << skipped << "\n";
  return out.str();
}

MetricReport evaluate_rankings(const std::vector<std::vector<Index>>& ranked,
                               const std::vector<std::vector<Index>>& relevant, const std::vector<Index>& cutoffs,
                               const std::vector<std::string>& ids, std::string label) {
  if (ranked.size() != relevant.size()) {
    throw Error(ErrorKind::kInvalidArgument, "evaluate_rankings: ranked and relevant lists differ in length");
  }
  MetricReport report;
  report.label = std::move(label);
  report.cutoffs = cutoffs;
  std::vector<CutoffMetrics> sums(cutoffs.size());
  for (std::size_t c = 0; c < cutoffs.size(); ++c) sums[c].k = cutoffs[c];

  for (std::size_t e = 0; e < ranked.size(); ++e) {
    if (relevant[e].empty()) {
      ++report.skipped;
      continue;
    }
    std::vector<CutoffMetrics> row;
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      CutoffMetrics m;
      m.k = cutoffs[c];
      m.recall = recall_at_k(ranked[e], relevant[e], m.k);
      m.ndcg = ndcg_at_k(ranked[e], relevant[e], m.k);
      m.map = average_precision_at_k(ranked[e], relevant[e], m.k);
      sums[c].recall += m.recall;
      sums[c].ndcg += m.ndcg;
      sums[c].map += m.map;
      row.push_back(m);
    }
    report.entity_ids.push_back(e < ids.size() ? ids[e] : std::to_string(e));
    report.per_entity.push_back(std::move(row));
  }
  const double count = static_cast<double>(report.per_entity.size());
  for (auto& s : sums) {
    if (count > 0) {
      s.recall /= count;
      s.ndcg /= count;
      s.map /= count;
    }
  }
  report.mean = std::move(sums);
  return report;
}

// ------------------------------------------------------------------ k-means

namespace {

double squared_distance(const MatD& points, Index i, const MatD& centroids, Index c) {
  double s = 0.0;
  for (Index q = 0; q < points.cols(); ++q) {
    const double diff = points(i, q) - centroids(c, q);
    s += diff * diff;
  }
  return s;
}

Index nearest(const MatD& points, Index i, const MatD& centroids, double* best_out) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(points, i, centroids, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best_out) *best_out = best_d;
  return best;
}

}  // namespace

KMeansResult kmeans(const MatF& embeddings, Index k, std::uint64_t seed) {
  const Index n = embeddings.rows();
  if (k <= 0) throw Error(ErrorKind::kInvalidArgument, "kmeans: K must be positive");
  if (k > n) {
    throw Error(ErrorKind::kInvalidArgument, "kmeans: K=" + std::to_string(k) + " exceeds N=" + std::to_string(n));
  }
  const MatD points = embeddings.cast<double>();
  Rng rng = Rng::stream(seed, "kmeans");

  // k-means++ seeding
  MatD centroids(k, points.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::vector<double> dist2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Index first = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
  centroids.row(0) = points.row(first);
  chosen[static_cast<std::size_t>(first)] = true;
  for (Index c = 1; c < k; ++c) {
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      dist2[static_cast<std::size_t>(i)] =
          std::min(dist2[static_cast<std::size_t>(i)], squared_distance(points, i, centroids, c - 1));
      total += chosen[static_cast<std::size_t>(i)] ? 0.0 : dist2[static_cast<std::size_t>(i)];
    }
    Index pick = -1;
    if (total > 0.0) {
      double target = rng.uniform01() * total;
      for (Index i = 0; i < n; ++i) {
        if (chosen[static_cast<std::size_t>(i)]) continue;
        target -= dist2[static_cast<std::size_t>(i)];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Index i = n - 1; i >= 0; --i) {
          if (!chosen[static_cast<std::size_t>(i)] && dist2[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    }
    if (pick < 0) {
      // All remaining points coincide with a centroid.
      for (Index i = 0; i < n && pick < 0; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) pick = i;
      }
    }
    centroids.row(c) = points.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
  }

  KMeansResult result;
  result.assignments.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> point_d2(static_cast<std::size_t>(n));
  constexpr Index kMaxIterations = 300;
  constexpr double kTolerance = 1e-6;
  for (Index iter = 0; iter < kMaxIterations; ++iter) {
    for (Index i = 0; i < n; ++i) {
      result.assignments[static_cast<std::size_t>(i)] = nearest(points, i, centroids, &point_d2[static_cast<std::size_t>(i)]);
    }
    MatD updated = MatD::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      const Index c = result.assignments[static_cast<std::size_t>(i)];
      updated.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    std::vector<bool> reseeded(static_cast<std::size_t>(n), false);
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        updated.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      Index far = -1;
      for (Index i = 0; i < n; ++i) {
        if (reseeded[static_cast<std::size_t>(i)]) continue;
        if (far < 0 || point_d2[static_cast<std::size_t>(i)] > point_d2[static_cast<std::size_t>(far)]) far = i;
      }
      updated.row(c) = points.row(far);
      reseeded[static_cast<std::size_t>(far)] = true;
    }
    double shift = 0.0;
    for (Index c = 0; c < k; ++c) shift = std::max(shift, (updated.row(c) - centroids.row(c)).norm());
    centroids = std::move(updated);
    result.iterations = iter + 1;
    if (shift < kTolerance) break;
  }
  result.inertia = 0.0;
  for (Index i = 0; i < n; ++i) {
    double d2 = 0.0;
    result.assignments[static_cast<std::size_t>(i)] = nearest(points, i, centroids, &d2);
    result.inertia += d2;
  }
  result.centroids = std::move(centroids);
  return result;
}

// ----------------------------------------------------------------- cohesion

CohesionReport cohesion(const std::map<std::string, MatF>& embeddings_by_source,
                        const std::vector<Index>& assignments) {
  CohesionReport report;
  report.assignments = assignments;
  Index clusters = 0;
  for (Index a : assignments) {
    if (a < 0) throw Error(ErrorKind::kInvalidArgument, "cohesion: negative cluster label");
    clusters = std::max(clusters, a + 1);
  }
  report.clusters = clusters;
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(clusters), 0);
  for (Index a : assignments) ++sizes[static_cast<std::size_t>(a)];
  std::int64_t total_pairs = 0;
  std::int64_t intra_pairs = 0;
  const auto n = static_cast<std::int64_t>(assignments.size());
  total_pairs = n * (n - 1) / 2;
  for (auto s : sizes) intra_pairs += s * (s - 1) / 2;
  const std::int64_t inter_pairs = total_pairs - intra_pairs;

  for (const auto& [name, matrix] : embeddings_by_source) {
    if (matrix.rows() != n) {
      throw Error(ErrorKind::kInvalidArgument, "cohesion: source '" + name + "' does not cover every assignment");
    }
    // sum_{i<j} cos(x_i, x_j) = (|sum_i u_i|^2 - sum_i |u_i|^2) / 2 over unit rows u_i.
    MatD cluster_sum = MatD::Zero(clusters, matrix.cols());
    VecD cluster_self = VecD::Zero(clusters);
    for (Index i = 0; i < n; ++i) {
      const VecD row = matrix.row(i).cast<double>().transpose();
      const double norm = row.norm();
      if (norm == 0.0) continue;
      const Index c = assignments[static_cast<std::size_t>(i)];
      cluster_sum.row(c) += (row / norm).transpose();
      cluster_self(c) += 1.0;
    }
    double intra_sum = 0.0;
    for (Index c = 0; c < clusters; ++c) intra_sum += 0.5 * (cluster_sum.row(c).squaredNorm() - cluster_self(c));
    const VecD all = cluster_sum.colwise().sum().transpose();
    const double total_sum = 0.5 * (all.squaredNorm() - cluster_self.sum());

    CohesionEntry entry;
    entry.intra_pairs = intra_pairs;
    entry.inter_pairs = inter_pairs;
    if (intra_pairs > 0) entry.intra = intra_sum / static_cast<double>(intra_pairs);
    if (inter_pairs > 0) entry.inter = (total_sum - intra_sum) / static_cast<double>(inter_pairs);
    if (entry.intra && entry.inter) entry.gap = *entry.intra - *entry.inter;
    report.sources[name] = entry;
  }
  return report;
}

nlohmann::ordered_json CohesionReport::to_json() const {
  nlohmann::ordered_json j;
  j["clusters"] = clusters;
  auto& src = j["sources"];
  src = nlohmann::ordered_json::object();
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  for (const auto& [name, e] : sources) {
    src[name] = {{"intra", opt(e.intra)},
                 {"inter", opt(e.inter)},
                 {"gap", opt(e.gap)},
                 {"intra_pairs", e.intra_pairs},
                 {"inter_pairs", e.inter_pairs}};
  }
  return j;
}

}  // namespace emmkgr
