#include "emmkgr/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "emmkgr/binary_io.hpp"
#include "emmkgr/error.hpp"
#include "emmkgr/rng.hpp"

namespace emmkgr {

std::vector<Query> read_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open query file " + path);
  std::vector<Query> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Query q;
      q.id = j.at("query_id").get<std::string>();
      q.modality = j.at("modality").get<std::string>();
      const auto values = j.at("vector").get<std::vector<float>>();
      q.vector = Eigen::Map<const VecF>(values.data(), static_cast<Index>(values.size()));
      q.relevant_items = j.at("relevant_items").get<std::vector<std::string>>();
      out.push_back(std::move(q));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_queries(const std::vector<Query>& queries, const std::string& path) {
  std::string out;
  for (const auto& q : queries) {
    nlohmann::ordered_json j;
    j["query_id"] = q.id;
    j["modality"] = q.modality;
    j["vector"] = std::vector<float>(q.vector.data(), q.vector.data() + q.vector.size());
    j["relevant_items"] = q.relevant_items;
    out += j.dump() + "\n";
  }
  io::write_file_atomic(path, out);
}

std::vector<Index> resolve_query(const Query& query, const FeatureStore& store) {
  const Index k = store.modality_index(query.modality);
  if (k < 0) {
    throw Error(ErrorKind::kInvalidArgument, "query '" + query.id + "': unknown modality '" + query.modality + "'");
  }
  if (query.vector.size() != store.dim(k)) {
    throw Error(ErrorKind::kInvalidArgument, "query '" + query.id + "': vector has dimension " +
                                                 std::to_string(query.vector.size()) + ", modality '" +
                                                 query.modality + "' has " + std::to_string(store.dim(k)));
  }
  std::vector<Index> relevant;
  for (const auto& id : query.relevant_items) {
    const Index item = store.item_index(id);
    if (item < 0) {
      throw Error(ErrorKind::kCatalogMismatch, "query '" + query.id + "': relevant item '" + id + "' not in catalog");
    }
    relevant.push_back(item);
  }
  return relevant;
}

VecF encode_query(const Query& query, const FeatureStore& store, const ParamSet<float>& params) {
  resolve_query(query, store);
  const Index k = store.modality_index(query.modality);
  const MatF raw = query.vector.transpose();
  return project_rows(raw, k, params).row(0).transpose();
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

SearchResult select_top(const std::vector<double>& sims, Index n_out) {
  SearchResult out;
  const auto n = static_cast<Index>(sims.size());
  if (n_out > n) {
    out.clamped = true;
    n_out = n;
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::partial_sort(order.begin(), order.begin() + n_out, order.end(), [&sims](Index a, Index b) {
    const double sa = sims[static_cast<std::size_t>(a)];
    const double sb = sims[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(n_out));
  for (Index i : order) out.similarities.push_back(sims[static_cast<std::size_t>(i)]);
  out.items = std::move(order);
  return out;
}

std::span<const float> row_of(const MatF& m, Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

SearchResult search_topn(std::span<const float> query, const MatF& items, Index n_out) {
  if (static_cast<Index>(query.size()) != items.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "search_topn: query dimension does not match item embeddings");
  }
  std::vector<double> sims(static_cast<std::size_t>(items.rows()));
  for (Index i = 0; i < items.rows(); ++i) sims[static_cast<std::size_t>(i)] = cosine(query, row_of(items, i));
  return select_top(sims, n_out);
}

SearchResult search_baseline(std::span<const float> raw_query, const FeatureStore& store, Index n_out) {
  std::vector<double> sims(static_cast<std::size_t>(store.num_items()), -2.0);
  bool any = false;
  for (Index k = 0; k < store.num_modalities(); ++k) {
    if (store.dim(k) != static_cast<Index>(raw_query.size())) continue;
    any = true;
    const MatF& m = store.features(k);
    for (Index i = 0; i < m.rows(); ++i) {
      sims[static_cast<std::size_t>(i)] = std::max(sims[static_cast<std::size_t>(i)], cosine(raw_query, row_of(m, i)));
    }
  }
  if (!any) throw Error(ErrorKind::kInvalidArgument, "search_baseline: no modality matches the query dimension");
  return select_top(sims, n_out);
}

void write_search_results(const std::vector<Query>& queries, const std::vector<SearchResult>& results,
                          const std::vector<std::string>& item_ids, const std::string& path) {
  std::string out;
  char buf[64];
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t r = 0; r < results[q].items.size(); ++r) {
      std::snprintf(buf, sizeof(buf), "%.9g", results[q].similarities[r]);
      out += queries[q].id + "\t" + std::to_string(r + 1) + "\t" +
             item_ids[static_cast<std::size_t>(results[q].items[r])] + "\t" + buf + "\n";
    }
  }
  io::write_file_atomic(path, out);
}

MetricReport evaluate_search(const std::vector<Query>& queries, const std::vector<SearchResult>& results,
                             const FeatureStore& store, const std::vector<Index>& cutoffs, std::string label) {
  std::vector<std::vector<Index>> ranked, relevant;
  std::vector<std::string> ids;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    ranked.push_back(results[q].items);
    relevant.push_back(resolve_query(queries[q], store));
    ids.push_back(queries[q].id);
  }
  return evaluate_rankings(ranked, relevant, cutoffs, ids, std::move(label));
}

std::vector<Query> generate_synthetic_queries(const SyntheticData& data, Index fine, Index coarse, double noise,
                                              std::uint64_t seed) {
  const FeatureStore& store = data.dataset.store;
  Rng rng = Rng::stream(seed, "synth.queries");
  std::vector<Query> out;
  const auto num_modalities = static_cast<std::uint64_t>(store.num_modalities());
  for (Index q = 0; q < fine; ++q) {
    const Index item = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(store.num_items())));
    const Index k = static_cast<Index>(rng.uniform_index(num_modalities));
    Query query;
    query.id = "fine" + std::to_string(q);
    query.modality = store.modality_types()[static_cast<std::size_t>(k)];
    query.vector = store.features(k).row(item).transpose();
    for (Index c = 0; c < query.vector.size(); ++c) query.vector(c) += static_cast<float>(noise * rng.normal());
    query.relevant_items = {store.item_ids()[static_cast<std::size_t>(item)]};
    out.push_back(std::move(query));
  }
  const Index clusters = data.centroids.empty() ? 0 : data.centroids.front().rows();
  for (Index q = 0; q < coarse && clusters > 0; ++q) {
    const Index cluster = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(clusters)));
    const Index k = static_cast<Index>(rng.uniform_index(num_modalities));
    Query query;
    query.id = "coarse" + std::to_string(q);
    query.modality = store.modality_types()[static_cast<std::size_t>(k)];
    query.vector = data.centroids[static_cast<std::size_t>(k)].row(cluster).transpose();
    for (Index c = 0; c < query.vector.size(); ++c) query.vector(c) += static_cast<float>(noise * rng.normal());
    for (Index j = 0; j < store.num_items(); ++j) {
      if (data.item_cluster[static_cast<std::size_t>(j)] == cluster) {
        query.relevant_items.push_back(store.item_ids()[static_cast<std::size_t>(j)]);
      }
    }
    out.push_back(std::move(query));
  }
  return out;
}

}  // namespace emmkgr
