#include "emmkgr/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "emmkgr/binary_io.hpp"
#include "emmkgr/error.hpp"

namespace emmkgr {

GraphVariant parse_variant(std::string_view tag) {
  if (tag == "original") return GraphVariant::kOriginal;
  if (tag == "interaction") return GraphVariant::kInteraction;
  if (tag == "inter_modal") return GraphVariant::kInterModal;
  if (tag == "item_item") return GraphVariant::kItemItem;
  throw Error(ErrorKind::kInvalidArgument, "unknown graph variant '" + std::string(tag) +
                                               "' (expected original|interaction|inter_modal|item_item)");
}

std::string to_string(GraphVariant variant) {
  switch (variant) {
    case GraphVariant::kOriginal: return "original";
    case GraphVariant::kInteraction: return "interaction";
    case GraphVariant::kInterModal: return "inter_modal";
    case GraphVariant::kItemItem: return "item_item";
  }
  return "original";
}

std::pair<Index, Index> MMGraph::tail_block(Index relation) const {
  const Index k = relation / 2;
  const bool similarity = relation % 2 == 1;
  if (!similarity || variant == GraphVariant::kItemItem) return {0, num_items};
  return {modality_node(k, 0), modality_node(k, 0) + num_items};
}

Index MMGraph::relation_edge_count(Index relation) const {
  return static_cast<Index>(std::count_if(triples.begin(), triples.end(),
                                          [relation](const Triple& t) { return t.relation == relation; }));
}

Csr<double> undirected_adjacency(Index nodes, std::vector<std::pair<Index, Index>> edges) {
  for (auto& e : edges) {
    if (e.first == e.second) throw Error(ErrorKind::kContractViolation, "self loop in undirected edge list");
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<Eigen::Triplet<double, Index>> entries;
  entries.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    entries.emplace_back(a, b, 1.0);
    entries.emplace_back(b, a, 1.0);
  }
  Csr<double> out(nodes, nodes);
  out.setFromTriplets(entries.begin(), entries.end());
  out.makeCompressed();
  return out;
}

namespace {

using EdgeList = std::vector<std::pair<Index, Index>>;

/// Union-symmetrized kNN edges as (min, max) row pairs, sorted and unique.
EdgeList knn_edges(const NeighborList& list) {
  EdgeList edges;
  edges.reserve(static_cast<std::size_t>(list.rows * list.n));
  for (Index j = 0; j < list.rows; ++j) {
    for (Index k : list.neighbors(j)) edges.emplace_back(std::min(j, k), std::max(j, k));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

void check_neighbors(const FeatureStore& store, const std::vector<NeighborList>& neighbors) {
  if (static_cast<Index>(neighbors.size()) != store.num_modalities()) {
    throw Error(ErrorKind::kInvalidArgument, "need one neighbor list per modality type");
  }
  for (const auto& list : neighbors) {
    if (list.rows != store.num_items()) {
      throw Error(ErrorKind::kInvalidArgument, "neighbor list rows do not match the item catalog");
    }
  }
}

MMGraph base_graph(const FeatureStore& store, const std::vector<NeighborList>& neighbors) {
  check_neighbors(store, neighbors);
  MMGraph g;
  g.num_items = store.num_items();
  g.num_modalities = store.num_modalities();
  g.knn = neighbors.empty() ? 0 : neighbors.front().n;
  g.modality_types = store.modality_types();
  for (const auto& type : g.modality_types) {
    g.relation_names.push_back(type + "_of");
    g.relation_names.push_back("similar_" + type);
  }
  return g;
}

}  // namespace

MMGraph assemble_mmkg(const FeatureStore& store, const std::vector<NeighborList>& neighbors) {
  MMGraph g = base_graph(store, neighbors);
  const Index n = g.num_items;
  const Index t = g.num_modalities;

  EdgeList edges;
  for (Index k = 0; k < t; ++k) {
    for (Index j = 0; j < n; ++j) {
      edges.emplace_back(j, g.modality_node(k, j));
      g.triples.push_back({g.modality_node(k, j), 2 * k, j});
    }
  }
  g.edges.item_modal = n * t;

  for (Index k = 0; k < t; ++k) {
    for (const auto& [a, b] : knn_edges(neighbors[static_cast<std::size_t>(k)])) {
      const Index head = g.modality_node(k, a);
      const Index tail = g.modality_node(k, b);
      edges.emplace_back(head, tail);
      g.triples.push_back({head, 2 * k + 1, tail});
      ++g.edges.modal_modal;
    }
  }
  g.adjacency = undirected_adjacency((1 + t) * n, std::move(edges));
  return g;
}

MMGraph assemble_variant(const FeatureStore& store, const std::vector<NeighborList>& neighbors,
                         const InteractionData& interactions, GraphVariant variant) {
  switch (variant) {
    case GraphVariant::kOriginal:
      throw Error(ErrorKind::kInvalidArgument, "assemble_variant expects an ablation variant");

    case GraphVariant::kInterModal: {
      MMGraph g = assemble_mmkg(store, neighbors);
      g.variant = variant;
      EdgeList extra;
      for (Index j = 0; j < g.num_items; ++j) {
        for (Index a = 0; a < g.num_modalities; ++a) {
          for (Index b = a + 1; b < g.num_modalities; ++b) {
            extra.emplace_back(g.modality_node(a, j), g.modality_node(b, j));
          }
        }
      }
      g.edges.inter_modal = static_cast<Index>(extra.size());
      Csr<double> added = undirected_adjacency(g.num_nodes(), std::move(extra));
      g.adjacency = g.adjacency + added;
      g.adjacency.makeCompressed();
      return g;
    }

    case GraphVariant::kInteraction: {
      MMGraph base = assemble_mmkg(store, neighbors);
      MMGraph g = base;
      g.variant = variant;
      if (interactions.num_items != store.num_items()) {
        throw Error(ErrorKind::kInvalidArgument, "interactions do not match the item catalog");
      }
      g.num_users = interactions.num_users();
      EdgeList edges;
      for (Index r = 0; r < base.adjacency.outerSize(); ++r) {
        for (Csr<double>::InnerIterator it(base.adjacency, r); it; ++it) {
          if (it.col() > r) edges.emplace_back(r, it.col());
        }
      }
      for (std::size_t p = 0; p < interactions.pairs.size(); ++p) {
        if (interactions.split.at(p) != Split::kTrain) continue;
        edges.emplace_back(interactions.pairs[p].item, g.user_node(interactions.pairs[p].user));
        ++g.edges.user_item;
      }
      g.adjacency = undirected_adjacency((1 + g.num_modalities) * g.num_items + g.num_users, std::move(edges));
      return g;
    }

    case GraphVariant::kItemItem: {
      MMGraph g = base_graph(store, neighbors);
      g.variant = variant;
      const Index n = g.num_items;
      EdgeList all;
      for (Index k = 0; k < g.num_modalities; ++k) {
        EdgeList edges = knn_edges(neighbors[static_cast<std::size_t>(k)]);
        for (const auto& [a, b] : edges) g.triples.push_back({a, 2 * k + 1, b});
        all.insert(all.end(), edges.begin(), edges.end());
        g.item_layers.push_back(undirected_adjacency(n, std::move(edges)));
      }
      Csr<double> sum(n, n);
      for (const auto& layer : g.item_layers) sum = sum + layer;
      sum.makeCompressed();
      g.adjacency = std::move(sum);
      std::sort(all.begin(), all.end());
      all.erase(std::unique(all.begin(), all.end()), all.end());
      g.edges.item_item = static_cast<Index>(all.size());
      return g;
    }
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown graph variant");
}

MMGraph assemble_graph(const FeatureStore& store, const std::vector<NeighborList>& neighbors,
                       const InteractionData& interactions, GraphVariant variant) {
  if (variant == GraphVariant::kOriginal) return assemble_mmkg(store, neighbors);
  return assemble_variant(store, neighbors, interactions, variant);
}

NormalizedOperator normalize(const Csr<double>& adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    throw Error(ErrorKind::kContractViolation, "normalize: adjacency must be square");
  }
  const Csr<double> transposed = adjacency.transpose();
  const Csr<double> diff = adjacency - transposed;
  for (Index r = 0; r < diff.outerSize(); ++r) {
    for (Csr<double>::InnerIterator it(diff, r); it; ++it) {
      if (it.value() != 0.0) throw Error(ErrorKind::kContractViolation, "normalize: adjacency is not symmetric");
    }
  }
  NormalizedOperator op;
  op.degree = VecD::Zero(adjacency.rows());
  for (Index r = 0; r < adjacency.outerSize(); ++r) {
    for (Csr<double>::InnerIterator it(adjacency, r); it; ++it) {
      if (it.col() == r && it.value() != 0.0) {
        throw Error(ErrorKind::kContractViolation, "normalize: adjacency has a non-zero diagonal");
      }
      op.degree(r) += it.value();
    }
  }
  op.matrix = adjacency;
  for (Index r = 0; r < op.matrix.outerSize(); ++r) {
    for (Csr<double>::InnerIterator it(op.matrix, r); it; ++it) {
      const double dr = op.degree(r);
      const double dc = op.degree(it.col());
      it.valueRef() = (dr > 0.0 && dc > 0.0) ? it.value() / std::sqrt(dr * dc) : 0.0;
    }
  }
  op.matrix.makeCompressed();
  return op;
}

NormalizedOperator graph_operator(const MMGraph& graph) {
  if (graph.variant != GraphVariant::kItemItem) return normalize(graph.adjacency);
  NormalizedOperator op;
  op.matrix = Csr<double>(graph.num_items, graph.num_items);
  for (const auto& layer : graph.item_layers) op.matrix = op.matrix + normalize(layer).matrix;
  if (!graph.item_layers.empty()) op.matrix *= 1.0 / static_cast<double>(graph.item_layers.size());
  op.matrix.makeCompressed();
  op.degree = VecD::Zero(graph.num_items);
  for (Index r = 0; r < graph.adjacency.outerSize(); ++r) {
    for (Csr<double>::InnerIterator it(graph.adjacency, r); it; ++it) op.degree(r) += it.value();
  }
  return op;
}

InteractionGraph assemble_interaction_graph(const InteractionData& data) {
  InteractionGraph g;
  g.num_users = data.num_users();
  g.num_items = data.num_items;
  std::vector<std::pair<Index, Index>> edges;
  for (std::size_t p = 0; p < data.pairs.size(); ++p) {
    if (data.split.at(p) != Split::kTrain) continue;
    edges.emplace_back(data.pairs[p].user, g.num_users + data.pairs[p].item);
  }
  g.adjacency = undirected_adjacency(g.num_users + g.num_items, std::move(edges));
  return g;
}

// --------------------------------------------------------------- fingerprint

namespace {

void hash_csr(Sha256& h, const Csr<double>& m) {
  h.update_u64(static_cast<std::uint64_t>(m.rows()));
  h.update_u64(static_cast<std::uint64_t>(m.cols()));
  for (Index r = 0; r < m.outerSize(); ++r) {
    for (Csr<double>::InnerIterator it(m, r); it; ++it) {
      h.update_u64(static_cast<std::uint64_t>(r));
      h.update_u64(static_cast<std::uint64_t>(it.col()));
      h.update_f64(it.value());
    }
  }
}

}  // namespace

GraphFingerprint fingerprint(const MMGraph& graph, const std::vector<NeighborList>& neighbors) {
  GraphFingerprint fp;
  auto set = [&fp](const std::string& key, auto value) {
    if constexpr (std::is_convertible_v<decltype(value), std::string>) {
      fp.fields[key] = value;
    } else {
      fp.fields[key] = std::to_string(value);
    }
  };
  std::string types;
  for (const auto& t : graph.modality_types) types += (types.empty() ? "" : ",") + t;
  set("variant", to_string(graph.variant));
  set("knn", graph.knn);
  set("items", graph.num_items);
  set("modality_types", graph.num_modalities);
  set("modalities", types);
  set("modality_nodes", graph.num_modality_nodes());
  set("user_nodes", graph.num_users);
  set("nodes", graph.num_nodes());
  set("edges.item_modal", graph.edges.item_modal);
  set("edges.modal_modal", graph.edges.modal_modal);
  set("edges.inter_modal", graph.edges.inter_modal);
  set("edges.user_item", graph.edges.user_item);
  set("edges.item_item", graph.edges.item_item);
  set("edges.total", graph.edges.total());
  for (std::size_t r = 0; r < graph.relation_names.size(); ++r) {
    set("relation." + graph.relation_names[r], graph.relation_edge_count(static_cast<Index>(r)));
  }

  Sha256 h;
  h.update("emmkg-graph-v1");
  for (const auto& [key, value] : fp.fields) {
    h.update(key);
    h.update("=");
    h.update(value);
    h.update("\n");
  }
  hash_csr(h, graph.adjacency);
  for (const auto& layer : graph.item_layers) hash_csr(h, layer);
  for (const auto& t : graph.triples) {
    h.update_u64(static_cast<std::uint64_t>(t.head));
    h.update_u64(static_cast<std::uint64_t>(t.relation));
    h.update_u64(static_cast<std::uint64_t>(t.tail));
  }
  for (const auto& list : neighbors) {
    h.update_u64(static_cast<std::uint64_t>(list.rows));
    h.update_u64(static_cast<std::uint64_t>(list.n));
    for (Index idx : list.indices) h.update_u64(static_cast<std::uint64_t>(idx));
  }
  fp.hash = h.finish();
  return fp;
}

std::string GraphFingerprint::render() const {
  std::string out = "emmkg-fingerprint 1\n";
  for (const auto& [key, value] : fields) out += key + " " + value + "\n";
  out += "hash " + to_hex(hash) + "\n";
  return out;
}

GraphFingerprint parse_fingerprint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "emmkg-fingerprint 1") {
    throw Error(ErrorKind::kFormat, "graph fingerprint: missing header line");
  }
  GraphFingerprint fp;
  bool have_hash = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos) throw Error(ErrorKind::kFormat, "graph fingerprint: malformed line '" + line + "'");
    const std::string key = line.substr(0, space);
    const std::string value = line.substr(space + 1);
    if (key == "hash") {
      fp.hash = digest_from_hex(value);
      have_hash = true;
    } else {
      fp.fields[key] = value;
    }
  }
  if (!have_hash) throw Error(ErrorKind::kFormat, "graph fingerprint: missing hash");
  return fp;
}

void write_fingerprint(const GraphFingerprint& fp, const std::string& path) {
  io::write_file_atomic(path, fp.render());
}

GraphFingerprint read_fingerprint(const std::string& path) { return parse_fingerprint(io::read_file(path)); }

}  // namespace emmkgr
