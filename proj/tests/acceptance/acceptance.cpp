// One line per criterion; exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <string>

#include "emmkgr/binary_io.hpp"
#include "emmkgr/checkpoint.hpp"
#include "emmkgr/evaluator.hpp"
#include "emmkgr/graph.hpp"
#include "emmkgr/knn.hpp"
#include "emmkgr/objectives.hpp"
#include "emmkgr/recommender.hpp"
#include "emmkgr/search.hpp"
#include "emmkgr/trainer.hpp"
#include "../support/oracles.hpp"
#include "../support/scratch.hpp"

using namespace emmkgr;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += " (over the " + std::to_string(static_cast<int>(budget_s)) + " s budget)";
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %-28s %8.2fs  %s\n", o.pass ? "PASS" : "FAIL", id, name, secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

using Ids = std::vector<Index>;

MatF randf(Index r, Index c, Rng& rng) {
  MatF m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  return m;
}

std::vector<NeighborList> knn_lists(const FeatureStore& store, Index n) {
  std::vector<NeighborList> out;
  for (Index k = 0; k < store.num_modalities(); ++k) out.push_back(topn_cosine(store.features(k), n));
  return out;
}

Outcome propagation() {
  Rng rng(101);
  double worst = 0.0;
  for (int g = 0; g < 50; ++g) {
    const Index nodes = 2 + static_cast<Index>(rng.uniform_index(199));
    const Index layers = g % 4;
    std::vector<std::pair<Index, Index>> edges;
    const Index m = static_cast<Index>(rng.uniform_index(4 * nodes));
    for (Index e = 0; e < m; ++e) {
      const Index a = static_cast<Index>(rng.uniform_index(nodes)), b = static_cast<Index>(rng.uniform_index(nodes));
      if (a != b) edges.emplace_back(a, b);
    }
    const Csr<double> adj = undirected_adjacency(nodes, edges);
    const MatF e0 = randf(nodes, 8, rng);
    const MatF got = propagate(normalize(adj).as<float>(), e0, layers).mean;
    const MatD want = oracle::propagate_dense(oracle::normalize_dense(MatD(adj)), e0.cast<double>(), layers);
    worst = std::max(worst, (got.cast<double>() - want).norm() / want.norm());
  }
  return {worst <= 1e-5, fmt("max relative error %.3g over 50 graphs", worst)};
}

Outcome gradients() {
  GradCheckReport total;
  std::string detail;
  bool ok = true;
  const SyntheticData fx = grad_check_fixture(42);
  const auto& store = fx.dataset.store;
  const auto& inter = fx.dataset.interactions;
  const auto lists = knn_lists(store, 3);
  for (auto variant : {GraphVariant::kOriginal, GraphVariant::kInteraction, GraphVariant::kInterModal,
                       GraphVariant::kItemItem}) {
    TrainConfig config;
    config.dim = 8;
    config.knn = 3;
    config.variant = variant;
    const MMGraph graph = assemble_graph(store, lists, inter, variant);
    const GradCheckReport r = gradient_check({&store, &graph, &inter}, config);
    ok &= r.passed();
    detail += to_string(variant) + fmt(" %.4f/%.2g  ", static_cast<double>(r.within_tolerance) / r.coordinates,
                                       r.max_relative_error);
  }
  return {ok, "share<=1e-3 / max rel: " + detail};
}

Outcome knn_oracle() {
  Rng rng(103);
  int equal = 0;
  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + static_cast<Index>(rng.uniform_index(499));
    const Index d = 1 + static_cast<Index>(rng.uniform_index(64));
    const Index k = 1 + static_cast<Index>(rng.uniform_index(std::min<Index>(n - 1, 20)));
    const MatF m = oracle::random_matrix(n, d, rng, true);
    equal += topn_cosine(m, k).indices == oracle::knn(m, k).indices;
  }
  return {equal == 20, fmt("%g/20 neighbor lists identical", equal)};
}

Outcome rotate_identities() {
  Rng rng(104);
  double iso = 0, ident = 0, constructed = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t half = 1 + rng.uniform_index(32);
    std::vector<double> h(2 * half), phase(half), zero(2 * half, 0.0), none(half, 0.0), rotated(2 * half);
    for (auto& x : h) x = rng.normal();
    for (auto& p : phase) p = rng.uniform(0.0, 2 * std::numbers::pi);
    double sq = 0;
    for (double x : h) sq += x * x;
    iso = std::max(iso, std::abs(rotate_score<double>(h, phase, zero) - sq));
    ident = std::max(ident, std::abs(rotate_score<double>(h, none, h)));
    rotate<double>(h, phase, rotated);
    constructed = std::max(constructed, rotate_score<double>(h, phase, rotated));
  }
  return {iso <= 1e-6 && ident == 0.0 && constructed <= 1e-9,
          fmt("isometry %.2g, identity %.2g, constructed %.2g", iso, ident, constructed)};
}

Outcome retrieval() {
  Rng rng(105);
  int equal = 0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + static_cast<Index>(rng.uniform_index(999));
    const Index k = 1 + static_cast<Index>(rng.uniform_index(50));
    if (t % 2 == 0) {
      const MatF items = oracle::random_matrix(n, 12, rng, true);
      VecF q(12);
      for (Index c = 0; c < 12; ++c) q(c) = static_cast<float>(rng.normal());
      std::vector<double> sims(n);
      for (Index i = 0; i < n; ++i) sims[i] = oracle::cosine(q.data(), items.row(i).data(), 12);
      equal += search_topn({q.data(), 12}, items, k).items == oracle::rank(sims, {}, k);
    } else {
      EmbeddingSnapshot s;
      s.user = randf(3, 8, rng);
      s.item_interaction = randf(n, 8, rng);
      s.item_multimodal = randf(n, 8, rng);
      std::set<Index> masked;
      for (Index i = 0; i < n / 4; ++i) masked.insert(static_cast<Index>(rng.uniform_index(n)));
      const MatF fused = s.item_interaction + s.item_multimodal;
      std::vector<double> scores(n);
      for (Index i = 0; i < n; ++i) {
        double acc = 0;
        for (Index c = 0; c < 8; ++c) acc += static_cast<double>(s.user(1, c)) * fused(i, c);
        scores[i] = acc;
      }
      const std::vector<Index> mask(masked.begin(), masked.end());
      equal += recommend(s, 1, k, mask).items == oracle::rank(scores, masked, k);
    }
  }
  return {equal == 100, fmt("%g/100 rankings identical", equal)};
}

Outcome metrics() {
  bool ok = true;
  const std::vector<Index> ten = {0, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  ok &= recall_at_k(ten, Ids{0, 1}, 10) == 0.5;
  ok &= recall_at_k(ten, Ids{0, 3}, 10) == 1.0;
  ok &= ndcg_at_k(ten, Ids{0}, 10) == 1.0;
  ok &= std::abs(ndcg_at_k(ten, Ids{2}, 10) - 1.0 / std::log2(3.0)) <= 1e-12;
  ok &= ndcg_at_k(ten, Ids{99}, 10) == 0.0;
  ok &= std::abs(average_precision_at_k(Ids{4, 1, 5, 2, 3}, Ids{4, 5}, 5) - (1.0 + 2.0 / 3.0) / 2.0) <= 1e-12;
  ok &= average_precision_at_k(ten, Ids{0}, 10) == 1.0;
  ok &= average_precision_at_k(ten, Ids{99}, 10) == 0.0;
  const bool worked = ok;

  Rng rng(106);
  int agree = 0, monotone = 0;
  for (int c = 0; c < 1000; ++c) {
    const Index universe = 5 + static_cast<Index>(rng.uniform_index(80));
    std::vector<Index> perm(universe);
    for (Index i = 0; i < universe; ++i) perm[i] = i;
    rng.shuffle(perm);
    perm.resize(1 + rng.uniform_index(universe));
    std::set<Index> rel;
    const Index want = 1 + static_cast<Index>(rng.uniform_index(std::min<Index>(universe, 12)));
    while (static_cast<Index>(rel.size()) < want) rel.insert(static_cast<Index>(rng.uniform_index(universe)));
    const std::vector<Index> relv(rel.begin(), rel.end());
    bool same = true, mono = true;
    double prev = 0;
    for (Index k = 1; k <= 30; ++k) {
      const double r = recall_at_k(perm, relv, k);
      same &= r == oracle::recall(perm, rel, k);
      same &= std::abs(ndcg_at_k(perm, relv, k) - oracle::ndcg(perm, rel, k)) <= 1e-12;
      same &= std::abs(average_precision_at_k(perm, relv, k) - oracle::map(perm, rel, k)) <= 1e-12;
      mono &= r >= prev;
      prev = r;
    }
    agree += same;
    monotone += mono;
  }
  return {worked && agree == 1000 && monotone == 1000,
          std::string("worked examples ") + (worked ? "ok" : "MISMATCH") +
              fmt(", oracle %g/1000, monotone %g/1000", agree, monotone)};
}

Outcome variants() {
  SyntheticSpec spec;
  spec.num_items = 50;
  spec.num_users = 20;
  spec.modality_dims = {8, 8, 6};
  spec.num_clusters = 5;
  spec.interactions_per_user = 6;
  spec.seed = 7;
  const SyntheticData syn = generate_synthetic(spec);
  const auto& store = syn.dataset.store;
  const InteractionData inter = split_interactions(syn.dataset.interactions, 7);
  const auto lists = knn_lists(store, 4);
  const Index n = 50, t = 3, u = 20;

  // Similarity edges expected from the neighbor lists alone.
  Index modal_edges = 0;
  std::vector<std::set<std::pair<Index, Index>>> per_modality(t);
  for (Index k = 0; k < t; ++k) {
    for (Index j = 0; j < n; ++j) {
      for (Index r = 0; r < 4; ++r) {
        const Index o = lists[k].indices[j * 4 + r];
        per_modality[k].insert({std::min(j, o), std::max(j, o)});
      }
    }
    modal_edges += static_cast<Index>(per_modality[k].size());
  }
  std::set<std::pair<Index, Index>> item_union;
  for (const auto& s : per_modality) item_union.insert(s.begin(), s.end());
  Index train_pairs = 0;
  for (Split s : inter.split) train_pairs += s == Split::kTrain;

  std::string bad;
  const MMGraph orig = assemble_graph(store, lists, inter, GraphVariant::kOriginal);
  const MatD a = MatD(orig.adjacency);
  if (orig.num_nodes() != (1 + t) * n) bad += " original.nodes";
  if (orig.edges.item_modal != n * t) bad += " original.item_modal";
  if (orig.edges.modal_modal != modal_edges) bad += " original.modal_modal";
  if (!a.topLeftCorner(n, n).isZero()) bad += " original.item_block";
  if (orig.adjacency.nonZeros() != 2 * (n * t + modal_edges)) bad += " original.nnz";

  const MMGraph im = assemble_graph(store, lists, inter, GraphVariant::kInterModal);
  if (im.num_nodes() != (1 + t) * n) bad += " inter_modal.nodes";
  if (im.edges.total() != orig.edges.total() + n * t * (t - 1) / 2) bad += " inter_modal.edges";

  const MMGraph ui = assemble_graph(store, lists, inter, GraphVariant::kInteraction);
  if (ui.num_nodes() != (1 + t) * n + u) bad += " interaction.nodes";
  if (ui.edges.total() != orig.edges.total() + train_pairs) bad += " interaction.edges";

  const MMGraph ii = assemble_graph(store, lists, inter, GraphVariant::kItemItem);
  if (ii.num_nodes() != n) bad += " item_item.nodes";
  if (ii.adjacency.nonZeros() != 2 * static_cast<Index>(item_union.size())) bad += " item_item.edges";

  return {bad.empty(), bad.empty() ? "all closed-form counts match" : "mismatch:" + bad};
}

Outcome smoke_benefit() {
  std::vector<double> full, base;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec spec;
    spec.num_items = 300;
    spec.num_users = 200;
    spec.modality_dims = {16, 16};
    spec.preference = 0.9;
    spec.seed = seed;
    const SyntheticData syn = generate_synthetic(spec);
    const InteractionData inter = split_interactions(syn.dataset.interactions, seed);
    TrainConfig config;
    config.seed = seed;
    const MMGraph graph = assemble_graph(syn.dataset.store, knn_lists(syn.dataset.store, config.knn), inter,
                                         GraphVariant::kOriginal);
    const TrainInputs in{&syn.dataset.store, &graph, &inter};
    full.push_back(*train(in, config).best_val_recall10);
    TrainConfig b = config;
    b.zero_modalities = true;
    b.lambda_kg = 0.0;
    base.push_back(*train(in, b).best_val_recall10);
    detail += fmt("%.3f/%.3f ", full.back(), base.back());
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[2];
  };
  const double mf = median(full), mb = median(base);
  return {mf >= mb, fmt("median R@10 full %.4f vs baseline %.4f; per seed ", mf, mb) + detail};
}

Outcome cohesion_sanity() {
  // Two clusters on orthogonal axes with varied magnitudes.
  Rng rng(109);
  const Index per = 40;
  MatF ortho = MatF::Zero(2 * per, 8);
  for (Index i = 0; i < 2 * per; ++i) ortho(i, i < per ? 0 : 1) = static_cast<float>(rng.uniform(1.0, 2.0));
  const KMeansResult km = kmeans(ortho, 2, 1);
  bool assigned = true;
  for (Index i = 0; i < 2 * per; ++i) assigned &= (km.assignments[i] == km.assignments[0]) == (i < per);
  const double gap = *cohesion({{"x", ortho}}, km.assignments).sources.at("x").gap;

  // One isotropic Gaussian blob away from the origin, split by k-means.
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng blob_rng(seed);
    MatF blob(400, 16);
    for (Index i = 0; i < blob.rows(); ++i) {
      for (Index c = 0; c < 16; ++c) blob(i, c) = static_cast<float>(blob_rng.normal() + (c == 0 ? 10.0 : 0.0));
    }
    const KMeansResult split = kmeans(blob, 2, seed);
    worst = std::max(worst, std::abs(*cohesion({{"b", blob}}, split.assignments).sources.at("b").gap));
  }
  return {assigned && std::abs(gap - 1.0) <= 1e-6 && worst <= 0.05,
          fmt("orthogonal gap %.9f, assignments ", gap) + (assigned ? "ok" : "WRONG") +
              fmt("; blob max |gap| %.4f", worst)};
}

struct PipelineReport {
  std::string rec, search;
  std::string checkpoint;
};

PipelineReport pipeline_run() {
  SyntheticSpec spec;
  spec.num_items = 120;
  spec.num_users = 60;
  spec.seed = 5;
  const SyntheticData syn = generate_synthetic(spec);
  const InteractionData inter = split_interactions(syn.dataset.interactions, 5);
  TrainConfig config;
  config.dim = 16;
  config.epochs = 5;
  config.knn = 5;
  config.seed = 11;
  const auto lists = knn_lists(syn.dataset.store, config.knn);
  const MMGraph graph = assemble_graph(syn.dataset.store, lists, inter, GraphVariant::kOriginal);
  const TrainInputs in{&syn.dataset.store, &graph, &inter};
  const TrainResult r = train(in, config);
  const EmbeddingSnapshot snap = make_snapshot(in, config, r.params);

  PipelineReport out;
  out.rec = evaluate_recommendations(snap, inter, Split::kTest, {10, 20}).to_json(true).dump();
  const auto queries = generate_synthetic_queries(syn, 10, 5, 0.05, 3);
  std::vector<SearchResult> results;
  for (const auto& q : queries) {
    const VecF h = encode_query(q, syn.dataset.store, r.params);
    results.push_back(search_topn({h.data(), static_cast<std::size_t>(h.size())}, snap.item_interaction +
                                                                                      snap.item_multimodal, 20));
  }
  out.search = evaluate_search(queries, results, syn.dataset.store, {10}, "unified").to_json(true).dump();
  out.checkpoint = encode_checkpoint(make_checkpoint(r.params, config, fingerprint(graph, lists).hash,
                                                     r.best_epoch, r.best_val_recall20));
  return out;
}

Outcome determinism() {
  ScratchDir dir("acceptance");
  std::string bad;

  const PipelineReport a = pipeline_run(), b = pipeline_run();
  if (a.rec != b.rec) bad += " rec-report";
  if (a.search != b.search) bad += " search-report";
  if (a.checkpoint != b.checkpoint) bad += " checkpoint-bytes";

  const std::string path = dir.file("c.emkg");
  save_checkpoint(decode_checkpoint(a.checkpoint), path);
  if (io::read_file(path) != a.checkpoint) bad += " checkpoint-roundtrip";
  if (encode_checkpoint(load_checkpoint(path)) != a.checkpoint) bad += " checkpoint-reencode";

  Rng rng(110);
  const MatF m = oracle::random_matrix(37, 13, rng, true);
  write_feature_matrix(m, dir.file("f1.emfm"));
  const MatF back = read_feature_matrix(dir.file("f1.emfm"));
  write_feature_matrix(back, dir.file("f2.emfm"));
  if (back != m) bad += " feature-values";
  if (io::read_file(dir.file("f1.emfm")) != io::read_file(dir.file("f2.emfm"))) bad += " feature-bytes";

  return {bad.empty(), bad.empty() ? "reports, checkpoint and feature bytes identical" : "differs:" + bad};
}

}  // namespace

int main() {
  criterion(1, "propagation oracle", 10, propagation);
  criterion(2, "gradient checks", 60, gradients);
  criterion(3, "knn oracle", 10, knn_oracle);
  criterion(4, "rotation identities", 0, rotate_identities);
  criterion(5, "retrieval oracle", 0, retrieval);
  criterion(6, "metric formulas", 0, metrics);
  criterion(7, "graph variant counts", 0, variants);
  criterion(8, "end-to-end smoke benefit", 300, smoke_benefit);
  criterion(9, "cohesion sanity", 0, cohesion_sanity);
  criterion(10, "determinism and formats", 0, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
