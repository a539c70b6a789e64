#include <doctest.h>

#include <set>

#include "emmkgr/error.hpp"
#include "emmkgr/search.hpp"
#include "../support/oracles.hpp"
#include "../support/scratch.hpp"

using namespace emmkgr;

TEST_CASE("cosine search equals an exhaustive oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.uniform_index(1000));
    MatF items = oracle::random_matrix(n, 8, rng, true);
    items.row(0).setZero();
    VecF q(8);
    for (Index c = 0; c < 8; ++c) q(c) = static_cast<float>(rng.normal());
    const Index k = 1 + static_cast<Index>(rng.uniform_index(20));
    std::vector<double> sims(n);
    for (Index i = 0; i < n; ++i) sims[i] = oracle::cosine(q.data(), items.row(i).data(), 8);
    const SearchResult got = search_topn({q.data(), 8}, items, k);
    CHECK(got.items == oracle::rank(sims, {}, k));
  }
}

TEST_CASE("query validation, clamping and the identity model") {
  FeatureStore store({"a", "b", "c"});
  MatF img(3, 2);
  img << 1, 0, 0, 1, 0.6f, 0.8f;
  store.add_modality("image", img);
  store.add_modality("review", MatF::Ones(3, 3));

  ParamSet<float> p;
  p.modality_types = {"image", "review"};
  p.item_embedding = MatF::Zero(3, 2);
  p.projection_weight = {MatF::Identity(2, 2), MatF::Zero(3, 2)};
  p.projection_bias = {VecF::Zero(2), VecF::Zero(2)};

  Query q{"q1", "image", VecF(2), {"c"}};
  q.vector << 0.6f, 0.8f;
  const VecF h = encode_query(q, store, p);
  const SearchResult r = search_topn({h.data(), 2}, img, 10);
  CHECK(r.clamped);
  CHECK(r.items.front() == 2);
  CHECK(r.similarities.front() == doctest::Approx(1.0));

  Query wrong_dim{"q2", "image", VecF::Ones(3), {}};
  CHECK_THROWS_AS(encode_query(wrong_dim, store, p), Error);
  Query wrong_type{"q3", "audio", VecF::Ones(2), {}};
  CHECK_THROWS_AS(encode_query(wrong_type, store, p), Error);
  Query unknown_item{"q4", "image", VecF::Ones(2), {"zzz"}};
  CHECK_THROWS_AS(resolve_query(unknown_item, store), Error);

  const SearchResult base = search_baseline({q.vector.data(), 2}, store, 3);
  CHECK(base.items.front() == 2);
}

TEST_CASE("query files round trip and synthetic queries resolve") {
  ScratchDir dir("queries");
  SyntheticSpec spec;
  spec.num_items = 40;
  const SyntheticData syn = generate_synthetic(spec);
  const auto queries = generate_synthetic_queries(syn, 5, 3, 0.01, 1);
  CHECK(queries.size() == 8);
  write_queries(queries, dir.file("q.jsonl"));
  const auto back = read_queries(dir.file("q.jsonl"));
  REQUIRE(back.size() == queries.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == queries[i].id);
    CHECK(back[i].vector == queries[i].vector);
    CHECK(back[i].relevant_items == queries[i].relevant_items);
    CHECK_NOTHROW(resolve_query(back[i], syn.dataset.store));
  }
  CHECK(queries[0].relevant_items.size() == 1);
  CHECK(queries[7].relevant_items.size() > 1);

  // Fine queries with tiny noise retrieve their own item under raw-vector search.
  for (int i = 0; i < 5; ++i) {
    const auto r = search_baseline({queries[i].vector.data(), static_cast<std::size_t>(queries[i].vector.size())},
                                   syn.dataset.store, 1);
    CHECK(syn.dataset.store.item_ids()[r.items[0]] == queries[i].relevant_items[0]);
  }
}
