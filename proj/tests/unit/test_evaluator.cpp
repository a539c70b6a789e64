#include <doctest.h>

#include <set>

#include "emmkgr/error.hpp"
#include "emmkgr/evaluator.hpp"
#include "emmkgr/rng.hpp"
#include "../support/oracles.hpp"

using namespace emmkgr;

namespace {

std::vector<Index> v(std::initializer_list<Index> x) { return x; }

}  // namespace

TEST_CASE("hand-worked metric values") {
  // Items 0..9; relevant {0, 1}; only 0 in the top 10.
  const auto ranked = v({0, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(recall_at_k(ranked, v({0, 1}), 10) == 0.5);
  CHECK(recall_at_k(ranked, v({0, 3}), 10) == 1.0);
  CHECK(ndcg_at_k(ranked, v({0}), 10) == 1.0);
  CHECK(ndcg_at_k(ranked, v({2}), 10) == doctest::Approx(1.0 / std::log2(3.0)));
  CHECK(ndcg_at_k(ranked, v({42}), 10) == 0.0);
  CHECK(average_precision_at_k(v({7, 1, 8, 2, 3}), v({7, 8}), 5) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK(average_precision_at_k(ranked, v({0}), 10) == 1.0);
  CHECK(average_precision_at_k(ranked, v({42}), 10) == 0.0);
  CHECK_THROWS_AS(recall_at_k(ranked, {}, 10), Error);
}

TEST_CASE("randomized set-oracle agreement and monotone recall") {
  Rng rng(1);
  for (int c = 0; c < 1000; ++c) {
    const Index universe = 5 + static_cast<Index>(rng.uniform_index(60));
    std::vector<Index> perm(universe);
    for (Index i = 0; i < universe; ++i) perm[i] = i;
    rng.shuffle(perm);
    const Index len = 1 + static_cast<Index>(rng.uniform_index(universe));
    const std::vector<Index> ranked(perm.begin(), perm.begin() + len);
    std::set<Index> rel;
    const Index rel_n = 1 + static_cast<Index>(rng.uniform_index(10));
    while (static_cast<Index>(rel.size()) < std::min(rel_n, universe)) rel.insert(rng.uniform_index(universe));
    const std::vector<Index> relv(rel.begin(), rel.end());
    double prev = 0.0;
    for (Index k = 1; k <= 25; ++k) {
      const double r = recall_at_k(ranked, relv, k);
      CHECK(r == oracle::recall(ranked, rel, k));
      CHECK(std::abs(ndcg_at_k(ranked, relv, k) - oracle::ndcg(ranked, rel, k)) <= 1e-12);
      CHECK(std::abs(average_precision_at_k(ranked, relv, k) - oracle::map(ranked, rel, k)) <= 1e-12);
      CHECK(r >= prev);
      prev = r;
      const double n = ndcg_at_k(ranked, relv, k);
      CHECK(n >= 0.0);
      CHECK(n <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("aggregate report skips empty relevance and does not mutate input") {
  const std::vector<std::vector<Index>> ranked = {v({1, 2, 3}), v({3, 2, 1}), v({1})};
  const std::vector<std::vector<Index>> relevant = {v({1}), {}, v({2})};
  const auto copy = ranked;
  const MetricReport r = evaluate_rankings(ranked, relevant, {1, 3}, {"a", "b", "c"});
  CHECK(r.skipped == 1);
  CHECK(r.per_entity.size() == 2);
  CHECK(r.at(1).recall == 0.5);
  CHECK(r.at(3).recall == 0.5);
  CHECK(ranked == copy);
  CHECK(evaluate_rankings(ranked, relevant, {1, 3}).to_json().dump() == r.to_json().dump());
}

TEST_CASE("k-means recovers two planted blobs") {
  Rng rng(2);
  MatF pts(200, 3);
  std::vector<Index> truth(200);
  for (Index i = 0; i < 200; ++i) {
    truth[i] = i % 2;
    const float cx = truth[i] ? 10.0f : -10.0f;
    pts.row(i) << cx + static_cast<float>(rng.normal()), static_cast<float>(rng.normal()),
        static_cast<float>(rng.normal());
  }
  const KMeansResult r = kmeans(pts, 2, 3);
  const Index flip = r.assignments[0] == truth[0] ? 0 : 1;
  for (Index i = 0; i < 200; ++i) CHECK((r.assignments[i] ^ flip) == truth[i]);
  CHECK(kmeans(pts, 2, 3).assignments == r.assignments);

  const KMeansResult each = kmeans(pts.topRows(12), 12, 1);
  CHECK(each.inertia == 0.0);
  CHECK(std::set<Index>(each.assignments.begin(), each.assignments.end()).size() == 12);
  CHECK_THROWS_AS(kmeans(pts.topRows(3), 4, 1), Error);
}

TEST_CASE("cohesion closed form matches the double loop") {
  MatF same(6, 3);
  for (Index i = 0; i < 6; ++i) same.row(i) << 1, 2, 3;
  const auto all_same = cohesion({{"x", same}}, {0, 0, 0, 1, 1, 1}).sources.at("x");
  CHECK(*all_same.intra == doctest::Approx(1.0));
  CHECK(*all_same.inter == doctest::Approx(1.0));
  CHECK(*all_same.gap == doctest::Approx(0.0));

  MatF ortho = MatF::Zero(8, 2);
  for (Index i = 0; i < 4; ++i) ortho(i, 0) = 1 + i;
  for (Index i = 4; i < 8; ++i) ortho(i, 1) = 1 + i;
  const auto o = cohesion({{"o", ortho}}, {0, 0, 0, 0, 1, 1, 1, 1}).sources.at("o");
  CHECK(std::abs(*o.gap - 1.0) <= 1e-12);

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 3 + static_cast<Index>(rng.uniform_index(120));
    const Index k = 1 + static_cast<Index>(rng.uniform_index(6));
    const MatF m = oracle::random_matrix(n, 5, rng, false);
    std::vector<Index> labels(n);
    for (auto& l : labels) l = static_cast<Index>(rng.uniform_index(k));
    const auto got = cohesion({{"r", m}}, labels).sources.at("r");
    const auto want = oracle::all_pairs(m, labels);
    CHECK(got.intra_pairs == want.intra_pairs);
    CHECK(got.inter_pairs == want.inter_pairs);
    if (want.intra_pairs) CHECK(std::abs(*got.intra - want.intra) <= 1e-6);
    if (want.inter_pairs) CHECK(std::abs(*got.inter - want.inter) <= 1e-6);
  }

  const auto singletons = cohesion({{"s", ortho}}, {0, 1, 2, 3, 4, 5, 6, 7}).sources.at("s");
  CHECK(!singletons.intra.has_value());
  CHECK(!singletons.gap.has_value());
  CHECK(singletons.inter.has_value());
}
