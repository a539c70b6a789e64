#include <doctest.h>

#include <map>
#include <numbers>

#include "emmkgr/datastore.hpp"
#include "emmkgr/graph.hpp"
#include "emmkgr/objectives.hpp"
#include "../support/oracles.hpp"

using namespace emmkgr;

namespace {

std::vector<double> randv(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

MatD randm(Index r, Index c, Rng& rng) {
  MatD m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

/// Central differences over every entry of `m` against `analytic`.
double worst_fd(MatD& m, const MatD& analytic, const std::function<double()>& loss) {
  double worst = 0.0;
  for (Index i = 0; i < m.size(); ++i) {
    const double saved = m.data()[i];
    m.data()[i] = saved + 1e-5;
    const double up = loss();
    m.data()[i] = saved - 1e-5;
    const double down = loss();
    m.data()[i] = saved;
    worst = std::max(worst, rel_err(analytic.data()[i], (up - down) / 2e-5));
  }
  return worst;
}

}  // namespace

TEST_CASE("log-sigmoid reference values") {
  CHECK(log_sigmoid(0.0) == doctest::Approx(-0.693147).epsilon(1e-6));
  CHECK(log_sigmoid(-10.0) == doctest::Approx(-10.0000454).epsilon(1e-9));
  CHECK(-log_sigmoid(20.0) == doctest::Approx(2.06e-9).epsilon(1e-2));
  CHECK(std::isfinite(log_sigmoid(-1000.0)));
  CHECK(log_sigmoid(1000.0) == 0.0);
}

TEST_CASE("rotation score identities") {
  const std::vector<double> h = {1, 0}, quarter = {std::numbers::pi / 2}, t = {0, 1};
  CHECK(std::abs(rotate_score<double>(h, quarter, t)) <= 1e-15);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto hh = randv(8, rng), tt = randv(8, rng), ph = randv(4, rng), zero = std::vector<double>(8, 0.0);
    CHECK(std::abs(rotate_score<double>(hh, ph, tt) - oracle::rotate_score(hh, ph, tt)) <= 1e-6);
    double sq = 0;
    for (double v : hh) sq += v * v;
    CHECK(std::abs(rotate_score<double>(hh, ph, zero) - sq) <= 1e-6);
    CHECK(std::abs(rotate_score<double>(hh, std::vector<double>(4, 0.0), hh)) <= 1e-12);
    std::vector<double> rot(8);
    rotate<double>(hh, ph, rot);
    CHECK(rotate_score<double>(hh, ph, rot) <= 1e-9);
  }
}

TEST_CASE("kg loss values, translation invariance and gradients") {
  Rng rng(2);
  // Equal positive and negative distances: each term is log 0.5.
  MatD nodes = randm(6, 4, rng);
  nodes.row(2) = nodes.row(1);
  MatD phases = randm(2, 2, rng);
  std::vector<KgSample> same = {{{0, 0, 1}, 2}};
  CHECK(kg_loss<double>(same, nodes, phases, nullptr, nullptr) == doctest::Approx(std::log(0.5)));

  MatD big = randm(30, 8, rng);
  MatD ph = randm(4, 4, rng);
  std::vector<KgSample> batch;
  for (int i = 0; i < 10; ++i) {
    batch.push_back({{static_cast<Index>(rng.uniform_index(30)), static_cast<Index>(rng.uniform_index(4)),
                      static_cast<Index>(rng.uniform_index(30))},
                     static_cast<Index>(rng.uniform_index(30))});
  }
  MatD g_nodes = MatD::Zero(30, 8), g_ph = MatD::Zero(4, 4);
  kg_loss<double>(batch, big, ph, &g_nodes, &g_ph, 0.7);
  auto loss = [&] { return kg_loss<double>(batch, big, ph, nullptr, nullptr, 0.7); };
  CHECK(worst_fd(big, g_nodes, loss) <= 1e-4);
  CHECK(worst_fd(ph, g_ph, loss) <= 1e-4);

  // Only f_pos - f_neg enters the loss.
  const double fp = 1.3, fn = 2.9;
  CHECK(std::abs(log_sigmoid(fp - fn) - log_sigmoid((fp + 5.0) - (fn + 5.0))) <= 1e-6);
}

TEST_CASE("bpr loss values and gradients") {
  Rng rng(3);
  MatD users = randm(4, 6, rng), items = randm(9, 6, rng);
  items.row(3) = items.row(2);
  std::vector<BprTriple> tie = {{1, 2, 3}};
  CHECK(bpr_loss<double>(tie, users, items, nullptr, nullptr) == doctest::Approx(std::log(2.0)));

  std::vector<BprTriple> batch;
  for (int i = 0; i < 12; ++i) {
    batch.push_back({static_cast<Index>(rng.uniform_index(4)), static_cast<Index>(rng.uniform_index(9)),
                     static_cast<Index>(rng.uniform_index(9))});
  }
  MatD gu = MatD::Zero(4, 6), gi = MatD::Zero(9, 6);
  bpr_loss<double>(batch, users, items, &gu, &gi, 0.25);
  auto loss = [&] { return bpr_loss<double>(batch, users, items, nullptr, nullptr, 0.25); };
  CHECK(worst_fd(users, gu, loss) <= 1e-4);
  CHECK(worst_fd(items, gi, loss) <= 1e-4);
}

TEST_CASE("bpr negatives: skip signal, forced choice, uniformity") {
  Rng rng(4);
  BprNegativeSampler all({{0, 1, 2}}, 3);
  CHECK(!all.sample(0, 1, rng).has_value());
  BprNegativeSampler forced({{0, 1, 3, 4}}, 5);
  for (int i = 0; i < 50; ++i) CHECK(forced.sample(0, 1, rng)->front() == 2);

  // Chi-square over the 8 legal items, 1e5 draws; 7 dof critical value at p=0.01 is 18.48.
  for (const auto& pos : {std::vector<Index>{0, 3}, std::vector<Index>{0, 1, 2, 3, 4, 5, 6, 8, 9}}) {
    const Index n = pos.size() == 2 ? 10 : 17;
    BprNegativeSampler s({pos}, n);
    std::map<Index, long> counts;
    const long draws = 100000;
    for (long i = 0; i < draws; ++i) ++counts[s.sample(0, 1, rng)->front()];
    for (Index p : pos) CHECK(!counts.count(p));
    const double expected = static_cast<double>(draws) / counts.size();
    double chi2 = 0;
    for (const auto& [item, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(counts.size() == 8);
    CHECK(chi2 < 18.48);
  }
}

TEST_CASE("kg negatives stay in the relation's tail block") {
  SyntheticSpec spec;
  spec.num_items = 25;
  const SyntheticData syn = generate_synthetic(spec);
  std::vector<NeighborList> lists;
  for (Index k = 0; k < 2; ++k) lists.push_back(topn_cosine(syn.dataset.store.features(k), 3));
  const MMGraph g = assemble_mmkg(syn.dataset.store, lists);
  Rng rng(5);
  std::map<Index, long> counts;
  for (const Triple& t : g.triples) {
    const auto [lo, hi] = g.tail_block(t.relation);
    for (Index neg : sample_kg_negatives(g, t, 3, rng)) {
      CHECK(neg >= lo);
      CHECK(neg < hi);
      CHECK(neg != t.tail);
    }
  }
  const Triple image_sim = *std::find_if(g.triples.begin(), g.triples.end(), [](const Triple& t) { return t.relation == 1; });
  const long draws = 100000;
  for (Index neg : sample_kg_negatives(g, image_sim, draws, rng)) ++counts[neg];
  CHECK(counts.size() == 24);
  const double expected = static_cast<double>(draws) / 24;
  double chi2 = 0;
  for (const auto& [node, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 41.64);  // 23 dof, p = 0.01
}
