#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "emmkgr/binary_io.hpp"
#include "emmkgr/datastore.hpp"
#include "emmkgr/error.hpp"
#include "../support/scratch.hpp"

using namespace emmkgr;

namespace {

std::string header(std::uint64_t rows, std::uint64_t cols) {
  std::string h = "EMFM";
  auto put = [&h](auto v) { h.append(reinterpret_cast<const char*>(&v), sizeof(v)); };
  put(std::uint32_t{1});
  put(rows);
  put(cols);
  return h;
}

void write_text(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("feature matrix header arithmetic") {
  std::string bytes = header(3, 4);
  for (int i = 0; i < 12; ++i) {
    const float v = static_cast<float>(i) * 0.5f;
    bytes.append(reinterpret_cast<const char*>(&v), 4);
  }
  const MatF m = decode_feature_matrix(bytes);
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 4);
  CHECK(m(2, 3) == doctest::Approx(5.5));
  CHECK(encode_feature_matrix(m) == bytes);

  CHECK(kind_of([&] { decode_feature_matrix(bytes.substr(0, bytes.size() - 4)); }) == ErrorKind::kTruncation);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(kind_of([&] { decode_feature_matrix(bad); }) == ErrorKind::kFormat);
  std::string version = bytes;
  version[4] = 2;
  CHECK(kind_of([&] { decode_feature_matrix(version); }) == ErrorKind::kFormat);
}

TEST_CASE("load_features aligns rows to the id map and rejects duplicates") {
  ScratchDir dir("features");
  MatF m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  write_feature_matrix(m, dir.file("m.emfm"));
  write_text(dir.file("ids.txt"), "A\nB\n");
  const FeatureSlice slice = load_features(dir.file("m.emfm"), dir.file("ids.txt"));
  CHECK(slice.item_ids == std::vector<std::string>{"A", "B"});
  CHECK(slice.matrix(1, 2) == 6.0f);

  write_text(dir.file("dup.txt"), "A\nB\nA\n");
  CHECK(kind_of([&] { read_id_map(dir.file("dup.txt")); }) == ErrorKind::kDuplicateId);

  // Round trip of a file is byte-identical.
  const std::string before = io::read_file(dir.file("m.emfm"));
  write_feature_matrix(read_feature_matrix(dir.file("m.emfm")), dir.file("m2.emfm"));
  CHECK(io::read_file(dir.file("m2.emfm")) == before);
}

TEST_CASE("load_interactions maps ids, dedups, and rejects unknown items") {
  ScratchDir dir("inter");
  FeatureStore store({"i1", "i2", "i3"});
  store.add_modality("image", MatF::Zero(3, 2));

  write_text(dir.file("a.tsv"), "u1\ti1\nu2\ti2\t100\nu1\ti3\n");
  InteractionLoadReport report;
  InteractionData d = load_interactions(dir.file("a.tsv"), store, &report);
  CHECK(d.num_users() == 2);
  CHECK(d.pairs.size() == 3);

  write_text(dir.file("dup.tsv"), "u1\ti1\nu1\ti1\nu1\ti2\n");
  d = load_interactions(dir.file("dup.tsv"), store, &report);
  CHECK(d.pairs.size() == 2);
  CHECK(report.duplicates == 1);

  write_text(dir.file("bad.tsv"), "u1\ti9\n");
  CHECK(kind_of([&] { load_interactions(dir.file("bad.tsv"), store); }) == ErrorKind::kCatalogMismatch);
  write_text(dir.file("empty.tsv"), "");
  CHECK(kind_of([&] { load_interactions(dir.file("empty.tsv"), store); }) == ErrorKind::kEmptyData);
}

TEST_CASE("split sizes follow the ceiling rule") {
  CHECK(split_sizes(10).train == 8);
  CHECK(split_sizes(10).validation == 1);
  CHECK(split_sizes(10).test == 1);
  CHECK(split_sizes(1).train == 1);
  CHECK(split_sizes(1).validation == 0);
  CHECK(split_sizes(1).test == 0);
  for (Index k = 10; k < 200; ++k) {
    const SplitSizes s = split_sizes(k);
    CHECK(s.train == static_cast<Index>(std::ceil(0.8 * static_cast<double>(k) - 1e-9)));
    CHECK(s.train + s.validation + s.test == k);
  }
}

TEST_CASE("split_interactions is seeded and per-user") {
  SyntheticSpec spec;
  spec.num_items = 80;
  spec.num_users = 30;
  spec.interactions_per_user = 13;
  const SyntheticData syn = generate_synthetic(spec);
  const InteractionData a = split_interactions(syn.dataset.interactions, 7);
  const InteractionData b = split_interactions(syn.dataset.interactions, 7);
  const InteractionData c = split_interactions(syn.dataset.interactions, 8);
  CHECK(a.split == b.split);
  CHECK(a.split != c.split);
  const auto train = a.items_by_user(Split::kTrain);
  const auto val = a.items_by_user(Split::kValidation);
  for (Index u = 0; u < a.num_users(); ++u) {
    CHECK(train[u].size() == 11);  // ceil(0.8 * 13)
    CHECK(val[u].size() == 1);
  }
}

TEST_CASE("synthetic generator plants recoverable clusters") {
  SyntheticSpec spec;
  spec.num_items = 50;
  spec.num_clusters = 5;
  spec.noise = 0.1;
  const SyntheticData syn = generate_synthetic(spec);
  const auto& store = syn.dataset.store;
  for (Index k = 0; k < store.num_modalities(); ++k) {
    Index agree = 0;
    const MatF& m = store.features(k);
    const MatF& c = syn.centroids[k];
    for (Index j = 0; j < m.rows(); ++j) {
      Index best = 0;
      double best_sim = -2;
      for (Index cl = 0; cl < c.rows(); ++cl) {
        const double sim = m.row(j).cast<double>().dot(c.row(cl).cast<double>()) /
                           (m.row(j).cast<double>().norm() * c.row(cl).cast<double>().norm());
        if (sim > best_sim) {
          best_sim = sim;
          best = cl;
        }
      }
      agree += best == syn.item_cluster[j];
    }
    CHECK(agree >= 45);
  }

  spec.preference = 1.0;
  const SyntheticData pure = generate_synthetic(spec);
  for (const auto& p : pure.dataset.interactions.pairs) {
    const auto& pref = pure.user_clusters[p.user];
    CHECK(std::find(pref.begin(), pref.end(), pure.item_cluster[p.item]) != pref.end());
  }
}

TEST_CASE("synthetic dataset round trips through disk byte for byte") {
  ScratchDir a("syn_a"), b("syn_b");
  SyntheticSpec spec;
  spec.num_items = 40;
  spec.num_users = 12;
  write_dataset(generate_synthetic(spec).dataset, a.path().string());
  write_dataset(generate_synthetic(spec).dataset, b.path().string());
  for (const auto& f : {"items.txt", "modalities.txt", "interactions.tsv", "image.emfm", "description.emfm"}) {
    CHECK(io::read_file(a.file(f)) == io::read_file(b.file(f)));
  }
  const Dataset loaded = load_dataset(a.path().string());
  write_dataset(loaded, b.path().string());
  for (const auto& f : {"items.txt", "modalities.txt", "interactions.tsv", "image.emfm", "description.emfm"}) {
    CHECK(io::read_file(a.file(f)) == io::read_file(b.file(f)));
  }
}
