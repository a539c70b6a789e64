#include "emmkgr/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "emmkgr/binary_io.hpp"
#include "emmkgr/error.hpp"
#include "emmkgr/rng.hpp"

namespace emmkgr {

namespace {

constexpr char kFeatureMagic[4] = {'E', 'M', 'F', 'M'};
constexpr std::uint32_t kFeatureVersion = 1;
constexpr std::size_t kFeatureHeaderBytes = 24;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

// ------------------------------------------------------------------ features

std::string encode_feature_matrix(const MatF& matrix) {
  std::ostringstream out(std::ios::binary);
  out.write(kFeatureMagic, 4);
  io::write_le<std::uint32_t>(out, kFeatureVersion);
  io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(matrix.rows()));
  io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(matrix.cols()));
  out.write(reinterpret_cast<const char*>(matrix.data()),
            static_cast<std::streamsize>(matrix.size() * sizeof(float)));
  return out.str();
}

MatF decode_feature_matrix(const std::string& bytes) {
  if (bytes.size() < kFeatureHeaderBytes || std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) {
    throw Error(ErrorKind::kFormat, "feature matrix: bad magic (expected EMFM)");
  }
  std::uint32_t version;
  std::uint64_t rows, cols;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&rows, bytes.data() + 8, 8);
  std::memcpy(&cols, bytes.data() + 16, 8);
  if (version != kFeatureVersion) {
    throw Error(ErrorKind::kFormat, "feature matrix: unsupported version " + std::to_string(version));
  }
  const std::size_t payload = bytes.size() - kFeatureHeaderBytes;
  if (cols != 0 && rows > (UINT64_MAX / 4) / cols) {
    throw Error(ErrorKind::kFormat, "feature matrix: header shape overflows");
  }
  if (payload != rows * cols * 4) {
    throw Error(ErrorKind::kTruncation,
                "feature matrix: payload is " + std::to_string(payload) + " bytes, header declares " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  MatF matrix(static_cast<Index>(rows), static_cast<Index>(cols));
  std::memcpy(matrix.data(), bytes.data() + kFeatureHeaderBytes, payload);
  return matrix;
}

MatF read_feature_matrix(const std::string& path) {
  return decode_feature_matrix(io::read_file(path));
}

void write_feature_matrix(const MatF& matrix, const std::string& path) {
  io::write_file_atomic(path, encode_feature_matrix(matrix));
}

std::vector<std::string> read_id_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open ID map " + path);
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (!seen.insert(line).second) {
      throw Error(ErrorKind::kDuplicateId, "duplicate ID '" + line + "' in " + path);
    }
    ids.push_back(std::move(line));
  }
  return ids;
}

void write_id_map(const std::vector<std::string>& ids, const std::string& path) {
  std::string contents;
  for (const auto& id : ids) {
    contents += id;
    contents += '\n';
  }
  io::write_file_atomic(path, contents);
}

FeatureSlice load_features(const std::string& path, const std::string& id_map_path) {
  FeatureSlice slice;
  slice.matrix = read_feature_matrix(path);
  slice.item_ids = read_id_map(id_map_path);
  if (static_cast<Index>(slice.item_ids.size()) != slice.matrix.rows()) {
    throw Error(ErrorKind::kFormat, path + " has " + std::to_string(slice.matrix.rows()) +
                                        " rows but the ID map lists " +
                                        std::to_string(slice.item_ids.size()) + " items");
  }
  return slice;
}

FeatureStore::FeatureStore(std::vector<std::string> item_ids) : item_ids_(std::move(item_ids)) {
  for (std::size_t i = 0; i < item_ids_.size(); ++i) {
    if (!item_lookup_.emplace(item_ids_[i], static_cast<Index>(i)).second) {
      throw Error(ErrorKind::kDuplicateId, "duplicate item ID '" + item_ids_[i] + "'");
    }
  }
}

void FeatureStore::add_modality(const std::string& type, MatF matrix) {
  if (modality_index(type) >= 0) {
    throw Error(ErrorKind::kDuplicateId, "modality type '" + type + "' already present");
  }
  if (matrix.rows() != num_items()) {
    throw Error(ErrorKind::kInvalidArgument, "modality '" + type + "' has " +
                                                 std::to_string(matrix.rows()) + " rows, catalog has " +
                                                 std::to_string(num_items()));
  }
  if (matrix.cols() <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "modality '" + type + "' has zero columns");
  }
  types_.push_back(type);
  matrices_.push_back(std::move(matrix));
}

Index FeatureStore::modality_index(const std::string& type) const {
  const auto it = std::find(types_.begin(), types_.end(), type);
  return it == types_.end() ? -1 : static_cast<Index>(it - types_.begin());
}

Index FeatureStore::item_index(const std::string& id) const {
  const auto it = item_lookup_.find(id);
  return it == item_lookup_.end() ? -1 : it->second;
}

// -------------------------------------------------------------- interactions

std::vector<std::vector<Index>> InteractionData::items_by_user(Split which) const {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(num_users()));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (split.empty() || split[p] != which) continue;
    out[static_cast<std::size_t>(pairs[p].user)].push_back(pairs[p].item);
  }
  for (auto& items : out) std::sort(items.begin(), items.end());
  return out;
}

InteractionData load_interactions(const std::string& path, const FeatureStore& catalog,
                                  InteractionLoadReport* report) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open interactions file " + path);

  InteractionData data;
  data.num_items = catalog.num_items();
  std::unordered_map<std::string, Index> users;
  std::set<std::pair<Index, Index>> seen;
  InteractionLoadReport local;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 2 || fields.size() > 3) {
      throw Error(ErrorKind::kFormat, path + ":" + std::to_string(line_no) +
                                          ": expected user_id<TAB>item_id[<TAB>timestamp]");
    }
    ++local.lines;
    const Index item = catalog.item_index(fields[1]);
    if (item < 0) {
      throw Error(ErrorKind::kCatalogMismatch, path + ":" + std::to_string(line_no) + ": item '" +
                                                   fields[1] + "' is not in the feature catalog");
    }
    auto [it, inserted] = users.emplace(fields[0], static_cast<Index>(data.user_ids.size()));
    if (inserted) data.user_ids.push_back(fields[0]);
    if (!seen.emplace(it->second, item).second) {
      ++local.duplicates;
      continue;
    }
    data.pairs.push_back({it->second, item});
  }
  if (data.pairs.empty()) throw Error(ErrorKind::kEmptyData, "no interactions in " + path);
  data.split.assign(data.pairs.size(), Split::kUnassigned);
  if (report) *report = local;
  return data;
}

void write_interactions(const InteractionData& data, const std::vector<std::string>& item_ids,
                        const std::string& path) {
  std::string contents;
  for (const auto& p : data.pairs) {
    contents += data.user_ids[static_cast<std::size_t>(p.user)];
    contents += '\t';
    contents += item_ids[static_cast<std::size_t>(p.item)];
    contents += '\n';
  }
  io::write_file_atomic(path, contents);
}

SplitSizes split_sizes(Index k) {
  SplitSizes s;
  // Integer forms of ceil(0.8k) and floor(0.1k), exact for every k.
  s.train = (8 * k + 9) / 10;
  s.validation = std::min(k / 10, k - s.train);
  s.test = k - s.train - s.validation;
  return s;
}

InteractionData split_interactions(const InteractionData& data, std::uint64_t seed) {
  InteractionData out = data;
  out.split.assign(out.pairs.size(), Split::kUnassigned);
  std::vector<std::vector<std::size_t>> by_user(static_cast<std::size_t>(data.num_users()));
  for (std::size_t p = 0; p < data.pairs.size(); ++p) {
    by_user[static_cast<std::size_t>(data.pairs[p].user)].push_back(p);
  }
  Rng rng = Rng::stream(seed, "split");
  for (std::size_t u = 0; u < by_user.size(); ++u) {
    auto& idx = by_user[u];
    if (idx.empty()) {
      throw Error(ErrorKind::kContractViolation, "user '" + data.user_ids[u] + "' has no interactions");
    }
    rng.shuffle(idx);
    const SplitSizes sizes = split_sizes(static_cast<Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto rank = static_cast<Index>(r);
      out.split[idx[r]] = rank < sizes.train                      ? Split::kTrain
                          : rank < sizes.train + sizes.validation ? Split::kValidation
                                                                  : Split::kTest;
    }
  }
  return out;
}

// ------------------------------------------------------------------- dataset

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  Dataset ds;
  ds.store = FeatureStore(read_id_map((root / "items.txt").string()));

  std::ifstream manifest(root / "modalities.txt");
  if (!manifest) throw Error(ErrorKind::kIo, "cannot open " + (root / "modalities.txt").string());
  std::string line;
  while (std::getline(manifest, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw Error(ErrorKind::kFormat, "modalities.txt: expected 'type<TAB>file', got '" + line + "'");
    }
    const fs::path file = fs::path(fields[1]).is_absolute() ? fs::path(fields[1]) : root / fields[1];
    MatF matrix = read_feature_matrix(file.string());
    if (matrix.rows() != ds.store.num_items()) {
      throw Error(ErrorKind::kFormat, file.string() + " has " + std::to_string(matrix.rows()) +
                                          " rows but items.txt lists " +
                                          std::to_string(ds.store.num_items()));
    }
    ds.store.add_modality(fields[0], std::move(matrix));
  }
  if (ds.store.num_modalities() == 0) throw Error(ErrorKind::kEmptyData, "modalities.txt lists no modality");
  ds.interactions = load_interactions((root / "interactions.tsv").string(), ds.store, &ds.report);
  return ds;
}

void write_dataset(const Dataset& dataset, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root);
  write_id_map(dataset.store.item_ids(), (root / "items.txt").string());
  std::string manifest;
  for (Index k = 0; k < dataset.store.num_modalities(); ++k) {
    const auto& type = dataset.store.modality_types()[static_cast<std::size_t>(k)];
    const std::string file = type + ".emfm";
    write_feature_matrix(dataset.store.features(k), (root / file).string());
    manifest += type + "\t" + file + "\n";
  }
  io::write_file_atomic((root / "modalities.txt").string(), manifest);
  write_interactions(dataset.interactions, dataset.store.item_ids(), (root / "interactions.tsv").string());
}

// ----------------------------------------------------------------- synthetic

std::string synthetic_modality_name(Index k) {
  static const char* kNames[] = {"image", "description", "review", "caption"};
  return k < 4 ? kNames[k] : "m" + std::to_string(k);
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_items <= 0 || spec.num_users <= 0 || spec.modality_dims.empty() ||
      spec.num_clusters <= 0 || spec.interactions_per_user <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "synthetic sizes must all be positive");
  }
  for (Index d : spec.modality_dims) {
    if (d <= 0) throw Error(ErrorKind::kInvalidArgument, "synthetic modality dims must be positive");
  }
  const Index n = spec.num_items;
  const Index c = std::min(spec.num_clusters, n);

  SyntheticData out;
  out.item_cluster.resize(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) out.item_cluster[static_cast<std::size_t>(j)] = j % c;
  Rng label_rng = Rng::stream(spec.seed, "synth.labels");
  label_rng.shuffle(out.item_cluster);

  std::vector<std::string> item_ids;
  for (Index j = 0; j < n; ++j) item_ids.push_back("i" + std::to_string(j));
  out.dataset.store = FeatureStore(item_ids);

  Rng feat_rng = Rng::stream(spec.seed, "synth.features");
  for (std::size_t k = 0; k < spec.modality_dims.size(); ++k) {
    const Index d = spec.modality_dims[k];
    MatF centroids(c, d);
    for (Index r = 0; r < c; ++r) {
      double norm = 0.0;
      for (Index q = 0; q < d; ++q) {
        const double v = feat_rng.normal();
        centroids(r, q) = static_cast<float>(v);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm > 0) centroids.row(r) /= static_cast<float>(norm);
    }
    MatF features(n, d);
    for (Index j = 0; j < n; ++j) {
      const Index label = out.item_cluster[static_cast<std::size_t>(j)];
      for (Index q = 0; q < d; ++q) {
        features(j, q) = static_cast<float>(centroids(label, q) + spec.noise * feat_rng.normal());
      }
    }
    out.dataset.store.add_modality(synthetic_modality_name(static_cast<Index>(k)), std::move(features));
    out.centroids.push_back(std::move(centroids));
  }

  std::vector<std::vector<Index>> cluster_items(static_cast<std::size_t>(c));
  for (Index j = 0; j < n; ++j) {
    cluster_items[static_cast<std::size_t>(out.item_cluster[static_cast<std::size_t>(j)])].push_back(j);
  }

  Rng user_rng = Rng::stream(spec.seed, "synth.users");
  auto& inter = out.dataset.interactions;
  inter.num_items = n;
  const Index per_user = std::min(spec.interactions_per_user, n);
  for (Index u = 0; u < spec.num_users; ++u) {
    inter.user_ids.push_back("u" + std::to_string(u));
    std::vector<Index> prefs;
    prefs.push_back(static_cast<Index>(user_rng.uniform_index(static_cast<std::uint64_t>(c))));
    if (c > 1 && user_rng.uniform01() < 0.5) {
      Index second;
      do {
        second = static_cast<Index>(user_rng.uniform_index(static_cast<std::uint64_t>(c)));
      } while (second == prefs[0]);
      prefs.push_back(second);
    }
    std::vector<Index> pool;
    for (Index cl : prefs) {
      const auto& items = cluster_items[static_cast<std::size_t>(cl)];
      pool.insert(pool.end(), items.begin(), items.end());
    }
    std::unordered_set<Index> chosen;
    const Index attempts_cap = 50 * per_user;
    for (Index attempt = 0; attempt < attempts_cap && static_cast<Index>(chosen.size()) < per_user; ++attempt) {
      Index item;
      if (user_rng.uniform01() < spec.preference) {
        item = pool[static_cast<std::size_t>(user_rng.uniform_index(pool.size()))];
      } else {
        item = static_cast<Index>(user_rng.uniform_index(static_cast<std::uint64_t>(n)));
      }
      if (chosen.insert(item).second) inter.pairs.push_back({u, item});
    }
    out.user_clusters.push_back(std::move(prefs));
  }
  inter.split.assign(inter.pairs.size(), Split::kUnassigned);
  return out;
}

}  // namespace emmkgr
