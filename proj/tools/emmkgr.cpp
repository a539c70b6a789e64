// emmkgr: command-line front end for graph construction, training and evaluation.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emmkgr/binary_io.hpp"
#include "emmkgr/checkpoint.hpp"
#include "emmkgr/datastore.hpp"
#include "emmkgr/error.hpp"
#include "emmkgr/evaluator.hpp"
#include "emmkgr/graph.hpp"
#include "emmkgr/hash.hpp"
#include "emmkgr/knn.hpp"
#include "emmkgr/parallel.hpp"
#include "emmkgr/recommender.hpp"
#include "emmkgr/search.hpp"
#include "emmkgr/trainer.hpp"

namespace fs = std::filesystem;
using namespace emmkgr;
using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- manifest

class Manifest {
 public:
  Manifest(std::string subcommand, std::string out_dir)
      : subcommand_(std::move(subcommand)), out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {}

  void flag(const std::string& name, json value) { flags_[name] = std::move(value); }
  void seed(std::uint64_t s) { seed_ = s; }

  void input(const std::string& path) {
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) inputs_[f.string()] = to_hex(sha256_file(f.string()));
    } else {
      inputs_[path] = to_hex(sha256_file(path));
    }
  }

  std::string output(const std::string& name) {
    const std::string path = (fs::path(out_dir_) / name).string();
    outputs_.push_back(path);
    return path;
  }

  void write() const {
    json j;
    j["subcommand"] = subcommand_;
    j["flags"] = flags_;
    j["seed"] = seed_ ? json(*seed_) : json();
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    j["duration_seconds"] = elapsed;
    io::write_file_atomic((fs::path(out_dir_) / "manifest.json").string(), j.dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  std::string out_dir_;
  std::chrono::steady_clock::time_point start_;
  json flags_ = json::object();
  std::optional<std::uint64_t> seed_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create directory " + dir + ": " + ec.message());
}

// ------------------------------------------------------------ graph on disk

struct GraphDir {
  GraphVariant variant = GraphVariant::kOriginal;
  Index knn = 10;
  std::uint64_t split_seed = 42;
  std::vector<NamedNeighborList> neighbors;
  GraphFingerprint fingerprint;
};

GraphDir read_graph_dir(const std::string& dir) {
  GraphDir g;
  const std::string meta_path = (fs::path(dir) / "graph.json").string();
  if (!fs::exists(meta_path)) throw Error(ErrorKind::kIo, "graph directory lacks graph.json: " + dir);
  try {
    const auto meta = nlohmann::json::parse(io::read_file(meta_path));
    g.variant = parse_variant(meta.at("variant").get<std::string>());
    g.knn = meta.at("knn").get<Index>();
    g.split_seed = meta.at("split_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, meta_path + ": " + e.what());
  }
  g.neighbors = read_neighbor_lists((fs::path(dir) / "neighbors.bin").string());
  g.fingerprint = read_fingerprint((fs::path(dir) / "graph.fingerprint").string());
  return g;
}

std::vector<NeighborList> order_neighbors(const FeatureStore& store, const std::vector<NamedNeighborList>& named) {
  std::vector<NeighborList> out;
  for (const auto& type : store.modality_types()) {
    const auto it = std::find_if(named.begin(), named.end(), [&](const auto& n) { return n.modality == type; });
    if (it == named.end()) throw Error(ErrorKind::kCatalogMismatch, "no neighbor list for modality '" + type + "'");
    out.push_back(it->list);
  }
  return out;
}

/// Dataset, split and graph rebuilt from a build-graph directory, with the
/// recomputed graph hash checked against the stored fingerprint.
struct Context {
  Dataset data;
  GraphDir graph_dir;
  MMGraph graph;
  Digest hash{};
};

Context load_context(const std::string& data_dir, const std::string& graph_dir, Manifest& manifest) {
  Context c;
  manifest.input(data_dir);
  manifest.input(graph_dir);
  c.data = load_dataset(data_dir);
  c.graph_dir = read_graph_dir(graph_dir);
  c.data.interactions = split_interactions(c.data.interactions, c.graph_dir.split_seed);
  const auto lists = order_neighbors(c.data.store, c.graph_dir.neighbors);
  c.graph = assemble_graph(c.data.store, lists, c.data.interactions, c.graph_dir.variant);
  c.hash = fingerprint(c.graph, lists).hash;
  if (c.hash != c.graph_dir.fingerprint.hash) {
    throw Error(ErrorKind::kFingerprintMismatch, "graph rebuilt from " + data_dir + " hashes to " + to_hex(c.hash) +
                                                     " but " + graph_dir + " records " +
                                                     to_hex(c.graph_dir.fingerprint.hash));
  }
  return c;
}

struct Trained {
  Checkpoint ckpt;
  ParamSet<float> params;
  EmbeddingSnapshot snapshot;
};

Trained load_trained(const Context& c, const std::string& path, bool allow_mismatch, Manifest& manifest) {
  manifest.input(path);
  Trained t;
  t.ckpt = load_checkpoint(path, c.hash, allow_mismatch);
  const ModelShape shape = shape_of(c.data.store, c.data.interactions.num_users(), t.ckpt.config.dim,
                                    t.ckpt.config.separate_item_tables);
  t.params = params_from_checkpoint(t.ckpt, shape);
  TrainConfig config = t.ckpt.config;
  config.variant = c.graph.variant;
  const TrainInputs inputs{&c.data.store, &c.graph, &c.data.interactions};
  t.snapshot = make_snapshot(inputs, config, t.params);
  return t;
}

std::vector<Index> parse_cutoffs(const std::vector<Index>& ks) {
  for (Index k : ks) {
    if (k <= 0) throw Error(ErrorKind::kInvalidArgument, "cutoffs must be positive");
  }
  return ks;
}

void write_json(const std::string& path, const json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

MatF unified_items(const EmbeddingSnapshot& s) {
  return s.has_multimodal() ? fuse_items(s.item_interaction, s.item_multimodal) : s.item_interaction;
}

// ---------------------------------------------------------------- options

struct Options {
  std::string data, graph, out, checkpoint, queries;
  std::string variant = "original";
  std::string split = "test";
  TrainConfig train;
  std::vector<Index> cutoffs = {10, 20};
  Index top = 10;
  Index clusters = 50;
  int threads = 0;
  bool allow_mismatch = false;
  bool baseline = false;
  bool per_entity = false;
  SyntheticSpec synth;
  Index fine_queries = 50;
  Index coarse_queries = 20;
  double query_noise = 0.05;
};

// --------------------------------------------------------------- commands

int cmd_synth(const Options& o) {
  ensure_dir(o.out);
  Manifest m("synth", o.out);
  m.seed(o.synth.seed);
  m.flag("items", o.synth.num_items);
  m.flag("users", o.synth.num_users);
  m.flag("dims", o.synth.modality_dims);
  m.flag("clusters", o.synth.num_clusters);
  m.flag("interactions_per_user", o.synth.interactions_per_user);
  m.flag("preference", o.synth.preference);
  m.flag("noise", o.synth.noise);
  const SyntheticData data = generate_synthetic(o.synth);
  write_dataset(data.dataset, o.out);
  for (const auto& f : {"items.txt", "modalities.txt", "interactions.tsv"}) m.output(f);
  for (const auto& t : data.dataset.store.modality_types()) m.output(t + ".emfm");

  std::string labels;
  for (Index j = 0; j < data.dataset.store.num_items(); ++j) {
    labels += data.dataset.store.item_ids()[static_cast<std::size_t>(j)] + "\t" +
              std::to_string(data.item_cluster[static_cast<std::size_t>(j)]) + "\n";
  }
  io::write_file_atomic(m.output("labels.tsv"), labels);
  write_queries(generate_synthetic_queries(data, o.fine_queries, o.coarse_queries, o.query_noise, o.synth.seed),
                m.output("queries.jsonl"));
  m.write();
  std::printf("wrote %lld items, %lld users, %zu interactions to %s\n",
              static_cast<long long>(data.dataset.store.num_items()),
              static_cast<long long>(data.dataset.interactions.num_users()), data.dataset.interactions.pairs.size(),
              o.out.c_str());
  return 0;
}

int cmd_build_graph(const Options& o) {
  const GraphVariant variant = parse_variant(o.variant);
  ensure_dir(o.out);
  Manifest m("build-graph", o.out);
  m.seed(o.train.seed);
  m.flag("variant", o.variant);
  m.flag("knn", o.train.knn);
  m.input(o.data);

  Dataset data = load_dataset(o.data);
  data.interactions = split_interactions(data.interactions, o.train.seed);
  std::vector<NamedNeighborList> named;
  std::vector<NeighborList> lists;
  for (Index k = 0; k < data.store.num_modalities(); ++k) {
    KnnReport report;
    lists.push_back(topn_cosine(data.store.features(k), o.train.knn, &report));
    if (report.clamped) std::fprintf(stderr, "warning: %s\n", report.warning.c_str());
    named.push_back({data.store.modality_types()[static_cast<std::size_t>(k)], lists.back()});
  }
  const MMGraph graph = assemble_graph(data.store, lists, data.interactions, variant);
  const GraphFingerprint fp = fingerprint(graph, lists);

  write_neighbor_lists(named, m.output("neighbors.bin"));
  write_fingerprint(fp, m.output("graph.fingerprint"));
  json meta;
  meta["variant"] = to_string(variant);
  meta["knn"] = o.train.knn;
  meta["split_seed"] = o.train.seed;
  write_json(m.output("graph.json"), meta);
  m.write();
  std::fputs(fp.render().c_str(), stdout);
  return 0;
}

int run_grad_check(const Options& o) {
  TrainConfig config = o.train;
  config.dim = 8;
  config.variant = parse_variant(o.variant);
  const SyntheticData fixture = grad_check_fixture(config.seed);
  const auto& store = fixture.dataset.store;
  const auto& inter = fixture.dataset.interactions;
  std::vector<NeighborList> lists;
  for (Index k = 0; k < store.num_modalities(); ++k) lists.push_back(topn_cosine(store.features(k), 3));
  const MMGraph graph = assemble_graph(store, lists, inter, config.variant);
  const GradCheckReport report = gradient_check({&store, &graph, &inter}, config);
  std::fputs(report.table().c_str(), stdout);
  if (!o.out.empty()) {
    ensure_dir(o.out);
    Manifest m("train", o.out);
    m.seed(config.seed);
    m.flag("grad_check", true);
    m.flag("variant", o.variant);
    json j;
    j["passed"] = report.passed();
    j["coordinates"] = report.coordinates;
    j["within_tolerance"] = report.within_tolerance;
    j["max_relative_error"] = report.max_relative_error;
    write_json(m.output("grad_check.json"), j);
    m.write();
  }
  std::printf("gradient check %s\n", report.passed() ? "passed" : "FAILED");
  return report.passed() ? 0 : 3;
}

int cmd_train(const Options& o) {
  if (o.train.grad_check) return run_grad_check(o);
  if (o.data.empty() || o.graph.empty() || o.out.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "train needs --data, --graph and --out");
  }
  ensure_dir(o.out);
  Manifest m("train", o.out);
  m.seed(o.train.seed);
  const json flags = o.train.to_json();
  for (const auto& [k, v] : flags.items()) m.flag(k, v);
  const Context c = load_context(o.data, o.graph, m);
  TrainConfig config = o.train;
  config.variant = c.graph.variant;
  config.knn = c.graph.knn;

  std::string metrics;
  const TrainResult result = train({&c.data.store, &c.graph, &c.data.interactions}, config,
                                   [&metrics](const EpochRecord& r) {
                                     const std::string line = r.to_json().dump();
                                     metrics += line + "\n";
                                     std::puts(line.c_str());
                                   });
  io::write_file_atomic(m.output("metrics.jsonl"), metrics);
  save_checkpoint(make_checkpoint(result.params, config, c.hash, result.best_epoch, result.best_val_recall20),
                  m.output("checkpoint.emkg"));
  m.write();
  std::printf("best epoch %lld%s\n", static_cast<long long>(result.best_epoch),
              result.early_stopped ? " (early stop)" : "");
  return 0;
}

Split parse_split(const std::string& s) {
  if (s == "test") return Split::kTest;
  if (s == "validation") return Split::kValidation;
  throw Error(ErrorKind::kInvalidArgument, "--split must be test or validation");
}

int cmd_eval_rec(const Options& o) {
  ensure_dir(o.out);
  Manifest m("eval-rec", o.out);
  m.flag("split", o.split);
  m.flag("cutoffs", o.cutoffs);
  m.flag("baseline", o.baseline);
  const Context c = load_context(o.data, o.graph, m);
  const Trained t = load_trained(c, o.checkpoint, o.allow_mismatch, m);
  std::vector<RankedList> lists;
  const MetricReport report = evaluate_recommendations(t.snapshot, c.data.interactions, parse_split(o.split),
                                                       parse_cutoffs(o.cutoffs), o.baseline, &lists);
  write_json(m.output("rec_metrics.json"), report.to_json(o.per_entity));
  write_ranked_lists(lists, c.data.interactions.user_ids, c.data.store.item_ids(), m.output("rankings.tsv"));
  m.write();
  std::fputs(report.table().c_str(), stdout);
  return 0;
}

std::vector<SearchResult> run_search(const std::vector<Query>& queries, const Context& c, const Trained& t, Index top,
                                     bool baseline) {
  if (!baseline && !t.snapshot.has_multimodal()) {
    throw Error(ErrorKind::kInvalidArgument, "search needs multimodal item embeddings; checkpoint has none");
  }
  std::vector<SearchResult> results;
  for (const auto& q : queries) {
    if (baseline) {
      resolve_query(q, c.data.store);
      results.push_back(search_baseline({q.vector.data(), static_cast<std::size_t>(q.vector.size())}, c.data.store, top));
    } else {
      const VecF h = encode_query(q, c.data.store, t.params);
      results.push_back(search_topn({h.data(), static_cast<std::size_t>(h.size())}, t.snapshot.item_multimodal, top));
    }
    if (results.back().clamped) std::fprintf(stderr, "warning: query %s: --top clamped to item count\n", q.id.c_str());
  }
  return results;
}

int cmd_search(const Options& o) {
  ensure_dir(o.out);
  Manifest m("search", o.out);
  m.flag("top", o.top);
  m.flag("baseline", o.baseline);
  const Context c = load_context(o.data, o.graph, m);
  const Trained t = load_trained(c, o.checkpoint, o.allow_mismatch, m);
  m.input(o.queries);
  const auto queries = read_queries(o.queries);
  const auto results = run_search(queries, c, t, o.top, o.baseline);
  write_search_results(queries, results, c.data.store.item_ids(), m.output("search_results.tsv"));
  m.write();
  std::printf("%zu queries ranked\n", queries.size());
  return 0;
}

int cmd_eval_search(const Options& o) {
  ensure_dir(o.out);
  Manifest m("eval-search", o.out);
  m.flag("cutoffs", o.cutoffs);
  const Context c = load_context(o.data, o.graph, m);
  const Trained t = load_trained(c, o.checkpoint, o.allow_mismatch, m);
  m.input(o.queries);
  const auto queries = read_queries(o.queries);
  const auto cutoffs = parse_cutoffs(o.cutoffs);
  const Index depth = *std::max_element(cutoffs.begin(), cutoffs.end());

  json out;
  const auto unified = evaluate_search(queries, run_search(queries, c, t, depth, false), c.data.store, cutoffs, "unified");
  const auto raw = evaluate_search(queries, run_search(queries, c, t, depth, true), c.data.store, cutoffs, "vector_baseline");
  out["unified"] = unified.to_json(o.per_entity);
  out["vector_baseline"] = raw.to_json(o.per_entity);
  write_json(m.output("search_metrics.json"), out);
  m.write();
  std::fputs(unified.table().c_str(), stdout);
  std::fputs(raw.table().c_str(), stdout);
  return 0;
}

int cmd_cluster(const Options& o) {
  ensure_dir(o.out);
  Manifest m("cluster", o.out);
  m.flag("clusters", o.clusters);
  m.seed(o.train.seed);
  const Context c = load_context(o.data, o.graph, m);
  const Trained t = load_trained(c, o.checkpoint, o.allow_mismatch, m);

  std::map<std::string, MatF> sources;
  sources["unified"] = unified_items(t.snapshot);
  for (Index k = 0; k < c.data.store.num_modalities(); ++k) {
    sources["raw/" + c.data.store.modality_types()[static_cast<std::size_t>(k)]] = c.data.store.features(k);
  }
  json out = json::object();
  for (const auto& [name, matrix] : sources) {
    const KMeansResult km = kmeans(matrix, o.clusters, o.train.seed);
    const CohesionReport report = cohesion({{name, matrix}}, km.assignments);
    out[name] = report.to_json()["sources"][name];
    out[name]["inertia"] = km.inertia;
    out[name]["iterations"] = km.iterations;
    const auto& e = report.sources.at(name);
    auto fmt = [](const std::optional<double>& v) {
      char buf[32];
      if (!v) return std::string("missing");
      std::snprintf(buf, sizeof(buf), "%.4f", *v);
      return std::string(buf);
    };
    std::printf("%-24s intra %-8s inter %-8s gap %s\n", name.c_str(), fmt(e.intra).c_str(), fmt(e.inter).c_str(),
                fmt(e.gap).c_str());
  }
  write_json(m.output("cohesion.json"), out);
  m.write();
  return 0;
}

int cmd_export(const Options& o) {
  ensure_dir(o.out);
  Manifest m("export", o.out);
  m.flag("clusters", o.clusters);
  m.seed(o.train.seed);
  const Context c = load_context(o.data, o.graph, m);
  const Trained t = load_trained(c, o.checkpoint, o.allow_mismatch, m);
  const MatF items = unified_items(t.snapshot);
  write_feature_matrix(items, m.output("item_embeddings.emfm"));
  write_id_map(c.data.store.item_ids(), m.output("item_embeddings.ids"));
  const KMeansResult km = kmeans(items, std::min<Index>(o.clusters, items.rows()), o.train.seed);
  std::string labels;
  for (Index j = 0; j < items.rows(); ++j) {
    labels += c.data.store.item_ids()[static_cast<std::size_t>(j)] + "\t" +
              std::to_string(km.assignments[static_cast<std::size_t>(j)]) + "\n";
  }
  io::write_file_atomic(m.output("clusters.tsv"), labels);
  m.write();
  std::printf("exported %lld item embeddings of dim %lld\n", static_cast<long long>(items.rows()),
              static_cast<long long>(items.cols()));
  return 0;
}

// ------------------------------------------------------------------ wiring

void add_threads(CLI::App* app, Options& o) {
  app->add_option("--threads", o.threads, "worker cap (default: EMMKGR_THREADS or all cores)");
}

void add_eval_inputs(CLI::App* app, Options& o) {
  app->add_option("--data", o.data, "dataset directory")->required();
  app->add_option("--graph", o.graph, "build-graph output directory")->required();
  app->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  app->add_option("--out", o.out, "output directory")->required();
  app->add_flag("--allow-fingerprint-mismatch", o.allow_mismatch, "load a checkpoint trained on another graph");
  add_threads(app, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"E-MMKG builder, recommender and product search"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate a planted-cluster dataset");
  synth->add_option("--out", o.out, "output directory")->required();
  synth->add_option("--items", o.synth.num_items);
  synth->add_option("--users", o.synth.num_users);
  synth->add_option("--dims", o.synth.modality_dims, "per-modality feature dims")->delimiter(',');
  synth->add_option("--clusters", o.synth.num_clusters);
  synth->add_option("--interactions", o.synth.interactions_per_user, "interactions per user");
  synth->add_option("--preference", o.synth.preference);
  synth->add_option("--noise", o.synth.noise);
  synth->add_option("--seed", o.synth.seed);
  synth->add_option("--fine-queries", o.fine_queries);
  synth->add_option("--coarse-queries", o.coarse_queries);
  synth->add_option("--query-noise", o.query_noise);

  auto* build = app.add_subcommand("build-graph", "kNN graphs, assembly and fingerprint");
  build->add_option("--data", o.data, "dataset directory")->required();
  build->add_option("--out", o.out, "output directory")->required();
  build->add_option("--variant", o.variant, "original | interaction | inter_modal | item_item");
  build->add_option("--knn", o.train.knn, "neighbors per modality node");
  build->add_option("--seed", o.train.seed, "interaction split seed");
  add_threads(build, o);

  auto* trn = app.add_subcommand("train", "joint training");
  trn->add_option("--data", o.data, "dataset directory");
  trn->add_option("--graph", o.graph, "build-graph output directory");
  trn->add_option("--out", o.out, "output directory");
  trn->add_option("--variant", o.variant, "variant for --grad-check");
  trn->add_option("--dim", o.train.dim);
  trn->add_option("--layers", o.train.layers);
  trn->add_option("--lambda-kg", o.train.lambda_kg);
  trn->add_option("--lr", o.train.learning_rate);
  trn->add_option("--weight-decay", o.train.weight_decay);
  trn->add_option("--bpr-batch", o.train.bpr_batch);
  trn->add_option("--kg-batch", o.train.kg_batch);
  trn->add_option("--kg-negatives", o.train.kg_negatives);
  trn->add_option("--epochs", o.train.epochs);
  trn->add_option("--patience", o.train.patience);
  trn->add_option("--seed", o.train.seed);
  trn->add_flag("--zero-modalities", o.train.zero_modalities, "drop the knowledge-graph branch");
  trn->add_flag("--separate-item-tables", o.train.separate_item_tables);
  trn->add_flag("--grad-check", o.train.grad_check, "finite-difference check on a small fixture");
  add_threads(trn, o);

  auto* eval_rec = app.add_subcommand("eval-rec", "recommendation metrics");
  add_eval_inputs(eval_rec, o);
  eval_rec->add_option("--k", o.cutoffs, "cutoffs")->delimiter(',');
  eval_rec->add_option("--split", o.split, "test | validation");
  eval_rec->add_flag("--baseline", o.baseline, "interaction-only item embeddings");
  eval_rec->add_flag("--per-entity", o.per_entity);

  auto* search = app.add_subcommand("search", "rank items for query vectors");
  add_eval_inputs(search, o);
  search->add_option("--queries", o.queries, "JSON lines query file")->required();
  search->add_option("--top", o.top);
  search->add_flag("--baseline", o.baseline, "raw-vector retrieval");

  auto* eval_search = app.add_subcommand("eval-search", "search metrics against the raw-vector baseline");
  add_eval_inputs(eval_search, o);
  eval_search->add_option("--queries", o.queries, "JSON lines query file")->required();
  eval_search->add_option("--k", o.cutoffs, "cutoffs")->delimiter(',');
  eval_search->add_flag("--per-entity", o.per_entity);

  auto* cluster = app.add_subcommand("cluster", "k-means and intra/inter cohesion");
  add_eval_inputs(cluster, o);
  cluster->add_option("--clusters", o.clusters);
  cluster->add_option("--seed", o.train.seed);

  auto* exp = app.add_subcommand("export", "item embeddings and cluster labels");
  add_eval_inputs(exp, o);
  exp->add_option("--clusters", o.clusters);
  exp->add_option("--seed", o.train.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (o.threads > 0) set_thread_count(o.threads);
    if (*synth) return cmd_synth(o);
    if (*build) return cmd_build_graph(o);
    if (*trn) return cmd_train(o);
    if (*eval_rec) return cmd_eval_rec(o);
    if (*search) return cmd_search(o);
    if (*eval_search) return cmd_eval_search(o);
    if (*cluster) return cmd_cluster(o);
    if (*exp) return cmd_export(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
