#include "emmkgr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "emmkgr/error.hpp"

namespace emmkgr {

// ------------------------------------------------------------------ config

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::kInvalidArgument, "invalid training config: " + what);
  };
  require(dim > 0 && dim % 2 == 0, "dim must be positive and even");
  require(layers >= 0, "layers must be >= 0");
  require(knn > 0, "knn must be positive");
  require(lambda_kg >= 0.0 && std::isfinite(lambda_kg), "lambda_kg must be >= 0");
  require(learning_rate > 0.0, "learning rate must be positive");
  require(weight_decay >= 0.0, "weight decay must be >= 0");
  require(bpr_batch > 0 && kg_batch > 0, "batch sizes must be positive");
  require(kg_negatives > 0, "kg_negatives must be positive");
  require(epochs > 0, "epochs must be positive");
  require(patience > 0, "patience must be positive");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["dim"] = dim;
  j["layers"] = layers;
  j["knn"] = knn;
  j["lambda_kg"] = lambda_kg;
  j["learning_rate"] = learning_rate;
  j["weight_decay"] = weight_decay;
  j["bpr_batch"] = bpr_batch;
  j["kg_batch"] = kg_batch;
  j["kg_negatives"] = kg_negatives;
  j["epochs"] = epochs;
  j["patience"] = patience;
  j["seed"] = seed;
  j["variant"] = to_string(variant);
  j["zero_modalities"] = zero_modalities;
  j["separate_item_tables"] = separate_item_tables;
  j["grad_check"] = grad_check;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.dim = j.at("dim").get<Index>();
    c.layers = j.at("layers").get<Index>();
    c.knn = j.at("knn").get<Index>();
    c.lambda_kg = j.at("lambda_kg").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.bpr_batch = j.at("bpr_batch").get<Index>();
    c.kg_batch = j.at("kg_batch").get<Index>();
    c.kg_negatives = j.at("kg_negatives").get<Index>();
    c.epochs = j.at("epochs").get<Index>();
    c.patience = j.at("patience").get<Index>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.zero_modalities = j.at("zero_modalities").get<bool>();
    c.separate_item_tables = j.at("separate_item_tables").get<bool>();
    c.grad_check = j.at("grad_check").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("training config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------- pipeline

namespace {

template <typename Scalar>
double squared_norm(const ParamSet<Scalar>& p) {
  auto sq = [](const auto& m) { return m.template cast<double>().squaredNorm(); };
  double total = sq(p.item_embedding) + sq(p.user_embedding) + sq(p.interaction_item_embedding) +
                 sq(p.relation_phase);
  for (const auto& w : p.projection_weight) total += sq(w);
  for (const auto& b : p.projection_bias) total += sq(b);
  return total;
}

/// y += a * x, tensor by tensor.
template <typename Scalar>
void add_scaled(ParamSet<Scalar>& y, Scalar a, const ParamSet<Scalar>& x) {
  y.item_embedding += a * x.item_embedding;
  y.user_embedding += a * x.user_embedding;
  y.interaction_item_embedding += a * x.interaction_item_embedding;
  y.relation_phase += a * x.relation_phase;
  for (std::size_t k = 0; k < x.projection_weight.size(); ++k) y.projection_weight[k] += a * x.projection_weight[k];
  for (std::size_t k = 0; k < x.projection_bias.size(); ++k) y.projection_bias[k] += a * x.projection_bias[k];
}

}  // namespace

template <typename Scalar>
Pipeline<Scalar>::Pipeline(const FeatureStore& store, const MMGraph* graph, const InteractionGraph& interactions,
                           const TrainConfig& config)
    : graph_(config.zero_modalities ? nullptr : graph),
      num_users_(interactions.num_users),
      num_items_(interactions.num_items),
      layers_(config.layers),
      lambda_kg_(static_cast<Scalar>(config.lambda_kg)),
      weight_decay_(static_cast<Scalar>(config.weight_decay)) {
  for (Index k = 0; k < store.num_modalities(); ++k) features_.push_back(store.features(k).cast<Scalar>());
  in_op_ = normalize(interactions.adjacency).template as<Scalar>();
  if (graph_) {
    if (graph_->num_items != num_items_) {
      throw Error(ErrorKind::kInvalidArgument, "knowledge graph and interaction graph disagree on item count");
    }
    mm_op_ = graph_operator(*graph_).template as<Scalar>();
  }
}

template <typename Scalar>
typename Pipeline<Scalar>::Forward Pipeline<Scalar>::forward(const ParamSet<Scalar>& params) const {
  Forward f;
  if (graph_) {
    f.z = project(features_, params);
    f.h_mm = propagate(mm_op_, layer0_for_graph(*graph_, params, f.z), layers_).mean;
  }
  f.h_in = propagate(in_op_, layer0_for_interactions(params), layers_).mean;
  return f;
}

template <typename Scalar>
LossTerms Pipeline<Scalar>::evaluate(const ParamSet<Scalar>& params, std::span<const BprTriple> bpr,
                                     std::span<const KgSample> kg, ParamSet<Scalar>* grad) const {
  const Index u = num_users_;
  const Index n = num_items_;
  const Index d = params.dim();
  const Forward f = forward(params);

  const Mat<Scalar> users = f.h_in.topRows(u);
  Mat<Scalar> items = f.h_in.bottomRows(n);
  if (graph_) items += f.h_mm.topRows(n);

  LossTerms terms;
  Mat<Scalar> g_users, g_items, g_mm;
  if (grad) {
    *grad = params.zeros_like();
    g_users = Mat<Scalar>::Zero(u, d);
    g_items = Mat<Scalar>::Zero(n, d);
  }
  if (!bpr.empty()) {
    const Scalar scale = Scalar(1) / static_cast<Scalar>(bpr.size());
    terms.bpr = static_cast<double>(bpr_loss(bpr, users, items, grad ? &g_users : nullptr,
                                             grad ? &g_items : nullptr, scale));
  }
  const bool use_kg = graph_ && lambda_kg_ > Scalar(0) && !kg.empty();
  if (grad && graph_) g_mm = Mat<Scalar>::Zero(f.h_mm.rows(), d);
  if (use_kg) {
    const Scalar scale = lambda_kg_ / static_cast<Scalar>(kg.size());
    terms.kg = static_cast<double>(kg_loss(kg, f.h_mm, params.relation_phase, grad ? &g_mm : nullptr,
                                           grad ? &grad->relation_phase : nullptr, scale));
  }

  terms.reg = static_cast<double>(weight_decay_) * squared_norm(params);
  if (!grad) return terms;

  // Interaction graph: adjoint propagation of [g_users; g_items].
  {
    Mat<Scalar> g_h(u + n, d);
    g_h.topRows(u) = g_users;
    g_h.bottomRows(n) = g_items;
    const Mat<Scalar> g_e0 = propagate(in_op_, g_h, layers_).mean;
    grad->user_embedding += g_e0.topRows(u);
    if (params.separate_item_tables()) {
      grad->interaction_item_embedding += g_e0.bottomRows(n);
    } else {
      grad->item_embedding += g_e0.bottomRows(n);
    }
  }

  if (graph_) {
    g_mm.topRows(n) += g_items;  // fusion
    const Mat<Scalar> g_e0 = propagate(mm_op_, g_mm, layers_).mean;
    const Index t = params.num_modalities();
    std::vector<Mat<Scalar>> g_z(static_cast<std::size_t>(t));
    if (graph_->variant == GraphVariant::kItemItem) {
      grad->item_embedding += g_e0;
      for (auto& block : g_z) block = g_e0 / static_cast<Scalar>(t);
    } else {
      grad->item_embedding += g_e0.topRows(n);
      for (Index k = 0; k < t; ++k) g_z[static_cast<std::size_t>(k)] = g_e0.middleRows((k + 1) * n, n);
      if (graph_->variant == GraphVariant::kInteraction) {
        grad->user_embedding += g_e0.middleRows((1 + t) * n, u);
      }
    }
    for (Index k = 0; k < t; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      grad->projection_weight[kk] += features_[kk].transpose() * g_z[kk];
      grad->projection_bias[kk] += g_z[kk].colwise().sum().transpose();
    }
  }

  if (weight_decay_ > Scalar(0)) add_scaled(*grad, Scalar(2) * weight_decay_, params);
  return terms;
}

template <typename Scalar>
EmbeddingSnapshot Pipeline<Scalar>::snapshot(const ParamSet<Scalar>& params) const {
  const Forward f = forward(params);
  EmbeddingSnapshot s;
  s.user = f.h_in.topRows(num_users_).template cast<float>();
  s.item_interaction = f.h_in.bottomRows(num_items_).template cast<float>();
  if (graph_) {
    s.item_multimodal = f.h_mm.topRows(num_items_).template cast<float>();
    s.node_multimodal = f.h_mm.template cast<float>();
  }
  return s;
}

// ------------------------------------------------------------------- adam

template <typename Scalar>
Adam<Scalar>::Adam(const ParamSet<Scalar>& like, double learning_rate, double beta1, double beta2, double epsilon)
    : m_(like.zeros_like()), v_(like.zeros_like()), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

template <typename Scalar>
void Adam<Scalar>::step(ParamSet<Scalar>& params, ParamSet<Scalar>& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto p = params.groups();
  auto g = grad.groups();
  auto m = m_.groups();
  auto v = v_.groups();
  if (p.size() != g.size()) throw Error(ErrorKind::kInvalidArgument, "Adam: gradient layout differs from params");
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (Index c = 0; c < p[i].size(); ++c) {
      const double gc = static_cast<double>(g[i].data[c]);
      const double mc = beta1_ * static_cast<double>(m[i].data[c]) + (1.0 - beta1_) * gc;
      const double vc = beta2_ * static_cast<double>(v[i].data[c]) + (1.0 - beta2_) * gc * gc;
      m[i].data[c] = static_cast<Scalar>(mc);
      v[i].data[c] = static_cast<Scalar>(vc);
      const double update = lr_ * (mc / c1) / (std::sqrt(vc / c2) + eps_);
      p[i].data[c] = static_cast<Scalar>(static_cast<double>(p[i].data[c]) - update);
    }
  }
}

template <typename Scalar>
void check_finite(ParamSet<Scalar>& grad) {
  for (auto& g : grad.groups()) {
    for (Index i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g.data[i])) {
        throw Error(ErrorKind::kNumeric, "non-finite gradient in parameter group '" + g.name + "' at element " +
                                             std::to_string(i));
      }
    }
  }
}

template class Pipeline<float>;
template class Pipeline<double>;
template class Adam<float>;
template class Adam<double>;
template void check_finite<float>(ParamSet<float>&);
template void check_finite<double>(ParamSet<double>&);

// ------------------------------------------------------------------ train

nlohmann::ordered_json EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["loss"] = loss.total();
  j["bpr"] = loss.bpr;
  j["kg"] = loss.kg;
  j["reg"] = loss.reg;
  j["steps"] = steps;
  j["skipped_users"] = skipped_users;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  j["val_recall@20"] = opt(val_recall20);
  j["val_recall@10"] = opt(val_recall10);
  j["val_ndcg@20"] = opt(val_ndcg20);
  return j;
}

namespace {

const MMGraph* active_graph(const TrainInputs& inputs, const TrainConfig& config) {
  if (config.zero_modalities) return nullptr;
  if (!inputs.graph) throw Error(ErrorKind::kInvalidArgument, "training needs a knowledge graph unless modalities are zeroed");
  return inputs.graph;
}

void check_inputs(const TrainInputs& inputs) {
  if (!inputs.store || !inputs.interactions) throw Error(ErrorKind::kInvalidArgument, "train: missing inputs");
  const auto& data = *inputs.interactions;
  if (data.split.size() != data.pairs.size()) throw Error(ErrorKind::kInvalidArgument, "train: interactions not split");
  if (std::none_of(data.split.begin(), data.split.end(), [](Split s) { return s == Split::kTrain; })) {
    throw Error(ErrorKind::kEmptyData, "train: the train split is empty");
  }
}

std::vector<KgSample> sample_kg_batch(const MMGraph& graph, Index size, Index negatives, Rng& rng) {
  std::vector<KgSample> batch;
  if (graph.triples.empty()) return batch;
  batch.reserve(static_cast<std::size_t>(size * negatives));
  for (Index s = 0; s < size; ++s) {
    const Triple& t = graph.triples[static_cast<std::size_t>(rng.uniform_index(graph.triples.size()))];
    for (Index neg : sample_kg_negatives(graph, t, negatives, rng)) batch.push_back({t, neg});
  }
  return batch;
}

}  // namespace

TrainResult train(const TrainInputs& inputs, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  check_inputs(inputs);
  const auto& data = *inputs.interactions;
  const MMGraph* graph = active_graph(inputs, config);

  const InteractionGraph ig = assemble_interaction_graph(data);
  const Pipeline<float> pipeline(*inputs.store, graph, ig, config);

  Rng init_rng = Rng::stream(config.seed, "init");
  ParamSet<float> params =
      init_params<float>(shape_of(*inputs.store, data.num_users(), config.dim, config.separate_item_tables), init_rng);
  Adam<float> adam(params, config.learning_rate);
  Rng rng = Rng::stream(config.seed, "sampling");

  std::vector<Interaction> train_pairs;
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    if (data.split[i] == Split::kTrain) train_pairs.push_back(data.pairs[i]);
  }
  const BprNegativeSampler sampler(data.items_by_user(Split::kTrain), data.num_items);
  const bool has_validation =
      std::any_of(data.split.begin(), data.split.end(), [](Split s) { return s == Split::kValidation; });

  TrainResult result;
  result.params = params;
  Index bad_epochs = 0;
  ParamSet<float> grad;
  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(train_pairs);
    EpochRecord record;
    record.epoch = epoch;
    for (std::size_t start = 0; start < train_pairs.size(); start += static_cast<std::size_t>(config.bpr_batch)) {
      const std::size_t stop = std::min(train_pairs.size(), start + static_cast<std::size_t>(config.bpr_batch));
      std::vector<BprTriple> bpr;
      for (std::size_t i = start; i < stop; ++i) {
        const auto neg = sampler.sample(train_pairs[i].user, 1, rng);
        if (!neg) {
          ++record.skipped_users;
          continue;
        }
        bpr.push_back({train_pairs[i].user, train_pairs[i].item, neg->front()});
      }
      std::vector<KgSample> kg;
      if (graph && config.lambda_kg > 0.0) kg = sample_kg_batch(*graph, config.kg_batch, config.kg_negatives, rng);

      const LossTerms terms = pipeline.evaluate(params, bpr, kg, &grad);
      if (!std::isfinite(terms.total())) throw Error(ErrorKind::kNumeric, "non-finite loss at epoch " + std::to_string(epoch));
      check_finite(grad);
      adam.step(params, grad);
      record.loss.bpr += terms.bpr;
      record.loss.kg += terms.kg;
      record.loss.reg += terms.reg;
      ++record.steps;
    }
    if (record.steps > 0) {
      const double s = static_cast<double>(record.steps);
      record.loss.bpr /= s;
      record.loss.kg /= s;
      record.loss.reg /= s;
    }

    bool stop = false;
    if (has_validation) {
      const MetricReport val = evaluate_recommendations(pipeline.snapshot(params), data, Split::kValidation, {10, 20});
      record.val_recall10 = val.at(10).recall;
      record.val_recall20 = val.at(20).recall;
      record.val_ndcg20 = val.at(20).ndcg;
      if (!result.best_val_recall20 || *record.val_recall20 > *result.best_val_recall20) {
        result.best_val_recall20 = record.val_recall20;
        result.best_val_recall10 = record.val_recall10;
        result.best_epoch = epoch;
        result.params = params;
        bad_epochs = 0;
      } else if (++bad_epochs >= config.patience) {
        stop = true;
      }
    } else {
      result.params = params;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
    if (stop) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

EmbeddingSnapshot make_snapshot(const TrainInputs& inputs, const TrainConfig& config, const ParamSet<float>& params) {
  check_inputs(inputs);
  const InteractionGraph ig = assemble_interaction_graph(*inputs.interactions);
  const Pipeline<float> pipeline(*inputs.store, active_graph(inputs, config), ig, config);
  return pipeline.snapshot(params);
}

// ------------------------------------------------------------- grad check

bool GradCheckReport::passed() const {
  if (coordinates == 0) return false;
  return static_cast<double>(within_tolerance) >= 0.99 * static_cast<double>(coordinates) &&
         max_relative_error <= 1e-2;
}

std::string GradCheckReport::table() const {
  std::string out = "group                              coords  within  max_rel\n";
  char buf[160];
  for (const auto& g : groups) {
    std::snprintf(buf, sizeof(buf), "%-34s %6lld  %6lld  %.3e\n", g.name.c_str(), static_cast<long long>(g.coordinates),
                  static_cast<long long>(g.within_tolerance), g.max_relative_error);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-34s %6lld  %6lld  %.3e\n", "total", static_cast<long long>(coordinates),
                static_cast<long long>(within_tolerance), max_relative_error);
  out += buf;
  return out;
}

GradCheckReport gradient_check(const TrainInputs& inputs, const TrainConfig& config, double step) {
  config.validate();
  check_inputs(inputs);
  const auto& data = *inputs.interactions;
  const MMGraph* graph = active_graph(inputs, config);
  const InteractionGraph ig = assemble_interaction_graph(data);
  const Pipeline<double> pipeline(*inputs.store, graph, ig, config);

  Rng init_rng = Rng::stream(config.seed, "init");
  ParamSet<double> params = init_params<double>(
      shape_of(*inputs.store, data.num_users(), config.dim, config.separate_item_tables), init_rng);

  Rng rng = Rng::stream(config.seed, "sampling");
  const BprNegativeSampler sampler(data.items_by_user(Split::kTrain), data.num_items);
  std::vector<BprTriple> bpr;
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    if (data.split[i] != Split::kTrain) continue;
    const auto neg = sampler.sample(data.pairs[i].user, 1, rng);
    if (neg) bpr.push_back({data.pairs[i].user, data.pairs[i].item, neg->front()});
  }
  std::vector<KgSample> kg;
  if (graph) kg = sample_kg_batch(*graph, std::min<Index>(config.kg_batch, 64), config.kg_negatives, rng);

  ParamSet<double> analytic;
  pipeline.evaluate(params, bpr, kg, &analytic);

  GradCheckReport report;
  auto p_groups = params.groups();
  auto a_groups = analytic.groups();
  for (std::size_t gi = 0; gi < p_groups.size(); ++gi) {
    GroupCheck check;
    check.name = p_groups[gi].name;
    for (Index c = 0; c < p_groups[gi].size(); ++c) {
      double& x = p_groups[gi].data[c];
      const double saved = x;
      x = saved + step;
      const double up = pipeline.evaluate(params, bpr, kg, nullptr).total();
      x = saved - step;
      const double down = pipeline.evaluate(params, bpr, kg, nullptr).total();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = a_groups[gi].data[c];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++check.coordinates;
      if (rel <= 1e-3) ++check.within_tolerance;
      check.max_relative_error = std::max(check.max_relative_error, rel);
    }
    report.coordinates += check.coordinates;
    report.within_tolerance += check.within_tolerance;
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.groups.push_back(std::move(check));
  }
  return report;
}

SyntheticData grad_check_fixture(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_items = 20;
  spec.num_users = 10;
  spec.modality_dims = {6, 5};
  spec.num_clusters = 4;
  spec.interactions_per_user = 6;
  spec.seed = seed;
  SyntheticData data = generate_synthetic(spec);
  data.dataset.interactions = split_interactions(data.dataset.interactions, seed);
  return data;
}

}  // namespace emmkgr
