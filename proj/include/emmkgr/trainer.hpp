#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emmkgr/datastore.hpp"
#include "emmkgr/graph.hpp"
#include "emmkgr/model.hpp"
#include "emmkgr/objectives.hpp"
#include "emmkgr/recommender.hpp"
#include "emmkgr/types.hpp"

namespace emmkgr {

struct TrainConfig {
  Index dim = 64;
  Index layers = 2;
  Index knn = 10;
  double lambda_kg = 1.0;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  Index bpr_batch = 1024;
  Index kg_batch = 1024;
  Index kg_negatives = 1;
  Index epochs = 200;
  Index patience = 10;
  std::uint64_t seed = 42;
  GraphVariant variant = GraphVariant::kOriginal;
  bool zero_modalities = false;  // drop the knowledge-graph branch entirely
  bool separate_item_tables = false;
  bool grad_check = false;

  /// Throws kInvalidArgument on out-of-range values.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LossTerms {
  double bpr = 0.0;
  double kg = 0.0;
  double reg = 0.0;
  double total() const { return bpr + kg + reg; }
};

/// Forward and backward pass of the joint objective at one precision.
///
/// The knowledge-graph branch is active when a graph is supplied; without one
/// the model reduces to interaction-graph propagation alone.
template <typename Scalar>
class Pipeline {
 public:
  Pipeline(const FeatureStore& store, const MMGraph* graph, const InteractionGraph& interactions,
           const TrainConfig& config);

  bool multimodal() const { return graph_ != nullptr; }
  const MMGraph* graph() const { return graph_; }

  /// L_total for fixed batches; fills `grad` (same shapes as params) when non-null.
  LossTerms evaluate(const ParamSet<Scalar>& params, std::span<const BprTriple> bpr,
                     std::span<const KgSample> kg, ParamSet<Scalar>* grad) const;

  /// Propagated embeddings for ranking.
  EmbeddingSnapshot snapshot(const ParamSet<Scalar>& params) const;

 private:
  struct Forward {
    std::vector<Mat<Scalar>> z;
    Mat<Scalar> h_mm;  // every MM node; empty when the branch is off
    Mat<Scalar> h_in;  // [users; items]
  };
  Forward forward(const ParamSet<Scalar>& params) const;

  std::vector<Mat<Scalar>> features_;
  const MMGraph* graph_;
  Csr<Scalar> mm_op_;
  Csr<Scalar> in_op_;
  Index num_users_;
  Index num_items_;
  Index layers_;
  Scalar lambda_kg_;
  Scalar weight_decay_;
};

template <typename Scalar>
class Adam {
 public:
  Adam(const ParamSet<Scalar>& like, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  void step(ParamSet<Scalar>& params, ParamSet<Scalar>& grad);
  Index steps() const { return t_; }

 private:
  ParamSet<Scalar> m_;
  ParamSet<Scalar> v_;
  double lr_, beta1_, beta2_, eps_;
  Index t_ = 0;
};

/// Throws kNumeric naming the first group holding a NaN or infinity.
template <typename Scalar>
void check_finite(ParamSet<Scalar>& grad);

struct EpochRecord {
  Index epoch = 0;
  LossTerms loss;  // mean over the epoch's steps
  Index steps = 0;
  Index skipped_users = 0;
  std::optional<double> val_recall20;
  std::optional<double> val_recall10;
  std::optional<double> val_ndcg20;

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  ParamSet<float> params;  // best validation Recall@20, or the last epoch without validation users
  Index best_epoch = 0;
  std::optional<double> best_val_recall20;
  std::optional<double> best_val_recall10;
  std::vector<EpochRecord> epochs;
  bool early_stopped = false;
};

/// Everything train() reads. `interactions` must already be split.
struct TrainInputs {
  const FeatureStore* store = nullptr;
  const MMGraph* graph = nullptr;  // ignored when config.zero_modalities
  const InteractionData* interactions = nullptr;
};

/// Joint BPR + lambda * KG + weight decay optimization with Adam and early stopping.
/// `on_epoch`, when set, sees each record as it is produced.
TrainResult train(const TrainInputs& inputs, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Snapshot of trained parameters under the same graphs and config.
EmbeddingSnapshot make_snapshot(const TrainInputs& inputs, const TrainConfig& config, const ParamSet<float>& params);

struct GroupCheck {
  std::string name;
  Index coordinates = 0;
  Index within_tolerance = 0;  // relative error <= 1e-3
  double max_relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GroupCheck> groups;
  Index coordinates = 0;
  Index within_tolerance = 0;
  double max_relative_error = 0.0;

  /// >= 99% of coordinates within 1e-3 and every one within 1e-2.
  bool passed() const;
  std::string table() const;
};

/// Central differences (step 1e-5, 64-bit) of L_total against the analytic
/// gradient for every coordinate of every parameter group.
GradCheckReport gradient_check(const TrainInputs& inputs, const TrainConfig& config, double step = 1e-5);

/// The small fixture the --grad-check mode runs on: N=20, U=10, T=2.
SyntheticData grad_check_fixture(std::uint64_t seed);

}  // namespace emmkgr
