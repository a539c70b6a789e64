#include "emmkgr/model.hpp"

#include <cmath>
#include <numbers>

#include "emmkgr/error.hpp"
#include "emmkgr/parallel.hpp"

namespace emmkgr {

template <typename Scalar>
std::vector<ParamGroup<Scalar>> ParamSet<Scalar>::groups() {
  std::vector<ParamGroup<Scalar>> out;
  auto add = [&out](std::string name, std::string family, auto& tensor) {
    out.push_back({std::move(name), std::move(family), tensor.data(), tensor.rows(), tensor.cols()});
  };
  add("item_embedding", "item_embedding", item_embedding);
  add("user_embedding", "user_embedding", user_embedding);
  if (separate_item_tables()) add("interaction_item_embedding", "item_embedding", interaction_item_embedding);
  for (std::size_t k = 0; k < projection_weight.size(); ++k) {
    add("projection_weight/" + modality_types[k], "projection_weight", projection_weight[k]);
  }
  for (std::size_t k = 0; k < projection_bias.size(); ++k) {
    add("projection_bias/" + modality_types[k], "projection_bias", projection_bias[k]);
  }
  add("relation_phase", "relation_phase", relation_phase);
  return out;
}

template <typename Scalar>
ParamSet<Scalar> ParamSet<Scalar>::zeros_like() const {
  ParamSet out;
  out.item_embedding = Mat<Scalar>::Zero(item_embedding.rows(), item_embedding.cols());
  out.user_embedding = Mat<Scalar>::Zero(user_embedding.rows(), user_embedding.cols());
  out.interaction_item_embedding =
      Mat<Scalar>::Zero(interaction_item_embedding.rows(), interaction_item_embedding.cols());
  for (const auto& w : projection_weight) out.projection_weight.push_back(Mat<Scalar>::Zero(w.rows(), w.cols()));
  for (const auto& b : projection_bias) out.projection_bias.push_back(Vec<Scalar>::Zero(b.size()));
  out.relation_phase = Mat<Scalar>::Zero(relation_phase.rows(), relation_phase.cols());
  out.modality_types = modality_types;
  return out;
}

ModelShape shape_of(const FeatureStore& store, Index num_users, Index dim, bool separate_item_tables) {
  ModelShape shape;
  shape.num_items = store.num_items();
  shape.num_users = num_users;
  shape.dim = dim;
  shape.modality_types = store.modality_types();
  for (Index k = 0; k < store.num_modalities(); ++k) shape.modality_dims.push_back(store.dim(k));
  shape.separate_item_tables = separate_item_tables;
  return shape;
}

namespace {

template <typename Scalar>
Mat<Scalar> xavier(Index rows, Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(rng.uniform(-a, a));
  return m;
}

}  // namespace

template <typename Scalar>
ParamSet<Scalar> init_params(const ModelShape& shape, Rng& rng) {
  if (shape.dim <= 0 || shape.dim % 2 != 0) {
    throw Error(ErrorKind::kInvalidArgument, "embedding dimension must be positive and even, got " +
                                                 std::to_string(shape.dim));
  }
  if (static_cast<Index>(shape.modality_types.size()) != shape.num_modalities()) {
    throw Error(ErrorKind::kInvalidArgument, "model shape: modality names and dims differ in length");
  }
  const Index d = shape.dim;
  ParamSet<Scalar> p;
  p.modality_types = shape.modality_types;
  p.item_embedding = xavier<Scalar>(shape.num_items, d, rng);
  p.user_embedding = xavier<Scalar>(shape.num_users, d, rng);
  if (shape.separate_item_tables) p.interaction_item_embedding = xavier<Scalar>(shape.num_items, d, rng);
  for (Index k = 0; k < shape.num_modalities(); ++k) {
    p.projection_weight.push_back(xavier<Scalar>(shape.modality_dims[static_cast<std::size_t>(k)], d, rng));
    p.projection_bias.push_back(Vec<Scalar>::Zero(d));
  }
  p.relation_phase.resize(2 * shape.num_modalities(), d / 2);
  for (Index i = 0; i < p.relation_phase.size(); ++i) {
    p.relation_phase.data()[i] = static_cast<Scalar>(rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  return p;
}

template <typename Scalar>
Mat<Scalar> project_rows(const Mat<Scalar>& raw, Index k, const ParamSet<Scalar>& params) {
  if (k < 0 || k >= params.num_modalities()) {
    throw Error(ErrorKind::kInvalidArgument, "projection: modality index out of range");
  }
  const auto& w = params.projection_weight[static_cast<std::size_t>(k)];
  if (raw.cols() != w.rows()) {
    throw Error(ErrorKind::kInvalidArgument, "projection: modality '" +
                                                 params.modality_types[static_cast<std::size_t>(k)] + "' expects dim " +
                                                 std::to_string(w.rows()) + ", got " + std::to_string(raw.cols()));
  }
  Mat<Scalar> z = raw * w;
  z.rowwise() += params.projection_bias[static_cast<std::size_t>(k)].transpose();
  return z;
}

template <typename Scalar>
std::vector<Mat<Scalar>> project(const std::vector<Mat<Scalar>>& features, const ParamSet<Scalar>& params) {
  if (static_cast<Index>(features.size()) != params.num_modalities()) {
    throw Error(ErrorKind::kInvalidArgument, "projection: feature and parameter modality counts differ");
  }
  std::vector<Mat<Scalar>> z;
  z.reserve(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    z.push_back(project_rows(features[k], static_cast<Index>(k), params));
  }
  return z;
}

std::vector<MatF> project(const FeatureStore& store, const ParamSet<float>& params) {
  std::vector<MatF> features;
  for (Index k = 0; k < store.num_modalities(); ++k) features.push_back(store.features(k));
  return project(features, params);
}

template <typename Scalar>
Mat<Scalar> stack_embeddings(const ParamSet<Scalar>& params, const std::vector<Mat<Scalar>>& z) {
  const Index n = params.num_items();
  const Index d = params.dim();
  Mat<Scalar> e(n * (1 + static_cast<Index>(z.size())), d);
  e.topRows(n) = params.item_embedding;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k].rows() != n || z[k].cols() != d) {
      throw Error(ErrorKind::kInvalidArgument, "stack_embeddings: modality block has the wrong shape");
    }
    e.middleRows(static_cast<Index>(k + 1) * n, n) = z[k];
  }
  return e;
}

template <typename Scalar>
Mat<Scalar> layer0_for_graph(const MMGraph& graph, const ParamSet<Scalar>& params,
                             const std::vector<Mat<Scalar>>& z) {
  switch (graph.variant) {
    case GraphVariant::kItemItem: {
      Mat<Scalar> e = params.item_embedding;
      if (!z.empty()) {
        Mat<Scalar> mean = Mat<Scalar>::Zero(e.rows(), e.cols());
        for (const auto& block : z) mean += block;
        e += mean / static_cast<Scalar>(z.size());
      }
      return e;
    }
    case GraphVariant::kInteraction: {
      Mat<Scalar> stacked = stack_embeddings(params, z);
      Mat<Scalar> e(stacked.rows() + params.num_users(), params.dim());
      e.topRows(stacked.rows()) = stacked;
      e.bottomRows(params.num_users()) = params.user_embedding;
      return e;
    }
    default:
      return stack_embeddings(params, z);
  }
}

template <typename Scalar>
Mat<Scalar> layer0_for_interactions(const ParamSet<Scalar>& params) {
  Mat<Scalar> e(params.num_users() + params.num_items(), params.dim());
  e.topRows(params.num_users()) = params.user_embedding;
  e.bottomRows(params.num_items()) = params.interaction_items();
  return e;
}

template <typename Scalar>
Mat<Scalar> spmm(const Csr<Scalar>& op, const Mat<Scalar>& x) {
  if (op.cols() != x.rows()) throw Error(ErrorKind::kInvalidArgument, "spmm: dimension mismatch");
  Mat<Scalar> y = Mat<Scalar>::Zero(op.rows(), x.cols());
  const Index cols = x.cols();
  parallel_for(op.rows(), [&](Index begin, Index end) {
    for (Index r = begin; r < end; ++r) {
      Scalar* out = y.data() + r * cols;
      for (typename Csr<Scalar>::InnerIterator it(op, r); it; ++it) {
        const Scalar w = it.value();
        const Scalar* in = x.data() + it.col() * cols;
        for (Index c = 0; c < cols; ++c) out[c] += w * in[c];
      }
    }
  }, 256);
  return y;
}

template <typename Scalar>
PropagationResult<Scalar> propagate(const Csr<Scalar>& op, const Mat<Scalar>& e0, Index layers,
                                    bool keep_layers) {
  if (layers < 0) throw Error(ErrorKind::kInvalidArgument, "propagate: layer count must be >= 0");
  if (op.rows() != e0.rows() || op.cols() != e0.rows()) {
    throw Error(ErrorKind::kInvalidArgument, "propagate: operator is " + std::to_string(op.rows()) + "x" +
                                                 std::to_string(op.cols()) + " but E0 has " +
                                                 std::to_string(e0.rows()) + " rows");
  }
  PropagationResult<Scalar> result;
  result.mean = e0;
  if (keep_layers) result.layers.push_back(e0);
  Mat<Scalar> current = e0;
  for (Index l = 1; l <= layers; ++l) {
    current = spmm(op, current);
    result.mean += current;
    if (keep_layers) result.layers.push_back(current);
  }
  if (layers > 0) result.mean /= static_cast<Scalar>(layers + 1);
  return result;
}

#define EMMKGR_INSTANTIATE_MODEL(S)                                                                  \
  template struct ParamSet<S>;                                                                       \
  template ParamSet<S> init_params<S>(const ModelShape&, Rng&);                                      \
  template std::vector<Mat<S>> project<S>(const std::vector<Mat<S>>&, const ParamSet<S>&);          \
  template Mat<S> project_rows<S>(const Mat<S>&, Index, const ParamSet<S>&);                         \
  template Mat<S> stack_embeddings<S>(const ParamSet<S>&, const std::vector<Mat<S>>&);               \
  template Mat<S> layer0_for_graph<S>(const MMGraph&, const ParamSet<S>&, const std::vector<Mat<S>>&); \
  template Mat<S> layer0_for_interactions<S>(const ParamSet<S>&);                                    \
  template Mat<S> spmm<S>(const Csr<S>&, const Mat<S>&);                                             \
  template PropagationResult<S> propagate<S>(const Csr<S>&, const Mat<S>&, Index, bool);

EMMKGR_INSTANTIATE_MODEL(float)
EMMKGR_INSTANTIATE_MODEL(double)

#undef EMMKGR_INSTANTIATE_MODEL

}  // namespace emmkgr
