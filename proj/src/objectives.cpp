#include "emmkgr/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "emmkgr/error.hpp"

namespace emmkgr {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double log_sigmoid(double x) { return -softplus(-x); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Scalar>
void rotate(std::span<const Scalar> head, std::span<const Scalar> phases, std::span<Scalar> out) {
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const Scalar c = std::cos(phases[k]);
    const Scalar s = std::sin(phases[k]);
    const Scalar re = head[2 * k];
    const Scalar im = head[2 * k + 1];
    out[2 * k] = re * c - im * s;
    out[2 * k + 1] = re * s + im * c;
  }
}

template <typename Scalar>
Scalar rotate_score(std::span<const Scalar> head, std::span<const Scalar> phases, std::span<const Scalar> tail) {
  Scalar total = 0;
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const Scalar c = std::cos(phases[k]);
    const Scalar s = std::sin(phases[k]);
    const Scalar re = head[2 * k] * c - head[2 * k + 1] * s - tail[2 * k];
    const Scalar im = head[2 * k] * s + head[2 * k + 1] * c - tail[2 * k + 1];
    total += re * re + im * im;
  }
  return total;
}

namespace {

template <typename Scalar>
std::span<const Scalar> row_span(const Mat<Scalar>& m, Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

/// Adds coeff * d f(h, r, t) into the head/tail/phase gradient rows.
template <typename Scalar>
void accumulate_rotate_grad(std::span<const Scalar> head, std::span<const Scalar> phases,
                            std::span<const Scalar> tail, Scalar coeff, Scalar* head_grad, Scalar* tail_grad,
                            Scalar* phase_grad) {
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const Scalar c = std::cos(phases[k]);
    const Scalar s = std::sin(phases[k]);
    const Scalar a = head[2 * k];
    const Scalar b = head[2 * k + 1];
    const Scalar x = a * c - b * s - tail[2 * k];
    const Scalar y = a * s + b * c - tail[2 * k + 1];
    if (head_grad) {
      head_grad[2 * k] += coeff * 2 * (x * c + y * s);
      head_grad[2 * k + 1] += coeff * 2 * (y * c - x * s);
    }
    if (tail_grad) {
      tail_grad[2 * k] -= coeff * 2 * x;
      tail_grad[2 * k + 1] -= coeff * 2 * y;
    }
    if (phase_grad) phase_grad[k] += coeff * 2 * (x * (-a * s - b * c) + y * (a * c - b * s));
  }
}

}  // namespace

template <typename Scalar>
Scalar kg_loss(std::span<const KgSample> batch, const Mat<Scalar>& node_embeddings, const Mat<Scalar>& phases,
               Mat<Scalar>* node_grad, Mat<Scalar>* phase_grad, Scalar scale) {
  if (node_embeddings.cols() != 2 * phases.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "kg_loss: embedding dim must be twice the phase count");
  }
  Scalar total = 0;
  for (const auto& sample : batch) {
    const auto h = row_span(node_embeddings, sample.positive.head);
    const auto t = row_span(node_embeddings, sample.positive.tail);
    const auto tn = row_span(node_embeddings, sample.negative_tail);
    const auto r = row_span(phases, sample.positive.relation);
    const double delta = static_cast<double>(rotate_score(h, r, t)) - static_cast<double>(rotate_score(h, r, tn));
    total += static_cast<Scalar>(log_sigmoid(delta));
    if (node_grad == nullptr && phase_grad == nullptr) continue;
    // d log sigma(delta) / d delta = sigma(-delta)
    const Scalar coeff = scale * static_cast<Scalar>(sigmoid(-delta));
    Scalar* hg = node_grad ? node_grad->data() + sample.positive.head * node_grad->cols() : nullptr;
    Scalar* tg = node_grad ? node_grad->data() + sample.positive.tail * node_grad->cols() : nullptr;
    Scalar* ng = node_grad ? node_grad->data() + sample.negative_tail * node_grad->cols() : nullptr;
    Scalar* pg = phase_grad ? phase_grad->data() + sample.positive.relation * phase_grad->cols() : nullptr;
    accumulate_rotate_grad(h, r, t, coeff, hg, tg, pg);
    accumulate_rotate_grad(h, r, tn, -coeff, hg, ng, pg);
  }
  return scale * total;
}

template <typename Scalar>
Scalar bpr_loss(std::span<const BprTriple> batch, const Mat<Scalar>& user_vecs, const Mat<Scalar>& item_vecs,
                Mat<Scalar>* user_grad, Mat<Scalar>* item_grad, Scalar scale) {
  const Index d = user_vecs.cols();
  Scalar total = 0;
  for (const auto& tr : batch) {
    const Scalar* u = user_vecs.data() + tr.user * d;
    const Scalar* i = item_vecs.data() + tr.positive * d;
    const Scalar* j = item_vecs.data() + tr.negative * d;
    double margin = 0.0;
    for (Index c = 0; c < d; ++c) margin += static_cast<double>(u[c]) * (static_cast<double>(i[c]) - j[c]);
    total -= static_cast<Scalar>(log_sigmoid(margin));
    // d(-log sigma(m)) / dm = -sigma(-m)
    const Scalar coeff = -scale * static_cast<Scalar>(sigmoid(-margin));
    if (user_grad) {
      Scalar* ug = user_grad->data() + tr.user * d;
      for (Index c = 0; c < d; ++c) ug[c] += coeff * (i[c] - j[c]);
    }
    if (item_grad) {
      Scalar* ig = item_grad->data() + tr.positive * d;
      Scalar* jg = item_grad->data() + tr.negative * d;
      for (Index c = 0; c < d; ++c) {
        ig[c] += coeff * u[c];
        jg[c] -= coeff * u[c];
      }
    }
  }
  return scale * total;
}

std::vector<Index> sample_kg_negatives(const MMGraph& graph, const Triple& positive, Index count, Rng& rng) {
  const auto [first, last] = graph.tail_block(positive.relation);
  const Index width = last - first;
  if (width < 2) throw Error(ErrorKind::kInvalidArgument, "KG negative sampling needs a tail block of size >= 2");
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<Index>(out.size()) < count) {
    const Index cand = first + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(width)));
    if (cand != positive.tail) out.push_back(cand);
  }
  return out;
}

BprNegativeSampler::BprNegativeSampler(const std::vector<std::vector<Index>>& train_items_by_user,
                                       Index num_items)
    : num_items_(num_items), positives_(train_items_by_user), complement_(train_items_by_user.size()) {
  for (std::size_t u = 0; u < positives_.size(); ++u) {
    auto& items = positives_[u];
    std::sort(items.begin(), items.end());
    if (2 * static_cast<Index>(items.size()) > num_items_) {
      auto& comp = complement_[u];
      for (Index i = 0; i < num_items_; ++i) {
        if (!std::binary_search(items.begin(), items.end(), i)) comp.push_back(i);
      }
    }
  }
}

bool BprNegativeSampler::interacted(Index user, Index item) const {
  const auto& items = positives_[static_cast<std::size_t>(user)];
  return std::binary_search(items.begin(), items.end(), item);
}

std::optional<std::vector<Index>> BprNegativeSampler::sample(Index user, Index count, Rng& rng) const {
  const auto& items = positives_.at(static_cast<std::size_t>(user));
  if (static_cast<Index>(items.size()) >= num_items_) return std::nullopt;
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(count));
  const auto& comp = complement_[static_cast<std::size_t>(user)];
  while (static_cast<Index>(out.size()) < count) {
    if (!comp.empty()) {
      out.push_back(comp[static_cast<std::size_t>(rng.uniform_index(comp.size()))]);
      continue;
    }
    const Index cand = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(num_items_)));
    if (!interacted(user, cand)) out.push_back(cand);
  }
  return out;
}

#define EMMKGR_INSTANTIATE_OBJECTIVES(S)                                                                   \
  template S rotate_score<S>(std::span<const S>, std::span<const S>, std::span<const S>);                   \
  template void rotate<S>(std::span<const S>, std::span<const S>, std::span<S>);                            \
  template S kg_loss<S>(std::span<const KgSample>, const Mat<S>&, const Mat<S>&, Mat<S>*, Mat<S>*, S);      \
  template S bpr_loss<S>(std::span<const BprTriple>, const Mat<S>&, const Mat<S>&, Mat<S>*, Mat<S>*, S);

EMMKGR_INSTANTIATE_OBJECTIVES(float)
EMMKGR_INSTANTIATE_OBJECTIVES(double)

#undef EMMKGR_INSTANTIATE_OBJECTIVES

}  // namespace emmkgr
