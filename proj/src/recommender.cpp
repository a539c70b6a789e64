#include "emmkgr/recommender.hpp"

#include <algorithm>
#include <cstdio>

#include "emmkgr/binary_io.hpp"
#include "emmkgr/error.hpp"
#include "emmkgr/parallel.hpp"

namespace emmkgr {

template <typename Scalar>
Mat<Scalar> fuse_items(const Mat<Scalar>& interaction_items, const Mat<Scalar>& multimodal_items) {
  if (interaction_items.rows() != multimodal_items.rows() || interaction_items.cols() != multimodal_items.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "fuse_items: shape mismatch");
  }
  return interaction_items + multimodal_items;
}

template Mat<float> fuse_items<float>(const Mat<float>&, const Mat<float>&);
template Mat<double> fuse_items<double>(const Mat<double>&, const Mat<double>&);

RankedList top_k(std::span<const double> scores, std::span<const Index> masked, Index k) {
  std::vector<Index> candidates;
  candidates.reserve(scores.size());
  for (Index i = 0; i < static_cast<Index>(scores.size()); ++i) {
    if (!std::binary_search(masked.begin(), masked.end(), i)) candidates.push_back(i);
  }
  RankedList out;
  Index keep = k;
  if (keep > static_cast<Index>(candidates.size())) {
    out.truncated = true;
    keep = static_cast<Index>(candidates.size());
  }
  auto before = [&scores](Index a, Index b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(), before);
  candidates.resize(static_cast<std::size_t>(keep));
  out.items = std::move(candidates);
  for (Index i : out.items) out.scores.push_back(scores[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<double> score_items(std::span<const float> user_vec, const MatF& item_vecs) {
  if (static_cast<Index>(user_vec.size()) != item_vecs.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "score_items: dimension mismatch");
  }
  std::vector<double> scores(static_cast<std::size_t>(item_vecs.rows()));
  for (Index i = 0; i < item_vecs.rows(); ++i) {
    const float* row = item_vecs.data() + i * item_vecs.cols();
    double s = 0.0;
    for (std::size_t c = 0; c < user_vec.size(); ++c) s += static_cast<double>(user_vec[c]) * row[c];
    scores[static_cast<std::size_t>(i)] = s;
  }
  return scores;
}

namespace {

RankedList rank_user(const MatF& users, const MatF& items, Index user, Index k, std::span<const Index> masked) {
  if (user < 0 || user >= users.rows()) throw Error(ErrorKind::kInvalidArgument, "recommend: user out of range");
  const std::span<const float> vec(users.data() + user * users.cols(), static_cast<std::size_t>(users.cols()));
  const auto scores = score_items(vec, items);
  RankedList out = top_k(scores, masked, k);
  out.user = user;
  return out;
}

}  // namespace

RankedList recommend(const EmbeddingSnapshot& snapshot, Index user, Index k, std::span<const Index> train_items) {
  if (!snapshot.has_multimodal()) return recommend_baseline(snapshot, user, k, train_items);
  // Fusing per call keeps the snapshot immutable; evaluate_recommendations fuses once.
  const MatF fused = fuse_items(snapshot.item_interaction, snapshot.item_multimodal);
  return rank_user(snapshot.user, fused, user, k, train_items);
}

RankedList recommend_baseline(const EmbeddingSnapshot& snapshot, Index user, Index k,
                              std::span<const Index> train_items) {
  return rank_user(snapshot.user, snapshot.item_interaction, user, k, train_items);
}

MetricReport evaluate_recommendations(const EmbeddingSnapshot& snapshot, const InteractionData& data, Split which,
                                      const std::vector<Index>& cutoffs, bool baseline,
                                      std::vector<RankedList>* lists) {
  const auto train = data.items_by_user(Split::kTrain);
  const auto target = data.items_by_user(which);
  const MatF items = (baseline || !snapshot.has_multimodal())
                         ? snapshot.item_interaction
                         : fuse_items(snapshot.item_interaction, snapshot.item_multimodal);
  const Index k = cutoffs.empty() ? 0 : *std::max_element(cutoffs.begin(), cutoffs.end());

  std::vector<Index> users;
  for (Index u = 0; u < data.num_users(); ++u) {
    if (!target[static_cast<std::size_t>(u)].empty()) users.push_back(u);
  }
  std::vector<RankedList> ranked(users.size());
  parallel_for(static_cast<Index>(users.size()), [&](Index begin, Index end) {
    for (Index e = begin; e < end; ++e) {
      const Index u = users[static_cast<std::size_t>(e)];
      ranked[static_cast<std::size_t>(e)] = rank_user(snapshot.user, items, u, k, train[static_cast<std::size_t>(u)]);
    }
  }, 8);

  std::vector<std::vector<Index>> ranked_items, relevant;
  std::vector<std::string> ids;
  for (std::size_t e = 0; e < users.size(); ++e) {
    ranked_items.push_back(ranked[e].items);
    relevant.push_back(target[static_cast<std::size_t>(users[e])]);
    ids.push_back(data.user_ids[static_cast<std::size_t>(users[e])]);
  }
  MetricReport report = evaluate_rankings(ranked_items, relevant, cutoffs, ids, baseline ? "baseline" : "unified");
  if (lists) *lists = std::move(ranked);
  return report;
}

void write_ranked_lists(const std::vector<RankedList>& lists, const std::vector<std::string>& user_ids,
                        const std::vector<std::string>& item_ids, const std::string& path) {
  std::string out;
  char buf[64];
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.items.size(); ++r) {
      std::snprintf(buf, sizeof(buf), "%.9g", list.scores[r]);
      out += user_ids[static_cast<std::size_t>(list.user)] + "\t" + std::to_string(r + 1) + "\t" +
             item_ids[static_cast<std::size_t>(list.items[r])] + "\t" + buf + "\n";
    }
  }
  io::write_file_atomic(path, out);
}

}  // namespace emmkgr
