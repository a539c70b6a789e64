#pragma once

#include <span>
#include <string>
#include <vector>

#include "emmkgr/types.hpp"

namespace emmkgr {

/// Top-n neighbors for every row, most similar first.
struct NeighborList {
  Index rows = 0;
  Index n = 0;
  std::vector<Index> indices;        // rows * n
  std::vector<double> similarities;  // rows * n

  std::span<const Index> neighbors(Index row) const {
    return {indices.data() + row * n, static_cast<std::size_t>(n)};
  }
  std::span<const double> sims(Index row) const {
    return {similarities.data() + row * n, static_cast<std::size_t>(n)};
  }
};

struct KnnReport {
  Index requested_n = 0;
  Index effective_n = 0;
  bool clamped = false;
  std::string warning;
};

/// Exact top-n cosine neighbors over the rows of `matrix`, self excluded.
///
/// Cosine is evaluated in double as the sequential dot product of the two
/// unit-normalized rows (x / sqrt(sum x^2)); zero rows normalize to zero and
/// so score 0 against everything. Ties go to the smaller row index. Work is
/// split across query rows and candidate blocks; the result does not depend on
/// the thread count. n >= rows is clamped to rows - 1 and reported.
NeighborList topn_cosine(const MatF& matrix, Index n, KnnReport* report = nullptr);

struct NamedNeighborList {
  std::string modality;
  NeighborList list;
};

/// EMNL file: magic, u32 version, u32 count, then per list a length-prefixed
/// name, u64 rows, u64 n and rows*n (u64 index, f64 similarity) records.
void write_neighbor_lists(const std::vector<NamedNeighborList>& lists, const std::string& path);
std::vector<NamedNeighborList> read_neighbor_lists(const std::string& path);

}  // namespace emmkgr
