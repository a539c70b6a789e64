#include "emmkgr/knn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <utility>

#include "emmkgr/binary_io.hpp"
#include "emmkgr/error.hpp"
#include "emmkgr/parallel.hpp"

namespace emmkgr {

namespace {

constexpr Index kCandidateBlock = 512;

struct Candidate {
  double sim;
  Index index;
};

bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.sim != b.sim) return a.sim > b.sim;
  return a.index < b.index;
}

std::vector<double> row_norms(const MatF& matrix) {
  std::vector<double> norms(static_cast<std::size_t>(matrix.rows()));
  for (Index r = 0; r < matrix.rows(); ++r) {
    double s = 0.0;
    for (Index k = 0; k < matrix.cols(); ++k) {
      const double v = matrix(r, k);
      s += v * v;
    }
    norms[static_cast<std::size_t>(r)] = std::sqrt(s);
  }
  return norms;
}

double unit_component(float value, double norm) {
  return norm > 0.0 ? static_cast<double>(value) / norm : 0.0;
}

}  // namespace

NeighborList topn_cosine(const MatF& matrix, Index n, KnnReport* report) {
  const Index rows = matrix.rows();
  const Index dim = matrix.cols();
  if (rows < 2) throw Error(ErrorKind::kInvalidArgument, "topn_cosine needs at least two rows");
  if (n < 1) throw Error(ErrorKind::kInvalidArgument, "topn_cosine needs n >= 1");

  KnnReport local;
  local.requested_n = n;
  if (n >= rows) {
    local.clamped = true;
    local.warning = "n=" + std::to_string(n) + " >= rows=" + std::to_string(rows) +
                    ", clamped to " + std::to_string(rows - 1);
    n = rows - 1;
  }
  local.effective_n = n;

  const std::vector<double> norms = row_norms(matrix);
  std::vector<std::vector<Candidate>> best(static_cast<std::size_t>(rows));
  std::vector<double> block_t;

  for (Index block_start = 0; block_start < rows; block_start += kCandidateBlock) {
    const Index width = std::min(kCandidateBlock, rows - block_start);
    // Candidate block stored dimension-major so the inner loop runs over
    // candidates and every similarity accumulates in dimension order.
    block_t.assign(static_cast<std::size_t>(dim * width), 0.0);
    for (Index c = 0; c < width; ++c) {
      const Index row = block_start + c;
      const double norm = norms[static_cast<std::size_t>(row)];
      for (Index k = 0; k < dim; ++k) {
        block_t[static_cast<std::size_t>(k * width + c)] = unit_component(matrix(row, k), norm);
      }
    }

    parallel_for(rows, [&](Index begin, Index end) {
      std::vector<double> query(static_cast<std::size_t>(dim));
      std::vector<double> acc(static_cast<std::size_t>(width));
      std::vector<Candidate> merged;
      for (Index q = begin; q < end; ++q) {
        const double norm = norms[static_cast<std::size_t>(q)];
        for (Index k = 0; k < dim; ++k) query[static_cast<std::size_t>(k)] = unit_component(matrix(q, k), norm);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (Index k = 0; k < dim; ++k) {
          const double qk = query[static_cast<std::size_t>(k)];
          const double* col = block_t.data() + k * width;
          for (Index c = 0; c < width; ++c) acc[static_cast<std::size_t>(c)] += qk * col[c];
        }

        auto& current = best[static_cast<std::size_t>(q)];
        merged.assign(current.begin(), current.end());
        const bool full = static_cast<Index>(current.size()) == n;
        for (Index c = 0; c < width; ++c) {
          const Index row = block_start + c;
          if (row == q) continue;
          const Candidate cand{acc[static_cast<std::size_t>(c)], row};
          if (full && !ranks_before(cand, current.back())) continue;
          merged.push_back(cand);
        }
        const auto keep = std::min<std::size_t>(merged.size(), static_cast<std::size_t>(n));
        std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(keep), merged.end(),
                          ranks_before);
        current.assign(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(keep));
      }
    }, 16);
  }

  NeighborList out;
  out.rows = rows;
  out.n = n;
  out.indices.resize(static_cast<std::size_t>(rows * n));
  out.similarities.resize(static_cast<std::size_t>(rows * n));
  for (Index q = 0; q < rows; ++q) {
    const auto& list = best[static_cast<std::size_t>(q)];
    for (Index r = 0; r < n; ++r) {
      out.indices[static_cast<std::size_t>(q * n + r)] = list[static_cast<std::size_t>(r)].index;
      out.similarities[static_cast<std::size_t>(q * n + r)] = list[static_cast<std::size_t>(r)].sim;
    }
  }
  if (report) *report = local;
  return out;
}

namespace {
constexpr char kNeighborMagic[4] = {'E', 'M', 'N', 'L'};
constexpr std::uint32_t kNeighborVersion = 1;
}  // namespace

void write_neighbor_lists(const std::vector<NamedNeighborList>& lists, const std::string& path) {
  std::ostringstream out(std::ios::binary);
  out.write(kNeighborMagic, 4);
  io::write_le<std::uint32_t>(out, kNeighborVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(lists.size()));
  for (const auto& named : lists) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(named.modality.size()));
    io::write_bytes(out, named.modality);
    io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(named.list.rows));
    io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(named.list.n));
    for (std::size_t e = 0; e < named.list.indices.size(); ++e) {
      io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(named.list.indices[e]));
      io::write_le<double>(out, named.list.similarities[e]);
    }
  }
  io::write_file_atomic(path, out.str());
}

std::vector<NamedNeighborList> read_neighbor_lists(const std::string& path) {
  std::istringstream in(io::read_file(path), std::ios::binary);
  const std::string magic = io::read_bytes(in, 4, "neighbor magic");
  if (std::memcmp(magic.data(), kNeighborMagic, 4) != 0) {
    throw Error(ErrorKind::kFormat, path + ": bad magic (expected EMNL)");
  }
  if (io::read_le<std::uint32_t>(in, "neighbor version") != kNeighborVersion) {
    throw Error(ErrorKind::kFormat, path + ": unsupported neighbor-list version");
  }
  const auto count = io::read_le<std::uint32_t>(in, "list count");
  std::vector<NamedNeighborList> lists;
  for (std::uint32_t l = 0; l < count; ++l) {
    NamedNeighborList named;
    const auto len = io::read_le<std::uint32_t>(in, "modality name length");
    named.modality = io::read_bytes(in, len, "modality name");
    named.list.rows = static_cast<Index>(io::read_le<std::uint64_t>(in, "rows"));
    named.list.n = static_cast<Index>(io::read_le<std::uint64_t>(in, "n"));
    const auto entries = static_cast<std::size_t>(named.list.rows * named.list.n);
    named.list.indices.resize(entries);
    named.list.similarities.resize(entries);
    for (std::size_t e = 0; e < entries; ++e) {
      named.list.indices[e] = static_cast<Index>(io::read_le<std::uint64_t>(in, "neighbor index"));
      named.list.similarities[e] = io::read_le<double>(in, "neighbor similarity");
      if (named.list.indices[e] < 0 || named.list.indices[e] >= named.list.rows) {
        throw Error(ErrorKind::kFormat, path + ": neighbor index out of range");
      }
    }
    lists.push_back(std::move(named));
  }
  return lists;
}

}  // namespace emmkgr
