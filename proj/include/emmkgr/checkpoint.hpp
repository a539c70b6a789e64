#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emmkgr/hash.hpp"
#include "emmkgr/model.hpp"
#include "emmkgr/trainer.hpp"

namespace emmkgr {

struct Tensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> values;
};

/// File layout: "EMKG", u32 version, u64 length + JSON header, 32-byte graph
/// hash, then tensor records (u32 name length, name, u32 rank, u64 dims, f32
/// values) to end of file. The header lists every tensor name and shape.
struct Checkpoint {
  TrainConfig config;
  Digest graph_hash{};
  Index epoch = 0;
  std::optional<double> validation_metric;
  std::vector<std::string> modality_types;
  std::vector<Tensor> tensors;
};

Checkpoint make_checkpoint(const ParamSet<float>& params, const TrainConfig& config, const Digest& graph_hash,
                           Index epoch, std::optional<double> validation_metric);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Reads and, when `expected` is given, compares the stored graph hash;
/// a mismatch throws kFingerprintMismatch unless `allow_mismatch`.
Checkpoint load_checkpoint(const std::string& path, const std::optional<Digest>& expected = std::nullopt,
                           bool allow_mismatch = false);

/// Rebuilds the parameter set, checking every tensor against the shapes the
/// model expects for `store` and the checkpoint's config.
ParamSet<float> params_from_checkpoint(const Checkpoint& ckpt, const ModelShape& shape);

}  // namespace emmkgr
