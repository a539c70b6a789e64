#include "emmkgr/checkpoint.hpp"

#include <cstring>
#include <map>
#include <sstream>

#include <json.hpp>

#include "emmkgr/binary_io.hpp"
#include "emmkgr/error.hpp"

namespace emmkgr {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'K', 'G'};
constexpr std::uint32_t kVersion = 1;

Tensor tensor_of(const ParamGroup<float>& g, bool vector) {
  Tensor t;
  t.name = g.name;
  if (vector) {
    t.dims = {static_cast<std::uint64_t>(g.rows)};
  } else {
    t.dims = {static_cast<std::uint64_t>(g.rows), static_cast<std::uint64_t>(g.cols)};
  }
  t.values.assign(g.data, g.data + g.size());
  return t;
}

}  // namespace

Checkpoint make_checkpoint(const ParamSet<float>& params, const TrainConfig& config, const Digest& graph_hash,
                           Index epoch, std::optional<double> validation_metric) {
  Checkpoint c;
  c.config = config;
  c.graph_hash = graph_hash;
  c.epoch = epoch;
  c.validation_metric = validation_metric;
  c.modality_types = params.modality_types;
  auto copy = params;
  for (const auto& g : copy.groups()) c.tensors.push_back(tensor_of(g, g.family == "projection_bias"));
  return c;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["config"] = ckpt.config.to_json();
  header["epoch"] = ckpt.epoch;
  header["validation_metric"] =
      ckpt.validation_metric ? nlohmann::ordered_json(*ckpt.validation_metric) : nlohmann::ordered_json();
  header["modality_types"] = ckpt.modality_types;
  nlohmann::ordered_json shapes = nlohmann::ordered_json::array();
  for (const auto& t : ckpt.tensors) shapes.push_back({{"name", t.name}, {"dims", t.dims}});
  header["tensors"] = shapes;
  const std::string blob = header.dump();

  std::ostringstream out;
  out.write(kMagic, 4);
  io::write_le<std::uint32_t>(out, kVersion);
  io::write_le<std::uint64_t>(out, blob.size());
  io::write_bytes(out, blob);
  out.write(reinterpret_cast<const char*>(ckpt.graph_hash.data()), 32);
  for (const auto& t : ckpt.tensors) {
    std::uint64_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.values.size()) throw Error(ErrorKind::kInvalidArgument, "tensor '" + t.name + "' size mismatch");
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    io::write_bytes(out, t.name);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) io::write_le<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 4));
  }
  return out.str();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  std::istringstream in(bytes);
  const std::string magic = io::read_bytes(in, 4, "checkpoint magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw Error(ErrorKind::kFormat, "not a checkpoint (bad magic)");
  const auto version = io::read_le<std::uint32_t>(in, "checkpoint version");
  if (version != kVersion) {
    throw Error(ErrorKind::kFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto blob_size = io::read_le<std::uint64_t>(in, "checkpoint header length");
  if (blob_size > bytes.size()) throw Error(ErrorKind::kTruncation, "checkpoint header length exceeds file size");
  const std::string blob = io::read_bytes(in, static_cast<std::size_t>(blob_size), "checkpoint header");

  Checkpoint c;
  std::vector<std::pair<std::string, std::vector<std::uint64_t>>> declared;
  try {
    const auto header = nlohmann::json::parse(blob);
    c.config = TrainConfig::from_json(header.at("config"));
    c.epoch = header.at("epoch").get<Index>();
    if (!header.at("validation_metric").is_null()) c.validation_metric = header.at("validation_metric").get<double>();
    c.modality_types = header.at("modality_types").get<std::vector<std::string>>();
    for (const auto& t : header.at("tensors")) {
      declared.emplace_back(t.at("name").get<std::string>(), t.at("dims").get<std::vector<std::uint64_t>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("checkpoint header: ") + e.what());
  }
  const std::string hash = io::read_bytes(in, 32, "checkpoint graph hash");
  std::memcpy(c.graph_hash.data(), hash.data(), 32);

  while (in.peek() != std::char_traits<char>::eof()) {
    Tensor t;
    const auto name_len = io::read_le<std::uint32_t>(in, "tensor name length");
    t.name = io::read_bytes(in, name_len, "tensor name");
    const auto rank = io::read_le<std::uint32_t>(in, "tensor rank");
    if (rank > 8) throw Error(ErrorKind::kFormat, "tensor '" + t.name + "' has implausible rank");
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(io::read_le<std::uint64_t>(in, "tensor dim"));
      count *= t.dims.back();
    }
    if (count * 4 > bytes.size()) throw Error(ErrorKind::kTruncation, "tensor '" + t.name + "' exceeds file size");
    const std::string raw = io::read_bytes(in, static_cast<std::size_t>(count * 4), "tensor values");
    t.values.resize(static_cast<std::size_t>(count));
    std::memcpy(t.values.data(), raw.data(), raw.size());
    c.tensors.push_back(std::move(t));
  }

  if (declared.size() != c.tensors.size()) {
    throw Error(ErrorKind::kFormat, "checkpoint header lists " + std::to_string(declared.size()) +
                                        " tensors but the file holds " + std::to_string(c.tensors.size()));
  }
  for (std::size_t i = 0; i < declared.size(); ++i) {
    if (declared[i].first != c.tensors[i].name || declared[i].second != c.tensors[i].dims) {
      throw Error(ErrorKind::kFormat, "tensor '" + c.tensors[i].name + "' does not match the header shape");
    }
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  io::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path, const std::optional<Digest>& expected, bool allow_mismatch) {
  Checkpoint c = decode_checkpoint(io::read_file(path));
  if (expected && *expected != c.graph_hash && !allow_mismatch) {
    throw Error(ErrorKind::kFingerprintMismatch, "checkpoint " + path + " was trained on graph " +
                                                     to_hex(c.graph_hash) + ", current graph is " + to_hex(*expected));
  }
  return c;
}

ParamSet<float> params_from_checkpoint(const Checkpoint& ckpt, const ModelShape& shape) {
  if (ckpt.modality_types != shape.modality_types) {
    throw Error(ErrorKind::kCatalogMismatch, "checkpoint modalities differ from the dataset's");
  }
  Rng unused(0);
  ParamSet<float> params = init_params<float>(shape, unused);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : ckpt.tensors) by_name[t.name] = &t;
  auto groups = params.groups();
  if (groups.size() != ckpt.tensors.size()) {
    throw Error(ErrorKind::kFormat, "checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                                        " tensors, the model expects " + std::to_string(groups.size()));
  }
  for (auto& g : groups) {
    const auto it = by_name.find(g.name);
    if (it == by_name.end()) throw Error(ErrorKind::kFormat, "checkpoint lacks tensor '" + g.name + "'");
    const Tensor& t = *it->second;
    const Tensor expected = tensor_of(g, g.family == "projection_bias");
    if (t.dims != expected.dims) {
      throw Error(ErrorKind::kFormat, "tensor '" + g.name + "' has the wrong shape for this dataset");
    }
    std::memcpy(g.data, t.values.data(), t.values.size() * sizeof(float));
  }
  return params;
}

}  // namespace emmkgr
