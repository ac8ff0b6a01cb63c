#include "semamba/nets/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "semamba/error.hpp"

namespace semamba::nets {

namespace {

constexpr char kMagic[8] = {'S', 'M', 'B', 'A', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    default: throw DataError("checkpoint: unsupported tensor dtype " + std::string(c10::toString(t)));
  }
}

torch::ScalarType dtype_from_name(const std::string& name) {
  if (name == "f32") return torch::kFloat32;
  if (name == "f64") return torch::kFloat64;
  if (name == "i64") return torch::kInt64;
  throw DataError("checkpoint: unknown dtype '" + name + "'");
}

// Parameters then buffers, each in registration order.
std::vector<std::pair<std::string, torch::Tensor>> named_state(SegmentationNetwork& net) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : net.named_parameters()) out.emplace_back(p.key(), p.value());
  for (const auto& b : net.named_buffers()) out.emplace_back(b.key(), b.value());
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, SegmentationNetwork& network,
                     const nlohmann::json& metadata) {
  auto state = named_state(network);
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["spec"] = network.spec().to_json();
  header["metadata"] = metadata;
  header["tensors"] = nlohmann::json::array();

  std::vector<torch::Tensor> payloads;
  uint64_t offset = 0;
  for (const auto& [name, tensor] : state) {
    auto t = tensor.detach().cpu().contiguous();
    const auto nbytes = static_cast<uint64_t>(t.nbytes());
    header["tensors"].push_back({{"name", name},
                                 {"dtype", dtype_name(t.scalar_type())},
                                 {"shape", t.sizes().vec()},
                                 {"offset", offset},
                                 {"nbytes", nbytes}});
    offset += nbytes;
    payloads.push_back(std::move(t));
  }

  const std::string text = header.dump();
  const uint64_t header_len = text.size();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot open " + tmp.string() + " for writing");
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : payloads) {
      out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
    }
    if (!out) throw DataError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  char magic[8];
  uint64_t header_len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw DataError("checkpoint: " + path.string() + " is not a semamba checkpoint");
  }
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("checkpoint: truncated header in " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: malformed header in " + path.string() + ": " + e.what());
  }
  if (header.value("format_version", 0) != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version in " + path.string());
  }

  const auto payload_start = static_cast<std::streamoff>(16 + header_len);
  auto spec = NetworkSpec::from_json(header.at("spec"));
  auto net = build_network(spec, 0);

  std::map<std::string, torch::Tensor> targets;
  for (auto& [name, t] : named_state(*net)) targets.emplace(name, t);

  torch::NoGradGuard no_grad;
  std::size_t restored = 0;
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    auto it = targets.find(name);
    if (it == targets.end()) throw DataError("checkpoint: unexpected tensor '" + name + "'");
    const auto shape = entry.at("shape").get<std::vector<int64_t>>();
    auto loaded = torch::empty(shape, torch::TensorOptions().dtype(
                                          dtype_from_name(entry.at("dtype").get<std::string>())));
    const auto nbytes = entry.at("nbytes").get<uint64_t>();
    if (nbytes != loaded.nbytes()) throw DataError("checkpoint: size mismatch for '" + name + "'");
    in.seekg(payload_start + static_cast<std::streamoff>(entry.at("offset").get<uint64_t>()));
    in.read(static_cast<char*>(loaded.data_ptr()), static_cast<std::streamsize>(nbytes));
    if (!in) throw DataError("checkpoint: truncated payload for '" + name + "'");
    if (!it->second.sizes().equals(loaded.sizes())) {
      throw DataError("checkpoint: shape mismatch for '" + name + "'");
    }
    it->second.copy_(loaded);
    ++restored;
  }
  if (restored != targets.size()) {
    throw DataError("checkpoint: " + path.string() + " is missing " +
                    std::to_string(targets.size() - restored) + " tensors");
  }
  return {net, header.value("metadata", nlohmann::json::object())};
}

}  // namespace semamba::nets
