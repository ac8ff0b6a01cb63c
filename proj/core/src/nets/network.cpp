#include "semamba/nets/network.hpp"

#include <mutex>
#include <set>

#include "semamba/error.hpp"
#include "semamba/nets/cnn_unet.hpp"
#include "semamba/nets/mamba_unet.hpp"

namespace semamba::nets {

std::string_view to_string(Variant v) {
  return v == Variant::CnnUnet ? "cnn-unet" : "mamba-unet";
}

Variant parse_variant(std::string_view name) {
  if (name == "cnn-unet") return Variant::CnnUnet;
  if (name == "mamba-unet") return Variant::MambaUnet;
  throw ConfigError("unknown network variant '" + std::string(name) +
                    "' (expected cnn-unet or mamba-unet)");
}

void NetworkSpec::validate() const {
  if (classes < 2) throw ConfigError("network spec: classes must be >= 2");
  if (input_size < 1) throw ConfigError("network spec: input_size must be positive");
  if (variant == Variant::CnnUnet) {
    if (base_width < 1) throw ConfigError("cnn-unet: base_width must be positive");
    if (input_size % 16 != 0) throw ConfigError("cnn-unet: input_size must be divisible by 16");
    return;
  }
  if (patch_size < 1 || embed_dim < 2 || state_size < 1 || stem_channels < 1) {
    throw ConfigError("mamba-unet: patch_size, embed_dim, state_size, stem_channels invalid");
  }
  if (depths.empty()) throw ConfigError("mamba-unet: depths must be non-empty");
  for (auto d : depths) {
    if (d < 1) throw ConfigError("mamba-unet: every stage depth must be >= 1");
  }
  if (embed_dim % 2 != 0) throw ConfigError("mamba-unet: embed_dim must be even");
  const int64_t stride = patch_size << (depths.size() - 1);
  if (input_size % stride != 0) {
    throw ConfigError("mamba-unet: input_size must be divisible by patch_size * 2^(stages-1) = " +
                      std::to_string(stride));
  }
}

nlohmann::json NetworkSpec::to_json() const {
  nlohmann::json j;
  j["variant"] = std::string(to_string(variant));
  j["classes"] = classes;
  j["input_size"] = input_size;
  if (variant == Variant::CnnUnet) {
    j["base_width"] = base_width;
  } else {
    j["patch_size"] = patch_size;
    j["embed_dim"] = embed_dim;
    j["depths"] = depths;
    j["state_size"] = state_size;
    j["stem_channels"] = stem_channels;
  }
  return j;
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("network spec must be an object");
  static const std::set<std::string> known = {"variant",    "classes",   "input_size",
                                              "base_width", "patch_size", "embed_dim",
                                              "depths",     "state_size", "stem_channels"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("network spec: unknown key '" + key + "'");
  }
  NetworkSpec s;
  try {
    if (j.contains("variant")) s.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("classes")) s.classes = j.at("classes").get<int64_t>();
    if (j.contains("input_size")) s.input_size = j.at("input_size").get<int64_t>();
    if (j.contains("base_width")) s.base_width = j.at("base_width").get<int64_t>();
    if (j.contains("patch_size")) s.patch_size = j.at("patch_size").get<int64_t>();
    if (j.contains("embed_dim")) s.embed_dim = j.at("embed_dim").get<int64_t>();
    if (j.contains("depths")) s.depths = j.at("depths").get<std::vector<int64_t>>();
    if (j.contains("state_size")) s.state_size = j.at("state_size").get<int64_t>();
    if (j.contains("stem_channels")) s.stem_channels = j.at("stem_channels").get<int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network spec: ") + e.what());
  }
  return s;
}

NetworkSpec NetworkSpec::cnn_unet(int64_t classes) {
  NetworkSpec s;
  s.variant = Variant::CnnUnet;
  s.classes = classes;
  return s;
}

NetworkSpec NetworkSpec::mamba_unet(int64_t classes) {
  NetworkSpec s;
  s.variant = Variant::MambaUnet;
  s.classes = classes;
  return s;
}

void SegmentationNetwork::check_input(const torch::Tensor& images) const {
  const auto n = spec_.input_size;
  if (images.dim() != 4 || images.size(1) != 1 || images.size(2) != n || images.size(3) != n) {
    throw ShapeError("network input must be (batch, 1, " + std::to_string(n) + ", " +
                     std::to_string(n) + "), got " + c10::str(images.sizes()));
  }
}

NetworkPtr build_network(const NetworkSpec& spec, uint64_t seed) {
  spec.validate();
  static std::mutex init_mutex;
  std::lock_guard lock(init_mutex);
  torch::manual_seed(seed);
  if (spec.variant == Variant::CnnUnet) return std::make_shared<CnnUnet>(spec);
  return std::make_shared<MambaUnet>(spec);
}

int64_t parameter_count(const torch::nn::Module& module) {
  int64_t total = 0;
  for (const auto& p : module.parameters()) total += p.numel();
  return total;
}

std::vector<std::pair<std::string, int64_t>> parameter_breakdown(const torch::nn::Module& module) {
  std::vector<std::pair<std::string, int64_t>> out;
  for (const auto& child : module.named_children()) {
    out.emplace_back(child.key(), parameter_count(*child.value()));
  }
  int64_t direct = 0;
  for (const auto& p : module.named_parameters(/*recurse=*/false)) direct += p.value().numel();
  if (direct > 0) out.emplace_back("(own)", direct);
  return out;
}

}  // namespace semamba::nets
