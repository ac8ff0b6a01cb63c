#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

#include "semamba/nets/network.hpp"

namespace semamba::train {

struct LossToggles {
  bool sup = true;
  bool semi = true;
  bool contra = true;

  bool operator==(const LossToggles&) const = default;
};

struct TrainConfig {
  int64_t iterations = 30000;
  int64_t batch_size = 16;
  int64_t labelled_batch = 8;  // the rest of each batch is unlabelled
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int64_t validate_every = 200;
  uint64_t seed = 0;
  nets::NetworkSpec net1 = nets::NetworkSpec::mamba_unet();
  nets::NetworkSpec net2 = nets::NetworkSpec::cnn_unet();
  LossToggles losses;
  int64_t projector_grid = 14;
  bool augment = true;
  bool deterministic = false;
  int64_t eval_batch = 8;

  [[nodiscard]] int64_t unlabelled_batch() const { return batch_size - labelled_batch; }

  /// Throws ConfigError for non-positive sizes or rates, an inconsistent
  /// batch split, or networks that disagree on classes or input size.
  void validate() const;

  [[nodiscard]] nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys throw ConfigError. The
  /// result is validated.
  [[nodiscard]] static TrainConfig from_json(const nlohmann::json& j);

  /// 64-bit FNV-1a of the compact JSON form.
  [[nodiscard]] uint64_t hash() const;

  bool operator==(const TrainConfig&) const = default;
};

}  // namespace semamba::train
