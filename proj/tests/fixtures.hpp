#pragma once

#include <filesystem>
#include <string>

#include "semamba/data/synth.hpp"
#include "semamba/train/config.hpp"

// Small configurations shared by the trainer, CLI and acceptance tests.
namespace semamba::testing {

inline nets::NetworkSpec tiny_mamba(int64_t size = 32) {
  auto s = nets::NetworkSpec::mamba_unet(4);
  s.input_size = size;
  s.embed_dim = 8;
  s.depths = {2, 2};
  s.state_size = 4;
  return s;
}

inline nets::NetworkSpec tiny_cnn(int64_t size = 32) {
  auto s = nets::NetworkSpec::cnn_unet(4);
  s.input_size = size;
  s.base_width = 4;
  return s;
}

inline train::TrainConfig tiny_config(uint64_t seed = 0) {
  train::TrainConfig c;
  c.iterations = 10;
  c.batch_size = 4;
  c.labelled_batch = 2;
  c.validate_every = 5;
  c.seed = seed;
  c.net1 = tiny_mamba();
  c.net2 = tiny_cnn();
  c.projector_grid = 4;
  c.eval_batch = 4;
  return c;
}

inline data::SynthOptions tiny_synth(uint64_t seed = 0) {
  data::SynthOptions o;
  o.cases = 10;
  o.slices_per_case = 2;
  o.image_size = 32;
  o.seed = seed;
  return o;
}

inline data::DatasetSplit tiny_split(uint64_t seed = 0) {
  const auto o = tiny_synth(seed);
  return data::split(data::synth_samples(o), data::synth_manifest(o));
}

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace semamba::testing
