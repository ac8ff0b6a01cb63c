#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "semamba/data/dataset.hpp"

namespace semamba::data {

struct SynthOptions {
  int cases = 20;
  int slices_per_case = 10;
  int classes = 4;  // 2 or 4
  uint64_t seed = 0;
  int64_t image_size = 224;
  double labelled_fraction = 0.1;
  double validation_fraction = 0.1;
  double test_fraction = 0.2;
  double noise = 0.06;  // std-dev of additive Gaussian noise before normalization

  /// Throws ConfigError for unsupported values.
  void validate() const;
};

/// Synthetic slices with exact masks, fully determined by the options.
///
/// Four-class slices show an ellipse (class 1) holding an annulus (class 2)
/// that encloses a disk (class 3); two-class slices show the ellipse only.
/// Unlabelled bright blobs are scattered over the background. Shape size and
/// position drift smoothly across the slices of a case. Images are already
/// quantized to 16 bits and min-max normalized, so writing and re-loading
/// them reproduces the same values.
[[nodiscard]] std::vector<Sample> synth_samples(const SynthOptions& options);

/// Case-level split: test and validation fractions first, at least one
/// labelled case, the rest unlabelled. Shuffled by the options' seed.
[[nodiscard]] SplitManifest synth_manifest(const SynthOptions& options);

/// Writes the dataset layout read by load_dataset plus `manifest.json` under
/// `out_directory`, and returns the manifest. Throws DataError when the
/// directory cannot be written.
SplitManifest synth_generate(const SynthOptions& options,
                             const std::filesystem::path& out_directory);

/// Zero-padded case identifier used by the generator ("case_007").
[[nodiscard]] std::string synth_case_id(int index);

}  // namespace semamba::data
