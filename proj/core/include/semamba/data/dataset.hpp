#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semamba/grid.hpp"

namespace semamba::data {

struct Sample {
  Image image;               // per-slice min-max normalized to [0, 1]
  std::optional<Mask> mask;  // absent for unlabelled use
  std::string case_id;
  int slice_index = 0;
};

/// Loads `root/<case_id>/slice_<k>_img.png` (16- or 8-bit grayscale) with the
/// optional `slice_<k>_mask.png` (8-bit, value = class index). Non-directory
/// entries of `root` are ignored. Samples are ordered by (case_id, k).
///
/// Throws DataError for malformed files, image/mask size mismatches, and mask
/// values >= classes.
[[nodiscard]] std::vector<Sample> load_dataset(const std::filesystem::path& root, int classes);

/// Case lists for the four subsets; they must be pairwise disjoint.
struct SplitManifest {
  std::vector<std::string> labelled;
  std::vector<std::string> unlabelled;
  std::vector<std::string> validation;
  std::vector<std::string> test;

  /// Throws DataError if a case appears twice.
  void validate() const;

  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] static SplitManifest from_json(const nlohmann::json& j);
  [[nodiscard]] static SplitManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const SplitManifest&) const = default;
};

struct DatasetSplit {
  std::vector<Sample> labelled;
  std::vector<Sample> unlabelled;  // masks stripped
  std::vector<Sample> validation;
  std::vector<Sample> test;
};

/// Partitions by case. Samples of cases the manifest does not mention are
/// dropped; manifest cases absent from `samples` throw DataError.
[[nodiscard]] DatasetSplit split(const std::vector<Sample>& samples, const SplitManifest& manifest);

/// Min-max normalization of raw intensities to [0, 1]; constant images map to 0.
[[nodiscard]] Image normalize_intensity(const Grid<uint16_t>& raw);

}  // namespace semamba::data
