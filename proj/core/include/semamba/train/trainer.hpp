#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "semamba/data/dataset.hpp"
#include "semamba/data/transforms.hpp"
#include "semamba/objectives.hpp"
#include "semamba/train/config.hpp"

namespace semamba::train {

/// SGD with classical momentum (v <- mu v + g + wd theta; theta <- theta - lr v)
/// over all parameters, at a constant learning rate.
[[nodiscard]] std::unique_ptr<torch::optim::SGD> build_optimizer(torch::nn::Module& network,
                                                                 const TrainConfig& config);

/// Endless index stream over n items: each epoch is a fresh seeded
/// permutation, so an item repeats only after every other item was drawn.
class IndexStream {
 public:
  IndexStream(std::size_t n, data::Rng rng);
  [[nodiscard]] std::vector<std::size_t> next(std::size_t count);

 private:
  void reshuffle();

  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  data::Rng rng_;
};

struct TrainingBatch {
  torch::Tensor images;  // (labelled + unlabelled, 1, S, S); labelled rows first
  torch::Tensor labels;  // (labelled, S, S) int64
  int64_t labelled = 0;

  [[nodiscard]] int64_t unlabelled() const { return images.size(0) - labelled; }
};

/// Draws labelled and unlabelled samples from independent cycling streams
/// and applies seeded augmentation. Inputs must already be at the network
/// input size.
class BatchComposer {
 public:
  /// Throws ConfigError when the labelled set is empty, or when unlabelled
  /// samples are required but absent.
  BatchComposer(const std::vector<data::Sample>& labelled,
                const std::vector<data::Sample>& unlabelled, const TrainConfig& config);

  [[nodiscard]] TrainingBatch next();

 private:
  const std::vector<data::Sample>& labelled_;
  const std::vector<data::Sample>& unlabelled_;
  int64_t n_labelled_;
  int64_t n_unlabelled_;
  bool augment_;
  IndexStream labelled_stream_;
  std::optional<IndexStream> unlabelled_stream_;
  data::Rng augment_rng_;
};

/// The two networks of the framework and their optimizers.
struct NetworkPair {
  nets::NetworkPtr f1;  // mamba-unet by default; the reported model
  nets::NetworkPtr f2;  // cnn-unet by default
  std::unique_ptr<torch::optim::SGD> opt1;
  std::unique_ptr<torch::optim::SGD> opt2;

  /// f1 from seed, f2 from seed + 1.
  [[nodiscard]] static NetworkPair build(const TrainConfig& config);
};

/// The differentiable terms of one batch, before any optimizer step. With
/// semi and contra both disabled the unlabelled rows are not forwarded.
[[nodiscard]] loss::LossTerms compute_losses(nets::SegmentationNetwork& f1,
                                             nets::SegmentationNetwork& f2,
                                             const TrainingBatch& batch,
                                             const LossToggles& toggles, int64_t projector_grid);

/// One optimization step of both networks on the summed loss. A non-finite
/// term throws NumericalError before parameters change.
loss::LossBreakdown train_step(NetworkPair& pair, const TrainingBatch& batch,
                               const TrainConfig& config);

/// Mean foreground Dice of argmax predictions. Throws DataError when empty.
[[nodiscard]] double validate(nets::SegmentationNetwork& network,
                              const std::vector<data::Sample>& validation, int64_t batch_size = 8);

struct CheckpointRecord {
  int64_t iteration = 0;
  double val_dice_f1 = 0.0;
  double val_dice_f2 = 0.0;
  std::string checkpoint_f1;  // empty until a checkpoint has been written
  std::string checkpoint_f2;
  uint64_t config_hash = 0;

  [[nodiscard]] nlohmann::json to_json() const;
};

struct LogEntry {
  int64_t iteration = 0;  // 1-based step index
  loss::LossBreakdown losses;
  std::optional<double> val_dice_f1;
  std::optional<double> val_dice_f2;
};

struct TrainResult {
  CheckpointRecord best;
  std::vector<LogEntry> log;
  /// Best f1 validation Dice after each validation, nondecreasing.
  std::vector<double> best_history;
};

struct TrainHooks {
  std::function<void(const LogEntry&)> on_step;
};

/// File names written under the output directory.
inline constexpr const char* kLogFile = "train_log.csv";
inline constexpr const char* kRecordFile = "best_record.json";
inline constexpr const char* kBestF1 = "best_f1.ckpt";
inline constexpr const char* kBestF2 = "best_f2.ckpt";

/// Runs the full loop on an already split dataset (resized to the input
/// size here). Validates every `validate_every` steps and after the last
/// one, and keeps both checkpoints of the best f1 validation Dice.
TrainResult train(const TrainConfig& config, const data::DatasetSplit& split,
                  const std::filesystem::path& out_dir, const TrainHooks& hooks = {});

/// Loads `data_root` with `manifest` and trains.
TrainResult train(const TrainConfig& config, const std::filesystem::path& data_root,
                  const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                  const TrainHooks& hooks = {});

/// Thread and algorithm settings for reproducible runs.
void apply_determinism(bool deterministic);

}  // namespace semamba::train
