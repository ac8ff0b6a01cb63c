#pragma once

#include <string>
#include <vector>

#include "semamba/data/dataset.hpp"
#include "semamba/eval/metrics.hpp"
#include "semamba/nets/network.hpp"

namespace semamba::eval {

struct ImageResult {
  std::string case_id;
  int slice_index = 0;
  MetricRow row;
  double iou = 0.0;
};

struct Evaluation {
  std::vector<ImageResult> images;
  MetricRow aggregate;  // mean of the per-image rows
  double mean_iou = 0.0;
};

/// Field-wise mean of rows. Throws DomainError when empty.
[[nodiscard]] MetricRow mean_row(const std::vector<MetricRow>& rows);

/// Argmax predictions at each sample's native resolution. Images are resized
/// to the network's input size, predicted in eval mode without gradients and
/// resized back with nearest-neighbour sampling. The training flag is
/// restored afterwards.
[[nodiscard]] std::vector<Mask> predict_masks(nets::SegmentationNetwork& network,
                                              const std::vector<data::Sample>& samples,
                                              int64_t batch_size = 8);

/// Scores given predictions against the samples' masks. Throws DataError if
/// the sets are empty, differ in length, or a sample has no mask.
[[nodiscard]] Evaluation evaluate_predictions(const std::vector<Mask>& predictions,
                                              const std::vector<data::Sample>& samples,
                                              int classes);

[[nodiscard]] Evaluation evaluate_testset(nets::SegmentationNetwork& network,
                                          const std::vector<data::Sample>& samples,
                                          int64_t batch_size = 8);

}  // namespace semamba::eval
