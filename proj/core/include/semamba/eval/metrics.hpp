#pragma once

#include <cstdint>

#include "semamba/grid.hpp"

namespace semamba::eval {

struct ConfusionCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t tn = 0;
  int64_t fn = 0;

  [[nodiscard]] int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct SimilarityMetrics {
  double dice = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

struct SurfaceDistances {
  double hd95 = 0.0;
  double asd = 0.0;
};

/// The seven numbers reported per image (averaged over foreground classes)
/// and for aggregates. Distances are in pixels.
struct MetricRow {
  double dice = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double hd95 = 0.0;
  double asd = 0.0;
};

/// One-vs-rest counts of `class_index`. Throws ShapeError on shape mismatch.
[[nodiscard]] ConfusionCounts confusion(const Mask& pred, const Mask& gt, int class_index);

/// Dice, accuracy, precision, sensitivity and specificity from raw counts.
///
/// A ratio whose denominator is zero evaluates to 1 when the counts contain
/// no error (fp + fn == 0) and to 0 otherwise; in particular two empty
/// masks give dice 1.
[[nodiscard]] SimilarityMetrics similarity_metrics(const ConfusionCounts& c);

/// Boundary-based distances between two binary masks (nonzero = foreground).
///
/// Boundary pixels are foreground pixels with at least one 4-neighbour in the
/// background, pixels outside the image counting as background. Each
/// boundary pixel's distance is the Euclidean distance to the nearest
/// boundary pixel of the other mask. hd95 is the larger of the two directed
/// 95th percentiles (linear interpolation between order statistics); asd is
/// the mean of both directed distance sets pooled together.
///
/// Both masks empty -> (0, 0). Exactly one empty -> both values equal the
/// image diagonal, a finite worst case.
[[nodiscard]] SurfaceDistances surface_distances(const Mask& pred, const Mask& gt);

/// Linear-interpolation percentile of an unsorted sample, q in [0, 100].
[[nodiscard]] double percentile(std::vector<double> values, double q);

/// Mean over foreground classes 1..classes-1 of tp / (tp + fp + fn), with
/// the zero-denominator rule of similarity_metrics.
[[nodiscard]] double per_image_iou(const Mask& pred, const Mask& gt, int classes);

/// Per-class metrics averaged over foreground classes 1..classes-1.
[[nodiscard]] MetricRow image_metrics(const Mask& pred, const Mask& gt, int classes);

/// Foreground-averaged Dice only (what validation tracks).
[[nodiscard]] double image_dice(const Mask& pred, const Mask& gt, int classes);

}  // namespace semamba::eval
