#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semamba/eval/evaluate.hpp"

namespace semamba::eval {

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Five-number summary. Quartiles are medians of the lower and upper halves;
/// for an odd count the overall median belongs to neither half, and a single
/// value yields all five equal. Throws DomainError when empty.
[[nodiscard]] BoxStats box_stats(std::vector<double> values);

struct Histogram {
  std::vector<double> edges;    // bins + 1 ascending edges over [0, 1]
  std::vector<int64_t> counts;  // [edge_i, edge_{i+1}); the last bin is closed
};

/// Equal-width histogram over [0, 1]; values outside are clamped.
[[nodiscard]] Histogram unit_histogram(const std::vector<double>& values, int bins = 10);

/// One evaluated method (e.g. a network or an ablation).
struct MethodEvaluation {
  std::string method;
  Evaluation evaluation;
};

/// Column order of metrics.csv.
inline constexpr const char* kMetricsHeader =
    "kind,method,case_id,slice,dice,accuracy,precision,sensitivity,specificity,hd95,asd,iou";

/// Writes one aggregate row then one row per image for every method.
void write_metrics_csv(const std::vector<MethodEvaluation>& methods,
                       const std::filesystem::path& path);

/// Reads per-image rows back (aggregate rows are recomputed, not trusted).
/// Throws DataError on malformed input.
[[nodiscard]] std::vector<MethodEvaluation> read_metrics_csv(const std::filesystem::path& path);

/// Writes metrics.csv, iou_histogram.csv and dice_boxplot.csv under
/// `out_dir`, plus SVG plots when `svg` is set. Output bytes depend only on
/// the inputs. Throws DataError for empty input or an unwritable directory.
void emit_report(const std::vector<MethodEvaluation>& methods,
                 const std::filesystem::path& out_dir, bool svg = false);

}  // namespace semamba::eval
