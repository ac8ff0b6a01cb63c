#pragma once

#include <array>
#include <string_view>

#include <torch/torch.h>

namespace semamba::ssm {

enum class ScanDirection { RowForward = 0, RowBackward = 1, ColumnForward = 2, ColumnBackward = 3 };

inline constexpr std::array<ScanDirection, 4> kScanDirections = {
    ScanDirection::RowForward, ScanDirection::RowBackward, ScanDirection::ColumnForward,
    ScanDirection::ColumnBackward};

[[nodiscard]] std::string_view to_string(ScanDirection d);

/// The four traversals of a feature grid.
///
/// `sequences` has shape (batch, 4, channels, height*width); index k along
/// dim 1 is the k-th entry of kScanDirections.
struct DirectionalSequences {
  torch::Tensor sequences;
  int64_t height = 0;
  int64_t width = 0;

  [[nodiscard]] torch::Tensor direction(ScanDirection d) const {
    return sequences.select(1, static_cast<int64_t>(d));
  }
};

enum class MergeReduction { Mean, Sum };

/// Flattens (batch, channels, H, W) or (channels, H, W) into the four
/// directional sequences. Values are only permuted.
[[nodiscard]] DirectionalSequences cross_scan(const torch::Tensor& feature_map);

/// Scatters each direction back to grid order and reduces across directions.
/// Returns (batch, channels, H, W); a 3-D result is not restored, callers
/// holding an unbatched map should squeeze dim 0.
[[nodiscard]] torch::Tensor cross_merge(const DirectionalSequences& seqs,
                                        MergeReduction reduction = MergeReduction::Mean);

}  // namespace semamba::ssm
