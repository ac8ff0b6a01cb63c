#include "semamba/ssm/cross_scan.hpp"

#include <string>

#include "semamba/error.hpp"

namespace semamba::ssm {

std::string_view to_string(ScanDirection d) {
  switch (d) {
    case ScanDirection::RowForward: return "row-forward";
    case ScanDirection::RowBackward: return "row-backward";
    case ScanDirection::ColumnForward: return "column-forward";
    case ScanDirection::ColumnBackward: return "column-backward";
  }
  return "unknown";
}

DirectionalSequences cross_scan(const torch::Tensor& feature_map) {
  torch::Tensor x = feature_map;
  if (x.dim() == 3) x = x.unsqueeze(0);
  if (x.dim() != 4) throw ShapeError("cross_scan: expected (batch, channels, H, W)");
  const int64_t h = x.size(2);
  const int64_t w = x.size(3);
  if (h < 1 || w < 1) throw ShapeError("cross_scan: empty spatial grid");

  auto rows = x.flatten(2);                  // (b, c, h*w) row-major
  auto cols = x.transpose(2, 3).flatten(2);  // column-major
  auto seqs = torch::stack({rows, rows.flip(-1), cols, cols.flip(-1)}, 1);
  return {seqs, h, w};
}

torch::Tensor cross_merge(const DirectionalSequences& seqs, MergeReduction reduction) {
  const auto& s = seqs.sequences;
  if (s.dim() != 4 || s.size(1) != 4) {
    throw ShapeError("cross_merge: sequences must be (batch, 4, channels, L)");
  }
  const int64_t h = seqs.height;
  const int64_t w = seqs.width;
  if (h < 1 || w < 1 || s.size(3) != h * w) {
    throw ShapeError("cross_merge: sequence length " + std::to_string(s.size(3)) +
                     " does not match grid " + std::to_string(h) + "x" + std::to_string(w));
  }
  const int64_t b = s.size(0);
  const int64_t c = s.size(2);

  auto rows = s.select(1, 0) + s.select(1, 1).flip(-1);
  auto cols = s.select(1, 2) + s.select(1, 3).flip(-1);
  auto merged = rows.view({b, c, h, w}) + cols.view({b, c, w, h}).transpose(2, 3);
  if (reduction == MergeReduction::Mean) merged = merged / 4.0;
  return merged;
}

}  // namespace semamba::ssm
