#include "semamba/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace semamba::eval {

namespace {

void check_shapes(const Mask& a, const Mask& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": mask shapes differ (" + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width) + ")");
  }
}

double safe_ratio(int64_t num, int64_t den, bool error_free) {
  if (den == 0) return error_free ? 1.0 : 0.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

Grid<uint8_t> boundary(const Mask& m) {
  Grid<uint8_t> out(m.height, m.width, 0);
  auto fg = [&](int64_t y, int64_t x) {
    return y >= 0 && x >= 0 && y < m.height && x < m.width && m(y, x) != 0;
  };
  for (int64_t y = 0; y < m.height; ++y) {
    for (int64_t x = 0; x < m.width; ++x) {
      if (!fg(y, x)) continue;
      if (!fg(y - 1, x) || !fg(y + 1, x) || !fg(y, x - 1) || !fg(y, x + 1)) out(y, x) = 1;
    }
  }
  return out;
}

constexpr int64_t kFar = std::numeric_limits<int64_t>::max() / 4;

// Exact 1-D squared distance transform (lower envelope of parabolas rooted
// at the finite entries of f).
void edt_1d(const std::vector<int64_t>& f, std::vector<int64_t>& d, std::vector<int64_t>& v,
            std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto n = static_cast<int64_t>(f.size());
  int64_t k = -1;
  for (int64_t q = 0; q < n; ++q) {
    if (f[q] >= kFar) continue;
    double s = -kInf;
    while (k >= 0) {
      const int64_t p = v[k];
      s = (static_cast<double>(f[q] + q * q) - static_cast<double>(f[p] + p * p)) /
          static_cast<double>(2 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf : s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kFar);
    return;
  }
  k = 0;
  for (int64_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const int64_t p = v[k];
    d[q] = (q - p) * (q - p) + f[p];
  }
}

// Squared Euclidean distance from every pixel to the nearest set pixel.
Grid<int64_t> squared_distance_transform(const Grid<uint8_t>& sites) {
  const int64_t h = sites.height;
  const int64_t w = sites.width;
  Grid<int64_t> out(h, w, kFar);
  const auto longest = static_cast<std::size_t>(std::max(h, w));
  std::vector<int64_t> f(longest), d(longest), v(longest);
  std::vector<double> z(longest + 1);

  for (int64_t x = 0; x < w; ++x) {
    f.resize(static_cast<std::size_t>(h));
    d.resize(f.size());
    for (int64_t y = 0; y < h; ++y) f[y] = sites(y, x) ? 0 : kFar;
    edt_1d(f, d, v, z);
    for (int64_t y = 0; y < h; ++y) out(y, x) = d[y];
  }
  for (int64_t y = 0; y < h; ++y) {
    f.resize(static_cast<std::size_t>(w));
    d.resize(f.size());
    for (int64_t x = 0; x < w; ++x) f[x] = out(y, x);
    edt_1d(f, d, v, z);
    for (int64_t x = 0; x < w; ++x) out(y, x) = d[x];
  }
  return out;
}

std::vector<double> directed(const Grid<uint8_t>& from, const Grid<int64_t>& to_sq) {
  std::vector<double> out;
  for (int64_t i = 0; i < from.size(); ++i) {
    if (from.data[i]) out.push_back(std::sqrt(static_cast<double>(to_sq.data[i])));
  }
  return out;
}

Mask binarize(const Mask& m, int cls) {
  Mask out(m.height, m.width, 0);
  for (int64_t i = 0; i < m.size(); ++i) out.data[i] = m.data[i] == cls ? 1 : 0;
  return out;
}

}  // namespace

ConfusionCounts confusion(const Mask& pred, const Mask& gt, int class_index) {
  check_shapes(pred, gt, "confusion");
  ConfusionCounts c;
  for (int64_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data[i] == class_index;
    const bool g = gt.data[i] == class_index;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

SimilarityMetrics similarity_metrics(const ConfusionCounts& c) {
  const bool error_free = c.fp + c.fn == 0;
  SimilarityMetrics m;
  m.dice = safe_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, error_free);
  m.accuracy = safe_ratio(c.tp + c.tn, c.total(), error_free);
  m.precision = safe_ratio(c.tp, c.tp + c.fp, error_free);
  m.sensitivity = safe_ratio(c.tp, c.tp + c.fn, error_free);
  m.specificity = safe_ratio(c.tn, c.tn + c.fp, error_free);
  return m;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

SurfaceDistances surface_distances(const Mask& pred, const Mask& gt) {
  check_shapes(pred, gt, "surface_distances");
  const auto bp = boundary(pred);
  const auto bg = boundary(gt);
  const bool pred_empty = std::none_of(bp.data.begin(), bp.data.end(), [](auto v) { return v; });
  const bool gt_empty = std::none_of(bg.data.begin(), bg.data.end(), [](auto v) { return v; });
  if (pred_empty && gt_empty) return {0.0, 0.0};
  if (pred_empty || gt_empty) {
    const double diag = std::hypot(static_cast<double>(pred.height), static_cast<double>(pred.width));
    return {diag, diag};
  }
  const auto d_pg = directed(bp, squared_distance_transform(bg));
  const auto d_gp = directed(bg, squared_distance_transform(bp));

  SurfaceDistances s;
  s.hd95 = std::max(percentile(d_pg, 95.0), percentile(d_gp, 95.0));
  const double sum = std::accumulate(d_pg.begin(), d_pg.end(), 0.0) +
                     std::accumulate(d_gp.begin(), d_gp.end(), 0.0);
  s.asd = sum / static_cast<double>(d_pg.size() + d_gp.size());
  return s;
}

double per_image_iou(const Mask& pred, const Mask& gt, int classes) {
  check_shapes(pred, gt, "per_image_iou");
  if (classes < 2) throw DomainError("per_image_iou: need at least two classes");
  double sum = 0.0;
  for (int c = 1; c < classes; ++c) {
    const auto k = confusion(pred, gt, c);
    sum += safe_ratio(k.tp, k.tp + k.fp + k.fn, k.fp + k.fn == 0);
  }
  return sum / (classes - 1);
}

MetricRow image_metrics(const Mask& pred, const Mask& gt, int classes) {
  check_shapes(pred, gt, "image_metrics");
  if (classes < 2) throw DomainError("image_metrics: need at least two classes");
  MetricRow row;
  for (int c = 1; c < classes; ++c) {
    const auto sim = similarity_metrics(confusion(pred, gt, c));
    const auto dist = surface_distances(binarize(pred, c), binarize(gt, c));
    row.dice += sim.dice;
    row.accuracy += sim.accuracy;
    row.precision += sim.precision;
    row.sensitivity += sim.sensitivity;
    row.specificity += sim.specificity;
    row.hd95 += dist.hd95;
    row.asd += dist.asd;
  }
  const double n = classes - 1;
  row.dice /= n;
  row.accuracy /= n;
  row.precision /= n;
  row.sensitivity /= n;
  row.specificity /= n;
  row.hd95 /= n;
  row.asd /= n;
  return row;
}

double image_dice(const Mask& pred, const Mask& gt, int classes) {
  check_shapes(pred, gt, "image_dice");
  if (classes < 2) throw DomainError("image_dice: need at least two classes");
  double sum = 0.0;
  for (int c = 1; c < classes; ++c) sum += similarity_metrics(confusion(pred, gt, c)).dice;
  return sum / (classes - 1);
}

}  // namespace semamba::eval
