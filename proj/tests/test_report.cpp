#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "semamba/eval/report.hpp"

using namespace semamba;
using namespace semamba::eval;
using semamba::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Masks with a growing square of class 1 against a fixed ground truth.
MethodEvaluation sample_method(const std::string& name, int images, int shift) {
  std::vector<data::Sample> samples;
  std::vector<Mask> preds;
  for (int i = 0; i < images; ++i) {
    data::Sample s;
    s.case_id = "case_" + std::to_string(i);
    s.slice_index = i % 3;
    s.image = Image(12, 12);
    s.mask = Mask(12, 12, 0);
    Mask p(12, 12, 0);
    for (int y = 2; y < 8; ++y)
      for (int x = 2; x < 8; ++x) (*s.mask)(y, x) = 1;
    for (int y = 2 + (i + shift) % 4; y < 9; ++y)
      for (int x = 3; x < 8; ++x) p(y, x) = 1;
    samples.push_back(std::move(s));
    preds.push_back(std::move(p));
  }
  return {name, evaluate_predictions(preds, samples, 2)};
}

}  // namespace

TEST(BoxStats, MedianOfHalves) {
  const auto b = box_stats({0.8, 0.2, 0.6, 0.4});
  EXPECT_DOUBLE_EQ(b.min, 0.2);
  EXPECT_DOUBLE_EQ(b.q1, 0.3);
  EXPECT_DOUBLE_EQ(b.median, 0.5);
  EXPECT_DOUBLE_EQ(b.q3, 0.7);
  EXPECT_DOUBLE_EQ(b.max, 0.8);
  // Odd counts exclude the median from both halves.
  const auto odd = box_stats({1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(odd.q1, 1.5);
  EXPECT_DOUBLE_EQ(odd.median, 3.0);
  EXPECT_DOUBLE_EQ(odd.q3, 4.5);
  const auto one = box_stats({0.7});
  EXPECT_EQ(one.min, 0.7);
  EXPECT_EQ(one.q1, 0.7);
  EXPECT_EQ(one.q3, 0.7);
  EXPECT_THROW((void)box_stats({}), DomainError);
}

TEST(Histogram, UnitBins) {
  const auto top = unit_histogram({1.0});
  ASSERT_EQ(top.counts.size(), 10u);
  ASSERT_EQ(top.edges.size(), 11u);
  EXPECT_EQ(top.counts.back(), 1);
  for (std::size_t i = 0; i + 1 < top.counts.size(); ++i) EXPECT_EQ(top.counts[i], 0);
  const auto h = unit_histogram({0.0, 0.05, 0.1, 0.55, 0.999});
  EXPECT_EQ(h.counts[0], 2);
  EXPECT_EQ(h.counts[1], 1);
  EXPECT_EQ(h.counts[5], 1);
  EXPECT_EQ(h.counts[9], 1);
  EXPECT_DOUBLE_EQ(h.edges[3], 0.3);
}

TEST(Report, FilesAndDeterminism) {
  TempDir a("semamba_report_a"), b("semamba_report_b");
  const std::vector<MethodEvaluation> methods{sample_method("semi", 5, 0), sample_method("sup", 4, 1)};
  emit_report(methods, a.path(), true);
  emit_report(methods, b.path(), true);
  for (const char* name : {"metrics.csv", "iou_histogram.csv", "dice_boxplot.csv"}) {
    ASSERT_TRUE(fs::exists(a.path() / name)) << name;
    EXPECT_EQ(slurp(a.path() / name), slurp(b.path() / name)) << name;
  }
  std::size_t svgs = 0;
  for (const auto& e : fs::directory_iterator(a.path())) svgs += e.path().extension() == ".svg";
  EXPECT_GE(svgs, 1u);

  const auto metrics = lines(a.path() / "metrics.csv");
  EXPECT_EQ(metrics.front(), kMetricsHeader);
  EXPECT_EQ(metrics.size(), 1u + 2u + 5u + 4u);
  const auto box = lines(a.path() / "dice_boxplot.csv");
  EXPECT_EQ(box.front(), "method,min,q1,median,q3,max");
  EXPECT_EQ(box.size(), 3u);
  const auto hist = lines(a.path() / "iou_histogram.csv");
  EXPECT_EQ(hist.front(), "method,bin_lower,bin_upper,count");
  EXPECT_EQ(hist.size(), 1u + 2u * 10u);
  EXPECT_THROW(emit_report({}, a.path()), DataError);
}

TEST(Report, MetricsRoundTrip) {
  TempDir dir("semamba_report_rt");
  const std::vector<MethodEvaluation> methods{sample_method("semi", 6, 2), sample_method("sup", 3, 0)};
  write_metrics_csv(methods, dir.path() / "m.csv");
  const auto back = read_metrics_csv(dir.path() / "m.csv");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_EQ(back[m].method, methods[m].method);
    const auto& x = back[m].evaluation;
    const auto& y = methods[m].evaluation;
    ASSERT_EQ(x.images.size(), y.images.size());
    for (std::size_t i = 0; i < x.images.size(); ++i) {
      EXPECT_EQ(x.images[i].case_id, y.images[i].case_id);
      EXPECT_EQ(x.images[i].slice_index, y.images[i].slice_index);
      EXPECT_EQ(x.images[i].row.dice, y.images[i].row.dice);
      EXPECT_EQ(x.images[i].row.hd95, y.images[i].row.hd95);
      EXPECT_EQ(x.images[i].iou, y.images[i].iou);
    }
    EXPECT_EQ(x.aggregate.dice, y.aggregate.dice);
    EXPECT_EQ(x.mean_iou, y.mean_iou);
  }
  // Aggregate is the mean of per-image rows.
  double sum = 0;
  for (const auto& r : methods[0].evaluation.images) sum += r.row.asd;
  EXPECT_NEAR(methods[0].evaluation.aggregate.asd, sum / 6, 1e-12);
  std::ofstream(dir.path() / "bad.csv") << "kind,method\nimage,x\n";
  EXPECT_THROW((void)read_metrics_csv(dir.path() / "bad.csv"), DataError);
  EXPECT_THROW((void)read_metrics_csv(dir.path() / "absent.csv"), DataError);
}
