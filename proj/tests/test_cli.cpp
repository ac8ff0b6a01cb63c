#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "fixtures.hpp"
#include "semamba/data/png_io.hpp"
#include "semamba/eval/report.hpp"
#include "semamba/train/trainer.hpp"

using namespace semamba;
using semamba::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Writes a run configuration that trains the tiny networks.
fs::path tiny_run_config(const fs::path& dir) {
  auto t = semamba::testing::tiny_config();
  t.iterations = 4;
  t.validate_every = 2;
  const auto path = dir / "tiny.json";
  std::ofstream(path) << nlohmann::json{{"train", t.to_json()}}.dump(2);
  return path;
}

std::vector<std::string> synth_args(const fs::path& out) {
  return {"synth", "--cases", "10", "--slices", "2", "--image-size", "32", "--seed", "3", "--out",
          out.string()};
}

}  // namespace

TEST(Cli, UsageAndConfigErrors) {
  TempDir dir("semamba_cli_usage");
  EXPECT_EQ(run_cli({}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"synth", "--bogus", "1"}).code, cli::kConfigError);
  auto r = run_cli({"synth", "--classes", "3", "--out", (dir.path() / "d").string()});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("classes"), std::string::npos);
  EXPECT_EQ(run_cli({"synth"}).code, cli::kConfigError);  // --out missing
  std::ofstream(dir.path() / "bad.json") << R"({"train": {"iteratons": 5}})";
  EXPECT_EQ(run_cli({"train", "--config", (dir.path() / "bad.json").string(), "--data", "x", "--out",
                     (dir.path() / "never").string()})
                .code,
            cli::kConfigError);
  EXPECT_FALSE(fs::exists(dir.path() / "never"));
  std::ofstream(dir.path() / "broken.json") << "{not json";
  EXPECT_EQ(run_cli({"synth", "--config", (dir.path() / "broken.json").string(), "--out",
                     (dir.path() / "d").string()})
                .code,
            cli::kConfigError);
  EXPECT_EQ(run_cli({"eval", "--subset", "train", "--out", dir.path().string()}).code, cli::kConfigError);
}

TEST(Cli, SynthIsReproducible) {
  TempDir dir("semamba_cli_synth");
  const auto a = dir.path() / "a", b = dir.path() / "b";
  auto r = run_cli(synth_args(a));
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  EXPECT_NE(r.out.find("manifest.json"), std::string::npos);
  ASSERT_EQ(run_cli(synth_args(b)).code, cli::kSuccess);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().filename() == cli::kResolvedConfig) continue;
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a)));
  }
  EXPECT_EQ(files, 10u * 2u * 2u + 1u);
  const auto snap = read_json(a / cli::kResolvedConfig);
  EXPECT_EQ(snap.at("synth").at("seed"), 3);
  EXPECT_EQ(snap.at("synth").at("cases"), 10);
}

TEST(Cli, TrainDefaultsAndOverridesInSnapshot) {
  TempDir dir("semamba_cli_defaults");
  const auto data = dir.path() / "data";
  ASSERT_EQ(run_cli(synth_args(data)).code, cli::kSuccess);
  // A manifest naming a missing case fails at data loading, after the
  // snapshot is written and before any training compute.
  data::SplitManifest broken{{"case_000"}, {"case_001"}, {"case_002"}, {"case_404"}};
  broken.save(dir.path() / "broken_manifest.json");
  const auto out = dir.path() / "run";
  auto r = run_cli({"train", "--data", data.string(), "--manifest",
                    (dir.path() / "broken_manifest.json").string(), "--out", out.string()});
  EXPECT_EQ(r.code, cli::kDataError);
  auto snap = read_json(out / cli::kResolvedConfig);
  EXPECT_EQ(snap.at("train").at("iterations"), 30000);
  EXPECT_EQ(snap.at("train").at("batch_size"), 16);
  EXPECT_EQ(snap.at("train").at("learning_rate"), 0.01);
  EXPECT_EQ(snap.at("train").at("momentum"), 0.9);
  EXPECT_EQ(snap.at("train").at("weight_decay"), 1e-4);

  r = run_cli({"train", "--data", data.string(), "--manifest",
               (dir.path() / "broken_manifest.json").string(), "--out", out.string(),
               "--iterations", "100", "--no-semi", "--no-contra"});
  EXPECT_EQ(r.code, cli::kDataError);
  snap = read_json(out / cli::kResolvedConfig);
  EXPECT_EQ(snap.at("train").at("iterations"), 100);
  EXPECT_EQ(snap.at("train").at("losses").at("semi"), false);
  EXPECT_EQ(snap.at("train").at("losses").at("contra"), false);
  EXPECT_EQ(snap.at("train").at("losses").at("sup"), true);

  // Flags beat the config file, which beats the defaults.
  const auto cfg = tiny_run_config(dir.path());
  r = run_cli({"train", "--config", cfg.string(), "--data", data.string(), "--manifest",
               (dir.path() / "broken_manifest.json").string(), "--out", out.string(), "--lr", "0.05"});
  snap = read_json(out / cli::kResolvedConfig);
  EXPECT_EQ(snap.at("train").at("iterations"), 4);
  EXPECT_EQ(snap.at("train").at("learning_rate"), 0.05);
  EXPECT_EQ(snap.at("train").at("momentum"), 0.9);
}

TEST(Cli, TrainEvalPredictReport) {
  TempDir dir("semamba_cli_pipeline");
  const auto data = dir.path() / "data";
  ASSERT_EQ(run_cli(synth_args(data)).code, cli::kSuccess);
  const auto cfg = tiny_run_config(dir.path());
  const auto run_a = dir.path() / "run_a";
  auto r = run_cli({"train", "--config", cfg.string(), "--data", data.string(), "--out",
                    run_a.string(), "--deterministic"});
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  for (const char* f : {train::kLogFile, train::kRecordFile, train::kBestF1, train::kBestF2}) {
    EXPECT_TRUE(fs::exists(run_a / f)) << f;
  }
  // Re-running from the snapshot reproduces the run.
  const auto run_b = dir.path() / "run_b";
  r = run_cli({"train", "--config", (run_a / cli::kResolvedConfig).string(), "--out", run_b.string()});
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  EXPECT_EQ(slurp(run_a / train::kLogFile), slurp(run_b / train::kLogFile));

  const auto ckpt = (run_a / train::kBestF1).string();
  r = run_cli({"eval", "--checkpoint", ckpt, "--data", data.string(), "--out",
               (dir.path() / "eval").string(), "--method", "tiny"});
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  EXPECT_TRUE(fs::exists(dir.path() / "eval" / "metrics.csv"));
  const auto scored = eval::read_metrics_csv(dir.path() / "eval" / "metrics.csv");
  ASSERT_EQ(scored.size(), 1u);
  EXPECT_EQ(scored[0].method, "tiny");
  EXPECT_EQ(scored[0].evaluation.images.size(), 4u);  // 2 test cases x 2 slices

  const auto preds = dir.path() / "preds";
  r = run_cli({"predict", "--checkpoint", ckpt, "--data", data.string(), "--subset", "all", "--out",
               preds.string()});
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  std::size_t masks = 0;
  for (const auto& e : fs::recursive_directory_iterator(preds)) {
    if (e.path().extension() != ".png") continue;
    ++masks;
    for (auto v : data::read_png_gray(e.path()).data) EXPECT_LT(v, 4);
  }
  EXPECT_EQ(masks, 20u);

  // The predict layout is accepted back by eval.
  r = run_cli({"eval", "--predictions", preds.string(), "--data", data.string(), "--out",
               (dir.path() / "eval_preds").string()});
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  const auto via_dir = eval::read_metrics_csv(dir.path() / "eval_preds" / "metrics.csv");
  EXPECT_EQ(via_dir[0].evaluation.aggregate.dice, scored[0].evaluation.aggregate.dice);

  r = run_cli({"report", "--metrics", (dir.path() / "eval" / "metrics.csv").string(), "--metrics",
               (dir.path() / "eval_preds" / "metrics.csv").string(), "--out",
               (dir.path() / "report").string(), "--svg"});
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  EXPECT_TRUE(fs::exists(dir.path() / "report" / "dice_boxplot.csv"));
}

TEST(Cli, OraclePredictionsScorePerfectly) {
  TempDir dir("semamba_cli_oracle");
  const auto data = dir.path() / "data";
  ASSERT_EQ(run_cli(synth_args(data)).code, cli::kSuccess);
  // The dataset's own masks, laid out as a predictions directory.
  auto r = run_cli({"eval", "--predictions", data.string(), "--data", data.string(), "--out",
                    (dir.path() / "eval").string()});
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  const auto scored = eval::read_metrics_csv(dir.path() / "eval" / "metrics.csv");
  EXPECT_EQ(scored[0].evaluation.aggregate.dice, 1.0);
  EXPECT_EQ(scored[0].evaluation.aggregate.hd95, 0.0);
  EXPECT_EQ(scored[0].evaluation.mean_iou, 1.0);
}

TEST(Cli, SingleRowReportHistogram) {
  TempDir dir("semamba_cli_report");
  const auto metrics = dir.path() / "metrics.csv";
  std::ofstream(metrics) << eval::kMetricsHeader << "\n"
                         << "image,solo,case_000,0,0.5,0.9,0.6,0.4,0.95,3,1.5,0.33\n";
  auto r = run_cli({"report", "--metrics", metrics.string(), "--out", (dir.path() / "rep").string()});
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  std::ifstream hist(dir.path() / "rep" / "iou_histogram.csv");
  std::string line;
  std::getline(hist, line);
  int occupied = 0, rows = 0;
  while (std::getline(hist, line)) {
    ++rows;
    occupied += line.substr(line.rfind(',') + 1) != "0";
  }
  EXPECT_EQ(rows, 10);
  EXPECT_EQ(occupied, 1);
}

TEST(Cli, DataAndNumericalExitCodes) {
  TempDir dir("semamba_cli_codes");
  EXPECT_EQ(run_cli({"eval", "--checkpoint", (dir.path() / "missing.ckpt").string(), "--data",
                     dir.path().string(), "--out", (dir.path() / "e").string()})
                .code,
            cli::kDataError);
  EXPECT_EQ(run_cli({"report", "--metrics", (dir.path() / "nope.csv").string(), "--out",
                     (dir.path() / "r").string()})
                .code,
            cli::kDataError);
  const auto data = dir.path() / "data";
  ASSERT_EQ(run_cli(synth_args(data)).code, cli::kSuccess);
  const auto cfg = tiny_run_config(dir.path());
  const auto r = run_cli({"train", "--config", cfg.string(), "--data", data.string(), "--out",
                          (dir.path() / "boom").string(), "--lr", "1e12", "--iterations", "50"});
  EXPECT_EQ(r.code, cli::kNumericalError) << r.err;
  EXPECT_NE(r.err.find("non-finite"), std::string::npos);
}
