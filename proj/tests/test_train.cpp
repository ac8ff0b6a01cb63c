#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "semamba/eval/evaluate.hpp"
#include "semamba/nets/checkpoint.hpp"
#include "semamba/train/trainer.hpp"

using namespace semamba;
using namespace semamba::train;
using namespace semamba::testing;
namespace fs = std::filesystem;

namespace {

struct Holder : torch::nn::Module {
  torch::Tensor theta;
  explicit Holder(torch::Tensor init) { theta = register_parameter("theta", std::move(init)); }
};

TrainConfig optimiser_config(double lr, double momentum, double wd) {
  TrainConfig c;
  c.learning_rate = lr;
  c.momentum = momentum;
  c.weight_decay = wd;
  return c;
}

// Predicts the class encoded in the image intensity (class / 3), or always
// background. Lets validation be checked without training anything.
class EncodedClassNet : public nets::SegmentationNetwork {
 public:
  EncodedClassNet(int64_t size, bool background_only)
      : SegmentationNetwork([&] {
          auto s = nets::NetworkSpec::cnn_unet(4);
          s.input_size = size;
          return s;
        }()),
        background_only_(background_only) {}

  nets::ForwardOutput forward(const torch::Tensor& images) override {
    auto cls = background_only_ ? torch::zeros_like(images.squeeze(1), torch::kLong)
                                : torch::round(images.squeeze(1) * 3).to(torch::kLong);
    auto logits = torch::one_hot(cls, 4).permute({0, 3, 1, 2}).to(torch::kFloat) * 10;
    return {logits, logits};
  }
  [[nodiscard]] int64_t feature_channels() const override { return 4; }

 private:
  bool background_only_;
};

std::vector<data::Sample> encoded_samples(int n, int64_t size) {
  std::vector<data::Sample> out;
  data::SynthOptions o;
  o.cases = n;
  o.slices_per_case = 1;
  o.image_size = size;
  for (auto s : data::synth_samples(o)) {
    for (std::size_t i = 0; i < s.image.data.size(); ++i) s.image.data[i] = s.mask->data[i] / 3.0f;
    out.push_back(std::move(s));
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Config, Defaults) {
  const TrainConfig c;
  EXPECT_EQ(c.iterations, 30000);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_EQ(c.labelled_batch, 8);
  EXPECT_EQ(c.unlabelled_batch(), 8);
  EXPECT_EQ(c.learning_rate, 0.01);
  EXPECT_EQ(c.momentum, 0.9);
  EXPECT_EQ(c.weight_decay, 1e-4);
  EXPECT_EQ(c.validate_every, 200);
  EXPECT_EQ(c.net1.variant, nets::Variant::MambaUnet);
  EXPECT_EQ(c.net2.variant, nets::Variant::CnnUnet);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, JsonRoundTripAndRejections) {
  auto c = tiny_config(3);
  c.losses.contra = false;
  EXPECT_EQ(TrainConfig::from_json(c.to_json()), c);
  EXPECT_EQ(TrainConfig::from_json(c.to_json()).hash(), c.hash());
  EXPECT_NE(tiny_config(4).hash(), c.hash());
  EXPECT_THROW((void)TrainConfig::from_json({{"iteratons", 5}}), ConfigError);
  EXPECT_THROW((void)TrainConfig::from_json({{"losses", {{"sup", true}, {"cps", true}}}}), ConfigError);
  EXPECT_EQ(TrainConfig::from_json({{"iterations", 7}}).batch_size, 16);

  auto bad = tiny_config();
  bad.labelled_batch = 5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.net2.classes = 2;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.losses = {false, false, false};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.learning_rate = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.projector_grid = 64;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Optimizer, PlainStepShrinksParameters) {
  Holder h(torch::tensor({1.0, -2.0, 0.5}, torch::kDouble));
  auto opt = build_optimizer(h, optimiser_config(0.01, 0.0, 0.0));
  const auto before = h.theta.detach().clone();
  opt->zero_grad();
  (0.5 * h.theta.pow(2).sum()).backward();
  opt->step();
  EXPECT_TRUE(torch::allclose(h.theta, before * 0.99, 0, 1e-15));
}

TEST(Optimizer, WeightDecayAddsToGradient) {
  Holder h(torch::tensor({1.0, -2.0, 0.5}, torch::kDouble));
  const auto g = torch::tensor({0.3, 0.1, -0.2}, torch::kDouble);
  auto opt = build_optimizer(h, optimiser_config(1.0, 0.0, 1e-4));
  const auto before = h.theta.detach().clone();
  opt->zero_grad();
  (h.theta * g).sum().backward();
  opt->step();
  EXPECT_TRUE(torch::allclose(h.theta, before - (g + 1e-4 * before), 0, 1e-15));
}

TEST(Optimizer, ClassicalMomentum) {
  Holder h(torch::zeros({3}, torch::kDouble));
  const auto g = torch::tensor({0.3, 0.1, -0.2}, torch::kDouble);
  auto opt = build_optimizer(h, optimiser_config(1.0, 0.9, 0.0));
  for (int i = 0; i < 2; ++i) {
    opt->zero_grad();
    (h.theta * g).sum().backward();
    opt->step();
  }
  // Step one moves by g, step two by the velocity 0.9 g + g.
  EXPECT_TRUE(torch::allclose(h.theta, -(g + 1.9 * g), 0, 1e-15));
}

TEST(IndexStreamTest, CyclesThroughPermutations) {
  IndexStream s(3, data::sample_rng(0, 1));
  const auto draws = s.next(24);
  for (std::size_t epoch = 0; epoch < 8; ++epoch) {
    std::set<std::size_t> seen(draws.begin() + 3 * epoch, draws.begin() + 3 * epoch + 3);
    EXPECT_EQ(seen, (std::set<std::size_t>{0, 1, 2}));
  }
  IndexStream again(3, data::sample_rng(0, 1));
  EXPECT_EQ(again.next(24), draws);
  EXPECT_THROW(IndexStream(0, data::sample_rng(0, 1)), ConfigError);
}

TEST(BatchComposerTest, DefaultSplitAndDeterminism) {
  const auto split = tiny_split();
  TrainConfig c;  // 8 + 8
  BatchComposer a(split.labelled, split.unlabelled, c);
  BatchComposer b(split.labelled, split.unlabelled, c);
  for (int i = 0; i < 3; ++i) {
    const auto ba = a.next();
    const auto bb = b.next();
    EXPECT_EQ(ba.labelled, 8);
    EXPECT_EQ(ba.unlabelled(), 8);
    EXPECT_EQ(ba.images.sizes(), (std::vector<int64_t>{16, 1, 32, 32}));
    EXPECT_EQ(ba.labels.sizes(), (std::vector<int64_t>{8, 32, 32}));
    EXPECT_TRUE(torch::equal(ba.images, bb.images));
    EXPECT_TRUE(torch::equal(ba.labels, bb.labels));
  }
  c.seed = 1;
  BatchComposer other(split.labelled, split.unlabelled, c);
  BatchComposer base(split.labelled, split.unlabelled, TrainConfig{});
  EXPECT_FALSE(torch::equal(other.next().images, base.next().images));
  EXPECT_THROW(BatchComposer({}, split.unlabelled, c), ConfigError);
}

TEST(LossStructure, BreakdownSumsEveryStep) {
  const auto split = tiny_split();
  const auto config = tiny_config();
  auto pair = NetworkPair::build(config);
  BatchComposer composer(split.labelled, split.unlabelled, config);
  for (int step = 0; step < 5; ++step) {
    const auto b = train_step(pair, composer.next(), config);
    EXPECT_NEAR(b.total, b.sup1 + b.sup2 + b.semi1 + b.semi2 + b.contra, 1e-9);
    for (double v : {b.sup1, b.sup2, b.semi1, b.semi2, b.contra}) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
    EXPECT_GT(b.semi1, 0.0);
    EXPECT_GT(b.contra, 0.0);
  }
}

TEST(LossStructure, ContrastZeroForIdenticalNetworks) {
  const auto split = tiny_split();
  auto config = tiny_config();
  config.net1 = tiny_cnn();
  config.net2 = tiny_cnn();
  auto f1 = nets::build_network(config.net1, 5);
  auto f2 = nets::build_network(config.net2, 5);
  BatchComposer composer(split.labelled, split.unlabelled, config);
  const auto terms = compute_losses(*f1, *f2, composer.next(), config.losses, config.projector_grid);
  EXPECT_EQ(terms.contra.item<double>(), 0.0);
  EXPECT_EQ(terms.sup1.item<double>(), terms.sup2.item<double>());
}

TEST(LossStructure, NoGradientIntoPseudoLabelProducer) {
  const auto split = tiny_split();
  const auto config = tiny_config();
  auto pair = NetworkPair::build(config);
  BatchComposer composer(split.labelled, split.unlabelled, config);
  const auto batch = composer.next();
  auto grad_norm = [](nets::SegmentationNetwork& n) {
    double s = 0;
    for (const auto& p : n.parameters())
      if (p.grad().defined()) s += p.grad().pow(2).sum().item<double>();
    return std::sqrt(s);
  };
  for (int which = 1; which <= 2; ++which) {
    pair.f1->zero_grad();
    pair.f2->zero_grad();
    const auto terms = compute_losses(*pair.f1, *pair.f2, batch, {false, true, false}, 4);
    (which == 1 ? terms.semi1 : terms.semi2).backward();
    auto& learner = which == 1 ? *pair.f1 : *pair.f2;
    auto& producer = which == 1 ? *pair.f2 : *pair.f1;
    EXPECT_GT(grad_norm(learner), 0.0);
    EXPECT_EQ(grad_norm(producer), 0.0);
  }
}

TEST(LossStructure, SupervisedOnlyMatchesPlainTrainer) {
  const auto split = tiny_split();
  auto config = tiny_config();
  config.losses = {true, false, false};
  auto pair = NetworkPair::build(config);
  BatchComposer composer(split.labelled, split.unlabelled, config);

  // Reference: two independent supervised trainers with hand-built optimisers.
  auto r1 = nets::build_network(config.net1, config.seed);
  auto r2 = nets::build_network(config.net2, config.seed + 1);
  auto sgd = [&](nets::SegmentationNetwork& n) {
    return torch::optim::SGD(n.parameters(), torch::optim::SGDOptions(config.learning_rate)
                                                 .momentum(config.momentum)
                                                 .weight_decay(config.weight_decay));
  };
  auto o1 = sgd(*r1);
  auto o2 = sgd(*r2);
  BatchComposer ref_composer(split.labelled, split.unlabelled, config);
  r1->train();
  r2->train();
  for (int step = 0; step < 5; ++step) {
    const auto b = train_step(pair, composer.next(), config);
    const auto batch = ref_composer.next();
    const auto x = batch.images.narrow(0, 0, batch.labelled);
    o1.zero_grad();
    o2.zero_grad();
    const auto l1 = loss::supervised_loss(r1->logits(x), batch.labels);
    const auto l2 = loss::supervised_loss(r2->logits(x), batch.labels);
    l1.backward();
    l2.backward();
    o1.step();
    o2.step();
    EXPECT_NEAR(b.sup1, l1.item<double>(), 1e-9) << "step " << step;
    EXPECT_NEAR(b.sup2, l2.item<double>(), 1e-9) << "step " << step;
    EXPECT_EQ(b.semi1 + b.semi2 + b.contra, 0.0);
  }
}

TEST(LossStructure, NonFiniteLossAbortsBeforeUpdate) {
  const auto split = tiny_split();
  const auto config = tiny_config();
  auto pair = NetworkPair::build(config);
  {
    torch::NoGradGuard g;
    pair.f2->parameters().front().fill_(std::nan(""));
  }
  const auto before = pair.f1->parameters().front().clone();
  BatchComposer composer(split.labelled, split.unlabelled, config);
  EXPECT_THROW((void)train_step(pair, composer.next(), config), NumericalError);
  EXPECT_TRUE(torch::equal(pair.f1->parameters().front(), before));
}

TEST(Validation, OracleAndBackgroundPredictors) {
  const auto samples = encoded_samples(4, 32);
  EncodedClassNet oracle(32, false), background(32, true);
  EXPECT_EQ(validate(oracle, samples, 3), 1.0);
  EXPECT_LT(validate(background, samples, 3), 1e-12);
  EXPECT_THROW((void)validate(oracle, {}), DataError);
}

TEST(Validation, MatchesEvaluationModule) {
  const auto split = tiny_split();
  auto net = nets::build_network(tiny_cnn(), 0);
  const double v = validate(*net, split.validation, 3);
  const auto ev = eval::evaluate_testset(*net, split.validation, 5);
  EXPECT_NEAR(v, ev.aggregate.dice, 1e-12);
}

TEST(Train, ZeroIterationsWritesNothing) {
  TempDir dir("semamba_train_zero");
  auto config = tiny_config();
  config.iterations = 0;
  const auto result = train::train(config, tiny_split(), dir.path());
  EXPECT_EQ(result.best.iteration, 0);
  EXPECT_TRUE(result.best.checkpoint_f1.empty());
  EXPECT_EQ(result.best.config_hash, config.hash());
  EXPECT_TRUE(result.log.empty());
  EXPECT_FALSE(fs::exists(dir.path() / kBestF1));
  EXPECT_FALSE(fs::exists(dir.path() / kLogFile));
}

TEST(Train, DeterministicTraceAndCheckpoints) {
  TempDir a("semamba_train_a"), b("semamba_train_b");
  auto config = tiny_config(2);
  config.deterministic = true;
  config.validate_every = 3;
  const auto split = tiny_split();
  const auto ra = train::train(config, split, a.path());
  const auto rb = train::train(config, split, b.path());
  ASSERT_EQ(ra.log.size(), 10u);
  ASSERT_EQ(rb.log.size(), 10u);
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    const auto& x = ra.log[i].losses;
    const auto& y = rb.log[i].losses;
    EXPECT_EQ(x.sup1, y.sup1);
    EXPECT_EQ(x.sup2, y.sup2);
    EXPECT_EQ(x.semi1, y.semi1);
    EXPECT_EQ(x.semi2, y.semi2);
    EXPECT_EQ(x.contra, y.contra);
    EXPECT_EQ(x.total, y.total);
    EXPECT_NEAR(x.total, x.sup1 + x.sup2 + x.semi1 + x.semi2 + x.contra, 1e-9);
  }
  EXPECT_EQ(slurp(a.path() / kLogFile), slurp(b.path() / kLogFile));

  // Validation at 3, 6, 9 and the final step; best history never decreases.
  ASSERT_EQ(ra.best_history.size(), 4u);
  for (std::size_t i = 1; i < ra.best_history.size(); ++i) {
    EXPECT_GE(ra.best_history[i], ra.best_history[i - 1]);
  }
  EXPECT_EQ(ra.best.val_dice_f1, ra.best_history.back());
  const auto record = nlohmann::json::parse(slurp(a.path() / kRecordFile));
  EXPECT_EQ(record.at("iteration").get<int64_t>(), ra.best.iteration);
  EXPECT_EQ(record.at("config_hash").get<uint64_t>(), config.hash());

  auto loaded = nets::load_checkpoint(ra.best.checkpoint_f1);
  EXPECT_EQ(validate(*loaded.network, split.validation, config.eval_batch), ra.best.val_dice_f1);
  EXPECT_EQ(loaded.metadata.at("iteration").get<int64_t>(), ra.best.iteration);

  std::ifstream log(a.path() / kLogFile);
  std::string header;
  std::getline(log, header);
  EXPECT_EQ(header, "iteration,sup1,sup2,semi1,semi2,contra,total,val_dice_f1,val_dice_f2");
}

TEST(Train, FromDirectoryAndManifest) {
  TempDir data("semamba_train_data"), out("semamba_train_out");
  const auto manifest = data::synth_generate(tiny_synth(), data.path());
  auto config = tiny_config();
  config.iterations = 2;
  const auto result = train::train(config, data.path(), data.path() / "manifest.json", out.path());
  EXPECT_EQ(result.log.size(), 2u);
  EXPECT_TRUE(fs::exists(out.path() / kBestF2));
  EXPECT_THROW((void)train::train(config, data.path(), data.path() / "nope.json", out.path()), DataError);
}
