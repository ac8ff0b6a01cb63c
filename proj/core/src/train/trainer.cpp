#include "semamba/train/trainer.hpp"

#include <charconv>
#include <fstream>
#include <limits>

#include "semamba/data/tensor.hpp"
#include "semamba/eval/evaluate.hpp"
#include "semamba/nets/checkpoint.hpp"

namespace semamba::train {

namespace fs = std::filesystem;

namespace {

// Stream identifiers for sample_rng; distinct so the draws are independent.
constexpr uint64_t kLabelledStream = 0x4c41424cULL;
constexpr uint64_t kUnlabelledStream = 0x554e4c42ULL;
constexpr uint64_t kAugmentStream = 0x41554721ULL;

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<data::Sample> resized(const std::vector<data::Sample>& in, int64_t size) {
  std::vector<data::Sample> out;
  out.reserve(in.size());
  for (const auto& s : in) {
    auto [image, mask] = data::resize_pair(s.image, s.mask, size);
    out.push_back({std::move(image), std::move(mask), s.case_id, s.slice_index});
  }
  return out;
}

void write_json_atomic(const fs::path& path, const nlohmann::json& j) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + ": " + ec.message());
}

torch::Tensor zero_like_loss(const torch::Tensor& ref) { return torch::zeros({}, ref.options()); }

}  // namespace

std::unique_ptr<torch::optim::SGD> build_optimizer(torch::nn::Module& network,
                                                   const TrainConfig& config) {
  return std::make_unique<torch::optim::SGD>(network.parameters(),
                                             torch::optim::SGDOptions(config.learning_rate)
                                                 .momentum(config.momentum)
                                                 .weight_decay(config.weight_decay)
                                                 .nesterov(false)
                                                 .dampening(0.0));
}

IndexStream::IndexStream(std::size_t n, data::Rng rng) : order_(n), rng_(std::move(rng)) {
  if (n == 0) throw ConfigError("IndexStream: empty collection");
  reshuffle();
}

void IndexStream::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  for (std::size_t i = order_.size() - 1; i > 0; --i) {
    std::swap(order_[i], order_[static_cast<std::size_t>(rng_() % (i + 1))]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> IndexStream::next(std::size_t count) {
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    if (cursor_ == order_.size()) reshuffle();
    out.push_back(order_[cursor_++]);
  }
  return out;
}

BatchComposer::BatchComposer(const std::vector<data::Sample>& labelled,
                             const std::vector<data::Sample>& unlabelled,
                             const TrainConfig& config)
    : labelled_(labelled),
      unlabelled_(unlabelled),
      n_labelled_(config.labelled_batch),
      n_unlabelled_(config.unlabelled_batch()),
      augment_(config.augment),
      labelled_stream_(labelled.empty() ? throw ConfigError("no labelled training samples")
                                        : labelled.size(),
                       data::sample_rng(config.seed, kLabelledStream)),
      augment_rng_(data::sample_rng(config.seed, kAugmentStream)) {
  for (const auto& s : labelled) {
    if (!s.mask) throw DataError("labelled sample " + s.case_id + " has no mask");
  }
  if (n_unlabelled_ > 0) {
    if (unlabelled.empty()) throw ConfigError("batch needs unlabelled samples but none exist");
    unlabelled_stream_.emplace(unlabelled.size(), data::sample_rng(config.seed, kUnlabelledStream));
  }
}

TrainingBatch BatchComposer::next() {
  std::vector<data::Sample> picked;
  for (auto i : labelled_stream_.next(static_cast<std::size_t>(n_labelled_))) {
    picked.push_back(labelled_[i]);
  }
  if (unlabelled_stream_) {
    for (auto i : unlabelled_stream_->next(static_cast<std::size_t>(n_unlabelled_))) {
      picked.push_back(unlabelled_[i]);
    }
  }
  if (augment_) {
    for (auto& s : picked) s = data::augment(s, augment_rng_);
  }
  std::vector<const Image*> images;
  std::vector<const Mask*> masks;
  for (const auto& s : picked) images.push_back(&s.image);
  for (int64_t i = 0; i < n_labelled_; ++i) masks.push_back(&*picked[static_cast<std::size_t>(i)].mask);
  return {data::images_to_tensor(images), data::masks_to_tensor(masks), n_labelled_};
}

NetworkPair NetworkPair::build(const TrainConfig& config) {
  NetworkPair p;
  p.f1 = nets::build_network(config.net1, config.seed);
  p.f2 = nets::build_network(config.net2, config.seed + 1);
  p.opt1 = build_optimizer(*p.f1, config);
  p.opt2 = build_optimizer(*p.f2, config);
  return p;
}

loss::LossTerms compute_losses(nets::SegmentationNetwork& f1, nets::SegmentationNetwork& f2,
                               const TrainingBatch& batch, const LossToggles& toggles,
                               int64_t projector_grid) {
  const int64_t n_lab = batch.labelled;
  const int64_t n_unl = batch.unlabelled();
  const bool use_unlabelled = toggles.semi || toggles.contra;
  const auto inputs = use_unlabelled ? batch.images : batch.images.narrow(0, 0, n_lab);

  const auto out1 = f1.forward(inputs);
  const auto out2 = f2.forward(inputs);
  const auto zero = zero_like_loss(out1.logits);

  loss::LossTerms t{zero, zero, zero, zero, zero};
  if (toggles.sup) {
    t.sup1 = loss::supervised_loss(out1.logits.narrow(0, 0, n_lab), batch.labels);
    t.sup2 = loss::supervised_loss(out2.logits.narrow(0, 0, n_lab), batch.labels);
  }
  if (toggles.semi && n_unl > 0) {
    std::tie(t.semi1, t.semi2) = loss::cross_supervision_loss(out1.logits.narrow(0, n_lab, n_unl),
                                                              out2.logits.narrow(0, n_lab, n_unl));
  }
  if (toggles.contra) {
    const int64_t channels = std::min(f1.feature_channels(), f2.feature_channels());
    t.contra = loss::contrastive_loss(
        loss::project_features(out1.features, projector_grid, channels),
        loss::project_features(out2.features, projector_grid, channels));
  }
  return t;
}

loss::LossBreakdown train_step(NetworkPair& pair, const TrainingBatch& batch,
                               const TrainConfig& config) {
  pair.f1->train();
  pair.f2->train();
  pair.opt1->zero_grad();
  pair.opt2->zero_grad();
  const auto terms = compute_losses(*pair.f1, *pair.f2, batch, config.losses, config.projector_grid);
  const auto breakdown = terms.breakdown();  // throws on non-finite terms
  const auto total = terms.sum();
  if (total.requires_grad()) total.backward();
  pair.opt1->step();
  pair.opt2->step();
  return breakdown;
}

double validate(nets::SegmentationNetwork& network, const std::vector<data::Sample>& validation,
                int64_t batch_size) {
  if (validation.empty()) throw DataError("validate: empty validation set");
  const auto preds = eval::predict_masks(network, validation, batch_size);
  const int classes = static_cast<int>(network.spec().classes);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!validation[i].mask) throw DataError("validate: sample without mask");
    sum += eval::image_dice(preds[i], *validation[i].mask, classes);
  }
  return sum / static_cast<double>(preds.size());
}

nlohmann::json CheckpointRecord::to_json() const {
  return {{"iteration", iteration},       {"val_dice_f1", val_dice_f1},
          {"val_dice_f2", val_dice_f2},   {"checkpoint_f1", checkpoint_f1},
          {"checkpoint_f2", checkpoint_f2}, {"config_hash", config_hash}};
}

void apply_determinism(bool deterministic) {
  if (!deterministic) return;
  torch::set_num_threads(1);
  at::globalContext().setDeterministicAlgorithms(true, /*warn_only=*/true);
}

TrainResult train(const TrainConfig& config, const data::DatasetSplit& split,
                  const fs::path& out_dir, const TrainHooks& hooks) {
  config.validate();
  if (split.validation.empty()) throw DataError("train: empty validation set");
  apply_determinism(config.deterministic);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  const int64_t size = config.net1.input_size;
  const auto labelled = resized(split.labelled, size);
  const auto unlabelled = resized(split.unlabelled, size);
  BatchComposer composer(labelled, unlabelled, config);
  auto pair = NetworkPair::build(config);

  TrainResult result;
  result.best.config_hash = config.hash();
  if (config.iterations == 0) return result;

  std::ofstream log(out_dir / kLogFile, std::ios::trunc);
  if (!log) throw DataError("cannot write " + (out_dir / kLogFile).string());
  log << "iteration,sup1,sup2,semi1,semi2,contra,total,val_dice_f1,val_dice_f2\n";

  double best = -std::numeric_limits<double>::infinity();
  const nlohmann::json meta_base = {{"config_hash", result.best.config_hash}};
  for (int64_t it = 1; it <= config.iterations; ++it) {
    LogEntry entry;
    entry.iteration = it;
    entry.losses = train_step(pair, composer.next(), config);

    if (it % config.validate_every == 0 || it == config.iterations) {
      const double d1 = validate(*pair.f1, split.validation, config.eval_batch);
      const double d2 = validate(*pair.f2, split.validation, config.eval_batch);
      entry.val_dice_f1 = d1;
      entry.val_dice_f2 = d2;
      if (d1 > best) {
        best = d1;
        auto meta = meta_base;
        meta["iteration"] = it;
        meta["val_dice_f1"] = d1;
        meta["val_dice_f2"] = d2;
        nets::save_checkpoint(out_dir / kBestF1, *pair.f1, meta);
        nets::save_checkpoint(out_dir / kBestF2, *pair.f2, meta);
        result.best.iteration = it;
        result.best.val_dice_f1 = d1;
        result.best.val_dice_f2 = d2;
        result.best.checkpoint_f1 = (out_dir / kBestF1).string();
        result.best.checkpoint_f2 = (out_dir / kBestF2).string();
        write_json_atomic(out_dir / kRecordFile, result.best.to_json());
      }
      result.best_history.push_back(best);
    }

    const auto& l = entry.losses;
    log << it << ',' << num(l.sup1) << ',' << num(l.sup2) << ',' << num(l.semi1) << ','
        << num(l.semi2) << ',' << num(l.contra) << ',' << num(l.total) << ','
        << (entry.val_dice_f1 ? num(*entry.val_dice_f1) : "") << ','
        << (entry.val_dice_f2 ? num(*entry.val_dice_f2) : "") << '\n';
    log.flush();
    if (hooks.on_step) hooks.on_step(entry);
    result.log.push_back(std::move(entry));
  }
  return result;
}

TrainResult train(const TrainConfig& config, const fs::path& data_root, const fs::path& manifest,
                  const fs::path& out_dir, const TrainHooks& hooks) {
  config.validate();
  const auto samples = data::load_dataset(data_root, static_cast<int>(config.net1.classes));
  const auto parts = data::split(samples, data::SplitManifest::load(manifest));
  return train(config, parts, out_dir, hooks);
}

}  // namespace semamba::train
