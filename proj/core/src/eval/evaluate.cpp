#include "semamba/eval/evaluate.hpp"

#include "semamba/data/tensor.hpp"
#include "semamba/data/transforms.hpp"

namespace semamba::eval {

MetricRow mean_row(const std::vector<MetricRow>& rows) {
  if (rows.empty()) throw DomainError("mean_row: no rows");
  MetricRow m;
  for (const auto& r : rows) {
    m.dice += r.dice;
    m.accuracy += r.accuracy;
    m.precision += r.precision;
    m.sensitivity += r.sensitivity;
    m.specificity += r.specificity;
    m.hd95 += r.hd95;
    m.asd += r.asd;
  }
  const double n = static_cast<double>(rows.size());
  m.dice /= n;
  m.accuracy /= n;
  m.precision /= n;
  m.sensitivity /= n;
  m.specificity /= n;
  m.hd95 /= n;
  m.asd /= n;
  return m;
}

std::vector<Mask> predict_masks(nets::SegmentationNetwork& network,
                                const std::vector<data::Sample>& samples, int64_t batch_size) {
  if (batch_size < 1) throw DomainError("predict_masks: batch_size must be positive");
  const int64_t size = network.spec().input_size;
  const bool was_training = network.is_training();
  network.eval();
  torch::NoGradGuard no_grad;

  std::vector<Mask> out;
  out.reserve(samples.size());
  const auto n = static_cast<int64_t>(samples.size());
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t end = std::min(n, start + batch_size);
    std::vector<Image> resized;
    resized.reserve(static_cast<std::size_t>(end - start));
    for (int64_t i = start; i < end; ++i) {
      const auto& img = samples[static_cast<std::size_t>(i)].image;
      resized.push_back(img.height == size && img.width == size
                            ? img
                            : data::resize_image(img, size, size));
    }
    std::vector<const Image*> ptrs;
    for (const auto& r : resized) ptrs.push_back(&r);
    const auto logits = network.logits(data::images_to_tensor(ptrs));
    auto masks = data::tensor_to_masks(logits.argmax(1));
    for (int64_t i = start; i < end; ++i) {
      const auto& img = samples[static_cast<std::size_t>(i)].image;
      auto& m = masks[static_cast<std::size_t>(i - start)];
      out.push_back(img.height == size && img.width == size
                        ? std::move(m)
                        : data::resize_mask(m, img.height, img.width));
    }
  }
  network.train(was_training);
  return out;
}

Evaluation evaluate_predictions(const std::vector<Mask>& predictions,
                                const std::vector<data::Sample>& samples, int classes) {
  if (samples.empty()) throw DataError("evaluation: empty test set");
  if (predictions.size() != samples.size()) {
    throw DataError("evaluation: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(samples.size()) + " samples");
  }
  Evaluation ev;
  std::vector<MetricRow> rows;
  double iou_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.mask) throw DataError("evaluation: sample " + s.case_id + "/" +
                                 std::to_string(s.slice_index) + " has no mask");
    ImageResult r;
    r.case_id = s.case_id;
    r.slice_index = s.slice_index;
    r.row = image_metrics(predictions[i], *s.mask, classes);
    r.iou = per_image_iou(predictions[i], *s.mask, classes);
    rows.push_back(r.row);
    iou_sum += r.iou;
    ev.images.push_back(std::move(r));
  }
  ev.aggregate = mean_row(rows);
  ev.mean_iou = iou_sum / static_cast<double>(samples.size());
  return ev;
}

Evaluation evaluate_testset(nets::SegmentationNetwork& network,
                            const std::vector<data::Sample>& samples, int64_t batch_size) {
  if (samples.empty()) throw DataError("evaluation: empty test set");
  return evaluate_predictions(predict_masks(network, samples, batch_size), samples,
                              static_cast<int>(network.spec().classes));
}

}  // namespace semamba::eval
