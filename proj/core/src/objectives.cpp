#include "semamba/objectives.hpp"

#include <cmath>
#include <sstream>

#include "semamba/error.hpp"

namespace semamba::loss {

namespace {

constexpr double kNormFloor = 1e-30;  // representable in float32

void check_pair(const torch::Tensor& probs, const torch::Tensor& target, const char* op) {
  if (probs.dim() != 4) throw ShapeError(std::string(op) + ": probabilities must be rank 4");
  if (target.dim() != 3 || target.size(0) != probs.size(0) || target.size(1) != probs.size(2) ||
      target.size(2) != probs.size(3)) {
    throw ShapeError(std::string(op) + ": target shape " + c10::str(target.sizes()) +
                     " does not match probabilities " + c10::str(probs.sizes()));
  }
  if (target.numel() > 0) {
    const auto lo = target.min().item<int64_t>();
    const auto hi = target.max().item<int64_t>();
    if (lo < 0 || hi >= probs.size(1)) {
      throw ShapeError(std::string(op) + ": target class outside [0, " +
                       std::to_string(probs.size(1)) + ")");
    }
  }
}

torch::Tensor one_hot(const torch::Tensor& target, int64_t classes, const torch::Tensor& like) {
  return torch::one_hot(target.to(torch::kLong), classes).permute({0, 3, 1, 2}).to(like.dtype());
}

}  // namespace

torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& target, double smooth) {
  check_pair(probs, target, "dice_loss");
  const auto g = one_hot(target, probs.size(1), probs);
  const std::vector<int64_t> reduce = {0, 2, 3};
  auto intersect = (probs * g).sum(reduce);
  auto denom = probs.sum(reduce) + g.sum(reduce);
  auto dice = (2.0 * intersect + smooth) / (denom + smooth);
  return 1.0 - dice.mean();
}

torch::Tensor cross_entropy_loss(const torch::Tensor& probs, const torch::Tensor& target,
                                 double clamp) {
  check_pair(probs, target, "cross_entropy_loss");
  auto picked = probs.gather(1, target.to(torch::kLong).unsqueeze(1)).squeeze(1);
  return -torch::log(picked.clamp_min(clamp)).mean();
}

torch::Tensor supervised_loss(const torch::Tensor& logits, const torch::Tensor& target) {
  auto probs = torch::softmax(logits, 1);
  return loss::cross_entropy_loss(probs, target) + loss::dice_loss(probs, target);
}

torch::Tensor pseudo_label(const torch::Tensor& logits) {
  if (logits.dim() != 4) throw ShapeError("pseudo_label: logits must be rank 4");
  return logits.detach().argmax(1);
}

std::pair<torch::Tensor, torch::Tensor> cross_supervision_loss(const torch::Tensor& logits1,
                                                               const torch::Tensor& logits2) {
  if (!logits1.sizes().equals(logits2.sizes())) {
    throw ShapeError("cross_supervision_loss: logit shapes differ " + c10::str(logits1.sizes()) +
                     " vs " + c10::str(logits2.sizes()));
  }
  auto semi1 = supervised_loss(logits1, pseudo_label(logits2));
  auto semi2 = supervised_loss(logits2, pseudo_label(logits1));
  return {semi1, semi2};
}

torch::Tensor project_features(const torch::Tensor& features, int64_t grid, int64_t channels) {
  if (features.dim() != 4) throw ShapeError("project_features: features must be rank 4");
  const int64_t c = features.size(1);
  if (grid < 1 || grid > features.size(2) || grid > features.size(3)) {
    throw DomainError("project_features: grid " + std::to_string(grid) +
                      " exceeds feature map " + std::to_string(features.size(2)) + "x" +
                      std::to_string(features.size(3)));
  }
  if (channels < 0 || channels > c) {
    throw DomainError("project_features: cannot pool " + std::to_string(c) + " channels to " +
                      std::to_string(channels));
  }
  const int64_t out_c = channels == 0 ? c : channels;
  auto pooled = torch::adaptive_avg_pool3d(features.unsqueeze(1), {out_c, grid, grid}).squeeze(1);
  // Zero vectors have zero norm; dividing by max(norm, tiny) keeps them zero.
  auto norm = pooled.norm(2, 1, /*keepdim=*/true);
  return pooled / norm.clamp_min(kNormFloor);
}

torch::Tensor contrastive_loss(const torch::Tensor& p1, const torch::Tensor& p2) {
  if (!p1.sizes().equals(p2.sizes())) {
    throw ShapeError("contrastive_loss: projected shapes differ " + c10::str(p1.sizes()) +
                     " vs " + c10::str(p2.sizes()));
  }
  return (p1 - p2).pow(2).mean();
}

LossBreakdown total_loss(LossBreakdown parts) {
  const std::pair<const char*, double> named[] = {{"sup1", parts.sup1},
                                                  {"sup2", parts.sup2},
                                                  {"semi1", parts.semi1},
                                                  {"semi2", parts.semi2},
                                                  {"contra", parts.contra}};
  for (const auto& [name, value] : named) {
    if (!std::isfinite(value)) {
      throw NumericalError(std::string("non-finite loss term ") + name + " (" + to_string(parts) +
                           ")");
    }
  }
  parts.total = parts.sup1 + parts.sup2 + parts.semi1 + parts.semi2 + parts.contra;
  return parts;
}

LossBreakdown LossTerms::breakdown() const {
  LossBreakdown b;
  b.sup1 = sup1.item<double>();
  b.sup2 = sup2.item<double>();
  b.semi1 = semi1.item<double>();
  b.semi2 = semi2.item<double>();
  b.contra = contra.item<double>();
  return total_loss(b);
}

std::string to_string(const LossBreakdown& b) {
  std::ostringstream os;
  os << "sup1=" << b.sup1 << " sup2=" << b.sup2 << " semi1=" << b.semi1 << " semi2=" << b.semi2
     << " contra=" << b.contra << " total=" << b.total;
  return os.str();
}

}  // namespace semamba::loss
