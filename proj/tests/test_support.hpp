#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

namespace semamba::testing {

/// exp(M) by its Taylor series, summed until terms stop changing the result.
inline Eigen::MatrixXd expm_series(const Eigen::MatrixXd& m) {
  const auto n = m.rows();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k < 200; ++k) {
    term = term * m / static_cast<double>(k);
    sum += term;
    if (term.lpNorm<Eigen::Infinity>() < 1e-300) break;
  }
  return sum;
}

/// sum_{k>=0} M^k / (k+1)!, so that (exp(M) - I) = M * phi1(M) without inverting M.
inline Eigen::MatrixXd phi1_series(const Eigen::MatrixXd& m) {
  const auto n = m.rows();
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);  // M^0 / 1!
  Eigen::MatrixXd sum = term;
  for (int k = 1; k < 200; ++k) {
    term = term * m / static_cast<double>(k + 1);
    sum += term;
    if (term.lpNorm<Eigen::Infinity>() < 1e-300) break;
  }
  return sum;
}

struct GradientReport {
  double worst_relative = 0.0;
  std::size_t checked = 0;
  std::vector<double> per_tensor;
};

/// Compares autograd gradients of `loss()` with respect to `params` against
/// central finite differences, tensor by tensor:
///   ||g_auto - g_fd|| / max(||g_auto||, ||g_fd||, floor).
/// `stride` > 1 checks every stride-th element only (others are compared
/// with the analytic value, i.e. excluded).
inline GradientReport check_gradients(const std::vector<torch::Tensor>& params,
                                      const std::function<torch::Tensor()>& loss,
                                      double step = 1e-6, int64_t stride = 1,
                                      double floor = 1e-10) {
  for (auto p : params) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
  loss().backward();
  GradientReport report;
  torch::NoGradGuard no_grad;
  for (const auto& p : params) {
    auto analytic = p.grad().defined() ? p.grad().clone() : torch::zeros_like(p);
    auto flat = p.view(-1);
    auto a_flat = analytic.view(-1);
    std::vector<double> a_vals, n_vals;
    for (int64_t i = 0; i < flat.numel(); i += stride) {
      const double orig = flat[i].item<double>();
      flat[i] = orig + step;
      const double up = loss().item<double>();
      flat[i] = orig - step;
      const double down = loss().item<double>();
      flat[i] = orig;
      n_vals.push_back((up - down) / (2 * step));
      a_vals.push_back(a_flat[i].item<double>());
    }
    double diff = 0, na = 0, nn = 0;
    for (std::size_t k = 0; k < a_vals.size(); ++k) {
      diff += (a_vals[k] - n_vals[k]) * (a_vals[k] - n_vals[k]);
      na += a_vals[k] * a_vals[k];
      nn += n_vals[k] * n_vals[k];
    }
    const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor});
    report.worst_relative = std::max(report.worst_relative, rel);
    report.per_tensor.push_back(rel);
    report.checked += a_vals.size();
  }
  return report;
}

}  // namespace semamba::testing
