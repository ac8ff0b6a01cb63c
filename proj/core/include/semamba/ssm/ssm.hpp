#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace semamba::ssm {

/// Continuous linear state-space model h' = A h + B x, y = C h + D x with a
/// scalar input and output and an N-dimensional hidden state.
struct ContinuousSSM {
  Eigen::MatrixXd A;  // N x N evolution
  Eigen::VectorXd B;  // input projection
  Eigen::VectorXd C;  // output projection
  double D = 0.0;     // skip connection

  [[nodiscard]] Eigen::Index state_size() const { return A.rows(); }

  /// Throws ShapeError / DomainError when dimensions disagree or an entry is
  /// not finite.
  void validate() const;

  /// Diagonal model with A = diag(a).
  static ContinuousSSM diagonal(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& c, double d);
};

/// ZOH-discretized model for one timescale; C and D are carried over.
struct DiscretizedSSM {
  Eigen::MatrixXd A_bar;
  Eigen::VectorXd B_bar;
  Eigen::VectorXd C;
  double D = 0.0;
  double delta = 0.0;
};

enum class Discretization {
  Exact,       // B_bar = (exp(dA) - I) A^{-1} B
  FirstOrder,  // B_bar = d B
};

/// Zero-order-hold discretization. A_bar = exp(delta A) in both modes.
///
/// Diagonal A is handled elementwise (zero diagonal entries take the limit
/// delta * B). A dense A in exact mode must be invertible, otherwise
/// SingularityError is thrown. delta <= 0 throws DomainError.
[[nodiscard]] DiscretizedSSM zoh_discretize(const ContinuousSSM& model, double delta,
                                            Discretization mode = Discretization::Exact);

/// Sequential recurrence h_k = A_bar_k h_{k-1} + B_bar_k x_k, y_k = C h_k + D x_k
/// with the discretization recomputed from each step's delta.
///
/// An empty `initial_state` means h_0 = 0. Throws ShapeError on length
/// mismatches and DomainError on nonpositive deltas or empty input.
[[nodiscard]] std::vector<double> selective_scan(std::span<const double> inputs,
                                                 std::span<const double> deltas,
                                                 const ContinuousSSM& model,
                                                 std::span<const double> initial_state = {},
                                                 Discretization mode = Discretization::Exact);

}  // namespace semamba::ssm
