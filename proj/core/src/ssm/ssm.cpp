#include "semamba/ssm/ssm.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "semamba/error.hpp"

namespace semamba::ssm {

namespace {

bool is_diagonal(const Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (i != j && m(i, j) != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

void ContinuousSSM::validate() const {
  const auto n = A.rows();
  if (n < 1) throw ShapeError("ContinuousSSM: state size must be >= 1");
  if (A.cols() != n || B.size() != n || C.size() != n) {
    throw ShapeError("ContinuousSSM: A must be N x N and B, C length N (N = " +
                     std::to_string(n) + ")");
  }
  if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !std::isfinite(D)) {
    throw DomainError("ContinuousSSM: non-finite parameter");
  }
}

ContinuousSSM ContinuousSSM::diagonal(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                      const Eigen::VectorXd& c, double d) {
  ContinuousSSM m;
  m.A = a.asDiagonal();
  m.B = b;
  m.C = c;
  m.D = d;
  return m;
}

DiscretizedSSM zoh_discretize(const ContinuousSSM& model, double delta, Discretization mode) {
  model.validate();
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw DomainError("zoh_discretize: delta must be positive and finite, got " +
                      std::to_string(delta));
  }
  const auto n = model.state_size();
  DiscretizedSSM out;
  out.C = model.C;
  out.D = model.D;
  out.delta = delta;

  if (is_diagonal(model.A)) {
    out.A_bar = Eigen::MatrixXd::Zero(n, n);
    out.B_bar.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = model.A(i, i);
      out.A_bar(i, i) = std::exp(delta * a);
      if (mode == Discretization::FirstOrder || a == 0.0) {
        out.B_bar(i) = delta * model.B(i);
      } else {
        out.B_bar(i) = std::expm1(delta * a) / a * model.B(i);
      }
    }
    return out;
  }

  const Eigen::MatrixXd scaled = delta * model.A;
  out.A_bar = scaled.exp();
  if (mode == Discretization::FirstOrder) {
    out.B_bar = delta * model.B;
    return out;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(model.A);
  if (!lu.isInvertible()) {
    throw SingularityError("zoh_discretize: A is singular; exact ZOH needs A^{-1}");
  }
  // A^{-1} and exp(dA) commute, so solve A z = (exp(dA) - I) B.
  const Eigen::VectorXd rhs = (out.A_bar - Eigen::MatrixXd::Identity(n, n)) * model.B;
  out.B_bar = lu.solve(rhs);
  return out;
}

std::vector<double> selective_scan(std::span<const double> inputs, std::span<const double> deltas,
                                   const ContinuousSSM& model,
                                   std::span<const double> initial_state, Discretization mode) {
  model.validate();
  if (inputs.empty()) throw DomainError("selective_scan: inputs must be non-empty");
  if (inputs.size() != deltas.size()) {
    throw ShapeError("selective_scan: " + std::to_string(inputs.size()) + " inputs but " +
                     std::to_string(deltas.size()) + " deltas");
  }
  const auto n = model.state_size();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  if (!initial_state.empty()) {
    if (static_cast<Eigen::Index>(initial_state.size()) != n) {
      throw ShapeError("selective_scan: initial state length differs from N");
    }
    for (Eigen::Index i = 0; i < n; ++i) h(i) = initial_state[static_cast<std::size_t>(i)];
  }

  std::vector<double> out;
  out.reserve(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto step = zoh_discretize(model, deltas[k], mode);
    h = step.A_bar * h + step.B_bar * inputs[k];
    out.push_back(step.C.dot(h) + step.D * inputs[k]);
  }
  return out;
}

}  // namespace semamba::ssm
