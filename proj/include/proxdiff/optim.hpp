#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace proxdiff {

enum class OptimizerKind { Sgd, Adam };

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd or adam)");
}

// Fixed-learning-rate first-order optimizer. Default is SGD with momentum;
// Adam is available behind the same interface for configs that want it.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, Eigen::Index n, double momentum = 0.9)
      : kind_(kind), lr_(lr), momentum_(momentum) {
    if (!(lr > 0.0)) throw std::invalid_argument("Optimizer: lr must be positive");
    if (kind_ == OptimizerKind::Sgd) {
      velocity_ = Eigen::VectorXd::Zero(n);
    } else {
      m_ = Eigen::VectorXd::Zero(n);
      v_ = Eigen::VectorXd::Zero(n);
    }
  }

  // One descent step along grad.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (params.size() != grad.size()) {
      throw std::invalid_argument("Optimizer::step: size mismatch");
    }
    if (kind_ == OptimizerKind::Sgd) {
      velocity_ = momentum_ * velocity_ - lr_ * grad;
      params += velocity_;
      return;
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.array().square().matrix();
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

 private:
  OptimizerKind kind_;
  double lr_;
  double momentum_;
  Eigen::VectorXd velocity_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
  static constexpr double beta1_ = 0.9;
  static constexpr double beta2_ = 0.999;
  static constexpr double eps_ = 1e-8;
};

}  // namespace proxdiff
