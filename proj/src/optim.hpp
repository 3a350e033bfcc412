#pragma once

#include <vector>

#include "vrsa/errors.hpp"
#include "vrsa/tensor.hpp"

namespace vrsa::detail {

/// Heavy-ball SGD: v <- momentum * v + g;  p <- p - lr * v.
class MomentumSgd {
 public:
  MomentumSgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads) {
    if (params.size() != grads.size()) throw ShapeError("optimizer: parameter/gradient count mismatch");
    if (velocity_.empty()) {
      for (const auto& p : params) velocity_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      velocity_[i] = momentum_ * velocity_[i] + *grads[i].value;
      *params[i].value -= lr_ * velocity_[i];
    }
  }

 private:
  double lr_;
  double momentum_;
  std::vector<Mat> velocity_;
};

inline void zero(const std::vector<ParamView>& views) {
  for (const auto& v : views) v.value->setZero();
}

}  // namespace vrsa::detail
