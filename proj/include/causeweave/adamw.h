#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace causeweave {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay and bias-corrected moments. The i-th
// parameter passed to step() must keep its shape across calls.
class AdamW {
 public:
  explicit AdamW(const AdamWConfig &config) : config_(config) {}

  void step(std::span<Eigen::MatrixXd *const> params,
            std::span<const Eigen::MatrixXd *const> grads);

  std::size_t steps_taken() const { return t_; }

 private:
  AdamWConfig config_;
  std::size_t t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

}  // namespace causeweave
