#include "causeweave/adamw.h"

#include <cmath>

#include "causeweave/errors.h"

namespace causeweave {

void AdamW::step(std::span<Eigen::MatrixXd *const> params,
                 std::span<const Eigen::MatrixXd *const> grads) {
  if (params.size() != grads.size()) throw ShapeError("AdamW: params/grads count mismatch");
  if (m_.empty()) {
    for (const auto *p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  } else if (m_.size() != params.size()) {
    throw ShapeError("AdamW: parameter list changed between steps");
  }

  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.lr;
  const double decay = lr * config_.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd &p = *params[i];
    const Eigen::MatrixXd &g = *grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw ShapeError("AdamW: gradient shape mismatch for parameter " + std::to_string(i));
    }
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    p -= decay * p;
    p.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
}

}  // namespace causeweave
