#include "causeweave/pairing.h"

#include <set>
#include <stdexcept>

#include "causeweave/errors.h"

namespace causeweave {

Eigen::MatrixXd build_target(const Conversation &conversation) {
  const auto u = static_cast<Eigen::Index>(conversation.size());
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(u, u);
  // Several spans in one cause utterance still count as a single cause.
  std::vector<std::set<int>> causes(conversation.size());
  for (const auto &p : conversation.pairs) {
    causes[static_cast<std::size_t>(p.emotion_utt_id - 1)].insert(p.cause_utt_id);
  }
  for (Eigen::Index i = 0; i < u; ++i) {
    const auto &row = causes[static_cast<std::size_t>(i)];
    if (row.empty()) {
      target(i, i) = 1.0;
      continue;
    }
    const double mass = 1.0 / static_cast<double>(row.size());
    for (int j : row) target(i, j - 1) = mass;
  }
  return target;
}

std::vector<PairPrediction> extract_pairs(const Eigen::MatrixXd &causality,
                                          std::span<const Emotion> predicted_emotions,
                                          double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("threshold must lie in (0, 1]");
  }
  const auto u = static_cast<Eigen::Index>(predicted_emotions.size());
  if (causality.rows() != u || causality.cols() != u) {
    throw ShapeError("extract_pairs: matrix is " + std::to_string(causality.rows()) + "x" +
                     std::to_string(causality.cols()) + " for " + std::to_string(u) +
                     " utterances");
  }
  std::vector<PairPrediction> out;
  for (Eigen::Index i = 0; i < u; ++i) {
    Emotion e = predicted_emotions[static_cast<std::size_t>(i)];
    if (e == Emotion::kNeutral) continue;
    for (Eigen::Index j = 0; j < u; ++j) {
      if (causality(i, j) >= threshold) {
        out.push_back({static_cast<int>(i + 1), static_cast<int>(j + 1), e, std::nullopt,
                       causality(i, j)});
      }
    }
  }
  return out;
}

}  // namespace causeweave
