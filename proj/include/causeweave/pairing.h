#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "causeweave/corpus.h"

namespace causeweave {

inline constexpr double kDefaultThreshold = 0.45;

// Attention target: row i spreads mass 1/k over the k distinct gold cause
// utterances of utterance i, or puts 1.0 on the diagonal when it has none.
Eigen::MatrixXd build_target(const Conversation &conversation);

// Emits (i, j) for every entry C[i][j] >= threshold whose row utterance is
// predicted non-neutral. Diagonal entries are kept (self-cause is legal).
// Ids are 1-based; output is sorted by (emotion_utt_id, cause_utt_id).
// Throws ShapeError on mismatched sizes, std::invalid_argument for a
// threshold outside (0, 1].
std::vector<PairPrediction> extract_pairs(const Eigen::MatrixXd &causality,
                                          std::span<const Emotion> predicted_emotions,
                                          double threshold = kDefaultThreshold);

}  // namespace causeweave
