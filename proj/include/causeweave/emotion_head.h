#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causeweave/adamw.h"
#include "causeweave/corpus.h"
#include "causeweave/embedder.h"

namespace causeweave {

// Raw (pre-softmax) class scores in canonical emotion order.
using EmotionLogits = std::array<double, kNumEmotions>;

// Linear layer over the concatenated slots [s1; s2; s3] followed by softmax.
struct EmotionHead {
  Eigen::MatrixXd weight;  // 7 x 3d
  Eigen::VectorXd bias;    // 7

  static EmotionHead zeros(std::size_t embedding_dim);
  // Uniform(-1/sqrt(3d), 1/sqrt(3d)) weights, zero bias.
  static EmotionHead random(std::size_t embedding_dim, std::uint64_t seed);

  std::size_t embedding_dim() const { return static_cast<std::size_t>(weight.cols()) / 3; }
};

struct HeadConfig {
  AdamWConfig optimizer{};  // lr 1e-3, betas (0.9, 0.999), eps 1e-8, decay 0.01
  int epochs = 50;
  int batch = 8;
  std::uint64_t seed = 7;
};

// [s1; s2; s3] as one vector of length 3d.
Eigen::VectorXd concat_slots(const EmbeddingSlots &slots);

// logits = W [s1; s2; s3] + b. Throws ShapeError on dimension mismatch.
EmotionLogits head_forward(const EmbeddingSlots &slots, const EmotionHead &head);

// Max-subtracted softmax.
std::array<double, kNumEmotions> softmax(const EmotionLogits &logits);

Emotion argmax_emotion(const EmotionLogits &logits);

struct HeadGradient {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

// Mean cross-entropy over the columns of `inputs` (3d x B). When `grad` is
// non-null it receives the exact gradient.
double head_loss(const EmotionHead &head, const Eigen::MatrixXd &inputs,
                 std::span<const Emotion> labels, HeadGradient *grad);

struct HeadTrainingResult {
  EmotionHead head;
  // Mean training-set cross-entropy after each epoch.
  std::vector<double> epoch_losses;
};

// Minibatch AdamW on mean cross-entropy over every utterance of the corpus.
// Deterministic given config.seed. Throws Error on an empty corpus.
HeadTrainingResult train_head(const Corpus &corpus, const EmbeddingStore &store,
                              const HeadConfig &config);

// Predicted emotion for every utterance, conversation by conversation.
std::vector<Emotion> classify(const Conversation &conversation, const EmbeddingStore &store,
                              const EmotionHead &head);

// Rows gold, columns predicted.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumEmotions>, kNumEmotions> counts{};

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t gold_count(Emotion e) const;
  double recall(Emotion e) const;
};

// Throws ShapeError when the lists differ in length.
ConfusionMatrix confusion(std::span<const Emotion> golds, std::span<const Emotion> preds);
double accuracy(const ConfusionMatrix &m);

std::string serialize_head(const EmotionHead &head, const HeadConfig &config);
EmotionHead parse_head(std::string_view json);

}  // namespace causeweave
