#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "causeweave/adamw.h"
#include "causeweave/corpus.h"
#include "causeweave/embedder.h"
#include "causeweave/emotion_head.h"
#include "causeweave/rng.h"

namespace causeweave {

// U x U, row = emotion (query) utterance, column = cause (key) utterance.
// Every row is a probability distribution.
using CausalityMatrix = Eigen::MatrixXd;

struct EncoderConfig {
  std::size_t d_model = 64;  // equals 3d + 7; there is no input projection
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  double dropout = 0.1;  // applied to the combined input only
  std::size_t max_len = 64;
  std::uint64_t seed = 11;
  // Which last-layer head forms the causality matrix; -1 averages all heads.
  int attention_head = -1;

  // Throws Error when a constraint does not hold.
  void validate() const;
  std::size_t head_dim() const { return d_model / n_heads; }

  static EncoderConfig for_embedding_dim(std::size_t embedding_dim);
};

// Pre-layer-norm encoder block. Row-vector convention: y = x W + b.
struct EncoderLayer {
  Eigen::MatrixXd ln1_gain, ln1_bias;  // 1 x D
  Eigen::MatrixXd wq, bq, wk, bk, wv, bv, wo, bo;
  Eigen::MatrixXd ln2_gain, ln2_bias;
  Eigen::MatrixXd w1, b1;  // D x F, 1 x F
  Eigen::MatrixXd w2, b2;  // F x D, 1 x D
};

struct EncoderParams {
  Eigen::MatrixXd positions;  // max_len x D, learned
  std::vector<EncoderLayer> layers;

  struct Named {
    std::string name;
    Eigen::MatrixXd *tensor;
  };
  struct ConstNamed {
    std::string name;
    const Eigen::MatrixXd *tensor;
  };
  // Stable order: positions, then layers.<i>.<field> in declaration order.
  std::vector<Named> tensors();
  std::vector<ConstNamed> tensors() const;

  // Same shapes, all zeros.
  EncoderParams zeros_like() const;
  std::size_t parameter_count() const;
};

struct CausalityModel {
  EncoderConfig config;
  EncoderParams params;

  // Xavier-uniform projections, unit gains, zero biases, N(0, 0.02^2)
  // positional table; seeded by config.seed.
  static CausalityModel init(const EncoderConfig &config);
};

enum class Mode { kEval, kTrain };

// combined = [s1, s2, s3, logits], length 3d + 7.
Eigen::VectorXd assemble_input(const EmbeddingSlots &slots, const EmotionLogits &logits);

// One assemble_input row per utterance, logits from the (frozen) head.
Eigen::MatrixXd assemble_sequence(const Conversation &conversation, const EmbeddingStore &store,
                                  const EmotionHead &head);

// dropout(combined) + positions[0..U). Dropout is inverted (kept entries
// scaled by 1/(1-p)) in training mode and the identity in eval mode.
// Throws ShapeError when U > max_len or widths differ.
Eigen::MatrixXd prepare_sequence(const CausalityModel &model, const Eigen::MatrixXd &combined,
                                 Mode mode, Rng *rng);

struct EncodeResult {
  Eigen::MatrixXd hidden;      // output of the last layer, U x D
  CausalityMatrix causality;   // last-layer attention probabilities
};

// Runs every layer; the last layer's post-softmax attention (averaged over
// heads, or the designated head) is the causality matrix.
EncodeResult encode(const CausalityModel &model, const Eigen::MatrixXd &sequence);

// Eval-mode prepare_sequence followed by encode.
CausalityMatrix causality_matrix(const CausalityModel &model, const Eigen::MatrixXd &combined);

// Mean over all U^2 entries of the squared difference.
double attention_mse(const CausalityMatrix &cm, const Eigen::MatrixXd &target);

// attention_mse(encode(prepare_sequence(combined)), target). With `grad`
// non-null, writes the exact gradient for every parameter tensor. In
// training mode the dropout mask is drawn from `rng`.
double attention_loss(const CausalityModel &model, const Eigen::MatrixXd &combined,
                      const Eigen::MatrixXd &target, EncoderParams *grad,
                      Mode mode = Mode::kEval, Rng *rng = nullptr);

struct TrainOptions {
  AdamWConfig optimizer{1e-4, 0.9, 0.999, 1e-8, 0.01};
  std::size_t steps = 1000;
  std::uint64_t seed = 13;
};

struct EncoderTrainingResult {
  CausalityModel model;
  std::vector<double> step_losses;  // training-mode loss at each step
};

// One conversation per AdamW step, epochs over a seeded shuffle; targets
// from build_target. The head is frozen. Throws ShapeError when a
// conversation is longer than max_len.
EncoderTrainingResult train_encoder(const Corpus &corpus, const EmbeddingStore &store,
                                    const EmotionHead &head, const EncoderConfig &config,
                                    const TrainOptions &options);

// Continues training `model` on precomputed (combined, target) pairs.
std::vector<double> train_on(CausalityModel &model, const std::vector<Eigen::MatrixXd> &inputs,
                             const std::vector<Eigen::MatrixXd> &targets,
                             const TrainOptions &options);

std::string serialize_model(const CausalityModel &model, const TrainOptions &options,
                            std::size_t steps_taken);
CausalityModel parse_model(std::string_view json);

}  // namespace causeweave
