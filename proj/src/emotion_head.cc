#include "causeweave/emotion_head.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "causeweave/errors.h"
#include "causeweave/rng.h"
#include "causeweave/tensor_io.h"

namespace causeweave {

using nlohmann::json;

EmotionHead EmotionHead::zeros(std::size_t embedding_dim) {
  auto cols = static_cast<Eigen::Index>(3 * embedding_dim);
  return {Eigen::MatrixXd::Zero(kNumEmotions, cols), Eigen::VectorXd::Zero(kNumEmotions)};
}

EmotionHead EmotionHead::random(std::size_t embedding_dim, std::uint64_t seed) {
  EmotionHead head = zeros(embedding_dim);
  Rng rng(seed);
  double bound = 1.0 / std::sqrt(static_cast<double>(head.weight.cols()));
  for (Eigen::Index r = 0; r < head.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < head.weight.cols(); ++c) {
      head.weight(r, c) = rng.uniform(-bound, bound);
    }
  }
  return head;
}

Eigen::VectorXd concat_slots(const EmbeddingSlots &slots) {
  const std::size_t d = slots.dim();
  Eigen::VectorXd x(static_cast<Eigen::Index>(3 * d));
  for (int k = 0; k < 3; ++k) {
    const auto &v = slots.slot(k);
    if (v.size() != d) throw ShapeError("embedding slots of unequal length");
    for (std::size_t i = 0; i < d; ++i) x(static_cast<Eigen::Index>(k * d + i)) = v[i];
  }
  return x;
}

EmotionLogits head_forward(const EmbeddingSlots &slots, const EmotionHead &head) {
  if (slots.dim() != head.embedding_dim() || head.weight.cols() % 3 != 0) {
    throw ShapeError("head expects slot dim " + std::to_string(head.embedding_dim()) +
                     ", got " + std::to_string(slots.dim()));
  }
  Eigen::VectorXd z = head.weight * concat_slots(slots) + head.bias;
  EmotionLogits out;
  for (std::size_t k = 0; k < kNumEmotions; ++k) out[k] = z(static_cast<Eigen::Index>(k));
  return out;
}

std::array<double, kNumEmotions> softmax(const EmotionLogits &logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::array<double, kNumEmotions> p;
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    p[k] = std::exp(logits[k] - mx);
    sum += p[k];
  }
  for (auto &v : p) v /= sum;
  return p;
}

Emotion argmax_emotion(const EmotionLogits &logits) {
  auto it = std::max_element(logits.begin(), logits.end());
  return emotion_from_index(static_cast<std::size_t>(it - logits.begin()));
}

double head_loss(const EmotionHead &head, const Eigen::MatrixXd &inputs,
                 std::span<const Emotion> labels, HeadGradient *grad) {
  const Eigen::Index batch = inputs.cols();
  if (static_cast<std::size_t>(batch) != labels.size() || batch == 0) {
    throw ShapeError("head_loss: need one label per input column");
  }
  if (inputs.rows() != head.weight.cols()) throw ShapeError("head_loss: input width mismatch");

  Eigen::MatrixXd z = (head.weight * inputs).colwise() + head.bias;  // 7 x B
  Eigen::MatrixXd dz(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    double mx = z.col(b).maxCoeff();
    Eigen::VectorXd e = (z.col(b).array() - mx).exp();
    double sum = e.sum();
    auto y = static_cast<Eigen::Index>(emotion_index(labels[static_cast<std::size_t>(b)]));
    loss += -(z(y, b) - mx - std::log(sum));
    dz.col(b) = e / sum;
    dz(y, b) -= 1.0;
  }
  const double scale = 1.0 / static_cast<double>(batch);
  if (grad != nullptr) {
    grad->weight = scale * dz * inputs.transpose();
    grad->bias = scale * dz.rowwise().sum();
  }
  return loss * scale;
}

namespace {

struct LabelledInputs {
  Eigen::MatrixXd inputs;  // 3d x N
  std::vector<Emotion> labels;
};

LabelledInputs Collect(const Corpus &corpus, const EmbeddingStore &store) {
  LabelledInputs out;
  const auto n = static_cast<Eigen::Index>(corpus.utterance_count());
  out.inputs.resize(static_cast<Eigen::Index>(3 * store.dim()), n);
  Eigen::Index col = 0;
  for (const auto &conv : corpus.conversations) {
    for (const auto &u : conv.utterances) {
      out.inputs.col(col++) = concat_slots(store.at(conv.id, u.id));
      out.labels.push_back(u.emotion);
    }
  }
  return out;
}

}  // namespace

HeadTrainingResult train_head(const Corpus &corpus, const EmbeddingStore &store,
                              const HeadConfig &config) {
  if (corpus.utterance_count() == 0) throw Error("train_head: corpus has no utterances");
  if (config.batch <= 0 || config.epochs < 0) throw Error("train_head: bad batch/epochs");

  LabelledInputs data = Collect(corpus, store);
  Rng rng(config.seed);
  HeadTrainingResult result{EmotionHead::random(store.dim(), rng.fork()), {}};
  AdamW opt(config.optimizer);

  const std::size_t n = data.labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  HeadGradient grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch)) {
      std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch));
      Eigen::MatrixXd x(data.inputs.rows(), static_cast<Eigen::Index>(stop - start));
      std::vector<Emotion> y;
      for (std::size_t i = start; i < stop; ++i) {
        x.col(static_cast<Eigen::Index>(i - start)) = data.inputs.col(static_cast<Eigen::Index>(order[i]));
        y.push_back(data.labels[order[i]]);
      }
      head_loss(result.head, x, y, &grad);
      Eigen::MatrixXd bias_as_matrix = result.head.bias;
      Eigen::MatrixXd bias_grad = grad.bias;
      Eigen::MatrixXd *params[] = {&result.head.weight, &bias_as_matrix};
      const Eigen::MatrixXd *grads[] = {&grad.weight, &bias_grad};
      opt.step(params, grads);
      result.head.bias = bias_as_matrix;
    }
    result.epoch_losses.push_back(head_loss(result.head, data.inputs, data.labels, nullptr));
  }
  return result;
}

std::vector<Emotion> classify(const Conversation &conversation, const EmbeddingStore &store,
                              const EmotionHead &head) {
  std::vector<Emotion> out;
  out.reserve(conversation.size());
  for (const auto &u : conversation.utterances) {
    out.push_back(argmax_emotion(head_forward(store.at(conversation.id, u.id), head)));
  }
  return out;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto &row : counts) t += std::accumulate(row.begin(), row.end(), std::uint64_t{0});
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < kNumEmotions; ++i) t += counts[i][i];
  return t;
}

std::uint64_t ConfusionMatrix::gold_count(Emotion e) const {
  const auto &row = counts[emotion_index(e)];
  return std::accumulate(row.begin(), row.end(), std::uint64_t{0});
}

double ConfusionMatrix::recall(Emotion e) const {
  std::uint64_t n = gold_count(e);
  if (n == 0) return 0.0;
  return static_cast<double>(counts[emotion_index(e)][emotion_index(e)]) / static_cast<double>(n);
}

ConfusionMatrix confusion(std::span<const Emotion> golds, std::span<const Emotion> preds) {
  if (golds.size() != preds.size()) {
    throw ShapeError("confusion: " + std::to_string(golds.size()) + " golds vs " +
                     std::to_string(preds.size()) + " predictions");
  }
  ConfusionMatrix m;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    ++m.counts[emotion_index(golds[i])][emotion_index(preds[i])];
  }
  return m;
}

double accuracy(const ConfusionMatrix &m) {
  std::uint64_t total = m.total();
  if (total == 0) return 0.0;
  return static_cast<double>(m.trace()) / static_cast<double>(total);
}

std::string serialize_head(const EmotionHead &head, const HeadConfig &config) {
  Eigen::MatrixXd bias = head.bias;
  json manifest = {
      {"format_version", kCheckpointFormatVersion},
      {"kind", "emotion_head"},
      {"embedding_dim", head.embedding_dim()},
      {"seed", config.seed},
      {"config",
       {{"lr", config.optimizer.lr},
        {"beta1", config.optimizer.beta1},
        {"beta2", config.optimizer.beta2},
        {"eps", config.optimizer.eps},
        {"weight_decay", config.optimizer.weight_decay},
        {"epochs", config.epochs},
        {"batch", config.batch}}},
      {"tensors", {{"weight", tensor_to_json(head.weight)}, {"bias", tensor_to_json(bias)}}}};
  return manifest.dump();
}

EmotionHead parse_head(std::string_view text) {
  json manifest;
  try {
    manifest = json::parse(text.begin(), text.end());
  } catch (const json::parse_error &e) {
    throw FormatError(std::string("head checkpoint: ") + e.what());
  }
  check_manifest(manifest, "emotion_head");
  if (!manifest.contains("embedding_dim") || !manifest["embedding_dim"].is_number_unsigned()) {
    throw FormatError("head checkpoint: missing embedding_dim");
  }
  auto d = manifest["embedding_dim"].get<Eigen::Index>();
  const json &tensors = manifest["tensors"];
  if (!tensors.contains("weight") || !tensors.contains("bias")) {
    throw FormatError("head checkpoint: needs weight and bias tensors");
  }
  EmotionHead head;
  head.weight = tensor_from_json(tensors["weight"], "weight", kNumEmotions, 3 * d);
  head.bias = tensor_from_json(tensors["bias"], "bias", kNumEmotions, 1);
  return head;
}

}  // namespace causeweave
