#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "causeweave/causality.h"
#include "causeweave/emotion_head.h"
#include "causeweave/pairing.h"
#include "causeweave/qa_builder.h"
#include "causeweave/scoring.h"
#include "json.hpp"

namespace causeweave::cli {

inline constexpr int kRunConfigFormatVersion = 1;

struct Paths {
  std::string corpus;
  std::string embeddings;
  std::string checkpoints;
  std::string predictions;
  std::string answers;
  std::string out;
};

struct RunConfig {
  Paths paths;
  std::uint64_t seed = 2024;
  std::size_t embedding_dim = 19;
  double threshold = kDefaultThreshold;
  HeadConfig head;
  EncoderConfig encoder = EncoderConfig::for_embedding_dim(19);
  TrainOptions training;

  // Splits `seed` into the head, encoder-init and encoder-training seeds,
  // and derives d_model from embedding_dim. Encoder shape checks happen
  // when a model is built.
  void finalize();
};

// Reads a run configuration document. Unknown keys and an unsupported
// format_version are errors. Missing keys keep their defaults.
RunConfig parse_run_config(const nlohmann::json &doc);
RunConfig load_run_config(const std::string &path);
nlohmann::json run_config_to_json(const RunConfig &config);

// Per-conversation diagnostics; throws on the first invalid record.
std::string validate_summary(const Corpus &corpus);

std::string embed(const Corpus &corpus, std::size_t dim);

struct TrainedModels {
  EmotionHead head;
  CausalityModel encoder;
  std::vector<double> head_losses;
  std::vector<double> encoder_losses;
};

// Head first, then the encoder with the head frozen.
TrainedModels train(const Corpus &corpus, const EmbeddingStore &store, const RunConfig &config);

// Writes head.json and encoder.json into `dir`, creating it if needed.
void save_checkpoints(const TrainedModels &models, const RunConfig &config, const std::string &dir);
TrainedModels load_checkpoints(const std::string &dir);

// Classify, build the causality matrix, extract pairs, resolve spans.
std::vector<PredictionRecord> predict(const Corpus &corpus, const EmbeddingStore &store,
                                      const EmotionHead &head, const CausalityModel &encoder,
                                      double threshold, const AnswerProvider &provider);

// One sample per prediction when given, else one per gold pair.
std::string qa_dataset(const Corpus &corpus, const std::vector<PredictionRecord> *predictions);

// Entry point shared by the executable and the tests. Returns the exit code.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace causeweave::cli
