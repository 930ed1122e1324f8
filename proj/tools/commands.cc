#include "commands.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "causeweave/errors.h"

namespace causeweave::cli {

using nlohmann::json;

namespace {

constexpr const char *kHeadFile = "head.json";
constexpr const char *kEncoderFile = "encoder.json";

// Reads keys of `obj` into the targets registered with `field`, rejecting
// anything not registered.
class Section {
 public:
  Section(const json &obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (!obj_.is_object()) throw FormatError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  Section &field(const char *key, T &target) {
    known_.push_back(key);
    if (auto it = obj_.find(key); it != obj_.end()) {
      try {
        target = it->get<T>();
      } catch (const json::exception &e) {
        throw FormatError("config: " + name_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }

  void finish() const {
    for (const auto &[key, value] : obj_.items()) {
      if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
        throw FormatError("config: unknown key '" + name_ + "." + key + "'");
      }
    }
  }

 private:
  const json &obj_;
  std::string name_;
  std::vector<std::string> known_;
};

std::string FormatLosses(const std::vector<double> &losses) {
  if (losses.empty()) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g -> %.6g", losses.front(), losses.back());
  return buf;
}

void SetUpLogging() {
  auto logger = spdlog::get("causeweave");
  if (!logger) {
    logger = spdlog::stderr_color_mt("causeweave");
    spdlog::set_default_logger(logger);
  }
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char *env = std::getenv("CAUSEWEAVE_LOG"); env && *env) {
    level = spdlog::level::from_str(env);
  }
  spdlog::set_level(level);
}

void Emit(const std::string &text, const std::string &path, std::ostream &out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file(path, text);
    spdlog::info("wrote {}", path);
  }
}

std::string Require(const std::string &value, const char *flag) {
  if (value.empty()) throw Error(std::string("missing required ") + flag);
  return value;
}

EmbeddingStore StoreFor(const Corpus &corpus, const RunConfig &cfg) {
  if (cfg.paths.embeddings.empty()) {
    spdlog::info("no --embeddings; hashing text at dim {}", cfg.embedding_dim);
    return build_store(corpus, cfg.embedding_dim);
  }
  EmbeddingStore store = load_store(cfg.paths.embeddings);
  check_coverage(store, corpus);
  return store;
}

}  // namespace

void RunConfig::finalize() {
  Rng rng(seed);
  head.seed = rng.fork();
  encoder.seed = rng.fork();
  training.seed = rng.fork();
  encoder.d_model = 3 * embedding_dim + kNumEmotions;
  if (!(threshold > 0.0 && threshold <= 1.0)) throw Error("threshold must lie in (0, 1]");
}

RunConfig parse_run_config(const json &doc) {
  RunConfig cfg;
  int version = kRunConfigFormatVersion;
  json paths = json::object(), head = json::object(), encoder = json::object(),
       training = json::object();
  Section(doc, "config")
      .field("format_version", version)
      .field("seed", cfg.seed)
      .field("embedding_dim", cfg.embedding_dim)
      .field("threshold", cfg.threshold)
      .field("paths", paths)
      .field("head", head)
      .field("encoder", encoder)
      .field("training", training)
      .finish();
  if (version != kRunConfigFormatVersion) {
    throw FormatError("config: unsupported format_version " + std::to_string(version));
  }
  Section(paths, "paths")
      .field("corpus", cfg.paths.corpus)
      .field("embeddings", cfg.paths.embeddings)
      .field("checkpoints", cfg.paths.checkpoints)
      .field("predictions", cfg.paths.predictions)
      .field("answers", cfg.paths.answers)
      .field("out", cfg.paths.out)
      .finish();
  Section(head, "head")
      .field("lr", cfg.head.optimizer.lr)
      .field("weight_decay", cfg.head.optimizer.weight_decay)
      .field("epochs", cfg.head.epochs)
      .field("batch", cfg.head.batch)
      .finish();
  Section(encoder, "encoder")
      .field("n_layers", cfg.encoder.n_layers)
      .field("n_heads", cfg.encoder.n_heads)
      .field("d_ff", cfg.encoder.d_ff)
      .field("dropout", cfg.encoder.dropout)
      .field("max_len", cfg.encoder.max_len)
      .field("attention_head", cfg.encoder.attention_head)
      .finish();
  Section(training, "training")
      .field("lr", cfg.training.optimizer.lr)
      .field("weight_decay", cfg.training.optimizer.weight_decay)
      .field("steps", cfg.training.steps)
      .finish();
  return cfg;
}

RunConfig load_run_config(const std::string &path) {
  std::string text = read_file(path);
  try {
    return parse_run_config(json::parse(text));
  } catch (const json::parse_error &e) {
    throw ParseError(path + ": " + e.what(), e.byte);
  }
}

json run_config_to_json(const RunConfig &c) {
  return {{"format_version", kRunConfigFormatVersion},
          {"seed", c.seed},
          {"embedding_dim", c.embedding_dim},
          {"threshold", c.threshold},
          {"paths",
           {{"corpus", c.paths.corpus},
            {"embeddings", c.paths.embeddings},
            {"checkpoints", c.paths.checkpoints},
            {"predictions", c.paths.predictions},
            {"answers", c.paths.answers},
            {"out", c.paths.out}}},
          {"head",
           {{"lr", c.head.optimizer.lr},
            {"weight_decay", c.head.optimizer.weight_decay},
            {"epochs", c.head.epochs},
            {"batch", c.head.batch}}},
          {"encoder",
           {{"n_layers", c.encoder.n_layers},
            {"n_heads", c.encoder.n_heads},
            {"d_ff", c.encoder.d_ff},
            {"dropout", c.encoder.dropout},
            {"max_len", c.encoder.max_len},
            {"attention_head", c.encoder.attention_head}}},
          {"training",
           {{"lr", c.training.optimizer.lr},
            {"weight_decay", c.training.optimizer.weight_decay},
            {"steps", c.training.steps}}}};
}

std::string validate_summary(const Corpus &corpus) {
  validate_corpus(corpus);
  std::ostringstream os;
  std::size_t pairs = 0;
  for (const auto &c : corpus.conversations) {
    os << c.id << ": " << c.size() << " utterances, " << c.pairs.size() << " pairs\n";
    pairs += c.pairs.size();
  }
  os << "ok: " << corpus.conversations.size() << " conversations, " << corpus.utterance_count()
     << " utterances, " << pairs << " pairs\n";
  return os.str();
}

std::string embed(const Corpus &corpus, std::size_t dim) {
  return serialize_store(build_store(corpus, dim));
}

TrainedModels train(const Corpus &corpus, const EmbeddingStore &store, const RunConfig &config) {
  if (store.dim() != config.embedding_dim) {
    throw ShapeError("embedding store has dim " + std::to_string(store.dim()) +
                     " but the run is configured for " + std::to_string(config.embedding_dim));
  }
  TrainedModels out;
  auto head = train_head(corpus, store, config.head);
  out.head = std::move(head.head);
  out.head_losses = std::move(head.epoch_losses);
  spdlog::info("head cross-entropy {}", FormatLosses(out.head_losses));

  auto encoder = train_encoder(corpus, store, out.head, config.encoder, config.training);
  out.encoder = std::move(encoder.model);
  out.encoder_losses = std::move(encoder.step_losses);
  spdlog::info("encoder attention mse {}", FormatLosses(out.encoder_losses));
  return out;
}

void save_checkpoints(const TrainedModels &models, const RunConfig &config,
                      const std::string &dir) {
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir);
  write_file((base / kHeadFile).string(), serialize_head(models.head, config.head));
  write_file((base / kEncoderFile).string(),
             serialize_model(models.encoder, config.training, models.encoder_losses.size()));
}

TrainedModels load_checkpoints(const std::string &dir) {
  const auto base = std::filesystem::path(dir);
  TrainedModels out;
  out.head = parse_head(read_file((base / kHeadFile).string()));
  out.encoder = parse_model(read_file((base / kEncoderFile).string()));
  return out;
}

std::vector<PredictionRecord> predict(const Corpus &corpus, const EmbeddingStore &store,
                                      const EmotionHead &head, const CausalityModel &encoder,
                                      double threshold, const AnswerProvider &provider) {
  std::vector<PredictionRecord> out;
  for (const auto &conv : corpus.conversations) {
    if (conv.utterances.empty()) continue;
    std::vector<Emotion> emotions = classify(conv, store, head);
    CausalityMatrix cm = causality_matrix(encoder, assemble_sequence(conv, store, head));
    auto pairs = extract_pairs(cm, emotions, threshold);
    for (auto &p : resolve_spans(pairs, conv, provider)) out.push_back({conv.id, std::move(p)});
  }
  return out;
}

std::string qa_dataset(const Corpus &corpus, const std::vector<PredictionRecord> *predictions) {
  if (!predictions) {
    auto samples = build_qa_dataset(corpus);
    return serialize_qa_samples(samples);
  }
  std::vector<QASample> samples;
  for (const auto &r : *predictions) {
    const Conversation *conv = corpus.find(r.conversation_id);
    if (!conv) throw ValidationError(r.conversation_id, "conversation_id", "not in corpus");
    samples.push_back(make_sample(*conv, r.pair.emotion_utt_id, r.pair.cause_utt_id,
                                  r.pair.emotion));
  }
  return serialize_qa_samples(samples);
}

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  SetUpLogging();

  CLI::App app{"Emotion-cause pair extraction from conversations", "causeweave"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "causeweave 0.1.0");

  RunConfig flags;
  std::string config_path, format = "table";
  std::uint64_t seed = 0;
  std::size_t dim = 0;
  double threshold = 0.0;
  std::string checkpoints;

  auto add_corpus = [&](CLI::App *sub) {
    return sub->add_option("--corpus", flags.paths.corpus, "Conversation corpus JSON");
  };
  auto add_config = [&](CLI::App *sub) {
    sub->add_option("--config", config_path, "Run configuration JSON; flags override it");
  };

  auto *validate = app.add_subcommand("validate", "Parse and validate a corpus");
  add_corpus(validate)->required();

  auto *embed_cmd = app.add_subcommand("embed", "Write hash embeddings for every utterance");
  add_corpus(embed_cmd);
  add_config(embed_cmd);
  auto *embed_dim = embed_cmd->add_option("--dim", dim, "Embedding dimension per slot");
  embed_cmd->add_option("--out", flags.paths.out, "Output NDJSON path (default stdout)");

  auto *train_cmd = app.add_subcommand("train", "Train the emotion head, then the encoder");
  add_corpus(train_cmd);
  add_config(train_cmd);
  train_cmd->add_option("--embeddings", flags.paths.embeddings, "Embedding NDJSON");
  auto *train_seed = train_cmd->add_option("--seed", seed, "Run seed");
  auto *train_dim = train_cmd->add_option("--dim", dim, "Hash dimension when no --embeddings");
  train_cmd->add_option("--out", flags.paths.out, "Checkpoint directory");

  auto *predict_cmd = app.add_subcommand("predict", "Extract emotion-cause pairs with spans");
  add_corpus(predict_cmd);
  add_config(predict_cmd);
  predict_cmd->add_option("--embeddings", flags.paths.embeddings, "Embedding NDJSON");
  predict_cmd->add_option("--checkpoints", checkpoints, "Checkpoint directory from train");
  auto *predict_threshold =
      predict_cmd->add_option("--threshold", threshold, "Causality threshold in (0, 1]");
  predict_cmd->add_option("--answers", flags.paths.answers, "QA answers NDJSON");
  auto *predict_seed = predict_cmd->add_option("--seed", seed, "Run seed");
  predict_cmd->add_option("--out", flags.paths.out, "Prediction JSON path (default stdout)");

  auto *score_cmd = app.add_subcommand("score", "Score predictions against gold pairs");
  add_corpus(score_cmd);
  add_config(score_cmd);
  score_cmd->add_option("--predictions", flags.paths.predictions, "Prediction JSON");
  score_cmd->add_option("--out", flags.paths.out, "Write the JSON report here");
  score_cmd->add_option("--format", format, "stdout format")->check(CLI::IsMember({"table", "json"}));

  auto *qa_cmd = app.add_subcommand("qa-dataset", "Emit question-answering samples as NDJSON");
  add_corpus(qa_cmd);
  add_config(qa_cmd);
  qa_cmd->add_option("--predictions", flags.paths.predictions,
                     "Build samples for these pairs instead of the gold pairs");
  qa_cmd->add_option("--out", flags.paths.out, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e, out, err);
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    auto override_path = [](std::string &dst, const std::string &src) {
      if (!src.empty()) dst = src;
    };
    override_path(cfg.paths.corpus, flags.paths.corpus);
    override_path(cfg.paths.embeddings, flags.paths.embeddings);
    override_path(cfg.paths.predictions, flags.paths.predictions);
    override_path(cfg.paths.answers, flags.paths.answers);
    override_path(cfg.paths.out, flags.paths.out);
    override_path(cfg.paths.checkpoints, checkpoints);
    if (embed_dim->count() || train_dim->count()) cfg.embedding_dim = dim;
    if (train_seed->count() || predict_seed->count()) cfg.seed = seed;
    if (predict_threshold->count()) cfg.threshold = threshold;
    cfg.finalize();

    const Corpus corpus = load_corpus(Require(cfg.paths.corpus, "--corpus"));

    if (*validate) {
      out << validate_summary(corpus);
    } else if (*embed_cmd) {
      Emit(embed(corpus, cfg.embedding_dim), cfg.paths.out, out);
    } else if (*train_cmd) {
      EmbeddingStore store = StoreFor(corpus, cfg);
      cfg.embedding_dim = store.dim();
      cfg.finalize();
      TrainedModels models = train(corpus, store, cfg);
      save_checkpoints(models, cfg, Require(cfg.paths.out, "--out"));
      out << "head loss " << FormatLosses(models.head_losses) << "\nencoder loss "
          << FormatLosses(models.encoder_losses) << "\n";
    } else if (*predict_cmd) {
      TrainedModels models = load_checkpoints(Require(cfg.paths.checkpoints, "--checkpoints"));
      cfg.embedding_dim = models.head.embedding_dim();
      EmbeddingStore store = StoreFor(corpus, cfg);
      std::unique_ptr<AnswerProvider> provider;
      if (cfg.paths.answers.empty()) {
        provider = std::make_unique<FallbackProvider>();
      } else {
        provider = std::make_unique<AnswerFileProvider>(AnswerFileProvider::load(cfg.paths.answers));
      }
      auto records = predict(corpus, store, models.head, models.encoder, cfg.threshold, *provider);
      spdlog::info("{} predicted pairs at threshold {}", records.size(), cfg.threshold);
      Emit(serialize_predictions(records, corpus) + "\n", cfg.paths.out, out);
    } else if (*score_cmd) {
      auto preds =
          parse_predictions(read_file(Require(cfg.paths.predictions, "--predictions")), corpus);
      ScoreReport report = full_report(preds, gold_records(corpus));
      if (!cfg.paths.out.empty()) write_file(cfg.paths.out, report_to_json(report) + "\n");
      out << (format == "json" ? report_to_json(report) + "\n" : render_table(report));
    } else if (*qa_cmd) {
      std::optional<std::vector<PredictionRecord>> preds;
      if (!cfg.paths.predictions.empty()) {
        preds = parse_predictions(read_file(cfg.paths.predictions), corpus);
      }
      Emit(qa_dataset(corpus, preds ? &*preds : nullptr), cfg.paths.out, out);
    }
    return 0;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace causeweave::cli
