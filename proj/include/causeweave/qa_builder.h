#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "causeweave/corpus.h"

namespace causeweave {

// Utterances joined in order by a single space.
inline constexpr std::string_view kContextSeparator = " ";

struct Context {
  std::string text;
  std::vector<CharSpan> ranges;  // one per utterance, in char offsets
};

struct QASample {
  std::string conversation_id;
  int emotion_utt_id = 0;
  int cause_utt_id = 0;
  Emotion emotion = Emotion::kJoy;
  std::string question;
  Context context;
  std::optional<CharSpan> answer;  // context coordinates
};

// Token indices are inclusive.
struct TokenSpan {
  std::size_t start_token = 0;
  std::size_t end_token = 0;
  std::vector<CharSpan> token_offsets;
};

// "Which part of the text {cause} is the reason for {speaker}'s feeling of
// {emotion} when {emotion utterance} is said?"
std::string make_question(std::string_view cause_text, std::string_view speaker, Emotion emotion,
                          std::string_view emotion_text);

Context build_context(const Conversation &conversation);

// Maximal runs of non-whitespace, as char offsets.
std::vector<CharSpan> whitespace_tokens(std::string_view text);

// First and last token overlapping `span`. Works for any tokenizer's
// offsets. Throws AlignmentError when no token overlaps.
TokenSpan align_span(std::span<const CharSpan> token_offsets, CharSpan span);
TokenSpan align_span(std::string_view context, CharSpan span);

// Sample for one (emotion utterance, cause utterance) pair. A local span of
// the cause utterance is remapped into context coordinates.
QASample make_sample(const Conversation &conversation, int emotion_utt_id, int cause_utt_id,
                     Emotion emotion, std::optional<CharSpan> local_span = std::nullopt);

// One sample per gold pair, in corpus order. Throws ValidationError when a
// pair carries no span.
std::vector<QASample> build_qa_dataset(const Corpus &corpus);

// NDJSON, one sample per line.
std::string serialize_qa_samples(std::span<const QASample> samples);

// Maps a (question, context) to a context char span, or nullopt to abstain.
class AnswerProvider {
 public:
  virtual ~AnswerProvider() = default;
  virtual std::optional<CharSpan> answer(const QASample &sample) const = 0;
};

// Always abstains, so every pair resolves to its whole cause utterance.
class FallbackProvider : public AnswerProvider {
 public:
  std::optional<CharSpan> answer(const QASample &) const override { return std::nullopt; }
};

// Answers read from an exporter NDJSON file: {"conversation_id",
// "emotion_utt_id", "cause_utt_id", "answer_start", "answer_end"} or
// {..., "abstain": true}. Pairs absent from the file abstain.
class AnswerFileProvider : public AnswerProvider {
 public:
  static AnswerFileProvider parse(std::string_view ndjson);
  static AnswerFileProvider load(const std::string &path);

  std::optional<CharSpan> answer(const QASample &sample) const override;
  std::size_t size() const { return answers_.size(); }

 private:
  using Key = std::tuple<std::string, int, int>;
  std::map<Key, std::optional<CharSpan>> answers_;
};

// Attaches a cause-utterance-local span to every prediction. Abstentions
// and answers outside the cause utterance fall back to the whole utterance.
std::vector<PairPrediction> resolve_spans(std::span<const PairPrediction> predictions,
                                          const Conversation &conversation,
                                          const AnswerProvider &provider);

}  // namespace causeweave
