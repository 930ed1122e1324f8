#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace causeweave {

// Canonical order is frozen: indices 0..6 as listed.
enum class Emotion : std::uint8_t {
  kNeutral = 0,
  kJoy,
  kSurprise,
  kAnger,
  kSadness,
  kDisgust,
  kFear,
};

inline constexpr std::size_t kNumEmotions = 7;

inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::kNeutral, Emotion::kJoy,     Emotion::kSurprise, Emotion::kAnger,
    Emotion::kSadness, Emotion::kDisgust, Emotion::kFear};

// The six labels a cause pair may carry.
inline constexpr std::array<Emotion, 6> kCauseEmotions = {
    Emotion::kJoy,     Emotion::kSurprise, Emotion::kAnger,
    Emotion::kSadness, Emotion::kDisgust,  Emotion::kFear};

constexpr std::size_t emotion_index(Emotion e) { return static_cast<std::size_t>(e); }
Emotion emotion_from_index(std::size_t index);

// Lowercase label, e.g. "surprise".
std::string_view emotion_name(Emotion e);

// Case-insensitive; nullopt for unknown labels.
std::optional<Emotion> parse_emotion(std::string_view label);

// Half-open interval of char (Unicode scalar) offsets.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool contains(const CharSpan &other) const {
    return start <= other.start && other.end <= end;
  }
  friend bool operator==(const CharSpan &, const CharSpan &) = default;
  friend auto operator<=>(const CharSpan &, const CharSpan &) = default;
};

struct Utterance {
  int id = 0;  // 1-based within its conversation
  std::string speaker;
  std::string text;
  Emotion emotion = Emotion::kNeutral;

  friend bool operator==(const Utterance &, const Utterance &) = default;
};

// A gold annotation. The span indexes the cause utterance's own text.
struct CausePair {
  int emotion_utt_id = 0;
  int cause_utt_id = 0;
  Emotion emotion = Emotion::kJoy;
  std::optional<CharSpan> span;

  friend bool operator==(const CausePair &, const CausePair &) = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;
  std::vector<CausePair> pairs;

  std::size_t size() const { return utterances.size(); }
  // Throws std::out_of_range for ids outside [1, size()].
  const Utterance &utterance(int id) const;

  friend bool operator==(const Conversation &, const Conversation &) = default;
};

struct Corpus {
  std::vector<Conversation> conversations;

  const Conversation *find(std::string_view id) const;
  std::size_t utterance_count() const;

  friend bool operator==(const Corpus &, const Corpus &) = default;
};

// A predicted emotion-cause pair; spans are optional (span-free output).
struct PairPrediction {
  int emotion_utt_id = 0;
  int cause_utt_id = 0;
  Emotion emotion = Emotion::kJoy;
  std::optional<CharSpan> span;
  std::optional<double> score;

  friend bool operator==(const PairPrediction &, const PairPrediction &) = default;
};

struct PredictionRecord {
  std::string conversation_id;
  PairPrediction pair;

  friend bool operator==(const PredictionRecord &, const PredictionRecord &) = default;
};

// Checks every conversation-level invariant; throws ValidationError.
void validate_conversation(const Conversation &conversation);
void validate_corpus(const Corpus &corpus);

// Throws ParseError (with byte offset) or ValidationError.
Corpus parse_corpus(std::string_view json);
Corpus load_corpus(const std::string &path);

// Canonical JSON: sorted keys, compact separators.
std::string serialize_corpus(const Corpus &corpus);

// Gold pairs flattened to prediction records (conversation order, then
// annotation order).
std::vector<PredictionRecord> gold_records(const Corpus &corpus);

// Prediction JSON: {"predictions":[{conversation_id, emotion_utt_id,
// cause_utt_id, emotion, span, score?}]}. Ids and spans are checked against
// the corpus; a dangling reference throws ValidationError.
std::string serialize_predictions(std::span<const PredictionRecord> predictions,
                                  const Corpus &corpus);
std::vector<PredictionRecord> parse_predictions(std::string_view json,
                                                const Corpus &corpus);

// Reads a whole file; throws Error if it cannot be opened.
std::string read_file(const std::string &path);
void write_file(const std::string &path, std::string_view contents);

}  // namespace causeweave
