#include "causeweave/corpus.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_set>

#include "causeweave/errors.h"
#include "causeweave/utf8.h"
#include "json.hpp"

namespace causeweave {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "neutral", "joy", "surprise", "anger", "sadness", "disgust", "fear"};

json ParseJson(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error &e) {
    throw ParseError(e.what(), e.byte);
  }
}

// Typed accessors that report violations against the owning conversation.
class FieldReader {
 public:
  explicit FieldReader(std::string conversation_id)
      : conversation_id_(std::move(conversation_id)) {}

  const std::string &conversation_id() const { return conversation_id_; }

  [[noreturn]] void Fail(const std::string &field, const std::string &detail) const {
    throw ValidationError(conversation_id_, field, detail);
  }

  const json &Get(const json &obj, const char *key, const std::string &path) const {
    if (!obj.is_object()) Fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) Fail(path + "." + key, "missing");
    return *it;
  }

  long long Int(const json &obj, const char *key, const std::string &path) const {
    const json &v = Get(obj, key, path);
    if (!v.is_number_integer()) Fail(path + "." + key, "expected an integer");
    return v.get<long long>();
  }

  std::string String(const json &obj, const char *key, const std::string &path) const {
    const json &v = Get(obj, key, path);
    if (!v.is_string()) Fail(path + "." + key, "expected a string");
    return v.get<std::string>();
  }

  Emotion Label(const json &obj, const char *key, const std::string &path) const {
    std::string raw = String(obj, key, path);
    auto e = parse_emotion(raw);
    if (!e) Fail(path + "." + key, "unknown emotion label '" + raw + "'");
    return *e;
  }

  std::optional<CharSpan> Span(const json &obj, const char *key,
                               const std::string &path) const {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    const json &v = *it;
    std::string field = path + "." + key;
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
        !v[1].is_number_integer()) {
      Fail(field, "expected [start, end] or null");
    }
    long long s = v[0].get<long long>();
    long long e = v[1].get<long long>();
    if (s < 0 || e < 0) Fail(field, "negative offset");
    return CharSpan{static_cast<std::size_t>(s), static_cast<std::size_t>(e)};
  }

 private:
  std::string conversation_id_;
};

std::string Indexed(const char *name, std::size_t i) {
  return std::string(name) + "[" + std::to_string(i) + "]";
}

bool IsBlank(std::string_view text) {
  auto chars = utf8::decode(text);
  return std::all_of(chars.begin(), chars.end(), utf8::is_space);
}

json SpanJson(const std::optional<CharSpan> &span) {
  if (!span) return nullptr;
  return json::array({span->start, span->end});
}

// Shared by gold pairs and predictions: ids resolvable, emotion non-neutral,
// span a valid slice of the cause utterance.
void CheckPairShape(const Conversation &conv, int emotion_utt, int cause_utt,
                    Emotion emotion, const std::optional<CharSpan> &span,
                    const std::string &path) {
  auto in_range = [&](int id) { return id >= 1 && static_cast<std::size_t>(id) <= conv.size(); };
  if (!in_range(emotion_utt)) {
    throw ValidationError(conv.id, path + ".emotion_utt_id",
                          "utterance " + std::to_string(emotion_utt) + " does not exist");
  }
  if (!in_range(cause_utt)) {
    throw ValidationError(conv.id, path + ".cause_utt_id",
                          "utterance " + std::to_string(cause_utt) + " does not exist");
  }
  if (emotion == Emotion::kNeutral) {
    throw ValidationError(conv.id, path + ".emotion", "a cause pair cannot be neutral");
  }
  if (span) {
    std::size_t len = utf8::length(conv.utterance(cause_utt).text);
    if (span->start >= span->end || span->end > len) {
      throw ValidationError(conv.id, path + ".span",
                            "span [" + std::to_string(span->start) + ", " +
                                std::to_string(span->end) +
                                ") is not a non-empty slice of a text of length " +
                                std::to_string(len));
    }
  }
}

}  // namespace

Emotion emotion_from_index(std::size_t index) {
  if (index >= kNumEmotions) {
    throw std::out_of_range("emotion index " + std::to_string(index));
  }
  return static_cast<Emotion>(index);
}

std::string_view emotion_name(Emotion e) { return kEmotionNames[emotion_index(e)]; }

std::optional<Emotion> parse_emotion(std::string_view label) {
  std::string lower(label);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    if (kEmotionNames[i] == lower) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

const Utterance &Conversation::utterance(int id) const {
  if (id < 1 || static_cast<std::size_t>(id) > utterances.size()) {
    throw std::out_of_range("conversation '" + this->id + "' has no utterance " +
                            std::to_string(id));
  }
  return utterances[static_cast<std::size_t>(id - 1)];
}

const Conversation *Corpus::find(std::string_view id) const {
  for (const auto &c : conversations) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::size_t Corpus::utterance_count() const {
  std::size_t n = 0;
  for (const auto &c : conversations) n += c.size();
  return n;
}

void validate_conversation(const Conversation &conv) {
  if (conv.id.empty()) {
    throw ValidationError(conv.id, "conversation_id", "must be non-empty");
  }
  for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
    const Utterance &u = conv.utterances[i];
    std::string path = Indexed("utterances", i);
    if (u.id != static_cast<int>(i) + 1) {
      throw ValidationError(conv.id, path + ".utterance_id",
                            "expected " + std::to_string(i + 1) + ", got " +
                                std::to_string(u.id));
    }
    if (IsBlank(u.text)) {
      throw ValidationError(conv.id, path + ".text", "empty after trimming");
    }
  }
  std::set<std::tuple<int, int, std::optional<CharSpan>>> seen;
  for (std::size_t i = 0; i < conv.pairs.size(); ++i) {
    const CausePair &p = conv.pairs[i];
    std::string path = Indexed("pairs", i);
    CheckPairShape(conv, p.emotion_utt_id, p.cause_utt_id, p.emotion, p.span, path);
    if (conv.utterance(p.emotion_utt_id).emotion != p.emotion) {
      throw ValidationError(conv.id, path + ".emotion",
                            "pair emotion '" + std::string(emotion_name(p.emotion)) +
                                "' differs from the emotion utterance's label");
    }
    if (!seen.emplace(p.emotion_utt_id, p.cause_utt_id, p.span).second) {
      throw ValidationError(conv.id, path, "duplicate (emotion_utt, cause_utt, span)");
    }
  }
}

void validate_corpus(const Corpus &corpus) {
  std::unordered_set<std::string> ids;
  for (const auto &conv : corpus.conversations) {
    validate_conversation(conv);
    if (!ids.insert(conv.id).second) {
      throw ValidationError(conv.id, "conversation_id", "duplicate conversation id");
    }
  }
}

Corpus parse_corpus(std::string_view text) {
  json doc = ParseJson(text);
  FieldReader top("<corpus>");
  const json &convs = top.Get(doc, "conversations", "");
  if (!convs.is_array()) top.Fail("conversations", "expected an array");

  Corpus corpus;
  corpus.conversations.reserve(convs.size());
  for (std::size_t ci = 0; ci < convs.size(); ++ci) {
    const json &cj = convs[ci];
    FieldReader anon(Indexed("<conversation", ci) + ">");
    Conversation conv;
    conv.id = anon.String(cj, "conversation_id", "");
    FieldReader r(conv.id);

    const json &utts = r.Get(cj, "utterances", "");
    if (!utts.is_array()) r.Fail("utterances", "expected an array");
    for (std::size_t i = 0; i < utts.size(); ++i) {
      std::string path = Indexed("utterances", i);
      Utterance u;
      u.id = static_cast<int>(r.Int(utts[i], "utterance_id", path));
      u.speaker = r.String(utts[i], "speaker", path);
      u.text = r.String(utts[i], "text", path);
      u.emotion = r.Label(utts[i], "emotion", path);
      conv.utterances.push_back(std::move(u));
    }

    const json &pairs = r.Get(cj, "pairs", "");
    if (!pairs.is_array()) r.Fail("pairs", "expected an array");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      std::string path = Indexed("pairs", i);
      CausePair p;
      p.emotion_utt_id = static_cast<int>(r.Int(pairs[i], "emotion_utt_id", path));
      p.cause_utt_id = static_cast<int>(r.Int(pairs[i], "cause_utt_id", path));
      p.emotion = r.Label(pairs[i], "emotion", path);
      p.span = r.Span(pairs[i], "span", path);
      conv.pairs.push_back(p);
    }
    corpus.conversations.push_back(std::move(conv));
  }
  validate_corpus(corpus);
  return corpus;
}

Corpus load_corpus(const std::string &path) { return parse_corpus(read_file(path)); }

std::string serialize_corpus(const Corpus &corpus) {
  json convs = json::array();
  for (const auto &conv : corpus.conversations) {
    json utts = json::array();
    for (const auto &u : conv.utterances) {
      utts.push_back({{"utterance_id", u.id},
                      {"speaker", u.speaker},
                      {"text", u.text},
                      {"emotion", emotion_name(u.emotion)}});
    }
    json pairs = json::array();
    for (const auto &p : conv.pairs) {
      pairs.push_back({{"emotion_utt_id", p.emotion_utt_id},
                       {"cause_utt_id", p.cause_utt_id},
                       {"emotion", emotion_name(p.emotion)},
                       {"span", SpanJson(p.span)}});
    }
    convs.push_back({{"conversation_id", conv.id}, {"utterances", utts}, {"pairs", pairs}});
  }
  return json{{"conversations", convs}}.dump();
}

std::vector<PredictionRecord> gold_records(const Corpus &corpus) {
  std::vector<PredictionRecord> out;
  for (const auto &conv : corpus.conversations) {
    for (const auto &p : conv.pairs) {
      out.push_back({conv.id, {p.emotion_utt_id, p.cause_utt_id, p.emotion, p.span, std::nullopt}});
    }
  }
  return out;
}

namespace {

void CheckPrediction(const PredictionRecord &rec, const Corpus &corpus, std::size_t index) {
  const Conversation *conv = corpus.find(rec.conversation_id);
  std::string path = Indexed("predictions", index);
  if (conv == nullptr) {
    throw ValidationError(rec.conversation_id, path + ".conversation_id",
                          "no such conversation in the corpus");
  }
  const PairPrediction &p = rec.pair;
  CheckPairShape(*conv, p.emotion_utt_id, p.cause_utt_id, p.emotion, p.span, path);
}

}  // namespace

std::string serialize_predictions(std::span<const PredictionRecord> predictions,
                                  const Corpus &corpus) {
  json items = json::array();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto &rec = predictions[i];
    CheckPrediction(rec, corpus, i);
    json item = {{"conversation_id", rec.conversation_id},
                 {"emotion_utt_id", rec.pair.emotion_utt_id},
                 {"cause_utt_id", rec.pair.cause_utt_id},
                 {"emotion", emotion_name(rec.pair.emotion)},
                 {"span", SpanJson(rec.pair.span)}};
    if (rec.pair.score) item["score"] = *rec.pair.score;
    items.push_back(std::move(item));
  }
  return json{{"predictions", items}}.dump();
}

std::vector<PredictionRecord> parse_predictions(std::string_view text, const Corpus &corpus) {
  json doc = ParseJson(text);
  FieldReader top("<predictions>");
  const json &items = top.Get(doc, "predictions", "");
  if (!items.is_array()) top.Fail("predictions", "expected an array");
  std::vector<PredictionRecord> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::string path = Indexed("predictions", i);
    PredictionRecord rec;
    rec.conversation_id = top.String(items[i], "conversation_id", path);
    FieldReader r(rec.conversation_id);
    rec.pair.emotion_utt_id = static_cast<int>(r.Int(items[i], "emotion_utt_id", path));
    rec.pair.cause_utt_id = static_cast<int>(r.Int(items[i], "cause_utt_id", path));
    rec.pair.emotion = r.Label(items[i], "emotion", path);
    rec.pair.span = r.Span(items[i], "span", path);
    if (auto it = items[i].find("score"); it != items[i].end() && !it->is_null()) {
      if (!it->is_number()) r.Fail(path + ".score", "expected a number");
      rec.pair.score = it->get<double>();
    }
    CheckPrediction(rec, corpus, i);
    out.push_back(std::move(rec));
  }
  return out;
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string &path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace causeweave
