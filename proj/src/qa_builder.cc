#include "causeweave/qa_builder.h"

#include <sstream>

#include "causeweave/errors.h"
#include "causeweave/utf8.h"
#include "json.hpp"

namespace causeweave {

using nlohmann::json;

std::string make_question(std::string_view cause_text, std::string_view speaker, Emotion emotion,
                          std::string_view emotion_text) {
  std::string q = "Which part of the text ";
  q += cause_text;
  q += " is the reason for ";
  q += speaker;
  q += "'s feeling of ";
  q += emotion_name(emotion);
  q += " when ";
  q += emotion_text;
  q += " is said?";
  return q;
}

Context build_context(const Conversation &conversation) {
  Context ctx;
  const std::size_t sep = utf8::length(kContextSeparator);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < conversation.utterances.size(); ++i) {
    if (i > 0) {
      ctx.text += kContextSeparator;
      offset += sep;
    }
    const std::string &t = conversation.utterances[i].text;
    std::size_t len = utf8::length(t);
    ctx.text += t;
    ctx.ranges.push_back({offset, offset + len});
    offset += len;
  }
  return ctx;
}

std::vector<CharSpan> whitespace_tokens(std::string_view text) {
  std::vector<CharSpan> tokens;
  auto chars = utf8::decode(text);
  std::size_t i = 0;
  while (i < chars.size()) {
    while (i < chars.size() && utf8::is_space(chars[i])) ++i;
    if (i == chars.size()) break;
    std::size_t start = i;
    while (i < chars.size() && !utf8::is_space(chars[i])) ++i;
    tokens.push_back({start, i});
  }
  return tokens;
}

TokenSpan align_span(std::span<const CharSpan> token_offsets, CharSpan span) {
  if (span.start >= span.end) throw AlignmentError("cannot align an empty span");
  std::optional<std::size_t> first, last;
  for (std::size_t t = 0; t < token_offsets.size(); ++t) {
    const CharSpan &tok = token_offsets[t];
    if (tok.start < span.end && span.start < tok.end) {
      if (!first) first = t;
      last = t;
    }
  }
  if (!first) {
    throw AlignmentError("span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
                         ") overlaps no token");
  }
  return {*first, *last, std::vector<CharSpan>(token_offsets.begin(), token_offsets.end())};
}

TokenSpan align_span(std::string_view context, CharSpan span) {
  if (span.end > utf8::length(context)) throw AlignmentError("span extends past the context");
  return align_span(whitespace_tokens(context), span);
}

QASample make_sample(const Conversation &conversation, int emotion_utt_id, int cause_utt_id,
                     Emotion emotion, std::optional<CharSpan> local_span) {
  const Utterance &emo = conversation.utterance(emotion_utt_id);
  const Utterance &cause = conversation.utterance(cause_utt_id);
  QASample s;
  s.conversation_id = conversation.id;
  s.emotion_utt_id = emotion_utt_id;
  s.cause_utt_id = cause_utt_id;
  s.emotion = emotion;
  s.question = make_question(cause.text, emo.speaker, emotion, emo.text);
  s.context = build_context(conversation);
  if (local_span) {
    const CharSpan &range = s.context.ranges[static_cast<std::size_t>(cause_utt_id - 1)];
    CharSpan mapped{local_span->start + range.start, local_span->end + range.start};
    if (local_span->start >= local_span->end || !range.contains(mapped)) {
      throw ValidationError(conversation.id, "span",
                            "cannot remap span into utterance " + std::to_string(cause_utt_id));
    }
    s.answer = mapped;
  }
  return s;
}

std::vector<QASample> build_qa_dataset(const Corpus &corpus) {
  std::vector<QASample> out;
  for (const auto &conv : corpus.conversations) {
    for (std::size_t i = 0; i < conv.pairs.size(); ++i) {
      const CausePair &p = conv.pairs[i];
      if (!p.span) {
        throw ValidationError(conv.id, "pairs[" + std::to_string(i) + "].span",
                              "QA samples need gold spans");
      }
      out.push_back(make_sample(conv, p.emotion_utt_id, p.cause_utt_id, p.emotion, p.span));
    }
  }
  return out;
}

std::string serialize_qa_samples(std::span<const QASample> samples) {
  std::string out;
  for (const auto &s : samples) {
    json ranges = json::array();
    for (const auto &r : s.context.ranges) ranges.push_back({r.start, r.end});
    json rec = {{"conversation_id", s.conversation_id},
                {"emotion_utt_id", s.emotion_utt_id},
                {"cause_utt_id", s.cause_utt_id},
                {"emotion", emotion_name(s.emotion)},
                {"question", s.question},
                {"context", s.context.text},
                {"context_index", ranges},
                {"answer_start", nullptr},
                {"answer_end", nullptr},
                {"answer_text", nullptr}};
    if (s.answer) {
      rec["answer_start"] = s.answer->start;
      rec["answer_end"] = s.answer->end;
      rec["answer_text"] = utf8::slice(s.context.text, s.answer->start, s.answer->end);
    }
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

AnswerFileProvider AnswerFileProvider::parse(std::string_view text) {
  AnswerFileProvider provider;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "answers line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error &e) {
      throw FormatError(where + ": " + e.what());
    }
    auto int_field = [&](const char *key) {
      if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 0) {
        throw FormatError(where + ": " + key + " must be a non-negative integer");
      }
      return j[key].get<long long>();
    };
    if (!j.is_object() || !j.contains("conversation_id") || !j["conversation_id"].is_string()) {
      throw FormatError(where + ": missing conversation_id");
    }
    Key key{j["conversation_id"].get<std::string>(), static_cast<int>(int_field("emotion_utt_id")),
            static_cast<int>(int_field("cause_utt_id"))};
    std::optional<CharSpan> answer;
    bool abstain = j.contains("abstain") && j["abstain"].is_boolean() && j["abstain"].get<bool>();
    if (!abstain) {
      auto start = static_cast<std::size_t>(int_field("answer_start"));
      auto end = static_cast<std::size_t>(int_field("answer_end"));
      if (start >= end) throw FormatError(where + ": answer_start must be < answer_end");
      answer = CharSpan{start, end};
    }
    if (!provider.answers_.emplace(std::move(key), answer).second) {
      throw FormatError(where + ": duplicate answer for this pair");
    }
  }
  return provider;
}

AnswerFileProvider AnswerFileProvider::load(const std::string &path) {
  return parse(read_file(path));
}

std::optional<CharSpan> AnswerFileProvider::answer(const QASample &sample) const {
  auto it = answers_.find(Key{sample.conversation_id, sample.emotion_utt_id, sample.cause_utt_id});
  if (it == answers_.end()) return std::nullopt;
  return it->second;
}

std::vector<PairPrediction> resolve_spans(std::span<const PairPrediction> predictions,
                                          const Conversation &conversation,
                                          const AnswerProvider &provider) {
  std::vector<PairPrediction> out;
  out.reserve(predictions.size());
  for (const PairPrediction &p : predictions) {
    QASample sample = make_sample(conversation, p.emotion_utt_id, p.cause_utt_id, p.emotion);
    const CharSpan &range = sample.context.ranges[static_cast<std::size_t>(p.cause_utt_id - 1)];
    PairPrediction resolved = p;
    resolved.span = CharSpan{0, range.length()};
    if (auto a = provider.answer(sample); a && a->start < a->end && range.contains(*a)) {
      resolved.span = CharSpan{a->start - range.start, a->end - range.start};
    }
    out.push_back(std::move(resolved));
  }
  return out;
}

}  // namespace causeweave
