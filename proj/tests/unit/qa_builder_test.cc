#include <set>

#include "causeweave/errors.h"
#include "causeweave/qa_builder.h"
#include "causeweave/utf8.h"
#include "doctest.h"
#include "json.hpp"
#include "support/generators.h"
#include "support/oracles.h"

using namespace causeweave;

namespace {

Conversation TwoUtterances() {
  Conversation c;
  c.id = "two";
  c.utterances = {{1, "Chandler", "We made up!", Emotion::kNeutral},
                  {2, "Monica", "I am so happy", Emotion::kJoy}};
  c.pairs = {{2, 1, Emotion::kJoy, CharSpan{3, 10}}};
  return c;
}

class FixedProvider : public AnswerProvider {
 public:
  explicit FixedProvider(std::optional<CharSpan> s) : span_(s) {}
  std::optional<CharSpan> answer(const QASample &) const override { return span_; }

 private:
  std::optional<CharSpan> span_;
};

}  // namespace

TEST_CASE("question template") {
  CHECK(make_question("You made up!", "Chandler", Emotion::kJoy, "We are good.") ==
        "Which part of the text You made up! is the reason for Chandler's feeling of joy when "
        "We are good. is said?");
  CHECK(make_question("x", "y", Emotion::kSurprise, "z").find("feeling of surprise when") !=
        std::string::npos);
  CHECK(make_question("cause one", "A", Emotion::kFear, "e") !=
        make_question("cause two", "A", Emotion::kFear, "e"));
}

TEST_CASE("context joins utterances with one space") {
  Conversation c;
  c.utterances = {{1, "A", "A.", Emotion::kNeutral}, {2, "B", "B!", Emotion::kNeutral}};
  Context ctx = build_context(c);
  CHECK(ctx.text == "A. B!");
  CHECK(ctx.ranges == std::vector<CharSpan>{{0, 2}, {3, 5}});

  c.utterances.resize(1);
  ctx = build_context(c);
  CHECK(ctx.text == "A.");
  CHECK(ctx.ranges == std::vector<CharSpan>{{0, 2}});
}

TEST_CASE("context is lossless and spans remap by offset") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    Conversation c = gen::RandomConversation(rng, "c");
    Context ctx = build_context(c);
    for (std::size_t i = 0; i < c.utterances.size(); ++i) {
      CHECK(utf8::slice(ctx.text, ctx.ranges[i].start, ctx.ranges[i].end) == c.utterances[i].text);
      if (i) CHECK(ctx.ranges[i].start == ctx.ranges[i - 1].end + 1);
    }
    for (const auto &p : c.pairs) {
      QASample s = make_sample(c, p.emotion_utt_id, p.cause_utt_id, p.emotion, p.span);
      const CharSpan &range = ctx.ranges[std::size_t(p.cause_utt_id - 1)];
      REQUIRE(s.answer.has_value());
      CHECK(s.answer->start == p.span->start + range.start);
      CHECK(s.answer->end == p.span->end + range.start);
      CHECK(utf8::slice(s.context.text, s.answer->start, s.answer->end) ==
            utf8::slice(c.utterance(p.cause_utt_id).text, p.span->start, p.span->end));
    }
  }
}

TEST_CASE("align_span") {
  SUBCASE("one word") {
    TokenSpan t = align_span("I love it", CharSpan{2, 6});
    CHECK(t.start_token == 1);
    CHECK(t.end_token == 1);
    CHECK(t.token_offsets.size() == 3);
  }
  SUBCASE("whole context") {
    TokenSpan t = align_span("I love it", CharSpan{0, 9});
    CHECK(t.start_token == 0);
    CHECK(t.end_token == 2);
  }
  SUBCASE("partial token overlap counts") {
    TokenSpan t = align_span("I love it", CharSpan{4, 8});
    CHECK(t.start_token == 1);
    CHECK(t.end_token == 2);
  }
  SUBCASE("separator only") {
    CHECK_THROWS_AS(align_span("I love  it", CharSpan{6, 8}), AlignmentError);
  }
  SUBCASE("char offsets across multibyte text") {
    TokenSpan t = align_span("café naïve über", CharSpan{5, 10});
    CHECK(t.start_token == 1);
    CHECK(t.end_token == 1);
    CHECK(t.token_offsets[2] == CharSpan{11, 15});
  }
  SUBCASE("tokenizer-agnostic offsets") {
    std::vector<CharSpan> sub = {{0, 3}, {3, 5}, {6, 9}};
    TokenSpan t = align_span(sub, CharSpan{4, 7});
    CHECK(t.start_token == 1);
    CHECK(t.end_token == 2);
  }
}

TEST_CASE("align_span agrees with a brute-force scan") {
  Rng rng(2);
  const char alphabet[] = "ab  \t";
  for (int t = 0; t < 1000; ++t) {
    std::string text;
    std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) text += alphabet[rng.below(5)];
    std::size_t s = rng.below(n);
    CharSpan span{s, s + 1 + rng.below(n - s)};
    auto tokens = oracle::AsciiTokens(text);
    CHECK(whitespace_tokens(text) == tokens);
    auto expected = oracle::BruteForceOverlap(tokens, span);
    if (expected) {
      TokenSpan got = align_span(text, span);
      CHECK(got.start_token == expected->first);
      CHECK(got.end_token == expected->second);
    } else {
      CHECK_THROWS_AS(align_span(text, span), AlignmentError);
    }
  }
}

TEST_CASE("aligned tokens cover the gold answer") {
  Rng rng(3);
  Corpus corpus = gen::RandomCorpus(rng, 20);
  for (const QASample &s : build_qa_dataset(corpus)) {
    // Tokens cover the answer minus any surrounding whitespace.
    std::string answer = utf8::slice(s.context.text, s.answer->start, s.answer->end);
    std::size_t first = answer.find_first_not_of(" \t\n");
    if (first == std::string::npos) {
      CHECK_THROWS_AS(align_span(s.context.text, *s.answer), AlignmentError);
      continue;
    }
    answer = answer.substr(first, answer.find_last_not_of(" \t\n") - first + 1);
    TokenSpan t = align_span(s.context.text, *s.answer);
    std::size_t lo = t.token_offsets[t.start_token].start;
    std::size_t hi = t.token_offsets[t.end_token].end;
    std::string covered = utf8::slice(s.context.text, lo, hi);
    CHECK(covered.find(answer) != std::string::npos);
  }
}

TEST_CASE("QA dataset") {
  Rng rng(4);
  Corpus corpus = gen::RandomCorpus(rng, 10);
  std::size_t n_pairs = 0;
  for (const auto &c : corpus.conversations) n_pairs += c.pairs.size();
  auto samples = build_qa_dataset(corpus);
  CHECK(samples.size() == n_pairs);
  std::size_t k = 0;
  for (const auto &c : corpus.conversations) {
    for (const auto &p : c.pairs) {
      const QASample &s = samples[k++];
      CHECK(s.conversation_id == c.id);
      CHECK(s.emotion_utt_id == p.emotion_utt_id);
      CHECK(s.cause_utt_id == p.cause_utt_id);
      const CharSpan &r = s.context.ranges[std::size_t(p.cause_utt_id - 1)];
      CHECK(r.start <= s.answer->start);
      CHECK(s.answer->end <= r.end);
      CHECK(s.question == make_question(c.utterance(p.cause_utt_id).text,
                                        c.utterance(p.emotion_utt_id).speaker, p.emotion,
                                        c.utterance(p.emotion_utt_id).text));
    }
  }
  std::string text = serialize_qa_samples(samples);
  CHECK(text == serialize_qa_samples(build_qa_dataset(corpus)));
  CHECK(std::count(text.begin(), text.end(), '\n') == long(samples.size()));

  gen::ConversationOptions no_spans;
  no_spans.spans = false;
  no_spans.emotional_rate = 1.0;
  CHECK_THROWS_AS(build_qa_dataset(gen::RandomCorpus(rng, 2, no_spans)), ValidationError);
}

TEST_CASE("QA sample NDJSON fields") {
  Conversation c = TwoUtterances();
  QASample s = make_sample(c, 2, 1, Emotion::kJoy, c.pairs[0].span);
  auto j = nlohmann::json::parse(serialize_qa_samples(std::span(&s, 1)));
  CHECK(j["context"] == "We made up! I am so happy");
  CHECK(j["answer_start"] == 3);
  CHECK(j["answer_end"] == 10);
  CHECK(j["answer_text"] == "made up");
  CHECK(j["context_index"] == nlohmann::json::parse("[[0,11],[12,25]]"));
}

TEST_CASE("resolve_spans") {
  Conversation c = TwoUtterances();
  std::vector<PairPrediction> preds = {{2, 1, Emotion::kJoy, std::nullopt, 0.8},
                                       {2, 2, Emotion::kJoy, std::nullopt, 0.6}};
  SUBCASE("fallback covers whole cause utterances") {
    auto out = resolve_spans(preds, c, FallbackProvider{});
    CHECK(out[0].span == CharSpan{0, 11});
    CHECK(out[1].span == CharSpan{0, 13});
    CHECK(out[0].score == 0.8);
  }
  SUBCASE("answer inside the cause utterance is made local") {
    auto out = resolve_spans(std::span(preds).first(1), c, FixedProvider(CharSpan{3, 10}));
    CHECK(out[0].span == CharSpan{3, 10});
    auto out2 = resolve_spans(std::span(preds).last(1), c, FixedProvider(CharSpan{14, 16}));
    CHECK(out2[0].span == CharSpan{2, 4});
  }
  SUBCASE("answer in another utterance falls back") {
    auto out = resolve_spans(std::span(preds).first(1), c, FixedProvider(CharSpan{14, 16}));
    CHECK(out[0].span == CharSpan{0, 11});
  }
  SUBCASE("answer straddling a boundary falls back") {
    auto out = resolve_spans(std::span(preds).first(1), c, FixedProvider(CharSpan{8, 14}));
    CHECK(out[0].span == CharSpan{0, 11});
  }
  SUBCASE("resolved spans are always in range") {
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
      std::size_t a = rng.below(30), b = rng.below(30);
      std::optional<CharSpan> ans;
      if (a < b) ans = CharSpan{a, b};
      for (const auto &p : resolve_spans(preds, c, FixedProvider(ans))) {
        CHECK(p.span->start < p.span->end);
        CHECK(p.span->end <= utf8::length(c.utterance(p.cause_utt_id).text));
      }
    }
  }
}

TEST_CASE("answer files") {
  Conversation c = TwoUtterances();
  auto provider = AnswerFileProvider::parse(
      R"({"conversation_id":"two","emotion_utt_id":2,"cause_utt_id":1,"answer_start":3,"answer_end":10})"
      "\n"
      R"({"conversation_id":"two","emotion_utt_id":2,"cause_utt_id":2,"abstain":true})"
      "\n");
  CHECK(provider.size() == 2);
  std::vector<PairPrediction> preds = {{2, 1, Emotion::kJoy, std::nullopt, std::nullopt},
                                       {2, 2, Emotion::kJoy, std::nullopt, std::nullopt},
                                       {1, 1, Emotion::kJoy, std::nullopt, std::nullopt}};
  auto out = resolve_spans(preds, c, provider);
  CHECK(out[0].span == CharSpan{3, 10});
  CHECK(out[1].span == CharSpan{0, 13});
  CHECK(out[2].span == CharSpan{0, 11});

  const std::string line =
      R"({"conversation_id":"two","emotion_utt_id":2,"cause_utt_id":1,"answer_start":3,"answer_end":10})"
      "\n";
  CHECK_THROWS_AS(AnswerFileProvider::parse(line + line), FormatError);
  CHECK_THROWS_AS(AnswerFileProvider::parse("{\"conversation_id\":\"two\"}\n"), FormatError);
  CHECK_THROWS_AS(AnswerFileProvider::parse("nope\n"), FormatError);
}
