#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "causeweave/causality.h"
#include "causeweave/corpus.h"
#include "causeweave/embedder.h"
#include "causeweave/emotion_head.h"
#include "causeweave/errors.h"
#include "causeweave/pairing.h"
#include "causeweave/qa_builder.h"
#include "causeweave/scoring.h"

namespace py = pybind11;
using namespace causeweave;

namespace {

Emotion EmotionArg(const std::string &name) {
  auto e = parse_emotion(name);
  if (!e) throw py::value_error("unknown emotion '" + name + "'");
  return *e;
}

std::vector<Emotion> EmotionList(const std::vector<std::string> &names) {
  std::vector<Emotion> out;
  for (const auto &n : names) out.push_back(EmotionArg(n));
  return out;
}

py::dict ConversationSummary(const Conversation &c) {
  py::dict d;
  d["conversation_id"] = c.id;
  d["utterances"] = c.size();
  d["pairs"] = c.pairs.size();
  return d;
}

const Conversation &FindConversation(const Corpus &corpus, const std::string &id) {
  const Conversation *c = corpus.find(id);
  if (!c) throw py::key_error(id);
  return *c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Emotion-cause pair extraction core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<AlignmentError>(m, "AlignmentError", base.ptr());

  m.attr("EMOTIONS") = [] {
    std::vector<std::string> names;
    for (Emotion e : kAllEmotions) names.emplace_back(emotion_name(e));
    return names;
  }();
  m.attr("DEFAULT_THRESHOLD") = kDefaultThreshold;

  m.def(
      "validate_corpus",
      [](const std::string &json) {
        Corpus c = parse_corpus(json);
        py::list out;
        for (const auto &conv : c.conversations) out.append(ConversationSummary(conv));
        return out;
      },
      py::arg("json"), "Parse and validate a corpus document; one summary dict per conversation.");

  m.def("canonical_corpus", [](const std::string &json) { return serialize_corpus(parse_corpus(json)); },
        py::arg("json"));

  m.def("feature_hash", [](const std::string &s) { return feature_hash(s); }, py::arg("feature"));
  m.def(
      "hash_embed", [](const std::string &text, std::size_t dim) { return hash_embed(text, dim).s1; },
      py::arg("text"), py::arg("dim"));

  m.def(
      "softmax",
      [](const std::vector<double> &logits) {
        if (logits.size() != kNumEmotions) throw py::value_error("need 7 logits");
        EmotionLogits l;
        std::copy(logits.begin(), logits.end(), l.begin());
        auto p = softmax(l);
        return std::vector<double>(p.begin(), p.end());
      },
      py::arg("logits"));

  m.def(
      "confusion",
      [](const std::vector<std::string> &golds, const std::vector<std::string> &preds) {
        auto g = EmotionList(golds), p = EmotionList(preds);
        auto cm = confusion(g, p);
        std::vector<std::vector<std::uint64_t>> rows;
        for (const auto &r : cm.counts) rows.emplace_back(r.begin(), r.end());
        return py::make_tuple(rows, accuracy(cm));
      },
      py::arg("golds"), py::arg("preds"), "Counts (rows gold) and accuracy.");

  m.def(
      "build_target",
      [](const std::string &corpus_json, const std::string &conversation_id) {
        Corpus c = parse_corpus(corpus_json);
        return build_target(FindConversation(c, conversation_id));
      },
      py::arg("corpus_json"), py::arg("conversation_id"));

  m.def(
      "extract_pairs",
      [](const Eigen::MatrixXd &cm, const std::vector<std::string> &emotions, double threshold) {
        py::list out;
        for (const auto &p : extract_pairs(cm, EmotionList(emotions), threshold)) {
          out.append(py::make_tuple(p.emotion_utt_id, p.cause_utt_id,
                                    std::string(emotion_name(p.emotion)), *p.score));
        }
        return out;
      },
      py::arg("causality"), py::arg("emotions"), py::arg("threshold") = kDefaultThreshold);

  m.def(
      "causality_matrix",
      [](const Eigen::MatrixXd &combined, std::size_t n_heads, std::uint64_t seed) {
        EncoderConfig cfg;
        cfg.d_model = static_cast<std::size_t>(combined.cols());
        cfg.n_heads = n_heads;
        cfg.d_ff = 2 * cfg.d_model;
        cfg.max_len = std::max<std::size_t>(cfg.max_len, static_cast<std::size_t>(combined.rows()));
        cfg.seed = seed;
        cfg.validate();
        return causality_matrix(CausalityModel::init(cfg), combined);
      },
      py::arg("combined"), py::arg("n_heads") = 4, py::arg("seed") = 11,
      "Causality matrix of a freshly initialised encoder, in eval mode.");

  m.def(
      "make_question",
      [](const std::string &cause, const std::string &speaker, const std::string &emotion,
         const std::string &emotion_text) {
        return make_question(cause, speaker, EmotionArg(emotion), emotion_text);
      },
      py::arg("cause_text"), py::arg("speaker"), py::arg("emotion"), py::arg("emotion_text"));

  m.def(
      "build_context",
      [](const std::string &corpus_json, const std::string &conversation_id) {
        Corpus c = parse_corpus(corpus_json);
        Context ctx = build_context(FindConversation(c, conversation_id));
        std::vector<std::pair<std::size_t, std::size_t>> ranges;
        for (const auto &r : ctx.ranges) ranges.emplace_back(r.start, r.end);
        return py::make_tuple(ctx.text, ranges);
      },
      py::arg("corpus_json"), py::arg("conversation_id"));

  m.def(
      "align_span",
      [](const std::string &context, std::size_t start, std::size_t end) {
        TokenSpan t = align_span(context, CharSpan{start, end});
        return py::make_tuple(t.start_token, t.end_token);
      },
      py::arg("context"), py::arg("start"), py::arg("end"),
      "Inclusive first and last whitespace token overlapping [start, end).");

  m.def(
      "score_json",
      [](const std::string &corpus_json, const std::string &predictions_json) {
        Corpus c = parse_corpus(corpus_json);
        auto preds = parse_predictions(predictions_json, c);
        return report_to_json(full_report(preds, gold_records(c)));
      },
      py::arg("corpus_json"), py::arg("predictions_json"));

  m.def(
      "render_table",
      [](const std::string &report_json) { return render_table(report_from_json(report_json)); },
      py::arg("report_json"));
}
