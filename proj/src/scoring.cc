#include "causeweave/scoring.h"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "causeweave/errors.h"
#include "json.hpp"

namespace causeweave {

using nlohmann::json;

namespace {

using BucketKey = std::tuple<std::string, int, int, Emotion>;

BucketKey KeyOf(const PredictionRecord &r) {
  return {r.conversation_id, r.pair.emotion_utt_id, r.pair.cause_utt_id, r.pair.emotion};
}

double SpanCredit(const CharSpan &pred, const CharSpan &gold, MatchMode mode) {
  if (mode == MatchMode::kStrict) return pred == gold ? 1.0 : 0.0;
  std::size_t lo = std::max(pred.start, gold.start);
  std::size_t hi = std::min(pred.end, gold.end);
  std::size_t inter = hi > lo ? hi - lo : 0;
  std::size_t uni = pred.length() + gold.length() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

const CharSpan &RequireSpan(const std::optional<CharSpan> &span, const char *side) {
  if (!span) throw Error(std::string("span scoring needs a span on every ") + side + " pair");
  return *span;
}

bool AllHaveSpans(std::span<const PredictionRecord> records) {
  return std::all_of(records.begin(), records.end(),
                     [](const PredictionRecord &r) { return r.pair.span.has_value(); });
}

std::vector<PredictionRecord> WithEmotion(std::span<const PredictionRecord> records, Emotion e) {
  std::vector<PredictionRecord> out;
  for (const auto &r : records) {
    if (r.pair.emotion == e) out.push_back(r);
  }
  return out;
}

Prf WeightedPrf(const std::array<Prf, 6> &scores, std::span<const std::size_t> counts) {
  std::array<double, 6> p{}, r{}, f{};
  for (std::size_t k = 0; k < 6; ++k) {
    p[k] = scores[k].precision;
    r[k] = scores[k].recall;
    f[k] = scores[k].f1;
  }
  return {weighted_f1(p, counts), weighted_f1(r, counts), weighted_f1(f, counts)};
}

json PrfJson(const Prf &p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

json OptPrfJson(const std::optional<Prf> &p) {
  if (!p) return nullptr;
  return PrfJson(*p);
}

Prf PrfFrom(const json &j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

std::optional<Prf> OptPrfFrom(const json &j, const char *key) {
  const json &v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return PrfFrom(v);
}

}  // namespace

Prf make_prf(double precision, double recall) {
  double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return {precision, recall, f1};
}

double match_credit(const PairPrediction &pred, const CausePair &gold, MatchMode mode) {
  const CharSpan &ps = RequireSpan(pred.span, "predicted");
  const CharSpan &gs = RequireSpan(gold.span, "gold");
  if (pred.emotion_utt_id != gold.emotion_utt_id || pred.cause_utt_id != gold.cause_utt_id ||
      pred.emotion != gold.emotion) {
    return 0.0;
  }
  return SpanCredit(ps, gs, mode);
}

double max_assignment(std::span<const double> credit, std::size_t rows, std::size_t cols) {
  if (credit.size() != rows * cols) throw ShapeError("max_assignment: credit size mismatch");
  if (rows == 0 || cols == 0) return 0.0;
  // Kuhn-Munkres with potentials on the smaller side (n <= m), minimising
  // negated credit.
  const bool transposed = rows > cols;
  const std::size_t n = transposed ? cols : rows;
  const std::size_t m = transposed ? rows : cols;
  auto at = [&](std::size_t i, std::size_t j) {
    return transposed ? credit[j * cols + i] : credit[i * cols + j];
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      std::size_t i0 = owner[j0], j1 = 0;
      double delta = kInf;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = -at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of(n + 1, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] != 0) col_of[owner[j]] = j;
  }
  double total = 0.0;
  for (std::size_t i = 1; i <= n; ++i) total += at(i - 1, col_of[i] - 1);
  return total;
}

Prf span_scores(std::span<const PredictionRecord> preds, std::span<const PredictionRecord> golds,
                MatchMode mode) {
  std::map<BucketKey, std::pair<std::vector<CharSpan>, std::vector<CharSpan>>> buckets;
  for (const auto &p : preds) buckets[KeyOf(p)].first.push_back(RequireSpan(p.pair.span, "predicted"));
  for (const auto &g : golds) buckets[KeyOf(g)].second.push_back(RequireSpan(g.pair.span, "gold"));

  double total = 0.0;
  for (const auto &[key, sides] : buckets) {
    const auto &[ps, gs] = sides;
    if (ps.empty() || gs.empty()) continue;
    std::vector<double> credit(ps.size() * gs.size());
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (std::size_t j = 0; j < gs.size(); ++j)
        credit[i * gs.size() + j] = SpanCredit(ps[i], gs[j], mode);
    total += max_assignment(credit, ps.size(), gs.size());
  }
  double p = preds.empty() ? 0.0 : total / static_cast<double>(preds.size());
  double r = golds.empty() ? 0.0 : total / static_cast<double>(golds.size());
  return make_prf(p, r);
}

Prf pair_scores(std::span<const PredictionRecord> preds, std::span<const PredictionRecord> golds) {
  std::set<BucketKey> p, g;
  for (const auto &x : preds) p.insert(KeyOf(x));
  for (const auto &x : golds) g.insert(KeyOf(x));
  std::size_t hit = 0;
  for (const auto &k : p) hit += g.count(k);
  double precision = p.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(p.size());
  double recall = g.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(g.size());
  return make_prf(precision, recall);
}

double weighted_f1(std::span<const double> per_emotion, std::span<const std::size_t> gold_counts) {
  if (per_emotion.size() != gold_counts.size()) throw ShapeError("weighted_f1: size mismatch");
  double num = 0.0;
  std::size_t den = 0;
  for (std::size_t k = 0; k < per_emotion.size(); ++k) {
    num += static_cast<double>(gold_counts[k]) * per_emotion[k];
    den += gold_counts[k];
  }
  if (den == 0) throw Error("weighted_f1: all gold counts are zero");
  return num / static_cast<double>(den);
}

std::vector<PredictionRecord> deduplicate(std::span<const PredictionRecord> preds) {
  std::set<std::tuple<BucketKey, std::optional<CharSpan>>> seen;
  std::vector<PredictionRecord> out;
  for (const auto &p : preds) {
    if (seen.emplace(KeyOf(p), p.pair.span).second) out.push_back(p);
  }
  return out;
}

ScoreReport full_report(std::span<const PredictionRecord> raw_preds,
                        std::span<const PredictionRecord> golds) {
  std::vector<PredictionRecord> preds = deduplicate(raw_preds);
  ScoreReport report;
  report.num_predictions = preds.size();
  report.num_gold = golds.size();
  const bool spans = AllHaveSpans(preds) && AllHaveSpans(golds);
  if (spans) {
    report.strict = span_scores(preds, golds, MatchMode::kStrict);
    report.proportional = span_scores(preds, golds, MatchMode::kProportional);
  }
  report.pair_only = pair_scores(preds, golds);

  std::array<std::size_t, 6> counts{};
  std::array<Prf, 6> strict{}, prop{}, pair{};
  for (std::size_t k = 0; k < kCauseEmotions.size(); ++k) {
    Emotion e = kCauseEmotions[k];
    auto ep = WithEmotion(preds, e);
    auto eg = WithEmotion(golds, e);
    EmotionScores &s = report.per_emotion[k];
    s.emotion = e;
    s.gold_count = counts[k] = eg.size();
    pair[k] = s.pair = pair_scores(ep, eg);
    if (spans) {
      strict[k] = *(s.strict = span_scores(ep, eg, MatchMode::kStrict));
      prop[k] = *(s.proportional = span_scores(ep, eg, MatchMode::kProportional));
    }
  }
  if (report.num_gold > 0) {
    report.weighted_pair = WeightedPrf(pair, counts);
    if (spans) {
      report.weighted_strict = WeightedPrf(strict, counts);
      report.weighted_proportional = WeightedPrf(prop, counts);
    }
  } else if (spans) {
    report.weighted_strict = Prf{};
    report.weighted_proportional = Prf{};
  }
  return report;
}

std::string report_to_json(const ScoreReport &r) {
  json per = json::array();
  for (const auto &s : r.per_emotion) {
    per.push_back({{"emotion", emotion_name(s.emotion)},
                   {"gold_count", s.gold_count},
                   {"strict", OptPrfJson(s.strict)},
                   {"proportional", OptPrfJson(s.proportional)},
                   {"pair", PrfJson(s.pair)}});
  }
  json j = {{"strict", OptPrfJson(r.strict)},
            {"proportional", OptPrfJson(r.proportional)},
            {"pair_only", PrfJson(r.pair_only)},
            {"weighted_strict", OptPrfJson(r.weighted_strict)},
            {"weighted_proportional", OptPrfJson(r.weighted_proportional)},
            {"weighted_pair", PrfJson(r.weighted_pair)},
            {"per_emotion", per},
            {"num_predictions", r.num_predictions},
            {"num_gold", r.num_gold}};
  return j.dump();
}

ScoreReport report_from_json(std::string_view text) {
  try {
    json j = json::parse(text.begin(), text.end());
    ScoreReport r;
    r.strict = OptPrfFrom(j, "strict");
    r.proportional = OptPrfFrom(j, "proportional");
    r.pair_only = PrfFrom(j.at("pair_only"));
    r.weighted_strict = OptPrfFrom(j, "weighted_strict");
    r.weighted_proportional = OptPrfFrom(j, "weighted_proportional");
    r.weighted_pair = PrfFrom(j.at("weighted_pair"));
    r.num_predictions = j.at("num_predictions").get<std::size_t>();
    r.num_gold = j.at("num_gold").get<std::size_t>();
    const json &per = j.at("per_emotion");
    if (!per.is_array() || per.size() != 6) throw FormatError("per_emotion must have 6 entries");
    for (std::size_t k = 0; k < 6; ++k) {
      auto e = parse_emotion(per[k].at("emotion").get<std::string>());
      if (!e) throw FormatError("unknown emotion in report");
      r.per_emotion[k].emotion = *e;
      r.per_emotion[k].gold_count = per[k].at("gold_count").get<std::size_t>();
      r.per_emotion[k].strict = OptPrfFrom(per[k], "strict");
      r.per_emotion[k].proportional = OptPrfFrom(per[k], "proportional");
      r.per_emotion[k].pair = PrfFrom(per[k].at("pair"));
    }
    return r;
  } catch (const json::exception &e) {
    throw FormatError(std::string("score report: ") + e.what());
  }
}

std::string render_table(const ScoreReport &r) {
  const bool spans = r.strict.has_value();
  const std::optional<Prf> weighted = spans ? r.weighted_proportional : r.weighted_pair;
  auto cell = [](const std::optional<Prf> &p, double Prf::*field) {
    if (!p) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", (*p).*field);
    return std::string(buf);
  };
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %12s %14s %16s\n", "Metric", "Strict", "Proportional",
                spans ? "Weighted-Prop" : "Weighted-Pair");
  out += line;
  const std::pair<const char *, double Prf::*> rows[] = {
      {"Precision", &Prf::precision}, {"Recall", &Prf::recall}, {"F1-Score", &Prf::f1}};
  for (const auto &[label, field] : rows) {
    std::snprintf(line, sizeof line, "%-10s %12s %14s %16s\n", label, cell(r.strict, field).c_str(),
                  cell(r.proportional, field).c_str(), cell(weighted, field).c_str());
    out += line;
  }
  return out;
}

}  // namespace causeweave
