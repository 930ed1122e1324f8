#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causeweave/corpus.h"

namespace causeweave {

enum class MatchMode { kStrict, kProportional };

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const Prf &, const Prf &) = default;
};

// F1 = 2PR / (P + R), 0 when P + R = 0.
Prf make_prf(double precision, double recall);

// 0 unless emotion utterance, cause utterance and emotion all agree.
// Strict: 1 iff spans are identical. Proportional: |pred ∩ gold| /
// |pred ∪ gold| over char intervals. Throws Error when a span is missing.
double match_credit(const PairPrediction &pred, const CausePair &gold, MatchMode mode);

// One-to-one matching inside each (conversation, emotion_utt, cause_utt,
// emotion) bucket that maximises total credit. P = credit / |preds|,
// R = credit / |golds|. Predictions are expected to be deduplicated.
Prf span_scores(std::span<const PredictionRecord> preds, std::span<const PredictionRecord> golds,
                MatchMode mode);

// Exact set matching on (conversation, emotion_utt, cause_utt, emotion);
// spans ignored.
Prf pair_scores(std::span<const PredictionRecord> preds, std::span<const PredictionRecord> golds);

// Count-weighted mean over the six non-neutral emotions. Throws Error when
// every count is zero.
double weighted_f1(std::span<const double> per_emotion, std::span<const std::size_t> gold_counts);

// Largest total of a one-to-one assignment between rows and columns of a
// nonnegative credit matrix (rows x cols, row-major).
double max_assignment(std::span<const double> credit, std::size_t rows, std::size_t cols);

struct EmotionScores {
  Emotion emotion = Emotion::kJoy;
  std::size_t gold_count = 0;
  std::optional<Prf> strict;
  std::optional<Prf> proportional;
  Prf pair;

  friend bool operator==(const EmotionScores &, const EmotionScores &) = default;
};

// Span metrics are present only when every prediction and gold pair
// carries a span. Weighted variants average per-emotion P, R and F1 with
// gold-count weights.
struct ScoreReport {
  std::optional<Prf> strict;
  std::optional<Prf> proportional;
  Prf pair_only;
  std::array<EmotionScores, 6> per_emotion{};
  std::optional<Prf> weighted_strict;
  std::optional<Prf> weighted_proportional;
  Prf weighted_pair;
  std::size_t num_predictions = 0;
  std::size_t num_gold = 0;

  friend bool operator==(const ScoreReport &, const ScoreReport &) = default;
};

// Drops exact duplicate predictions (same conversation, pair, emotion and
// span), keeping the first.
std::vector<PredictionRecord> deduplicate(std::span<const PredictionRecord> preds);

ScoreReport full_report(std::span<const PredictionRecord> preds,
                        std::span<const PredictionRecord> golds);

std::string report_to_json(const ScoreReport &report);
ScoreReport report_from_json(std::string_view json);

// Three metric rows (Precision, Recall, F1-Score) by three columns
// (Strict, Proportional, Weighted). The weighted column is the
// proportional variant, or the span-free pair variant when spans are absent;
// its header says which.
std::string render_table(const ScoreReport &report);

}  // namespace causeweave
