#pragma once

// Independent reference implementations used only by tests. None of these
// call into the code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "causeweave/corpus.h"
#include "causeweave/scoring.h"

namespace causeweave::oracle {

// Credit over all fields, from first principles.
inline double PairCredit(const PredictionRecord &p, const PredictionRecord &g, bool proportional) {
  if (p.conversation_id != g.conversation_id || p.pair.emotion_utt_id != g.pair.emotion_utt_id ||
      p.pair.cause_utt_id != g.pair.cause_utt_id || p.pair.emotion != g.pair.emotion) {
    return 0.0;
  }
  const CharSpan &a = *p.pair.span;
  const CharSpan &b = *g.pair.span;
  if (!proportional) return (a.start == b.start && a.end == b.end) ? 1.0 : 0.0;
  // Count characters position by position.
  std::size_t inter = 0, uni = 0;
  std::size_t hi = std::max(a.end, b.end);
  for (std::size_t c = 0; c < hi; ++c) {
    bool in_a = c >= a.start && c < a.end;
    bool in_b = c >= b.start && c < b.end;
    inter += (in_a && in_b);
    uni += (in_a || in_b);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Best total credit over every partial one-to-one matching, by recursion
// over predictions (each either unmatched or matched to a free gold).
inline double BestMatchingCredit(const std::vector<PredictionRecord> &preds,
                                 const std::vector<PredictionRecord> &golds, bool proportional) {
  std::vector<bool> used(golds.size(), false);
  std::function<double(std::size_t)> go = [&](std::size_t i) -> double {
    if (i == preds.size()) return 0.0;
    double best = go(i + 1);
    for (std::size_t j = 0; j < golds.size(); ++j) {
      if (used[j]) continue;
      used[j] = true;
      best = std::max(best, PairCredit(preds[i], golds[j], proportional) + go(i + 1));
      used[j] = false;
    }
    return best;
  };
  return go(0);
}

inline Prf BruteForceSpanScores(const std::vector<PredictionRecord> &preds,
                                const std::vector<PredictionRecord> &golds, bool proportional) {
  double credit = BestMatchingCredit(preds, golds, proportional);
  double p = preds.empty() ? 0.0 : credit / static_cast<double>(preds.size());
  double r = golds.empty() ? 0.0 : credit / static_cast<double>(golds.size());
  double f = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  return {p, r, f};
}

// Token overlap by scanning every char of every token.
inline std::optional<std::pair<std::size_t, std::size_t>> BruteForceOverlap(
    const std::vector<CharSpan> &tokens, CharSpan span) {
  std::optional<std::size_t> first, last;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    bool hit = false;
    for (std::size_t c = tokens[t].start; c < tokens[t].end && !hit; ++c) {
      hit = c >= span.start && c < span.end;
    }
    if (hit) {
      if (!first) first = t;
      last = t;
    }
  }
  if (!first) return std::nullopt;
  return std::make_pair(*first, *last);
}

// Whitespace tokenisation by a different route: split on ' ' only after
// mapping every ASCII whitespace char to ' '. Inputs must be ASCII.
inline std::vector<CharSpan> AsciiTokens(const std::string &text) {
  std::vector<CharSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == ' ' || text[i] == '\t' || text[i] == '\n') {
      ++i;
      continue;
    }
    std::size_t j = text.find_first_of(" \t\n", i);
    if (j == std::string::npos) j = text.size();
    out.push_back({i, j});
    i = j;
  }
  return out;
}

// Central finite difference of f around x[index].
template <typename F>
double CentralDifference(F &&f, double &coordinate, double step) {
  const double saved = coordinate;
  coordinate = saved + step;
  double up = f();
  coordinate = saved - step;
  double down = f();
  coordinate = saved;
  return (up - down) / (2.0 * step);
}

// |a - b| / max(|a|, |b|, floor). The floor keeps coordinates whose true
// gradient is (near) zero from dividing roundoff by roundoff.
inline double RelativeError(double analytic, double numeric, double floor = 1e-7) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace causeweave::oracle
