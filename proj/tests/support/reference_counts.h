#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "causeweave/corpus.h"

namespace causeweave::ref {

// Published emotion confusion counts over 13,619 utterances. Rows gold,
// columns predicted, canonical emotion order.
inline constexpr std::array<std::array<std::uint64_t, 7>, 7> kConfusion = {{
    {4400, 610, 242, 218, 307, 31, 121},
    {392, 1576, 136, 82, 70, 19, 26},
    {154, 134, 1380, 77, 34, 17, 44},
    {168, 180, 192, 823, 88, 71, 93},
    {203, 79, 82, 94, 581, 29, 79},
    {83, 34, 41, 77, 25, 143, 11},
    {70, 36, 42, 24, 35, 8, 158},
}};

// Aligned (gold, predicted) label lists whose confusion equals kConfusion.
struct LabelLists {
  std::vector<Emotion> golds, preds;
};

inline LabelLists ExpandConfusion() {
  LabelLists out;
  for (std::size_t g = 0; g < 7; ++g) {
    for (std::size_t p = 0; p < 7; ++p) {
      for (std::uint64_t k = 0; k < kConfusion[g][p]; ++k) {
        out.golds.push_back(emotion_from_index(g));
        out.preds.push_back(emotion_from_index(p));
      }
    }
  }
  return out;
}

}  // namespace causeweave::ref
