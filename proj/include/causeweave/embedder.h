#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causeweave/corpus.h"

namespace causeweave {

// FNV-1a 64-bit offset basis; the feature hash seed is fixed so hash
// embeddings agree across runs and platforms.
inline constexpr std::uint64_t kFeatureHashSeed = 0xcbf29ce484222325ULL;
inline constexpr int kEmbeddingFormatVersion = 1;

// Per-utterance embedding slots: s1 text, s2 audio, s3 video. Slots that
// were not supplied are zero-filled with their mask bit cleared.
struct EmbeddingSlots {
  static constexpr std::uint8_t kSlot1 = 1;
  static constexpr std::uint8_t kSlot2 = 2;
  static constexpr std::uint8_t kSlot3 = 4;

  std::vector<float> s1, s2, s3;
  std::uint8_t slot_mask = 0;

  static EmbeddingSlots zeros(std::size_t dim);
  std::size_t dim() const { return s1.size(); }
  const std::vector<float> &slot(int index) const;

  friend bool operator==(const EmbeddingSlots &, const EmbeddingSlots &) = default;
};

std::uint64_t feature_hash(std::string_view feature, std::uint64_t seed = kFeatureHashSeed);

// Signed feature hashing of lowercased whitespace tokens and adjacent token
// bigrams into `dim` buckets, L2-normalised into s1. Requires dim >= 8.
EmbeddingSlots hash_embed(std::string_view text, std::size_t dim);

class EmbeddingStore {
 public:
  using Key = std::pair<std::string, int>;

  explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  // Throws FormatError on dimension mismatch, duplicate key or non-finite
  // components.
  void insert(const std::string &conversation_id, int utterance_id, EmbeddingSlots slots);

  // Throws Error naming the missing key.
  const EmbeddingSlots &at(const std::string &conversation_id, int utterance_id) const;
  const EmbeddingSlots *find(const std::string &conversation_id, int utterance_id) const;

  // Iteration is ordered by (conversation_id, utterance_id).
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const EmbeddingStore &, const EmbeddingStore &) = default;

 private:
  std::size_t dim_;
  std::map<Key, EmbeddingSlots> entries_;
};

EmbeddingStore build_store(const Corpus &corpus, std::size_t dim);

// NDJSON: header {"dim":d,"format_version":1} then one record per
// utterance with base64 little-endian float32 slots (null when absent).
std::string serialize_store(const EmbeddingStore &store);
EmbeddingStore parse_store(std::string_view ndjson);
EmbeddingStore load_store(const std::string &path);

// Throws Error naming the first utterance of `corpus` the store cannot answer.
void check_coverage(const EmbeddingStore &store, const Corpus &corpus);

}  // namespace causeweave
