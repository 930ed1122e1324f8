#include "causeweave/embedder.h"

#include <cctype>
#include <cmath>
#include <sstream>

#include "causeweave/base64.h"
#include "causeweave/errors.h"
#include "json.hpp"

namespace causeweave {

using nlohmann::json;

namespace {

constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::vector<std::string> LowercaseTokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string KeyName(const std::string &conversation_id, int utterance_id) {
  return "(" + conversation_id + ", " + std::to_string(utterance_id) + ")";
}

}  // namespace

EmbeddingSlots EmbeddingSlots::zeros(std::size_t dim) {
  EmbeddingSlots s;
  s.s1.assign(dim, 0.0f);
  s.s2.assign(dim, 0.0f);
  s.s3.assign(dim, 0.0f);
  return s;
}

const std::vector<float> &EmbeddingSlots::slot(int index) const {
  switch (index) {
    case 0: return s1;
    case 1: return s2;
    case 2: return s3;
  }
  throw std::out_of_range("slot index " + std::to_string(index));
}

std::uint64_t feature_hash(std::string_view feature, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (char c : feature) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

EmbeddingSlots hash_embed(std::string_view text, std::size_t dim) {
  if (dim < 8) throw ShapeError("hash_embed needs dim >= 8, got " + std::to_string(dim));
  EmbeddingSlots out = EmbeddingSlots::zeros(dim);
  out.slot_mask = EmbeddingSlots::kSlot1;

  // Unit separator keeps unigram and bigram feature spaces disjoint.
  std::vector<std::string> features;
  auto tokens = LowercaseTokens(text);
  for (const auto &t : tokens) features.push_back("u\x1f" + t);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    features.push_back("b\x1f" + tokens[i] + "\x1f" + tokens[i + 1]);
  }

  std::vector<double> acc(dim, 0.0);
  for (const auto &f : features) {
    std::uint64_t h = feature_hash(f);
    double sign = (h >> 63) ? -1.0 : 1.0;
    acc[h % dim] += sign;
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (std::size_t i = 0; i < dim; ++i) out.s1[i] = static_cast<float>(acc[i] / norm);
  }
  return out;
}

void EmbeddingStore::insert(const std::string &conversation_id, int utterance_id,
                            EmbeddingSlots slots) {
  std::string key = KeyName(conversation_id, utterance_id);
  for (int k = 0; k < 3; ++k) {
    const auto &v = slots.slot(k);
    if (v.size() != dim_) {
      throw FormatError("record " + key + ": slot s" + std::to_string(k + 1) + " has " +
                        std::to_string(v.size()) + " values, store dim is " +
                        std::to_string(dim_));
    }
    for (float x : v) {
      if (!std::isfinite(x)) {
        throw FormatError("record " + key + ": slot s" + std::to_string(k + 1) +
                          " has a non-finite value");
      }
    }
  }
  if (!entries_.emplace(Key{conversation_id, utterance_id}, std::move(slots)).second) {
    throw FormatError("record " + key + ": duplicate key");
  }
}

const EmbeddingSlots *EmbeddingStore::find(const std::string &conversation_id,
                                           int utterance_id) const {
  auto it = entries_.find(Key{conversation_id, utterance_id});
  return it == entries_.end() ? nullptr : &it->second;
}

const EmbeddingSlots &EmbeddingStore::at(const std::string &conversation_id,
                                         int utterance_id) const {
  const EmbeddingSlots *s = find(conversation_id, utterance_id);
  if (s == nullptr) {
    throw Error("no embedding for utterance " + KeyName(conversation_id, utterance_id));
  }
  return *s;
}

EmbeddingStore build_store(const Corpus &corpus, std::size_t dim) {
  EmbeddingStore store(dim);
  for (const auto &conv : corpus.conversations) {
    for (const auto &u : conv.utterances) store.insert(conv.id, u.id, hash_embed(u.text, dim));
  }
  return store;
}

std::string serialize_store(const EmbeddingStore &store) {
  std::string out = json{{"dim", store.dim()}, {"format_version", kEmbeddingFormatVersion}}.dump();
  out.push_back('\n');
  for (const auto &[key, slots] : store) {
    json rec = {{"conversation_id", key.first}, {"utterance_id", key.second}};
    const char *names[] = {"s1", "s2", "s3"};
    const std::uint8_t bits[] = {EmbeddingSlots::kSlot1, EmbeddingSlots::kSlot2,
                                 EmbeddingSlots::kSlot3};
    for (int k = 0; k < 3; ++k) {
      if (slots.slot_mask & bits[k]) {
        rec[names[k]] = base64::encode_floats(slots.slot(k));
      } else {
        rec[names[k]] = nullptr;
      }
    }
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

EmbeddingStore parse_store(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto parse_line = [&](const std::string &l) {
    try {
      return json::parse(l);
    } catch (const json::parse_error &e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  };

  std::optional<EmbeddingStore> store;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line);
    if (!store) {
      if (!j.is_object() || !j.contains("dim") || !j.contains("format_version")) {
        throw FormatError("line 1: expected header {\"dim\", \"format_version\"}");
      }
      if (!j["format_version"].is_number_integer() ||
          j["format_version"].get<int>() != kEmbeddingFormatVersion) {
        throw FormatError("unsupported embedding format_version " + j["format_version"].dump());
      }
      if (!j["dim"].is_number_integer() || j["dim"].get<long long>() <= 0) {
        throw FormatError("header dim must be a positive integer");
      }
      store.emplace(j["dim"].get<std::size_t>());
      continue;
    }
    std::string where = "line " + std::to_string(line_no);
    if (!j.is_object() || !j.contains("conversation_id") || !j["conversation_id"].is_string() ||
        !j.contains("utterance_id") || !j["utterance_id"].is_number_integer()) {
      throw FormatError(where + ": record needs conversation_id and utterance_id");
    }
    std::string conv = j["conversation_id"].get<std::string>();
    int utt = j["utterance_id"].get<int>();
    where += " record " + KeyName(conv, utt);

    EmbeddingSlots slots = EmbeddingSlots::zeros(store->dim());
    const char *names[] = {"s1", "s2", "s3"};
    std::vector<float> *targets[] = {&slots.s1, &slots.s2, &slots.s3};
    const std::uint8_t bits[] = {EmbeddingSlots::kSlot1, EmbeddingSlots::kSlot2,
                                 EmbeddingSlots::kSlot3};
    for (int k = 0; k < 3; ++k) {
      auto it = j.find(names[k]);
      if (it == j.end() || it->is_null()) continue;
      if (!it->is_string()) throw FormatError(where + ": " + names[k] + " must be base64 or null");
      std::vector<float> values;
      try {
        values = base64::decode_floats(it->get<std::string>());
      } catch (const FormatError &e) {
        throw FormatError(where + ": " + names[k] + ": " + e.what());
      }
      if (values.size() != store->dim()) {
        throw FormatError(where + ": " + names[k] + " has " + std::to_string(values.size()) +
                          " floats, expected " + std::to_string(store->dim()));
      }
      *targets[k] = std::move(values);
      slots.slot_mask |= bits[k];
    }
    try {
      store->insert(conv, utt, std::move(slots));
    } catch (const FormatError &e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  if (!store) throw FormatError("embedding file is empty (missing header)");
  return std::move(*store);
}

EmbeddingStore load_store(const std::string &path) { return parse_store(read_file(path)); }

void check_coverage(const EmbeddingStore &store, const Corpus &corpus) {
  for (const auto &conv : corpus.conversations) {
    for (const auto &u : conv.utterances) store.at(conv.id, u.id);
  }
}

}  // namespace causeweave
