#include <cmath>
#include <algorithm>
#include <cstring>
#include <numeric>
#include <utility>

#include "causeweave/causality.h"
#include "causeweave/errors.h"
#include "causeweave/pairing.h"
#include "doctest.h"
#include "json.hpp"
#include "support/generators.h"
#include "support/gradcheck.h"

using namespace causeweave;

namespace {

EncoderConfig Small() {
  EncoderConfig cfg;
  cfg.d_model = 12;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.max_len = 10;
  return cfg;
}

Eigen::MatrixXd RandomRows(Rng &rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

void CheckRowStochastic(const CausalityMatrix &cm) {
  for (Eigen::Index r = 0; r < cm.rows(); ++r) {
    CHECK(std::abs(cm.row(r).sum() - 1.0) <= 1e-6);
    CHECK(cm.row(r).minCoeff() >= 0.0);
    CHECK(cm.row(r).maxCoeff() <= 1.0);
  }
}

}  // namespace

TEST_CASE("assemble_input concatenates slots then logits") {
  CHECK(assemble_input(EmbeddingSlots::zeros(16), EmotionLogits{}).size() == 55);
  CHECK(assemble_input(EmbeddingSlots::zeros(8), EmotionLogits{}).isZero());

  auto slots = EmbeddingSlots::zeros(8);
  slots.s1[0] = 1;
  slots.s2[1] = 2;
  slots.s3[7] = 3;
  EmotionLogits logits{0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5};
  auto v = assemble_input(slots, logits);
  CHECK(v(0) == 1);
  CHECK(v(9) == 2);
  CHECK(v(23) == 3);
  for (int k = 0; k < 7; ++k) CHECK(v(24 + k) == logits[std::size_t(k)]);
}

TEST_CASE("encoder config validation") {
  CHECK_NOTHROW(EncoderConfig{}.validate());
  CHECK(EncoderConfig::for_embedding_dim(19).d_model == 64);
  EncoderConfig c;
  c.n_layers = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = EncoderConfig::for_embedding_dim(16);  // 55 is not divisible by 4
  CHECK_THROWS_AS(c.validate(), Error);
  c = EncoderConfig{};
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = EncoderConfig{};
  c.attention_head = 4;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("prepare_sequence") {
  Rng rng(1);
  auto model = CausalityModel::init(Small());
  Eigen::MatrixXd x = RandomRows(rng, 4, 12);

  SUBCASE("eval mode with zero positions is the identity") {
    model.params.positions.setZero();
    CHECK(prepare_sequence(model, x, Mode::kEval, nullptr) == x);
  }
  SUBCASE("no dropout adds positions exactly") {
    model.config.dropout = 0.0;
    Eigen::MatrixXd expected = x + model.params.positions.topRows(4);
    CHECK(prepare_sequence(model, x, Mode::kTrain, &rng) == expected);
  }
  SUBCASE("inverted dropout is unbiased") {
    model.config.dropout = 0.5;
    model.params.positions.setZero();
    Eigen::MatrixXd small = x.topRows(2);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(2, 12);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      Eigen::MatrixXd y = prepare_sequence(model, small, Mode::kTrain, &rng);
      for (Eigen::Index k = 0; k < y.size(); ++k) {
        // Each entry is either dropped or scaled by 1/(1-p).
        CHECK((y.data()[k] == 0.0 || y.data()[k] == 2.0 * small.data()[k]));
      }
      sum += y;
    }
    for (Eigen::Index k = 0; k < small.size(); ++k) {
      double v = small.data()[k];
      double sigma = std::abs(v) / std::sqrt(double(draws));  // sd of one draw is |v| at p = 0.5
      CHECK(std::abs(sum.data()[k] / draws - v) <= 3 * sigma + 1e-12);
    }
  }
  SUBCASE("too long for the positional table") {
    CHECK_THROWS_AS(prepare_sequence(model, RandomRows(rng, 11, 12), Mode::kEval, nullptr),
                    ShapeError);
  }
  SUBCASE("wrong width") {
    CHECK_THROWS_AS(prepare_sequence(model, RandomRows(rng, 3, 11), Mode::kEval, nullptr),
                    ShapeError);
  }
}

TEST_CASE("causality matrices are row-stochastic") {
  Rng rng(2);
  for (int t = 0; t < 30; ++t) {
    EncoderConfig cfg = Small();
    cfg.seed = rng.next();
    cfg.attention_head = t % 3 == 0 ? 1 : -1;
    auto model = CausalityModel::init(cfg);
    auto U = static_cast<Eigen::Index>(1 + rng.below(10));
    auto cm = causality_matrix(model, RandomRows(rng, U, 12, 3.0));
    CHECK(cm.rows() == U);
    CHECK(cm.cols() == U);
    CheckRowStochastic(cm);
  }
}

TEST_CASE("single utterance attends to itself") {
  Rng rng(3);
  auto model = CausalityModel::init(Small());
  auto cm = causality_matrix(model, RandomRows(rng, 1, 12));
  REQUIRE(cm.size() == 1);
  CHECK(cm(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("permutation equivariance without positions") {
  Rng rng(4);
  auto model = CausalityModel::init(Small());
  model.params.positions.setZero();
  Eigen::MatrixXd x = RandomRows(rng, 4, 12);
  std::vector<Eigen::Index> perm = {2, 0, 3, 1};
  Eigen::MatrixXd px(4, 12);
  for (Eigen::Index i = 0; i < 4; ++i) px.row(i) = x.row(perm[std::size_t(i)]);
  auto cm = causality_matrix(model, x);
  auto pcm = causality_matrix(model, px);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(pcm(i, j) == doctest::Approx(cm(perm[std::size_t(i)], perm[std::size_t(j)])).epsilon(1e-12));
    }
  }
}

TEST_CASE("eval-mode forward is pure") {
  Rng rng(5);
  auto model = CausalityModel::init(EncoderConfig{});
  Eigen::MatrixXd x = RandomRows(rng, 6, 64);
  auto a = causality_matrix(model, x);
  auto b = causality_matrix(model, x);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * std::size_t(a.size())) == 0);
}

TEST_CASE("attention_mse") {
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(2, 2, 0.5);
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Identity(2, 2);
  CHECK(attention_mse(uniform, onehot) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(attention_mse(onehot, onehot) == 0.0);
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    CHECK(attention_mse(RandomRows(rng, 3, 3), RandomRows(rng, 3, 3)) >= 0.0);
  }
  CHECK_THROWS_AS(attention_mse(uniform, Eigen::MatrixXd::Zero(3, 3)), ShapeError);
}

TEST_CASE("analytic gradient matches finite differences") {
  auto r = gen::CheckEncoderGradient(Small(), 3, 20, 7);
  INFO("worst tensor: " << r.worst_tensor);
  CHECK(r.worst < 1e-4);
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  Rng rng(8);
  auto model = CausalityModel::init(Small());
  auto before = model.params;
  TrainOptions opt;
  opt.optimizer.lr = 0.0;
  opt.steps = 25;
  std::vector<Eigen::MatrixXd> xs = {RandomRows(rng, 3, 12), RandomRows(rng, 5, 12)};
  std::vector<Eigen::MatrixXd> ts = {Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(5, 5)};
  train_on(model, xs, ts, opt);
  auto a = before.tensors();
  auto b = std::as_const(model.params).tensors();
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(std::memcmp(a[k].tensor->data(), b[k].tensor->data(),
                      sizeof(double) * std::size_t(a[k].tensor->size())) == 0);
  }
}

TEST_CASE("overfitting a single conversation") {
  Corpus c;
  c.conversations.push_back(gen::OverfitConversation());
  const Conversation &conv = c.conversations[0];
  auto store = build_store(c, 19);
  auto head = EmotionHead::zeros(19);
  TrainOptions opt;
  opt.steps = 2000;

  auto a = train_encoder(c, store, head, EncoderConfig::for_embedding_dim(19), opt);
  REQUIRE(a.step_losses.size() == 2000);
  CHECK(*std::min_element(a.step_losses.begin(), a.step_losses.end()) < 1e-3);
  CHECK(a.step_losses.back() < 1e-3);

  auto cm = causality_matrix(a.model, assemble_sequence(conv, store, head));
  CheckRowStochastic(cm);
  std::vector<Emotion> gold;
  for (const auto &u : conv.utterances) gold.push_back(u.emotion);
  for (double tau : {0.45, 0.5}) {
    auto pairs = extract_pairs(cm, gold, tau);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].emotion_utt_id == 3);
    CHECK(pairs[0].cause_utt_id == 1);
    CHECK(pairs[0].emotion == Emotion::kJoy);
  }

  SUBCASE("same seed, same model") {
    auto b = train_encoder(c, store, head, EncoderConfig::for_embedding_dim(19), opt);
    CHECK(a.step_losses == b.step_losses);
    CHECK(serialize_model(a.model, opt, 2000) == serialize_model(b.model, opt, 2000));
  }
}

TEST_CASE("loss settles monotonically without dropout") {
  Corpus c;
  c.conversations.push_back(gen::OverfitConversation());
  auto store = build_store(c, 19);
  auto cfg = EncoderConfig::for_embedding_dim(19);
  cfg.dropout = 0.0;
  TrainOptions opt;
  opt.steps = 1000;
  auto r = train_encoder(c, store, EmotionHead::zeros(19), cfg, opt);
  std::vector<double> windows;
  for (std::size_t s = 100; s + 10 <= r.step_losses.size(); s += 10) {
    windows.push_back(std::accumulate(r.step_losses.begin() + long(s),
                                      r.step_losses.begin() + long(s + 10), 0.0) / 10.0);
  }
  for (std::size_t w = 1; w < windows.size(); ++w) CHECK(windows[w] <= windows[w - 1] + 1e-5);
}

TEST_CASE("train_encoder shape checks") {
  Rng rng(9);
  gen::ConversationOptions o;
  o.min_utts = 12;
  o.max_utts = 12;
  Corpus c = gen::RandomCorpus(rng, 1, o);
  auto store = build_store(c, 19);
  auto cfg = EncoderConfig::for_embedding_dim(19);
  cfg.max_len = 8;
  CHECK_THROWS_AS(train_encoder(c, store, EmotionHead::zeros(19), cfg, TrainOptions{}), ShapeError);
  CHECK_THROWS_AS(train_encoder(c, store, EmotionHead::zeros(19), Small(), TrainOptions{}), ShapeError);
}

TEST_CASE("model checkpoint round-trip") {
  Rng rng(10);
  auto model = CausalityModel::init(Small());
  TrainOptions opt;
  std::string text = serialize_model(model, opt, 17);
  auto back = parse_model(text);
  CHECK(back.config.d_model == 12);
  CHECK(back.config.n_heads == 2);
  CHECK(serialize_model(back, opt, 17) == text);

  Eigen::MatrixXd x = RandomRows(rng, 5, 12);
  auto delta = (causality_matrix(model, x) - causality_matrix(back, x)).cwiseAbs().maxCoeff();
  CHECK(delta < 1e-5);

  CHECK_THROWS_AS(parse_model("{}"), FormatError);
  auto j = nlohmann::json::parse(text);
  j["tensors"].erase("positions");
  CHECK_THROWS_AS(parse_model(j.dump()), FormatError);
  j = nlohmann::json::parse(text);
  j["format_version"] = 99;
  CHECK_THROWS_AS(parse_model(j.dump()), FormatError);
}
