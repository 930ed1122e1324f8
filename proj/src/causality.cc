#include "causeweave/causality.h"

#include <cmath>
#include <numeric>

#include "causeweave/errors.h"
#include "causeweave/pairing.h"
#include "causeweave/tensor_io.h"

namespace causeweave {

using nlohmann::json;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

// Applies fn(name, tensor) to every tensor of a layer, in a fixed order.
template <typename Layer, typename F>
void ForEachLayerTensor(Layer &l, const std::string &prefix, F &&fn) {
  fn(prefix + "ln1_gain", l.ln1_gain);
  fn(prefix + "ln1_bias", l.ln1_bias);
  fn(prefix + "wq", l.wq);
  fn(prefix + "bq", l.bq);
  fn(prefix + "wk", l.wk);
  fn(prefix + "bk", l.bk);
  fn(prefix + "wv", l.wv);
  fn(prefix + "bv", l.bv);
  fn(prefix + "wo", l.wo);
  fn(prefix + "bo", l.bo);
  fn(prefix + "ln2_gain", l.ln2_gain);
  fn(prefix + "ln2_bias", l.ln2_bias);
  fn(prefix + "w1", l.w1);
  fn(prefix + "b1", l.b1);
  fn(prefix + "w2", l.w2);
  fn(prefix + "b2", l.b2);
}

template <typename Params, typename F>
void ForEachTensor(Params &p, F &&fn) {
  fn(std::string("positions"), p.positions);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    ForEachLayerTensor(p.layers[i], "layers." + std::to_string(i) + ".", fn);
  }
}

MatrixXd AddRow(const MatrixXd &x, const MatrixXd &row) { return x.rowwise() + row.row(0); }

struct LayerNormCache {
  MatrixXd xhat;
  VectorXd inv_std;
};

MatrixXd LayerNormForward(const MatrixXd &x, const MatrixXd &gain, const MatrixXd &bias,
                          LayerNormCache &cache) {
  const Index d = x.cols();
  VectorXd mean = x.rowwise().mean();
  MatrixXd centered = x.colwise() - mean;
  VectorXd var = centered.array().square().rowwise().sum() / static_cast<double>(d);
  cache.inv_std = (var.array() + kLayerNormEps).rsqrt();
  cache.xhat = cache.inv_std.asDiagonal() * centered;
  MatrixXd y = cache.xhat * gain.row(0).asDiagonal();
  return AddRow(y, bias);
}

// Returns dx and accumulates gain/bias gradients.
MatrixXd LayerNormBackward(const MatrixXd &dy, const MatrixXd &gain, const LayerNormCache &cache,
                           MatrixXd &dgain, MatrixXd &dbias) {
  const auto d = static_cast<double>(dy.cols());
  dgain += (dy.cwiseProduct(cache.xhat)).colwise().sum();
  dbias += dy.colwise().sum();
  MatrixXd dxhat = dy * gain.row(0).asDiagonal();
  VectorXd sum_dxhat = dxhat.rowwise().sum();
  VectorXd sum_dxhat_xhat = dxhat.cwiseProduct(cache.xhat).rowwise().sum();
  MatrixXd dx = (d * dxhat).colwise() - sum_dxhat;
  dx -= sum_dxhat_xhat.asDiagonal() * cache.xhat;
  return (cache.inv_std / d).asDiagonal() * dx;
}

double Gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
}

double GeluGrad(double x) {
  double u = kGeluC * (x + 0.044715 * x * x * x);
  double t = std::tanh(u);
  double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

void SoftmaxRowsInPlace(MatrixXd &s) {
  for (Index r = 0; r < s.rows(); ++r) {
    double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

struct LayerCache {
  MatrixXd x;  // layer input
  LayerNormCache ln1;
  MatrixXd y;  // ln1 output
  MatrixXd q, k, v;
  std::vector<MatrixXd> probs;  // per head, U x U
  MatrixXd attended;            // concatenated head outputs, U x D
  MatrixXd x1;                  // after attention residual
  LayerNormCache ln2;
  MatrixXd z;  // ln2 output
  MatrixXd pre_act, act;
  MatrixXd out;
};

void LayerForward(const EncoderLayer &l, const EncoderConfig &cfg, const MatrixXd &x,
                  LayerCache &c) {
  const auto heads = static_cast<Index>(cfg.n_heads);
  const auto dh = static_cast<Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Index u = x.rows();

  c.x = x;
  c.y = LayerNormForward(x, l.ln1_gain, l.ln1_bias, c.ln1);
  c.q = AddRow(c.y * l.wq, l.bq);
  c.k = AddRow(c.y * l.wk, l.bk);
  c.v = AddRow(c.y * l.wv, l.bv);
  c.probs.assign(static_cast<std::size_t>(heads), MatrixXd());
  c.attended.resize(u, x.cols());
  for (Index h = 0; h < heads; ++h) {
    MatrixXd s = scale * c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose();
    SoftmaxRowsInPlace(s);
    c.attended.middleCols(h * dh, dh) = s * c.v.middleCols(h * dh, dh);
    c.probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  c.x1 = x + AddRow(c.attended * l.wo, l.bo);
  c.z = LayerNormForward(c.x1, l.ln2_gain, l.ln2_bias, c.ln2);
  c.pre_act = AddRow(c.z * l.w1, l.b1);
  c.act = c.pre_act.unaryExpr(&Gelu);
  c.out = c.x1 + AddRow(c.act * l.w2, l.b2);
}

// Backpropagates dout (gradient wrt the layer output) plus dprobs_extra
// (gradient wrt each head's attention probabilities, may be empty).
MatrixXd LayerBackward(const EncoderLayer &l, const EncoderConfig &cfg, const LayerCache &c,
                       const MatrixXd &dout, const std::vector<MatrixXd> &dprobs_extra,
                       EncoderLayer &g) {
  const auto heads = static_cast<Index>(cfg.n_heads);
  const auto dh = static_cast<Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // Feed-forward sublayer.
  MatrixXd dx1 = dout;
  g.w2 += c.act.transpose() * dout;
  g.b2 += dout.colwise().sum();
  MatrixXd dpre = (dout * l.w2.transpose()).cwiseProduct(c.pre_act.unaryExpr(&GeluGrad));
  g.w1 += c.z.transpose() * dpre;
  g.b1 += dpre.colwise().sum();
  MatrixXd dz = dpre * l.w1.transpose();
  dx1 += LayerNormBackward(dz, l.ln2_gain, c.ln2, g.ln2_gain, g.ln2_bias);

  // Attention sublayer.
  MatrixXd dx = dx1;
  g.wo += c.attended.transpose() * dx1;
  g.bo += dx1.colwise().sum();
  MatrixXd dattended = dx1 * l.wo.transpose();
  MatrixXd dq(c.q.rows(), c.q.cols()), dk(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (Index h = 0; h < heads; ++h) {
    const MatrixXd &p = c.probs[static_cast<std::size_t>(h)];
    auto dout_h = dattended.middleCols(h * dh, dh);
    MatrixXd dp = dout_h * c.v.middleCols(h * dh, dh).transpose();
    if (!dprobs_extra.empty()) dp += dprobs_extra[static_cast<std::size_t>(h)];
    dv.middleCols(h * dh, dh) = p.transpose() * dout_h;
    VectorXd row_dot = dp.cwiseProduct(p).rowwise().sum();
    MatrixXd ds = scale * p.cwiseProduct(dp.colwise() - row_dot);
    dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  g.wq += c.y.transpose() * dq;
  g.bq += dq.colwise().sum();
  g.wk += c.y.transpose() * dk;
  g.bk += dk.colwise().sum();
  g.wv += c.y.transpose() * dv;
  g.bv += dv.colwise().sum();
  MatrixXd dy = dq * l.wq.transpose() + dk * l.wk.transpose() + dv * l.wv.transpose();
  dx += LayerNormBackward(dy, l.ln1_gain, c.ln1, g.ln1_gain, g.ln1_bias);
  return dx;
}

CausalityMatrix AggregateHeads(const EncoderConfig &cfg, const std::vector<MatrixXd> &probs) {
  if (cfg.attention_head >= 0) return probs[static_cast<std::size_t>(cfg.attention_head)];
  MatrixXd sum = probs.front();
  for (std::size_t h = 1; h < probs.size(); ++h) sum += probs[h];
  return sum / static_cast<double>(probs.size());
}

void CheckSequence(const CausalityModel &model, const MatrixXd &rows, const char *what) {
  if (rows.cols() != static_cast<Index>(model.config.d_model)) {
    throw ShapeError(std::string(what) + ": width " + std::to_string(rows.cols()) +
                     " differs from d_model " + std::to_string(model.config.d_model));
  }
  if (rows.rows() > static_cast<Index>(model.config.max_len)) {
    throw ShapeError(std::string(what) + ": " + std::to_string(rows.rows()) +
                     " utterances exceed max_len " + std::to_string(model.config.max_len));
  }
  if (rows.rows() == 0) throw ShapeError(std::string(what) + ": empty sequence");
}

}  // namespace

void EncoderConfig::validate() const {
  if (n_layers < 2) throw Error("encoder needs at least 2 layers");
  if (n_heads < 1 || d_model % n_heads != 0) {
    throw Error("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                std::to_string(n_heads));
  }
  if (d_ff < 1 || max_len < 1) throw Error("d_ff and max_len must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must lie in [0, 1)");
  if (attention_head >= static_cast<int>(n_heads) || attention_head < -1) {
    throw Error("attention_head out of range");
  }
}

EncoderConfig EncoderConfig::for_embedding_dim(std::size_t embedding_dim) {
  EncoderConfig cfg;
  cfg.d_model = 3 * embedding_dim + kNumEmotions;
  return cfg;
}

std::vector<EncoderParams::Named> EncoderParams::tensors() {
  std::vector<Named> out;
  ForEachTensor(*this, [&](const std::string &name, MatrixXd &t) { out.push_back({name, &t}); });
  return out;
}

std::vector<EncoderParams::ConstNamed> EncoderParams::tensors() const {
  std::vector<ConstNamed> out;
  ForEachTensor(*this,
                [&](const std::string &name, const MatrixXd &t) { out.push_back({name, &t}); });
  return out;
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z = *this;
  ForEachTensor(z, [](const std::string &, MatrixXd &t) { t.setZero(); });
  return z;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto &t : tensors()) n += static_cast<std::size_t>(t.tensor->size());
  return n;
}

CausalityModel CausalityModel::init(const EncoderConfig &config) {
  config.validate();
  const auto d = static_cast<Index>(config.d_model);
  const auto f = static_cast<Index>(config.d_ff);
  Rng rng(config.seed);
  auto xavier = [&](Index rows, Index cols) {
    double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    return m;
  };

  CausalityModel model;
  model.config = config;
  model.params.positions.resize(static_cast<Index>(config.max_len), d);
  for (Index r = 0; r < model.params.positions.rows(); ++r)
    for (Index c = 0; c < d; ++c) model.params.positions(r, c) = 0.02 * rng.normal();

  for (std::size_t i = 0; i < config.n_layers; ++i) {
    EncoderLayer l;
    l.ln1_gain = MatrixXd::Ones(1, d);
    l.ln1_bias = MatrixXd::Zero(1, d);
    l.wq = xavier(d, d);
    l.bq = MatrixXd::Zero(1, d);
    l.wk = xavier(d, d);
    l.bk = MatrixXd::Zero(1, d);
    l.wv = xavier(d, d);
    l.bv = MatrixXd::Zero(1, d);
    l.wo = xavier(d, d);
    l.bo = MatrixXd::Zero(1, d);
    l.ln2_gain = MatrixXd::Ones(1, d);
    l.ln2_bias = MatrixXd::Zero(1, d);
    l.w1 = xavier(d, f);
    l.b1 = MatrixXd::Zero(1, f);
    l.w2 = xavier(f, d);
    l.b2 = MatrixXd::Zero(1, d);
    model.params.layers.push_back(std::move(l));
  }
  return model;
}

VectorXd assemble_input(const EmbeddingSlots &slots, const EmotionLogits &logits) {
  const auto d = static_cast<Index>(slots.dim());
  VectorXd out(3 * d + static_cast<Index>(kNumEmotions));
  out.head(3 * d) = concat_slots(slots);
  for (std::size_t k = 0; k < kNumEmotions; ++k) out(3 * d + static_cast<Index>(k)) = logits[k];
  return out;
}

MatrixXd assemble_sequence(const Conversation &conversation, const EmbeddingStore &store,
                           const EmotionHead &head) {
  const auto width = static_cast<Index>(3 * store.dim() + kNumEmotions);
  MatrixXd rows(static_cast<Index>(conversation.size()), width);
  for (std::size_t i = 0; i < conversation.size(); ++i) {
    const EmbeddingSlots &slots = store.at(conversation.id, conversation.utterances[i].id);
    rows.row(static_cast<Index>(i)) = assemble_input(slots, head_forward(slots, head)).transpose();
  }
  return rows;
}

MatrixXd prepare_sequence(const CausalityModel &model, const MatrixXd &combined, Mode mode,
                          Rng *rng) {
  CheckSequence(model, combined, "prepare_sequence");
  MatrixXd out = combined;
  const double p = model.config.dropout;
  if (mode == Mode::kTrain && p > 0.0) {
    if (rng == nullptr) throw Error("prepare_sequence: training mode needs an rng");
    const double keep_scale = 1.0 / (1.0 - p);
    for (Index r = 0; r < out.rows(); ++r)
      for (Index c = 0; c < out.cols(); ++c)
        out(r, c) = rng->bernoulli(p) ? 0.0 : out(r, c) * keep_scale;
  }
  out += model.params.positions.topRows(out.rows());
  return out;
}

EncodeResult encode(const CausalityModel &model, const MatrixXd &sequence) {
  CheckSequence(model, sequence, "encode");
  LayerCache cache;
  MatrixXd x = sequence;
  for (const auto &layer : model.params.layers) {
    LayerForward(layer, model.config, x, cache);
    x = cache.out;
  }
  return {std::move(x), AggregateHeads(model.config, cache.probs)};
}

CausalityMatrix causality_matrix(const CausalityModel &model, const MatrixXd &combined) {
  return encode(model, prepare_sequence(model, combined, Mode::kEval, nullptr)).causality;
}

double attention_mse(const CausalityMatrix &cm, const MatrixXd &target) {
  if (cm.rows() != target.rows() || cm.cols() != target.cols()) {
    throw ShapeError("attention_mse: shape mismatch");
  }
  if (cm.size() == 0) return 0.0;
  return (cm - target).array().square().mean();
}

double attention_loss(const CausalityModel &model, const MatrixXd &combined,
                      const MatrixXd &target, EncoderParams *grad, Mode mode, Rng *rng) {
  MatrixXd sequence = prepare_sequence(model, combined, mode, rng);
  if (target.rows() != sequence.rows() || target.cols() != sequence.rows()) {
    throw ShapeError("attention_loss: target must be U x U");
  }
  const EncoderConfig &cfg = model.config;
  std::vector<LayerCache> caches(model.params.layers.size());
  MatrixXd x = sequence;
  for (std::size_t i = 0; i < caches.size(); ++i) {
    LayerForward(model.params.layers[i], cfg, x, caches[i]);
    x = caches[i].out;
  }
  const auto &last_probs = caches.back().probs;
  CausalityMatrix cm = AggregateHeads(cfg, last_probs);
  double loss = attention_mse(cm, target);
  if (grad == nullptr) return loss;

  *grad = model.params.zeros_like();
  const double n = static_cast<double>(cm.size());
  MatrixXd dcm = (2.0 / n) * (cm - target);
  std::vector<MatrixXd> dprobs(cfg.n_heads, MatrixXd::Zero(cm.rows(), cm.cols()));
  if (cfg.attention_head >= 0) {
    dprobs[static_cast<std::size_t>(cfg.attention_head)] = dcm;
  } else {
    for (auto &dp : dprobs) dp = dcm / static_cast<double>(cfg.n_heads);
  }

  // Only the attention probabilities of the last layer reach the loss; its
  // output gradient is zero.
  MatrixXd dx = MatrixXd::Zero(x.rows(), x.cols());
  for (std::size_t i = caches.size(); i-- > 0;) {
    const bool last = i + 1 == caches.size();
    dx = LayerBackward(model.params.layers[i], cfg, caches[i], dx,
                       last ? dprobs : std::vector<MatrixXd>{}, grad->layers[i]);
  }
  grad->positions.topRows(dx.rows()) += dx;
  return loss;
}

std::vector<double> train_on(CausalityModel &model, const std::vector<MatrixXd> &inputs,
                             const std::vector<MatrixXd> &targets, const TrainOptions &options) {
  if (inputs.size() != targets.size()) throw ShapeError("train_on: inputs/targets mismatch");
  if (inputs.empty()) throw Error("train_on: nothing to train on");
  for (const auto &in : inputs) CheckSequence(model, in, "train_encoder");

  Rng rng(options.seed);
  AdamW opt(options.optimizer);
  auto named = model.params.tensors();
  std::vector<MatrixXd *> params;
  for (auto &t : named) params.push_back(t.tensor);

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  std::vector<double> losses;
  losses.reserve(options.steps);
  EncoderParams grad;
  for (std::size_t step = 0; step < options.steps; ++step) {
    if (cursor == order.size()) {
      rng.shuffle(order);
      cursor = 0;
    }
    std::size_t idx = order[cursor++];
    losses.push_back(attention_loss(model, inputs[idx], targets[idx], &grad, Mode::kTrain, &rng));
    std::vector<const MatrixXd *> grads;
    for (auto &t : grad.tensors()) grads.push_back(t.tensor);
    opt.step(params, grads);
  }
  return losses;
}

EncoderTrainingResult train_encoder(const Corpus &corpus, const EmbeddingStore &store,
                                    const EmotionHead &head, const EncoderConfig &config,
                                    const TrainOptions &options) {
  config.validate();
  if (config.d_model != 3 * store.dim() + kNumEmotions) {
    throw ShapeError("d_model " + std::to_string(config.d_model) + " != 3 * " +
                     std::to_string(store.dim()) + " + 7");
  }
  std::vector<MatrixXd> inputs, targets;
  for (const auto &conv : corpus.conversations) {
    if (conv.size() == 0) continue;
    if (conv.size() > config.max_len) {
      throw ShapeError("conversation '" + conv.id + "' has " + std::to_string(conv.size()) +
                       " utterances, max_len is " + std::to_string(config.max_len));
    }
    inputs.push_back(assemble_sequence(conv, store, head));
    targets.push_back(build_target(conv));
  }
  EncoderTrainingResult result{CausalityModel::init(config), {}};
  result.step_losses = train_on(result.model, inputs, targets, options);
  return result;
}

std::string serialize_model(const CausalityModel &model, const TrainOptions &options,
                            std::size_t steps_taken) {
  const EncoderConfig &c = model.config;
  json tensors = json::object();
  for (const auto &t : model.params.tensors()) tensors[t.name] = tensor_to_json(*t.tensor);
  json manifest = {{"format_version", kCheckpointFormatVersion},
                   {"kind", "causality_model"},
                   {"config",
                    {{"d_model", c.d_model},
                     {"n_layers", c.n_layers},
                     {"n_heads", c.n_heads},
                     {"d_ff", c.d_ff},
                     {"dropout", c.dropout},
                     {"max_len", c.max_len},
                     {"seed", c.seed},
                     {"attention_head", c.attention_head}}},
                   {"optimizer",
                    {{"lr", options.optimizer.lr},
                     {"beta1", options.optimizer.beta1},
                     {"beta2", options.optimizer.beta2},
                     {"eps", options.optimizer.eps},
                     {"weight_decay", options.optimizer.weight_decay}}},
                   {"seed", options.seed},
                   {"steps", steps_taken},
                   {"tensors", std::move(tensors)}};
  return manifest.dump();
}

CausalityModel parse_model(std::string_view text) {
  json manifest;
  try {
    manifest = json::parse(text.begin(), text.end());
  } catch (const json::parse_error &e) {
    throw FormatError(std::string("model checkpoint: ") + e.what());
  }
  check_manifest(manifest, "causality_model");
  EncoderConfig cfg;
  try {
    const json &c = manifest.at("config");
    cfg.d_model = c.at("d_model").get<std::size_t>();
    cfg.n_layers = c.at("n_layers").get<std::size_t>();
    cfg.n_heads = c.at("n_heads").get<std::size_t>();
    cfg.d_ff = c.at("d_ff").get<std::size_t>();
    cfg.dropout = c.at("dropout").get<double>();
    cfg.max_len = c.at("max_len").get<std::size_t>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.attention_head = c.at("attention_head").get<int>();
  } catch (const json::exception &e) {
    throw FormatError(std::string("model checkpoint config: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error &e) {
    throw FormatError(std::string("model checkpoint config: ") + e.what());
  }
  CausalityModel model = CausalityModel::init(cfg);
  const json &tensors = manifest["tensors"];
  for (auto &t : model.params.tensors()) {
    auto it = tensors.find(t.name);
    if (it == tensors.end()) throw FormatError("model checkpoint: missing tensor '" + t.name + "'");
    *t.tensor = tensor_from_json(*it, t.name, t.tensor->rows(), t.tensor->cols());
  }
  if (tensors.size() != model.params.tensors().size()) {
    throw FormatError("model checkpoint: unexpected extra tensors");
  }
  return model;
}

}  // namespace causeweave
