#include "blm/model.hpp"

#include <cmath>

#include <json.hpp>

#include "blm/error.hpp"

namespace blm {

using nlohmann::json;

std::string_view to_string(ModelKind k) { return k == ModelKind::baseline ? "baseline" : "encdec"; }

ModelKind parse_model_kind(std::string_view s) {
  if (s == "baseline") return ModelKind::baseline;
  if (s == "encdec") return ModelKind::encdec;
  throw UsageError("unknown model kind '" + std::string(s) + "' (expected baseline|encdec)");
}

void ModelConfig::validate() const {
  if (shape.rows == 0 || shape.cols == 0) throw ConfigError("2D shape must be non-empty");
  if (seq_len == 0) throw ConfigError("sequence length must be >= 1");
  if (kind == ModelKind::encdec) {
    if (encoder_kernel[0] > seq_len || encoder_kernel[1] > shape.rows || encoder_kernel[2] > shape.cols)
      throw ShapeError("encoder kernel larger than the " + std::to_string(seq_len) + "x" + std::to_string(shape.rows) +
                       "x" + std::to_string(shape.cols) + " input");
    if (conv_channels == 0) throw ConfigError("conv channels must be >= 1");
    if (latent.total_dim() == 0) throw ConfigError("latent layer is empty");
    if (!(latent.tau > 0.0)) throw ConfigError("gumbel-softmax temperature must be > 0");
    if (!(beta >= 0.0)) throw ConfigError("KL weight beta must be >= 0");
  } else if (baseline_hidden.size() != 2) {
    throw ConfigError("baseline needs exactly two hidden sizes (three learnable layers)");
  }
}

std::string ModelConfig::to_json() const {
  json j = {
      {"kind", to_string(kind)},
      {"shape", {shape.rows, shape.cols}},
      {"seq_len", seq_len},
      {"conv_channels", conv_channels},
      {"encoder_kernel", encoder_kernel},
      {"decoder_kernel", decoder_kernel},
      {"decoder_pre_shape", {pre_rows(), pre_cols()}},
      {"latent", latent.to_string()},
      {"tau", latent.tau},
      {"beta", beta},
      {"sample_at_eval", sample_at_eval},
      {"baseline_hidden", baseline_hidden},
      {"activations", {{"encoder", "relu after conv3d"}, {"decoder", "relu after linear, none after conv2d"},
                       {"baseline", "relu between layers"}}},
      {"init", "kaiming-uniform weights, zero biases"},
      {"init_seed", init_seed},
  };
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  ModelConfig c;
  try {
    c.kind = parse_model_kind(j.at("kind").get<std::string>());
    c.shape = {j.at("shape").at(0).get<std::size_t>(), j.at("shape").at(1).get<std::size_t>()};
    c.seq_len = j.at("seq_len").get<std::size_t>();
    c.conv_channels = j.at("conv_channels").get<std::size_t>();
    c.encoder_kernel = j.at("encoder_kernel").get<std::array<std::size_t, 3>>();
    c.decoder_kernel = j.at("decoder_kernel").get<std::array<std::size_t, 2>>();
    c.latent = LatentSpec::parse(j.at("latent").get<std::string>(), j.at("tau").get<double>());
    c.beta = j.at("beta").get<double>();
    c.sample_at_eval = j.value("sample_at_eval", false);
    c.baseline_hidden = j.at("baseline_hidden").get<std::vector<std::size_t>>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

template <class A, class B>
double cosine(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) throw ShapeError("score: vectors differ in length");
  if (a.empty()) throw ShapeError("score: empty vectors");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    aa += static_cast<double>(a[k]) * static_cast<double>(a[k]);
    bb += static_cast<double>(b[k]) * static_cast<double>(b[k]);
  }
  if (!(aa > 0.0) || !(bb > 0.0)) throw NumericError("scoring error: zero-norm vector");
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace

double score(std::span<const double> a, std::span<const double> b) { return cosine(a, b); }
double score(std::span<const float> a, std::span<const float> b) { return cosine(a, b); }

double max_margin_loss(std::span<const double> pred, std::span<const double> correct,
                       const std::vector<std::vector<double>>& errors) {
  if (errors.empty()) throw ValidationError("max_margin_loss: empty set of erroneous answers");
  const double sc = score(correct, pred);
  double loss = 0.0;
  for (const auto& e : errors) loss += std::max(0.0, 1.0 - sc + score(std::span<const double>(e), pred));
  return loss;
}

int argmax_lowest(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("argmax over an empty score list");
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

Prediction choose_answer(std::span<const float> predicted, const InstanceTensors& x) {
  Prediction p;
  p.predicted_embedding.assign(predicted.begin(), predicted.end());
  for (const auto& a : x.answers) p.scores.push_back(score(std::span<const float>(a.embedding), predicted));
  p.chosen_index = argmax_lowest(p.scores);
  p.chosen_label = x.answers[static_cast<std::size_t>(p.chosen_index)].label;
  return p;
}

template <class T>
LatentNoise<T> LatentNoise<T>::draw(const LatentSpec& spec, std::span<Rng> rngs) {
  const std::size_t B = rngs.size();
  LatentNoise<T> n;
  n.gaussian = Tensor<T>({B, spec.continuous_dim});
  for (std::size_t K : spec.categories) n.gumbel.emplace_back(Shape{B, K});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < spec.continuous_dim; ++k)
      n.gaussian[b * spec.continuous_dim + k] = static_cast<T>(rngs[b].normal());
    for (std::size_t j = 0; j < spec.categories.size(); ++j) {
      const std::size_t K = spec.categories[j];
      for (std::size_t k = 0; k < K; ++k) n.gumbel[j][b * K + k] = static_cast<T>(rngs[b].gumbel());
    }
  }
  return n;
}

template <class T>
Model<T>::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  init_params();
}

template <class T>
Model<T>::Model(ModelConfig config, ParamSet<T> params) : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  check_params();
}

namespace {

std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& c) {
  std::vector<std::pair<std::string, Shape>> l;
  if (c.kind == ModelKind::encdec) {
    const auto& k = c.encoder_kernel;
    l.push_back({"enc.conv.w", {c.conv_channels, 1, k[0], k[1], k[2]}});
    l.push_back({"enc.conv.b", {c.conv_channels}});
    l.push_back({"enc.head.w", {c.conv_channels * c.conv_out_s() * c.conv_out_n() * c.conv_out_m(), c.latent.head_dim()}});
    l.push_back({"enc.head.b", {c.latent.head_dim()}});
    l.push_back({"dec.linear.w", {c.latent.total_dim(), c.pre_rows() * c.pre_cols()}});
    l.push_back({"dec.linear.b", {c.pre_rows() * c.pre_cols()}});
    l.push_back({"dec.conv.w", {1, 1, c.decoder_kernel[0], c.decoder_kernel[1]}});
    l.push_back({"dec.conv.b", {1}});
  } else {
    const std::size_t in = c.seq_len * c.embedding_dim();
    l.push_back({"ff1.w", {in, c.baseline_hidden[0]}});
    l.push_back({"ff1.b", {c.baseline_hidden[0]}});
    l.push_back({"ff2.w", {c.baseline_hidden[0], c.baseline_hidden[1]}});
    l.push_back({"ff2.b", {c.baseline_hidden[1]}});
    l.push_back({"ff3.w", {c.baseline_hidden[1], c.embedding_dim()}});
    l.push_back({"ff3.b", {c.embedding_dim()}});
  }
  return l;
}

}  // namespace

template <class T>
void Model<T>::init_params() {
  params_.clear();
  for (auto& [name, shape] : param_layout(config_)) params_.push_back({name, Tensor<T>(shape)});
  Rng rng(config_.init_seed);
  for (auto& p : params_) {
    const auto& s = p.value.shape();
    if (s.size() == 1) continue;  // bias: zero
    // fan-in: linear weights are I x O, conv kernels Cout x (Cin x k...)
    const std::size_t fan_in = s.size() == 2 ? s[0] : p.value.size() / s[0];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : p.value.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <class T>
void Model<T>::check_params() const {
  const auto want = param_layout(config_);
  if (want.size() != params_.size())
    throw ShapeError("model expects " + std::to_string(want.size()) + " parameters, got " +
                     std::to_string(params_.size()));
  for (std::size_t i = 0; i < want.size(); ++i)
    if (want[i].first != params_[i].name || want[i].second != params_[i].value.shape())
      throw ShapeError("parameter " + std::to_string(i) + " is '" + params_[i].name + "' " +
                       shape_string(params_[i].value.shape()) + ", expected '" + want[i].first + "' " +
                       shape_string(want[i].second));
}

template <class T>
std::size_t Model<T>::param_index(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw LookupError("no parameter named '" + name + "'");
}

template <class T>
std::vector<Var> Model<T>::bind(Graph<T>& g, bool require_grad) const {
  std::vector<Var> pv;
  pv.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i)
    pv.push_back(require_grad ? g.param(params_[i], i) : g.constant(params_[i].value));
  return pv;
}

template <class T>
Var Model<T>::encode_head(Graph<T>& g, const Tensor<T>& context, std::vector<Var>& pv) const {
  const auto& c = config_;
  const std::size_t B = context.dim(0);
  if (context.rank() != 4 || context.dim(1) != c.seq_len || context.dim(2) != c.shape.rows ||
      context.dim(3) != c.shape.cols)
    throw ShapeError("encoder input must be B x " + std::to_string(c.seq_len) + " x " + std::to_string(c.shape.rows) +
                     " x " + std::to_string(c.shape.cols) + ", got " + shape_string(context.shape()));
  Var x = g.constant(context.reshaped({B, 1, c.seq_len, c.shape.rows, c.shape.cols}));
  Var h = ops::relu(g, ops::conv3d(g, x, pv[0], pv[1]));
  const std::size_t feat = g.value(h).size() / B;
  h = ops::reshape(g, h, {B, feat});
  return ops::linear(g, h, pv[2], pv[3]);
}

template <class T>
ForwardResult<T> Model<T>::sample_latent(Graph<T>& g, Var head, const ForwardOptions<T>& opt) const {
  const auto& spec = config_.latent;
  const T tau = static_cast<T>(opt.tau.value_or(spec.tau));
  const std::size_t B = g.value(head).dim(0);
  const std::size_t k = spec.continuous_dim;
  ForwardResult<T> r;
  r.head = head;
  std::vector<Var> parts;
  if (k > 0) {
    r.mu = ops::slice_cols(g, head, 0, k);
    r.log_sigma = ops::slice_cols(g, head, k, 2 * k);
    if (opt.noise) {
      parts.push_back(ops::gaussian_sample(g, r.mu, r.log_sigma, opt.noise->gaussian));
    } else {
      parts.push_back(r.mu);
    }
    r.kl_continuous = ops::kl_gaussian(g, r.mu, r.log_sigma);
  } else {
    r.kl_continuous = g.constant(Tensor<T>({B}));
  }
  std::size_t off = 2 * k;
  Var kld;
  for (std::size_t j = 0; j < spec.categories.size(); ++j) {
    const std::size_t K = spec.categories[j];
    Var logits = ops::slice_cols(g, head, off, off + K);
    r.logits.push_back(logits);
    const Tensor<T> zero({B, K});
    parts.push_back(ops::gumbel_softmax(g, logits, opt.noise ? opt.noise->gumbel.at(j) : zero, tau));
    Var kl = ops::kl_categorical_uniform(g, logits);
    kld = kld.valid() ? ops::add(g, kld, kl) : kl;
    off += K;
  }
  r.kl_discrete = kld.valid() ? kld : g.constant(Tensor<T>({B}));
  r.code = parts.size() == 1 ? parts[0] : ops::concat_cols(g, parts);
  if (opt.code_mask) r.code = ops::mul_const(g, r.code, *opt.code_mask);
  return r;
}

template <class T>
Var Model<T>::decode(Graph<T>& g, Var code, std::vector<Var>& pv) const {
  const auto& c = config_;
  const std::size_t B = g.value(code).dim(0);
  if (g.value(code).dim(1) != c.latent.total_dim())
    throw ShapeError("latent code has " + std::to_string(g.value(code).dim(1)) + " entries, spec needs " +
                     std::to_string(c.latent.total_dim()));
  Var h = ops::relu(g, ops::linear(g, code, pv[4], pv[5]));
  h = ops::reshape(g, h, {B, 1, c.pre_rows(), c.pre_cols()});
  h = ops::conv2d(g, h, pv[6], pv[7]);
  return ops::reshape(g, h, {B, c.embedding_dim()});
}

template <class T>
ForwardResult<T> Model<T>::forward(Graph<T>& g, const Tensor<T>& context, const ForwardOptions<T>& opt) const {
  std::vector<Var> pv = bind(g, opt.params_require_grad);
  if (config_.kind == ModelKind::baseline) {
    const auto& c = config_;
    const std::size_t B = context.dim(0);
    if (context.size() != B * c.seq_len * c.embedding_dim())
      throw ShapeError("baseline input must be B x " + std::to_string(c.seq_len) + " x " +
                       std::to_string(c.embedding_dim()) + ", got " + shape_string(context.shape()));
    Var x = g.constant(context.reshaped({B, c.seq_len * c.embedding_dim()}));
    Var h = ops::relu(g, ops::linear(g, x, pv[0], pv[1]));
    h = ops::relu(g, ops::linear(g, h, pv[2], pv[3]));
    ForwardResult<T> r;
    r.pred = ops::linear(g, h, pv[4], pv[5]);
    return r;
  }
  Var head = encode_head(g, context, pv);
  ForwardResult<T> r = sample_latent(g, head, opt);
  r.pred = decode(g, r.code, pv);
  return r;
}

template <class T>
LossResult<T> Model<T>::total_loss(Graph<T>& g, const Tensor<T>& context, std::span<const ops::AnswerSet<T>> answers,
                                   const ForwardOptions<T>& opt) const {
  LossResult<T> l;
  l.forward = forward(g, context, opt);
  l.loss_a = ops::mean(g, ops::max_margin(g, l.forward.pred, answers));
  if (config_.kind == ModelKind::baseline) {
    l.kl_continuous = g.constant(Tensor<T>::scalar(T{0}));
    l.kl_discrete = g.constant(Tensor<T>::scalar(T{0}));
    l.total = l.loss_a;
  } else {
    l.kl_continuous = ops::mean(g, l.forward.kl_continuous);
    l.kl_discrete = ops::mean(g, l.forward.kl_discrete);
    Var kl = ops::add(g, l.kl_continuous, l.kl_discrete);
    l.total = ops::add(g, l.loss_a, ops::scale(g, kl, static_cast<T>(opt.beta.value_or(config_.beta))));
  }
  if (!std::isfinite(static_cast<double>(g.value(l.total)[0])))
    throw NumericError("non-finite loss: loss_a=" + std::to_string(g.value(l.loss_a)[0]) +
                       " kl_continuous=" + std::to_string(g.value(l.kl_continuous)[0]) +
                       " kl_discrete=" + std::to_string(g.value(l.kl_discrete)[0]));
  return l;
}

template <class T>
LatentCode Model<T>::encode(const InstanceTensors& x, Rng* rng) const {
  if (config_.kind != ModelKind::encdec) throw ConfigError("encode requires an encoder-decoder model");
  Graph<T> g;
  std::vector<Var> pv = bind(g, false);
  const InstanceTensors* one = &x;
  Var head = encode_head(g, context_batch<T>(std::span(one, 1)), pv);
  const auto& h = g.value(head);
  std::vector<double> out(h.vec().begin(), h.vec().end());
  Rng dummy(0);
  return joint_sample(out, config_.latent, rng ? *rng : dummy,
                      rng ? SampleMode::stochastic : SampleMode::deterministic);
}

template <class T>
std::vector<double> Model<T>::decode(const LatentCode& code) const {
  if (config_.kind != ModelKind::encdec) throw ConfigError("decode requires an encoder-decoder model");
  const auto flat = code.flat();
  if (flat.size() != config_.latent.total_dim())
    throw ShapeError("latent code has " + std::to_string(flat.size()) + " entries, spec needs " +
                     std::to_string(config_.latent.total_dim()));
  Graph<T> g;
  std::vector<Var> pv = bind(g, false);
  Var c = g.constant(Tensor<T>({1, flat.size()}, std::vector<T>(flat.begin(), flat.end())));
  const auto& y = g.value(decode(g, c, pv));
  return {y.vec().begin(), y.vec().end()};
}

template <class T>
Prediction Model<T>::predict(const InstanceTensors& x) const {
  return predict_batch(std::span(&x, 1)).front();
}

template <class T>
std::vector<Prediction> Model<T>::predict_batch(std::span<const InstanceTensors> xs,
                                                const std::optional<MaskTarget>& mask) const {
  constexpr std::size_t kChunk = 100;
  std::vector<Prediction> out;
  out.reserve(xs.size());
  std::vector<double> mvec;
  if (mask) {
    if (config_.kind != ModelKind::encdec) throw ConfigError("latent masking requires an encoder-decoder model");
    mvec = mask_vector(config_.latent, *mask);
  }
  for (std::size_t start = 0; start < xs.size(); start += kChunk) {
    auto chunk = xs.subspan(start, std::min(kChunk, xs.size() - start));
    Graph<T> g;
    ForwardOptions<T> opt;
    opt.params_require_grad = false;
    Tensor<T> m;
    if (mask) {
      m = Tensor<T>({chunk.size(), mvec.size()});
      for (std::size_t b = 0; b < chunk.size(); ++b)
        for (std::size_t k = 0; k < mvec.size(); ++k) m[b * mvec.size() + k] = static_cast<T>(mvec[k]);
      opt.code_mask = &m;
    }
    const auto fr = forward(g, context_batch<T>(chunk), opt);
    const auto& pred = g.value(fr.pred);
    const std::size_t D = config_.embedding_dim();
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      std::vector<float> p(D);
      for (std::size_t k = 0; k < D; ++k) p[k] = static_cast<float>(pred[b * D + k]);
      out.push_back(choose_answer(p, chunk[b]));
    }
  }
  return out;
}

template <class T>
Tensor<T> context_batch(std::span<const InstanceTensors> xs) {
  if (xs.empty()) throw ShapeError("empty batch");
  const Shape2D shape = xs[0].shape;
  const std::size_t S = xs[0].context_stack.size() / shape.size();
  Tensor<T> t({xs.size(), S, shape.rows, shape.cols});
  const std::size_t item = S * shape.size();
  for (std::size_t b = 0; b < xs.size(); ++b) {
    if (xs[b].context_stack.size() != item || xs[b].shape != shape) throw ShapeError("ragged batch");
    for (std::size_t k = 0; k < item; ++k) t[b * item + k] = static_cast<T>(xs[b].context_stack[k]);
  }
  return t;
}

template <class T>
std::vector<ops::AnswerSet<T>> answer_sets(std::span<const InstanceTensors> xs) {
  std::vector<ops::AnswerSet<T>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) {
    const std::size_t D = x.shape.size();
    ops::AnswerSet<T> a;
    a.embeddings = Tensor<T>({x.answers.size(), D});
    for (std::size_t j = 0; j < x.answers.size(); ++j)
      for (std::size_t k = 0; k < D; ++k) a.embeddings[j * D + k] = static_cast<T>(x.answers[j].embedding[k]);
    a.correct = static_cast<std::size_t>(x.correct_index);
    out.push_back(std::move(a));
  }
  return out;
}

template struct LatentNoise<float>;
template struct LatentNoise<double>;
template class Model<float>;
template class Model<double>;
template Tensor<float> context_batch<float>(std::span<const InstanceTensors>);
template Tensor<double> context_batch<double>(std::span<const InstanceTensors>);
template std::vector<ops::AnswerSet<float>> answer_sets<float>(std::span<const InstanceTensors>);
template std::vector<ops::AnswerSet<double>> answer_sets<double>(std::span<const InstanceTensors>);

}  // namespace blm
