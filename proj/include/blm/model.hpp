#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blm/data.hpp"
#include "blm/embedding_store.hpp"
#include "blm/graph.hpp"
#include "blm/latent.hpp"
#include "blm/ops.hpp"
#include "blm/rng.hpp"

namespace blm {

enum class ModelKind { baseline, encdec };

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

struct ModelConfig {
  ModelKind kind = ModelKind::encdec;
  Shape2D shape{32, 24};
  std::size_t seq_len = kContextLength;

  // encoder-decoder
  std::size_t conv_channels = 16;
  std::array<std::size_t, 3> encoder_kernel{3, 15, 15};
  std::array<std::size_t, 2> decoder_kernel{15, 15};
  LatentSpec latent = LatentSpec::parse("d1x2+c5");
  double beta = 1.0;
  bool sample_at_eval = false;

  // feed-forward baseline: three linear layers, input -> h1 -> h2 -> dim
  std::vector<std::size_t> baseline_hidden{1024, 768};

  std::uint64_t init_seed = 0;

  std::size_t embedding_dim() const { return shape.size(); }
  // decoder linear output, chosen so the valid conv lands exactly on `shape`
  std::size_t pre_rows() const { return shape.rows + decoder_kernel[0] - 1; }
  std::size_t pre_cols() const { return shape.cols + decoder_kernel[1] - 1; }
  std::size_t conv_out_s() const { return seq_len - encoder_kernel[0] + 1; }
  std::size_t conv_out_n() const { return shape.rows - encoder_kernel[1] + 1; }
  std::size_t conv_out_m() const { return shape.cols - encoder_kernel[2] + 1; }

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// Cosine of the angle between a and b; NumericError on a zero-norm vector.
double score(std::span<const double> a, std::span<const double> b);
double score(std::span<const float> a, std::span<const float> b);

// sum_i [1 - score(correct, pred) + score(error_i, pred)]^+
double max_margin_loss(std::span<const double> pred, std::span<const double> correct,
                       const std::vector<std::vector<double>>& errors);

struct Prediction {
  std::vector<float> predicted_embedding;
  std::vector<double> scores;
  int chosen_index = -1;
  AnswerLabel chosen_label = AnswerLabel::Correct;
};

// argmax with ties resolved to the lowest index.
int argmax_lowest(std::span<const double> scores);
Prediction choose_answer(std::span<const float> predicted, const InstanceTensors& x);

// Per-instance noise for one stochastic forward pass.
template <class T>
struct LatentNoise {
  Tensor<T> gaussian;            // B x continuous_dim
  std::vector<Tensor<T>> gumbel;  // per block: B x K

  static LatentNoise draw(const LatentSpec& spec, std::span<Rng> rngs);
};

template <class T>
struct ForwardOptions {
  const LatentNoise<T>* noise = nullptr;  // null: deterministic latent (z = mu, softmax at tau)
  const Tensor<T>* code_mask = nullptr;   // B x total_dim multiplier applied before decoding
  std::optional<double> tau;              // overrides the spec temperature (annealing)
  std::optional<double> beta;             // overrides the config KL weight (warm-up)
  bool params_require_grad = true;
};

template <class T>
struct ForwardResult {
  Var pred;  // B x dim
  // encoder-decoder only
  Var head, mu, log_sigma, code;
  std::vector<Var> logits;
  Var kl_continuous, kl_discrete;  // B each
};

template <class T>
struct LossResult {
  ForwardResult<T> forward;
  Var loss_a, kl_continuous, kl_discrete, total;  // batch means
};

template <class T>
class Model {
 public:
  // Kaiming-uniform weights from config.init_seed, zero biases.
  explicit Model(ModelConfig config);
  Model(ModelConfig config, ParamSet<T> params);

  const ModelConfig& config() const { return config_; }
  const ParamSet<T>& params() const { return params_; }
  ParamSet<T>& params() { return params_; }

  // context: B x S x rows x cols
  ForwardResult<T> forward(Graph<T>& g, const Tensor<T>& context, const ForwardOptions<T>& opt = {}) const;

  // Pieces of the encoder-decoder forward pass.
  Var encode_head(Graph<T>& g, const Tensor<T>& context, std::vector<Var>& pv) const;
  ForwardResult<T> sample_latent(Graph<T>& g, Var head, const ForwardOptions<T>& opt) const;
  Var decode(Graph<T>& g, Var code, std::vector<Var>& pv) const;

  LossResult<T> total_loss(Graph<T>& g, const Tensor<T>& context, std::span<const ops::AnswerSet<T>> answers,
                           const ForwardOptions<T>& opt = {}) const;

  // Value-level conveniences on a single instance.
  LatentCode encode(const InstanceTensors& x, Rng* rng) const;  // rng null: deterministic
  std::vector<double> decode(const LatentCode& code) const;
  Prediction predict(const InstanceTensors& x) const;
  std::vector<Prediction> predict_batch(std::span<const InstanceTensors> xs,
                                        const std::optional<MaskTarget>& mask = std::nullopt) const;

  std::size_t param_index(const std::string& name) const;

 private:
  void init_params();
  void check_params() const;
  std::vector<Var> bind(Graph<T>& g, bool require_grad) const;

  ModelConfig config_;
  ParamSet<T> params_;
};

template <class T>
Tensor<T> context_batch(std::span<const InstanceTensors> xs);
template <class T>
std::vector<ops::AnswerSet<T>> answer_sets(std::span<const InstanceTensors> xs);

}  // namespace blm
