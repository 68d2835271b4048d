#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blm/rng.hpp"

namespace blm {

// Latent layer layout: `continuous_dim` Gaussian units plus one relaxed
// one-hot block per entry of `categories`.
//
// String grammar (whitespace not allowed):
//   spec     := cont | disc "+" cont | disc
//   cont     := "c" INT            e.g. "c5"
//   disc     := "d" INT "x" INT    e.g. "d2x2" = two 2-class variables
// so "d1x2+c5" has total size 7 and "d2x2+c5" total size 9.
struct LatentSpec {
  std::size_t continuous_dim = 5;
  std::vector<std::size_t> categories;
  double tau = 0.5;

  static LatentSpec parse(std::string_view s, double tau = 0.5);
  std::string to_string() const;

  std::size_t discrete_dim() const;
  std::size_t total_dim() const { return continuous_dim + discrete_dim(); }
  // encoder head: mu and log_sigma per continuous unit, one logit per class
  std::size_t head_dim() const { return 2 * continuous_dim + discrete_dim(); }
  std::size_t block_offset(std::size_t j) const;  // offset of block j inside c
  bool is_joint() const { return continuous_dim > 0 && !categories.empty(); }

  bool operator==(const LatentSpec&) const = default;
};

inline constexpr std::string_view kLatentGrammar =
    "latent spec must look like \"c5\", \"d1x2\" or \"d1x2+c5\" (dN x K discrete blocks, cN continuous units)";

struct LatentCode {
  std::vector<double> z;  // continuous part
  std::vector<double> c;  // concatenated relaxed one-hot blocks
  double kl_continuous = 0.0;
  double kl_discrete = 0.0;

  // decoder input layout: [z; c]
  std::vector<double> flat() const;
};

// z = mu + exp(log_sigma) * noise
std::vector<double> gaussian_sample(std::span<const double> mu, std::span<const double> log_sigma,
                                    std::span<const double> noise);
// KL(N(mu, sigma^2) || N(0, 1)) summed over units.
double kl_gaussian(std::span<const double> mu, std::span<const double> log_sigma);

// softmax((g + log pi) / tau) with pi = softmax(logits).
std::vector<double> gumbel_softmax_sample(std::span<const double> logits, double tau,
                                          std::span<const double> gumbel_noise);
// KL(pi || uniform) = sum_i pi_i log(pi_i K), with 0 log 0 = 0.
double kl_categorical_uniform(std::span<const double> probs);
std::vector<double> softmax(std::span<const double> logits);

enum class SampleMode { stochastic, deterministic };

// encoder_output = [mu (k); log_sigma (k); logits per block].
// Deterministic mode uses z = mu and softmax(logits / tau) without noise.
LatentCode joint_sample(std::span<const double> encoder_output, const LatentSpec& spec, Rng& rng,
                        SampleMode mode = SampleMode::stochastic);

struct MaskTarget {
  enum class Kind { discrete_block, continuous_unit };
  Kind kind = Kind::continuous_unit;
  std::size_t index = 0;

  static MaskTarget discrete(std::size_t j) { return {Kind::discrete_block, j}; }
  static MaskTarget continuous(std::size_t k) { return {Kind::continuous_unit, k}; }
  std::string name() const;  // "mask_discrete_<j+1>" / "mask_continuous_<k+1>"
};

LatentCode mask_latent(const LatentCode& code, const LatentSpec& spec, MaskTarget target);
// 0/1 multiplier over the flat [z; c] layout.
std::vector<double> mask_vector(const LatentSpec& spec, MaskTarget target);

}  // namespace blm
