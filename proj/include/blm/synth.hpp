#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "blm/data.hpp"
#include "blm/embedding_store.hpp"

namespace blm {

// Embedding-level synthetic BLM data with a known factorization:
//   context i   = base + signature(i) + noise          (i = 1..7)
//   Correct     = base + signature(8) + noise
//   error label = base + signature(8) + scale * direction(label) + noise
// Signatures and label directions are random unit vectors drawn once from the
// seed. With a planted factor f in {-1, +1} per instance, f * factor_scale * u
// is added to every context sentence and to the answers; on every second
// instance the `factor_label` distractor is replaced by the Correct answer
// with the factor flipped, so only f separates it from the right answer.
struct SynthConfig {
  std::size_t count = 1000;
  std::size_t dim = 768;
  double noise = 0.01;
  Dataset dataset = Dataset::agreement_fr;
  TypeTier type_tier = TypeTier::I;
  double error_scale = 1.0;
  bool planted_factor = false;
  double factor_scale = 1.0;
  // flip the factor on every distractor of a dependent instance, not only on factor_label
  bool factor_all_errors = false;
  std::string id_prefix = "synth";

  void validate() const;
};

struct SynthTruth {
  std::vector<std::vector<float>> signatures;  // index 0..7 = positions 1..8
  std::map<AnswerLabel, std::vector<float>> directions;
  std::vector<float> factor_direction;
  AnswerLabel factor_label = AnswerLabel::Correct;
  std::vector<std::vector<float>> bases;  // per instance
  std::vector<int> factors;               // per instance, +1/-1 (0 without planted factor)
  std::vector<bool> factor_dependent;     // per instance
};

struct SynthData {
  std::vector<BLMInstance> instances;
  EmbeddingStore store;
  SynthTruth truth;
};

SynthData synth_generate(const SynthConfig& config, std::uint64_t seed);

}  // namespace blm
