#include "blm/synth.hpp"

#include <cmath>

#include "blm/error.hpp"
#include "blm/rng.hpp"

namespace blm {

namespace {

std::vector<float> unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n2 = 0.0;
  for (double& x : v) {
    x = rng.normal();
    n2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(n2);
  std::vector<float> out(dim);
  for (std::size_t k = 0; k < dim; ++k) out[k] = static_cast<float>(v[k] * inv);
  return out;
}

AnswerLabel default_factor_label(Dataset d) { return is_alternation(d) ? AnswerLabel::SSM : AnswerLabel::WN2; }

}  // namespace

void SynthConfig::validate() const {
  if (!(noise >= 0.0)) throw ConfigError("synthetic noise scale must be >= 0");
  if (count == 0) throw ConfigError("synthetic instance count must be >= 1");
  if (dim == 0) throw ConfigError("embedding dim must be >= 1");
}

SynthData synth_generate(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t D = config.dim;
  SynthData out{{}, EmbeddingStore(D), {}};
  auto& truth = out.truth;

  // fixed geometry, drawn first so it does not depend on the instance count
  Rng geo = Rng::derive({seed, 0});
  for (int i = 0; i < kContextLength + 1; ++i) truth.signatures.push_back(unit_vector(geo, D));
  const auto labels = labels_for(config.dataset);
  for (AnswerLabel l : labels)
    if (l != AnswerLabel::Correct) truth.directions[l] = unit_vector(geo, D);
  truth.factor_direction = unit_vector(geo, D);
  truth.factor_label = default_factor_label(config.dataset);

  Rng rng = Rng::derive({seed, 1});
  const double base_sd = 1.0 / std::sqrt(static_cast<double>(D));
  std::vector<float> vec(D);
  for (std::size_t n = 0; n < config.count; ++n) {
    std::vector<float> base(D);
    for (auto& x : base) x = static_cast<float>(rng.normal() * base_sd);
    int f = 0;
    if (config.planted_factor) f = rng.uniform() < 0.5 ? -1 : 1;
    const bool dependent = config.planted_factor && n % 2 == 0;

    BLMInstance inst;
    inst.id = config.id_prefix + "-" + std::to_string(n);
    inst.dataset = config.dataset;
    inst.type_tier = config.type_tier;

    // clean vector = base + signature + sign * factor_scale * u + extra
    auto emit = [&](const std::string& id, const std::vector<float>& sig, int sign, const std::vector<float>* extra) {
      for (std::size_t k = 0; k < D; ++k) {
        double v = static_cast<double>(base[k]) + sig[k];
        if (sign != 0) v += sign * config.factor_scale * truth.factor_direction[k];
        if (extra) v += config.error_scale * (*extra)[k];
        if (config.noise > 0.0) v += config.noise * rng.normal();
        vec[k] = static_cast<float>(v);
      }
      out.store.add(id, vec);
    };

    for (int i = 0; i < kContextLength; ++i) {
      SentenceRecord s{context_sentence_id(inst.id, i), "context sentence " + std::to_string(i + 1) + " of " + inst.id,
                       inst.dataset, inst.type_tier};
      emit(s.id, truth.signatures[static_cast<std::size_t>(i)], f, nullptr);
      inst.context.push_back(std::move(s));
    }
    const auto& answer_sig = truth.signatures[kContextLength];
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const AnswerLabel l = labels[j];
      Answer a;
      a.label = l;
      a.sentence = {answer_sentence_id(inst.id, static_cast<int>(j)),
                    std::string(to_string(l)) + " answer of " + inst.id, inst.dataset, inst.type_tier};
      if (l == AnswerLabel::Correct) {
        inst.correct_index = static_cast<int>(j);
        emit(a.sentence.id, answer_sig, f, nullptr);
      } else if (dependent && l == truth.factor_label) {
        emit(a.sentence.id, answer_sig, -f, nullptr);
      } else {
        const int sign = dependent && config.factor_all_errors ? -f : f;
        emit(a.sentence.id, answer_sig, sign, &truth.directions.at(l));
      }
      inst.answers.push_back(std::move(a));
    }
    validate_instance(inst);
    out.instances.push_back(std::move(inst));
    truth.bases.push_back(std::move(base));
    truth.factors.push_back(f);
    truth.factor_dependent.push_back(dependent);
  }
  return out;
}

}  // namespace blm
