#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blm/data.hpp"
#include "blm/embedding_store.hpp"
#include "blm/model.hpp"
#include "blm/optim.hpp"

namespace blm {

enum class Selection { best, last };

std::string_view to_string(Selection s);
Selection parse_selection(std::string_view s);

struct TrainConfig {
  std::size_t epochs = 120;
  std::size_t batch_size = 100;
  double lr = 0.001;
  std::size_t runs = 5;
  std::uint64_t seed = 0;
  ModelConfig model;
  std::optional<TypeTier> train_type;
  std::optional<TypeTier> test_type;
  Selection select = Selection::best;
  // linear temperature schedule from tau_start (epoch 1) to model.latent.tau (last epoch)
  std::optional<double> tau_start;
  // KL weight ramps linearly from beta / beta_warmup to beta over the first beta_warmup epochs (0: off)
  std::size_t beta_warmup = 0;
  std::size_t parallel_runs = 1;

  void validate() const;
  double tau_at(std::size_t epoch) const;  // epoch is 0-based
  double beta_at(std::size_t epoch) const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct EpochLog {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;  // optimizer steps in this epoch
  double tau = 0.0;
  double beta = 0.0;
  double loss = 0.0;      // mean total loss over batches
  double loss_a = 0.0;
  double kl_continuous = 0.0;
  double kl_discrete = 0.0;
  double dev_f1 = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // selected epoch
  std::size_t selected_epoch = 0;
  double selected_dev_f1 = 0.0;
  std::size_t total_steps = 0;
  std::vector<EpochLog> curve;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains one run with `seed` driving init, shuffling and sampling noise.
TrainResult train(const DatasetSplit& split, const EmbeddingStore& store, const TrainConfig& cfg, std::uint64_t seed,
                  const EpochCallback& on_epoch = {});

struct PredictionRecord {
  std::string instance_id;
  int chosen_index = -1;
  AnswerLabel chosen_label = AnswerLabel::Correct;
};

struct EvalResult {
  double f1 = 0.0;
  std::map<AnswerLabel, std::size_t> per_label_error_counts;
  std::size_t n_instances = 0;
  std::size_t n_correct = 0;
  std::uint64_t run_seed = 0;
  Dataset dataset = Dataset::agreement_fr;
  std::vector<PredictionRecord> predictions;
};

// Micro-F1 over one-of-k choices, i.e. the fraction of correct choices.
EvalResult score_predictions(std::span<const BLMInstance> instances, std::span<const Prediction> predictions);
EvalResult evaluate(const Model<float>& model, std::span<const BLMInstance> instances, const EmbeddingStore& store);
EvalResult evaluate(const Checkpoint& ckpt, std::span<const BLMInstance> instances, const EmbeddingStore& store);
Model<float> model_from_checkpoint(const Checkpoint& ckpt);

struct RunResult {
  std::uint64_t seed = 0;
  TrainResult train;
  EvalResult test;
};

struct MultiRunResult {
  double mean_f1 = 0.0;
  double std_f1 = 0.0;  // population standard deviation
  std::vector<RunResult> runs;
};

// Run r uses seed cfg.seed + r. Runs are independent and may run on
// cfg.parallel_runs threads; results are ordered by r regardless.
MultiRunResult multi_run(const TrainConfig& cfg, const DatasetSplit& split, const EmbeddingStore& store,
                         const EpochCallback& on_epoch = {});

// Train/dev filtered to cfg.train_type and test to cfg.test_type when set.
DatasetSplit make_split(std::span<const BLMInstance> instances, const TrainConfig& cfg);

std::string results_to_json(const TrainConfig& cfg, const MultiRunResult& result);
std::vector<EvalResult> eval_results_from_json(const std::string& text);
std::string eval_result_to_json(const EvalResult& r);

}  // namespace blm
