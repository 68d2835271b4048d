#include "blm/train.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "blm/error.hpp"
#include "blm/rng.hpp"

namespace blm {

using nlohmann::json;

namespace {

// stream tags for Rng::derive
constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kShuffleStream = 12;
constexpr std::uint64_t kNoiseStream = 13;

std::vector<InstanceTensors> assemble_all(std::span<const BLMInstance> xs, const EmbeddingStore& store,
                                          const Shape2D& shape) {
  std::vector<InstanceTensors> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(assemble_instance(x, store, shape));
  return out;
}

double f1_of(std::span<const InstanceTensors> xs, std::span<const Prediction> preds) {
  if (xs.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) ok += preds[i].chosen_index == xs[i].correct_index;
  return static_cast<double>(ok) / static_cast<double>(xs.size());
}

}  // namespace

std::string_view to_string(Selection s) { return s == Selection::best ? "best" : "last"; }

Selection parse_selection(std::string_view s) {
  if (s == "best") return Selection::best;
  if (s == "last") return Selection::last;
  throw UsageError("unknown selection '" + std::string(s) + "' (expected best|last)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be a positive number");
  if (parallel_runs < 1) throw ConfigError("parallel runs must be >= 1");
  if (tau_start && !(*tau_start > 0.0)) throw ConfigError("gumbel-softmax temperature must be > 0");
  model.validate();
}

double TrainConfig::tau_at(std::size_t epoch) const {
  const double end = model.latent.tau;
  if (!tau_start || epochs == 1) return end;
  const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return *tau_start + (end - *tau_start) * t;
}

double TrainConfig::beta_at(std::size_t epoch) const {
  if (beta_warmup == 0 || epoch >= beta_warmup) return model.beta;
  return model.beta * static_cast<double>(epoch + 1) / static_cast<double>(beta_warmup);
}

std::string TrainConfig::to_json() const {
  json j = {
      {"epochs", epochs},
      {"batch_size", batch_size},
      {"lr", lr},
      {"runs", runs},
      {"seed", seed},
      {"model", json::parse(model.to_json())},
      {"train_type", train_type ? json(to_string(*train_type)) : json(nullptr)},
      {"test_type", test_type ? json(to_string(*test_type)) : json(nullptr)},
      {"select", to_string(select)},
      {"tau_start", tau_start ? json(*tau_start) : json(nullptr)},
      {"beta_warmup", beta_warmup},
      {"parallel_runs", parallel_runs},
      {"optimizer", "adam(beta1=0.9, beta2=0.999, eps=1e-8)"},
  };
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.runs = j.at("runs").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.model = ModelConfig::from_json(j.at("model").dump());
    if (!j.at("train_type").is_null()) c.train_type = parse_type_tier(j.at("train_type").get<std::string>());
    if (!j.at("test_type").is_null()) c.test_type = parse_type_tier(j.at("test_type").get<std::string>());
    c.select = parse_selection(j.at("select").get<std::string>());
    if (!j.at("tau_start").is_null()) c.tau_start = j.at("tau_start").get<double>();
    c.parallel_runs = j.value("parallel_runs", std::size_t{1});
    c.beta_warmup = j.value("beta_warmup", std::size_t{0});
  } catch (const json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainResult train(const DatasetSplit& split, const EmbeddingStore& store, const TrainConfig& cfg, std::uint64_t seed,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (split.train.empty()) throw DataError("training split is empty");
  if (cfg.select == Selection::best && split.dev.empty())
    throw ConfigError("best-dev selection needs a non-empty dev split (use --select last)");
  check_coverage(split.train, store);
  check_coverage(split.dev, store);
  check_coverage(split.test, store);

  ModelConfig mc = cfg.model;
  mc.init_seed = Rng::derive({seed, kInitStream}).next_u64();
  Model<float> model(mc);
  if (store.dim() != mc.embedding_dim())
    throw ShapeError("store dim " + std::to_string(store.dim()) + " does not match the model's " +
                     std::to_string(mc.shape.rows) + "x" + std::to_string(mc.shape.cols) + " shape");

  const auto train_x = assemble_all(split.train, store, mc.shape);
  const auto dev_x = assemble_all(split.dev, store, mc.shape);
  AdamState<float> adam = AdamState<float>::init(model.params(), cfg.lr);

  TrainResult result;
  bool have_selected = false;
  const std::size_t N = train_x.size();
  std::vector<std::size_t> order(N);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = Rng::derive({seed, kShuffleStream, epoch});
    for (std::size_t i = N; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    EpochLog log;
    log.seed = seed;
    log.epoch = epoch + 1;
    log.tau = cfg.tau_at(epoch);
    log.beta = cfg.beta_at(epoch);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < N; start += cfg.batch_size, ++batch_index) {
      const std::size_t B = std::min(cfg.batch_size, N - start);
      std::vector<InstanceTensors> batch;
      std::vector<Rng> rngs;
      batch.reserve(B);
      rngs.reserve(B);
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t idx = order[start + b];
        batch.push_back(train_x[idx]);
        rngs.push_back(Rng::derive({seed, kNoiseStream, epoch, idx}));
      }
      try {
        Graph<float> g;
        ForwardOptions<float> opt;
        LatentNoise<float> noise;
        if (mc.kind == ModelKind::encdec) {
          noise = LatentNoise<float>::draw(mc.latent, rngs);
          opt.noise = &noise;
          opt.tau = log.tau;
          opt.beta = log.beta;
        }
        const auto answers = answer_sets<float>(batch);
        const auto loss = model.total_loss(g, context_batch<float>(batch), answers, opt);
        g.backward(loss.total);
        ParamGrads<float> grads = zero_grads(model.params());
        g.accumulate_param_grads(grads);
        adam_step(model.params(), grads, adam);
        log.loss += g.value(loss.total)[0];
        log.loss_a += g.value(loss.loss_a)[0];
        log.kl_continuous += g.value(loss.kl_continuous)[0];
        log.kl_discrete += g.value(loss.kl_discrete)[0];
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch + 1) + " batch " + std::to_string(batch_index + 1) + ": " +
                           e.what());
      }
      ++log.steps;
    }
    const double nb = static_cast<double>(log.steps);
    log.loss /= nb;
    log.loss_a /= nb;
    log.kl_continuous /= nb;
    log.kl_discrete /= nb;
    result.total_steps += log.steps;

    if (!dev_x.empty()) log.dev_f1 = f1_of(dev_x, model.predict_batch(dev_x));
    result.curve.push_back(log);
    if (on_epoch) on_epoch(log);

    const bool last = epoch + 1 == cfg.epochs;
    const bool take = cfg.select == Selection::last ? last : (!have_selected || log.dev_f1 > result.selected_dev_f1);
    if (take) {
      have_selected = true;
      result.selected_epoch = epoch + 1;
      result.selected_dev_f1 = log.dev_f1;
      result.checkpoint.params = model.params();
      result.checkpoint.adam = adam;
    }
  }
  result.checkpoint.config_json = mc.to_json();
  return result;
}

EvalResult score_predictions(std::span<const BLMInstance> instances, std::span<const Prediction> predictions) {
  if (instances.empty()) throw DataError("cannot evaluate an empty instance list");
  if (instances.size() != predictions.size()) throw ShapeError("one prediction per instance expected");
  EvalResult r;
  r.dataset = instances[0].dataset;
  r.n_instances = instances.size();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& p = predictions[i];
    r.predictions.push_back({instances[i].id, p.chosen_index, p.chosen_label});
    if (p.chosen_index == instances[i].correct_index)
      ++r.n_correct;
    else
      ++r.per_label_error_counts[p.chosen_label];
  }
  r.f1 = static_cast<double>(r.n_correct) / static_cast<double>(r.n_instances);
  return r;
}

EvalResult evaluate(const Model<float>& model, std::span<const BLMInstance> instances, const EmbeddingStore& store) {
  if (instances.empty()) throw DataError("cannot evaluate an empty instance list");
  check_coverage(instances, store);
  const auto xs = assemble_all(instances, store, model.config().shape);
  return score_predictions(instances, model.predict_batch(xs));
}

Model<float> model_from_checkpoint(const Checkpoint& ckpt) {
  return Model<float>(ModelConfig::from_json(ckpt.config_json), ckpt.params);
}

EvalResult evaluate(const Checkpoint& ckpt, std::span<const BLMInstance> instances, const EmbeddingStore& store) {
  return evaluate(model_from_checkpoint(ckpt), instances, store);
}

DatasetSplit make_split(std::span<const BLMInstance> instances, const TrainConfig& cfg) {
  DatasetSplit s = split_dataset(instances, cfg.seed);
  if (cfg.train_type) {
    s.train = filter_by_type(s.train, *cfg.train_type);
    s.dev = filter_by_type(s.dev, *cfg.train_type);
  }
  if (cfg.test_type) s.test = filter_by_type(s.test, *cfg.test_type);
  if (s.train.empty()) throw DataError("no training instances of the requested type");
  if (s.test.empty()) throw DataError("no test instances of the requested type");
  return s;
}

MultiRunResult multi_run(const TrainConfig& cfg, const DatasetSplit& split, const EmbeddingStore& store,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  if (split.test.empty()) throw DataError("test split is empty");
  MultiRunResult out;
  out.runs.resize(cfg.runs);
  std::vector<std::exception_ptr> errors(cfg.runs);

  auto one = [&](std::size_t r) {
    try {
      const std::uint64_t seed = cfg.seed + r;
      RunResult& rr = out.runs[r];
      rr.seed = seed;
      rr.train = train(split, store, cfg, seed, on_epoch);
      rr.test = evaluate(rr.train.checkpoint, split.test, store);
      rr.test.run_seed = seed;
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };

  if (cfg.parallel_runs <= 1 || cfg.runs == 1) {
    for (std::size_t r = 0; r < cfg.runs; ++r) one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(cfg.parallel_runs, cfg.runs); ++t)
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < cfg.runs; r = next++) one(r);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& r : out.runs) out.mean_f1 += r.test.f1;
  out.mean_f1 /= static_cast<double>(cfg.runs);
  double var = 0.0;
  for (const auto& r : out.runs) var += (r.test.f1 - out.mean_f1) * (r.test.f1 - out.mean_f1);
  out.std_f1 = std::sqrt(var / static_cast<double>(cfg.runs));
  return out;
}

namespace {

json eval_json(const EvalResult& r) {
  json counts = json::object();
  for (const auto& [label, n] : r.per_label_error_counts) counts[std::string(to_string(label))] = n;
  json preds = json::array();
  for (const auto& p : r.predictions)
    preds.push_back({{"id", p.instance_id}, {"index", p.chosen_index}, {"label", to_string(p.chosen_label)}});
  return {{"seed", r.run_seed},        {"dataset", to_string(r.dataset)}, {"f1", r.f1},
          {"n_instances", r.n_instances}, {"n_correct", r.n_correct},       {"error_counts", counts},
          {"predictions", preds}};
}

EvalResult eval_from(const json& j) {
  EvalResult r;
  r.run_seed = j.at("seed").get<std::uint64_t>();
  r.dataset = parse_dataset(j.at("dataset").get<std::string>());
  r.f1 = j.at("f1").get<double>();
  r.n_instances = j.at("n_instances").get<std::size_t>();
  r.n_correct = j.at("n_correct").get<std::size_t>();
  for (const auto& [k, v] : j.at("error_counts").items()) r.per_label_error_counts[parse_answer_label(k)] = v;
  for (const auto& p : j.at("predictions"))
    r.predictions.push_back(
        {p.at("id").get<std::string>(), p.at("index").get<int>(), parse_answer_label(p.at("label").get<std::string>())});
  return r;
}

}  // namespace

std::string eval_result_to_json(const EvalResult& r) { return eval_json(r).dump(2); }

std::string results_to_json(const TrainConfig& cfg, const MultiRunResult& result) {
  json runs = json::array();
  for (const auto& rr : result.runs) {
    json j = eval_json(rr.test);
    j["selected_epoch"] = rr.train.selected_epoch;
    j["selected_dev_f1"] = rr.train.selected_dev_f1;
    j["total_steps"] = rr.train.total_steps;
    json curve = json::array();
    for (const auto& e : rr.train.curve)
      curve.push_back({{"epoch", e.epoch},
                       {"steps", e.steps},
                       {"tau", e.tau},
                       {"beta", e.beta},
                       {"loss", e.loss},
                       {"loss_a", e.loss_a},
                       {"kl_continuous", e.kl_continuous},
                       {"kl_discrete", e.kl_discrete},
                       {"dev_f1", e.dev_f1}});
    j["curve"] = curve;
    runs.push_back(j);
  }
  json out = {{"config", json::parse(cfg.to_json())},
              {"mean_f1", result.mean_f1},
              {"std_f1", result.std_f1},
              {"runs", runs}};
  return out.dump(2);
}

std::vector<EvalResult> eval_results_from_json(const std::string& text) {
  std::vector<EvalResult> out;
  try {
    const json j = json::parse(text);
    if (j.contains("runs")) {
      for (const auto& r : j.at("runs")) out.push_back(eval_from(r));
    } else {
      out.push_back(eval_from(j));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("results file: ") + e.what());
  }
  return out;
}

}  // namespace blm
