#include "blm/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "blm/analysis.hpp"
#include "blm/synth.hpp"
#include "blm/train.hpp"

namespace blm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + p.string());
  f << text;
  if (!f) throw IoError("write failed: " + p.string());
}

void make_out_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

bool deterministic_env() {
  const char* v = std::getenv("LD_DETERMINISTIC");
  return v == nullptr || std::string(v) != "0";
}

// Every option of the subcommand except --out, with the effective value.
json option_snapshot(const CLI::App* sub) {
  json j = json::object();
  for (const CLI::Option* o : sub->get_options()) {
    const std::string name = o->get_name(false, true);
    if (name.empty() || name == "--help" || name == "--out") continue;
    const std::string key = name.substr(name.find_first_not_of('-'));
    const bool flag = o->get_expected_max() == 0;
    if (o->count() > 0) {
      const auto& r = o->results();
      if (flag)
        j[key] = true;
      else if (o->get_expected_max() > 1 || r.size() > 1)
        j[key] = r;
      else
        j[key] = r.front();
    } else if (flag) {
      j[key] = false;
    } else if (!o->get_default_str().empty()) {
      j[key] = o->get_default_str();
    }
  }
  return j;
}

void write_snapshot(const fs::path& out, const CLI::App* sub, json extra = json::object()) {
  json j = {{"command", sub->get_name()}, {"options", option_snapshot(sub)},
            {"LD_DETERMINISTIC", deterministic_env() ? 1 : 0}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_file(out / "config.json", j.dump(2) + "\n");
}

std::optional<TypeTier> tier_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_type_tier(s);
}

Shape2D parse_shape(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const std::size_t r = std::stoul(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const std::size_t c = std::stoul(s.substr(x + 1), &used);
    if (used != s.size() - x - 1 || r == 0 || c == 0) throw std::invalid_argument(s);
    return {r, c};
  } catch (const std::exception&) {
    throw UsageError("shape must look like ROWSxCOLS, e.g. 32x24 (got '" + s + "')");
  }
}

std::vector<BLMInstance> load_instances(const std::string& path, const std::string& dataset, const std::string& type) {
  std::optional<Dataset> expected;
  if (!dataset.empty()) expected = parse_dataset(dataset);
  auto xs = load_dataset(path, expected);
  if (!type.empty()) xs = filter_by_type(xs, parse_type_tier(type));
  if (xs.empty()) throw DataError("no instances selected from " + path);
  return xs;
}

std::string setting_name(const std::vector<std::string>& names, std::size_t i, const std::string& path) {
  if (i < names.size()) return names[i];
  fs::path p(path);
  const auto parent = p.parent_path().filename().string();
  return parent.empty() ? p.stem().string() : parent;
}

struct Options {
  // shared
  std::string out, data, emb, dataset, ckpt, type;
  std::uint64_t seed = 0;
  // synth
  std::size_t count = 1000, dim = 768;
  double noise = 0.01, error_scale = 1.0, factor_scale = 1.0;
  bool planted = false, factor_all = false;
  // train
  std::string model = "encdec", latent = "d1x2+c5", select = "best", train_type, test_type, shape = "32x24";
  std::size_t epochs = 120, batch = 100, runs = 5, parallel = 1, channels = 16;
  double lr = 0.001, beta = 1.0, tau = 0.5;
  std::optional<double> tau_start;
  std::size_t beta_warmup = 0;
  bool quiet = false;
  // analysis
  std::vector<std::string> results, settings;
  std::string masking, subset = "all";
};

int cmd_synth(const Options& o, const CLI::App* sub, std::ostream& out) {
  SynthConfig c;
  c.count = o.count;
  c.dim = o.dim;
  c.noise = o.noise;
  c.dataset = parse_dataset(o.dataset.empty() ? "agreement_fr" : o.dataset);
  c.type_tier = parse_type_tier(o.type.empty() ? "I" : o.type);
  c.error_scale = o.error_scale;
  c.planted_factor = o.planted;
  c.factor_scale = o.factor_scale;
  c.factor_all_errors = o.factor_all;
  const SynthData d = synth_generate(c, o.seed);
  make_out_dir(o.out);
  write_dataset(fs::path(o.out) / "data.jsonl", d.instances);
  write_store(d.store, fs::path(o.out) / "embeddings.emb");
  write_snapshot(o.out, sub);
  out << "wrote " << d.instances.size() << " instances, " << d.store.count() << " embeddings to " << o.out << "\n";
  return 0;
}

int cmd_train(const Options& o, const CLI::App* sub, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.lr = o.lr;
  cfg.runs = o.runs;
  cfg.seed = o.seed;
  cfg.model.kind = parse_model_kind(o.model);
  cfg.model.latent = LatentSpec::parse(o.latent, o.tau);
  cfg.model.beta = o.beta;
  cfg.model.conv_channels = o.channels;
  cfg.model.shape = parse_shape(o.shape);
  cfg.train_type = tier_opt(o.train_type);
  cfg.test_type = tier_opt(o.test_type);
  cfg.select = parse_selection(o.select);
  cfg.tau_start = o.tau_start;
  cfg.beta_warmup = o.beta_warmup;
  cfg.parallel_runs = o.parallel;
  cfg.validate();

  const auto instances = load_instances(o.data, o.dataset, "");
  const EmbeddingStore store = read_store(o.emb);
  const DatasetSplit split = make_split(instances, cfg);
  check_coverage(instances, store);
  make_out_dir(o.out);
  write_snapshot(o.out, sub, {{"train_config", json::parse(cfg.to_json())}});

  std::mutex mu;
  auto on_epoch = [&](const EpochLog& e) {
    if (o.quiet) return;
    std::lock_guard lock(mu);
    err << "seed " << e.seed << " epoch " << e.epoch << "/" << cfg.epochs << " steps " << e.steps << " loss "
        << e.loss << " loss_a " << e.loss_a << " kl_c " << e.kl_continuous << " kl_d " << e.kl_discrete
        << " dev_f1 " << e.dev_f1 << "\n";
  };
  const MultiRunResult r = multi_run(cfg, split, store, on_epoch);
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    const fs::path dir = fs::path(o.out) / ("run" + std::to_string(i));
    make_out_dir(dir);
    write_checkpoint(r.runs[i].train.checkpoint, dir / "model.ckpt");
  }
  write_file(fs::path(o.out) / "results.json", results_to_json(cfg, r) + "\n");
  out << "mean_f1 " << r.mean_f1 << " std_f1 " << r.std_f1 << " runs " << r.runs.size() << "\n";
  return 0;
}

int cmd_eval(const Options& o, const CLI::App* sub, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(o.ckpt);
  const auto instances = load_instances(o.data, o.dataset, o.type);
  const EmbeddingStore store = read_store(o.emb);
  EvalResult r = evaluate(ckpt, instances, store);
  r.run_seed = o.seed;
  make_out_dir(o.out);
  write_snapshot(o.out, sub);
  write_file(fs::path(o.out) / "eval.json", eval_result_to_json(r) + "\n");
  out << "f1 " << r.f1 << " n " << r.n_instances << "\n";
  return 0;
}

std::vector<SettingSummary> summarize(const Options& o) {
  std::vector<SettingSummary> settings;
  for (std::size_t i = 0; i < o.results.size(); ++i) {
    const auto evals = eval_results_from_json(read_file(o.results[i]));
    SettingSummary s;
    s.setting = setting_name(o.settings, i, o.results[i]);
    s.breakdown = error_breakdown(evals);
    s.runs = evals.size();
    s.mean_f1 = s.breakdown.mean_f1;
    double var = 0.0;
    for (const auto& e : evals) var += (e.f1 - s.mean_f1) * (e.f1 - s.mean_f1);
    s.std_f1 = std::sqrt(var / static_cast<double>(evals.size()));
    settings.push_back(std::move(s));
  }
  return settings;
}

int cmd_analyze_errors(const Options& o, const CLI::App* sub, std::ostream& out) {
  const auto settings = summarize(o);
  make_out_dir(o.out);
  write_snapshot(o.out, sub);
  for (const auto& s : settings) {
    const fs::path p = fs::path(o.out) / ("breakdown_" + s.setting + ".json");
    write_file(p, breakdown_to_json(s.breakdown) + "\n");
  }
  for (const auto& p : emit_report(settings, nullptr, o.out)) out << p.string() << "\n";
  return 0;
}

int cmd_analyze_masking(const Options& o, const CLI::App* sub, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(o.ckpt);
  auto instances = load_instances(o.data, o.dataset, o.type);
  if (o.subset == "test") instances = split_dataset(instances, o.seed).test;
  const EmbeddingStore store = read_store(o.emb);
  const auto runs = masking_analysis(ckpt, instances, store);
  const KappaMatrix k = kappa_matrix(runs);
  make_out_dir(o.out);
  write_snapshot(o.out, sub);
  write_file(fs::path(o.out) / "masking.json", masking_to_json(runs, k) + "\n");
  std::vector<SettingSummary> settings;
  for (const auto& r : runs) {
    const EvalResult* e = &r.eval;
    settings.push_back({r.variant, r.eval.f1, 0.0, 1, error_breakdown(std::span(e, 1))});
  }
  emit_report(settings, &k, o.out);
  for (std::size_t i = 0; i < k.variants.size(); ++i)
    out << k.variants[i] << " f1 " << runs[i].eval.f1 << " kappa_vs_base " << k.kappa[0][i] << "\n";
  return 0;
}

int cmd_report(const Options& o, const CLI::App* sub, std::ostream& out) {
  auto settings = summarize(o);
  std::optional<KappaMatrix> k;
  if (!o.masking.empty()) {
    const auto runs = masking_from_json(read_file(o.masking));
    k = kappa_matrix(runs);
  }
  make_out_dir(o.out);
  write_snapshot(o.out, sub);
  for (const auto& p : emit_report(settings, k ? &*k : nullptr, o.out)) out << p.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-layer analysis of BLM sentence embeddings", "blm"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate synthetic BLM data with a known factorization");
  synth->add_option("--count", o.count, "number of instances")->capture_default_str();
  synth->add_option("--noise", o.noise, "per-coordinate Gaussian noise scale")->capture_default_str();
  synth->add_option("--dim", o.dim, "embedding dimension")->capture_default_str();
  synth->add_option("--dataset", o.dataset, "agreement_fr | alt_atl | atl_alt");
  synth->add_option("--type", o.type, "type tier I | II | III");
  synth->add_option("--error-scale", o.error_scale, "length of the error label offsets")->capture_default_str();
  synth->add_flag("--planted-factor", o.planted, "plant a binary factor that decides half the instances");
  synth->add_option("--factor-scale", o.factor_scale, "length of the planted factor offset")->capture_default_str();

  synth->add_flag("--factor-all-errors", o.factor_all, "flip the factor on every distractor of dependent instances");

  auto* train = app.add_subcommand("train", "train and evaluate over several runs");
  train->add_option("--data", o.data, "dataset JSON-Lines")->required();
  train->add_option("--emb", o.emb, "embedding store")->required();
  train->add_option("--dataset", o.dataset, "expected dataset name");
  train->add_option("--model", o.model, "encdec | baseline")->capture_default_str();
  train->add_option("--latent", o.latent, "latent spec, e.g. c5, d1x2+c5, d2x2+c5")->capture_default_str();
  train->add_option("--beta", o.beta, "KL weight")->capture_default_str();
  train->add_option("--tau", o.tau, "gumbel-softmax temperature")->capture_default_str();
  train->add_option("--tau-start", o.tau_start, "anneal temperature linearly from this value to --tau");
  train->add_option("--beta-warmup", o.beta_warmup, "epochs of linear KL warm-up (0: off)")->capture_default_str();
  train->add_option("--epochs", o.epochs)->capture_default_str();
  train->add_option("--batch", o.batch)->capture_default_str();
  train->add_option("--lr", o.lr)->capture_default_str();
  train->add_option("--runs", o.runs)->capture_default_str();
  train->add_option("--select", o.select, "best | last")->capture_default_str();
  train->add_option("--train-type", o.train_type, "train (and dev) on this type tier");
  train->add_option("--test-type", o.test_type, "test on this type tier");
  train->add_option("--parallel-runs", o.parallel, "concurrent runs")->capture_default_str();
  train->add_option("--channels", o.channels, "encoder conv channels")->capture_default_str();
  train->add_option("--shape", o.shape, "2D embedding shape ROWSxCOLS")->capture_default_str();
  train->add_flag("--quiet", o.quiet, "no per-epoch log");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", o.ckpt)->required();
  eval->add_option("--data", o.data)->required();
  eval->add_option("--emb", o.emb)->required();
  eval->add_option("--dataset", o.dataset);
  eval->add_option("--type", o.type);

  auto* aerr = app.add_subcommand("analyze-errors", "per-label error percentages from results files");
  aerr->add_option("--results", o.results, "results.json or eval.json (repeatable)")->required();
  aerr->add_option("--setting", o.settings, "setting name per results file (repeatable)");

  auto* amask = app.add_subcommand("analyze-masking", "mask latent units one by one and compare predictions");
  amask->add_option("--ckpt", o.ckpt)->required();
  amask->add_option("--data", o.data)->required();
  amask->add_option("--emb", o.emb)->required();
  amask->add_option("--dataset", o.dataset);
  amask->add_option("--type", o.type);
  amask->add_option("--subset", o.subset, "all | test (test split drawn with --seed)")
      ->check(CLI::IsMember({"all", "test"}))
      ->capture_default_str();

  auto* report = app.add_subcommand("report", "CSV, JSON and SVG report from results and masking files");
  report->add_option("--results", o.results, "results.json (repeatable)");
  report->add_option("--setting", o.settings, "setting name per results file (repeatable)");
  report->add_option("--masking", o.masking, "masking.json from analyze-masking");

  for (auto* s : {synth, train, eval, aerr, amask, report}) {
    s->add_option("--out", o.out, "output directory")->required();
    s->add_option("--seed", o.seed, "base seed")->capture_default_str();
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: usage: " << msg << "\n";
    return 2;
  }

  try {
    if (*synth) return cmd_synth(o, synth, out);
    if (*train) return cmd_train(o, train, out, err);
    if (*eval) return cmd_eval(o, eval, out);
    if (*aerr) return cmd_analyze_errors(o, aerr, out);
    if (*amask) return cmd_analyze_masking(o, amask, out);
    if (*report) return cmd_report(o, report, out);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << category_name(e.category()) << ": " << msg << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace blm
