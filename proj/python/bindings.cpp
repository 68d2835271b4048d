#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "blm/analysis.hpp"
#include "blm/cli.hpp"
#include "blm/synth.hpp"
#include "blm/train.hpp"

namespace py = pybind11;
using namespace blm;

namespace {

py::dict spec_dict(const LatentSpec& s) {
  py::dict d;
  d["continuous_dim"] = s.continuous_dim;
  d["categories"] = s.categories;
  d["tau"] = s.tau;
  d["total_dim"] = s.total_dim();
  d["head_dim"] = s.head_dim();
  return d;
}

py::tuple read_store_py(const std::string& path) {
  const EmbeddingStore s = read_store(path);
  py::array_t<float> arr({s.count(), s.dim()});
  std::copy(s.data().begin(), s.data().end(), arr.mutable_data());
  return py::make_tuple(s.ids(), arr);
}

void write_store_py(const std::string& path, const std::vector<std::string>& ids,
                    py::array_t<float, py::array::c_style | py::array::forcecast> vectors) {
  if (vectors.ndim() != 2) throw ShapeError("vectors must be a 2D array");
  if (static_cast<std::size_t>(vectors.shape(0)) != ids.size())
    throw ShapeError("one vector per id expected");
  const auto dim = static_cast<std::size_t>(vectors.shape(1));
  EmbeddingStore s(dim);
  for (std::size_t i = 0; i < ids.size(); ++i) s.add(ids[i], std::span<const float>(vectors.data() + i * dim, dim));
  write_store(s, path);
}

py::dict synth_py(const std::string& out_dir, std::size_t count, std::size_t dim, double noise,
                  const std::string& dataset, bool planted_factor, std::uint64_t seed) {
  SynthConfig c;
  c.count = count;
  c.dim = dim;
  c.noise = noise;
  c.dataset = parse_dataset(dataset);
  c.planted_factor = planted_factor;
  const SynthData d = synth_generate(c, seed);
  std::filesystem::create_directories(out_dir);
  const auto data = std::filesystem::path(out_dir) / "data.jsonl";
  const auto emb = std::filesystem::path(out_dir) / "embeddings.emb";
  write_dataset(data, d.instances);
  write_store(d.store, emb);
  py::dict r;
  r["data"] = data.string();
  r["emb"] = emb.string();
  r["factors"] = d.truth.factors;
  return r;
}

py::dict train_py(const std::string& data, const std::string& emb, const std::string& latent, double beta,
                  double tau, std::size_t epochs, std::size_t runs, std::size_t batch, double lr, std::uint64_t seed,
                  std::size_t rows, std::size_t cols, std::size_t channels, const std::string& model) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.runs = runs;
  cfg.batch_size = batch;
  cfg.lr = lr;
  cfg.seed = seed;
  cfg.model.kind = parse_model_kind(model);
  cfg.model.latent = LatentSpec::parse(latent, tau);
  cfg.model.beta = beta;
  cfg.model.shape = {rows, cols};
  cfg.model.conv_channels = channels;
  cfg.validate();
  const auto instances = load_dataset(data);
  const EmbeddingStore store = read_store(emb);
  MultiRunResult r;
  {
    py::gil_scoped_release release;
    r = multi_run(cfg, make_split(instances, cfg), store);
  }
  py::dict out;
  out["mean_f1"] = r.mean_f1;
  out["std_f1"] = r.std_f1;
  out["results_json"] = results_to_json(cfg, r);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Latent-layer analysis of BLM sentence embeddings";

  // error category available as BlmError.category
  static PyObject* blm_error = PyErr_NewException("blmlatent._core.BlmError", PyExc_RuntimeError, nullptr);
  m.attr("BlmError") = py::handle(blm_error);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(blm_error)(std::string(category_name(e.category())) + ": " + e.what());
      exc.attr("category") = category_name(e.category());
      PyErr_SetObject(blm_error, exc.ptr());
    }
  });

  m.def("parse_latent_spec", [](const std::string& s, double tau) { return spec_dict(LatentSpec::parse(s, tau)); },
        py::arg("spec"), py::arg("tau") = 0.5);
  m.def("kl_gaussian", [](const std::vector<double>& mu, const std::vector<double>& ls) { return kl_gaussian(mu, ls); },
        py::arg("mu"), py::arg("log_sigma"));
  m.def("kl_categorical_uniform", [](const std::vector<double>& p) { return kl_categorical_uniform(p); },
        py::arg("probs"));
  m.def("gumbel_softmax_sample",
        [](const std::vector<double>& logits, double tau, const std::vector<double>& noise) {
          return gumbel_softmax_sample(logits, tau, noise);
        },
        py::arg("logits"), py::arg("tau"), py::arg("gumbel_noise"));
  m.def("score", [](const std::vector<double>& a, const std::vector<double>& b) { return score(a, b); });
  m.def("max_margin_loss",
        [](const std::vector<double>& pred, const std::vector<double>& correct,
           const std::vector<std::vector<double>>& errors) { return max_margin_loss(pred, correct, errors); },
        py::arg("pred"), py::arg("correct"), py::arg("errors"));
  m.def("cohens_kappa",
        [](const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
          return cohens_kappa<std::int64_t>(a, b);
        },
        py::arg("a"), py::arg("b"));
  m.def("split_sizes", [](std::size_t n) {
    const auto s = split_sizes(n);
    return py::make_tuple(s.train, s.dev, s.test);
  });
  m.def("read_store", &read_store_py, py::arg("path"), "Returns (ids, float32 array of shape count x dim).");
  m.def("write_store", &write_store_py, py::arg("path"), py::arg("ids"), py::arg("vectors"));
  m.def("synth", &synth_py, py::arg("out_dir"), py::arg("count") = 1000, py::arg("dim") = 768,
        py::arg("noise") = 0.01, py::arg("dataset") = "agreement_fr", py::arg("planted_factor") = false,
        py::arg("seed") = 0);
  m.def("train", &train_py, py::arg("data"), py::arg("emb"), py::arg("latent") = "d1x2+c5", py::arg("beta") = 1.0,
        py::arg("tau") = 0.5, py::arg("epochs") = 120, py::arg("runs") = 5, py::arg("batch") = 100,
        py::arg("lr") = 0.001, py::arg("seed") = 0, py::arg("rows") = 32, py::arg("cols") = 24,
        py::arg("channels") = 16, py::arg("model") = "encdec");
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI invocation; returns (exit_code, stdout, stderr).");
}
