#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "blm/model.hpp"
#include "blm/rng.hpp"
#include "blm/synth.hpp"
#include "blm/train.hpp"

namespace testutil {

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("blm_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

template <class T>
blm::Tensor<T> random_tensor(blm::Shape shape, blm::Rng& rng, double scale = 1.0) {
  blm::Tensor<T> t(std::move(shape));
  for (auto& v : t.vec()) v = static_cast<T>(scale * rng.normal());
  return t;
}

// A small encoder-decoder that trains in milliseconds: 6x5 embeddings.
inline blm::ModelConfig tiny_config(const std::string& latent = "d1x2+c3") {
  blm::ModelConfig c;
  c.shape = {6, 5};
  c.conv_channels = 3;
  c.encoder_kernel = {3, 3, 3};
  c.decoder_kernel = {3, 3};
  c.latent = blm::LatentSpec::parse(latent);
  c.baseline_hidden = {16, 12};
  return c;
}

inline blm::SynthConfig tiny_synth(std::size_t count = 60) {
  blm::SynthConfig s;
  s.count = count;
  s.dim = 30;
  s.noise = 0.01;
  return s;
}

inline blm::TrainConfig tiny_train(std::size_t epochs = 2) {
  blm::TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 10;
  t.runs = 1;
  t.model = tiny_config();
  return t;
}

}  // namespace testutil
