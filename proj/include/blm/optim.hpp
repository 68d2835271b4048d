#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "blm/graph.hpp"
#include "blm/tensor.hpp"

namespace blm {

template <class T>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  static AdamState init(const ParamSet<T>& params, double lr = 1e-3) {
    AdamState s;
    s.lr = lr;
    for (const auto& p : params) {
      s.m.emplace_back(p.value.shape());
      s.v.emplace_back(p.value.shape());
    }
    return s;
  }
};

// Bias-corrected Adam update in place. Rejects the whole update (nothing is
// modified) when any gradient entry is non-finite, naming the parameter.
template <class T>
void adam_step(ParamSet<T>& params, const ParamGrads<T>& grads, AdamState<T>& state);

// Central-difference gradient check in double precision.
//   value(x)      -> f(x)
//   gradient(x)   -> analytic df/dx (same length as x)
// Returns max_k |analytic_k - central_k| / max(|analytic_k|, |central_k|, floor)
// over the checked coordinates (all of them when `coords` is empty).
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

GradCheckResult grad_check(const std::function<double(const Tensor<double>&)>& value,
                           const std::function<Tensor<double>(const Tensor<double>&)>& gradient,
                           const Tensor<double>& point, double h = 1e-5,
                           const std::vector<std::size_t>& coords = {}, double floor = 1e-8);

// Convenience form: `build` maps a leaf to a scalar on a fresh graph.
GradCheckResult grad_check(const std::function<Var(Graph<double>&, Var)>& build, const Tensor<double>& point,
                           double h = 1e-5, const std::vector<std::size_t>& coords = {}, double floor = 1e-8);

// Checkpoint: "CKPT", u32 version, u32 n_params, then per parameter
// (u32 name length, name, u32 rank, u64 dims..., float32 payload), then the
// Adam state (f64 lr, beta1, beta2, eps, u64 step, m and v payloads in
// parameter order). Little-endian throughout.
struct Checkpoint {
  ParamSet<float> params;
  AdamState<float> adam;
  std::string config_json;  // model/training config snapshot, written alongside
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);
std::filesystem::path checkpoint_config_path(const std::filesystem::path& path);

}  // namespace blm
