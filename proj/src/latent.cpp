#include "blm/latent.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "blm/error.hpp"

namespace blm {

namespace {

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError(std::string(what) + " has a non-finite entry");
}

[[noreturn]] void bad_spec(std::string_view s) {
  throw UsageError("invalid latent spec '" + std::string(s) + "': " + std::string(kLatentGrammar));
}

std::size_t parse_uint(std::string_view whole, std::string_view digits) {
  std::size_t v = 0;
  if (digits.empty()) bad_spec(whole);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) bad_spec(whole);
  return v;
}

}  // namespace

LatentSpec LatentSpec::parse(std::string_view s, double tau) {
  if (!(tau > 0.0)) throw ConfigError("gumbel-softmax temperature must be > 0");
  LatentSpec spec;
  spec.tau = tau;
  spec.continuous_dim = 0;
  bool seen_c = false, seen_d = false;
  std::string_view rest = s;
  while (!rest.empty()) {
    const auto plus = rest.find('+');
    std::string_view part = rest.substr(0, plus);
    rest = plus == std::string_view::npos ? std::string_view{} : rest.substr(plus + 1);
    if (plus != std::string_view::npos && rest.empty()) bad_spec(s);
    if (part.size() < 2) bad_spec(s);
    if (part[0] == 'c' && !seen_c) {
      seen_c = true;
      spec.continuous_dim = parse_uint(s, part.substr(1));
    } else if (part[0] == 'd' && !seen_d && !seen_c) {
      seen_d = true;
      const auto x = part.find('x');
      if (x == std::string_view::npos) bad_spec(s);
      const std::size_t n = parse_uint(s, part.substr(1, x - 1));
      const std::size_t k = parse_uint(s, part.substr(x + 1));
      if (n == 0 || k < 2) bad_spec(s);
      spec.categories.assign(n, k);
    } else {
      bad_spec(s);
    }
  }
  if (spec.continuous_dim == 0 && spec.categories.empty()) bad_spec(s);
  return spec;
}

std::string LatentSpec::to_string() const {
  std::string out;
  if (!categories.empty()) {
    const bool uniform = std::all_of(categories.begin(), categories.end(),
                                     [&](std::size_t k) { return k == categories.front(); });
    if (!uniform) throw ConfigError("latent spec with mixed category sizes has no string form");
    out += "d" + std::to_string(categories.size()) + "x" + std::to_string(categories.front());
  }
  if (continuous_dim > 0) {
    if (!out.empty()) out += "+";
    out += "c" + std::to_string(continuous_dim);
  }
  return out;
}

std::size_t LatentSpec::discrete_dim() const { return std::accumulate(categories.begin(), categories.end(), std::size_t{0}); }

std::size_t LatentSpec::block_offset(std::size_t j) const {
  return std::accumulate(categories.begin(), categories.begin() + static_cast<std::ptrdiff_t>(j), std::size_t{0});
}

std::vector<double> LatentCode::flat() const {
  std::vector<double> out(z);
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

std::vector<double> gaussian_sample(std::span<const double> mu, std::span<const double> log_sigma,
                                    std::span<const double> noise) {
  if (mu.size() != log_sigma.size() || mu.size() != noise.size())
    throw ShapeError("gaussian_sample: mu, log_sigma and noise lengths differ");
  check_finite(mu, "mu");
  check_finite(log_sigma, "log_sigma");
  check_finite(noise, "noise");
  std::vector<double> z(mu.size());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = mu[k] + std::exp(log_sigma[k]) * noise[k];
  return z;
}

double kl_gaussian(std::span<const double> mu, std::span<const double> log_sigma) {
  if (mu.size() != log_sigma.size()) throw ShapeError("kl_gaussian: mu and log_sigma lengths differ");
  check_finite(mu, "mu");
  check_finite(log_sigma, "log_sigma");
  double acc = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k)
    acc += mu[k] * mu[k] + std::exp(2.0 * log_sigma[k]) - 1.0 - 2.0 * log_sigma[k];
  return 0.5 * acc;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) z += (out[k] = std::exp(logits[k] - mx));
  for (double& v : out) v /= z;
  return out;
}

std::vector<double> gumbel_softmax_sample(std::span<const double> logits, double tau,
                                          std::span<const double> gumbel_noise) {
  if (!(tau > 0.0)) throw ConfigError("gumbel-softmax temperature must be > 0");
  if (logits.size() != gumbel_noise.size()) throw ShapeError("gumbel_softmax_sample: logits/noise lengths differ");
  check_finite(logits, "logits");
  check_finite(gumbel_noise, "gumbel noise");
  // log pi = logits - logsumexp(logits); the shift cancels inside the softmax
  std::vector<double> h(logits.size());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = (gumbel_noise[k] + logits[k]) / tau;
  return softmax(h);
}

double kl_categorical_uniform(std::span<const double> probs) {
  if (probs.empty()) throw ValidationError("kl_categorical_uniform: empty distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("kl_categorical_uniform: entries must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ValidationError("kl_categorical_uniform: probabilities do not sum to 1");
  const double K = static_cast<double>(probs.size());
  double acc = 0.0;
  for (double p : probs)
    if (p > 0.0) acc += p * std::log(p * K);
  return std::max(acc, 0.0);
}

LatentCode joint_sample(std::span<const double> encoder_output, const LatentSpec& spec, Rng& rng, SampleMode mode) {
  if (encoder_output.size() != spec.head_dim())
    throw ShapeError("encoder output has length " + std::to_string(encoder_output.size()) + ", spec " +
                     spec.to_string() + " needs " + std::to_string(spec.head_dim()));
  const std::size_t k = spec.continuous_dim;
  LatentCode code;
  auto mu = encoder_output.subspan(0, k);
  auto log_sigma = encoder_output.subspan(k, k);
  std::vector<double> noise(k, 0.0);
  if (mode == SampleMode::stochastic)
    for (double& n : noise) n = rng.normal();
  code.z = gaussian_sample(mu, log_sigma, noise);
  code.kl_continuous = kl_gaussian(mu, log_sigma);

  std::size_t off = 2 * k;
  for (std::size_t K : spec.categories) {
    auto logits = encoder_output.subspan(off, K);
    std::vector<double> g(K, 0.0);
    if (mode == SampleMode::stochastic)
      for (double& v : g) v = rng.gumbel();
    auto y = gumbel_softmax_sample(logits, spec.tau, g);
    code.c.insert(code.c.end(), y.begin(), y.end());
    code.kl_discrete += kl_categorical_uniform(softmax(logits));
    off += K;
  }
  return code;
}

std::string MaskTarget::name() const {
  return (kind == Kind::discrete_block ? "mask_discrete_" : "mask_continuous_") + std::to_string(index + 1);
}

LatentCode mask_latent(const LatentCode& code, const LatentSpec& spec, MaskTarget target) {
  LatentCode out = code;
  if (target.kind == MaskTarget::Kind::continuous_unit) {
    if (target.index >= code.z.size())
      throw LookupError("continuous unit " + std::to_string(target.index) + " out of range (" +
                        std::to_string(code.z.size()) + " units)");
    out.z[target.index] = 0.0;
  } else {
    if (target.index >= spec.categories.size())
      throw LookupError("discrete block " + std::to_string(target.index) + " out of range (" +
                        std::to_string(spec.categories.size()) + " blocks)");
    const std::size_t off = spec.block_offset(target.index);
    if (off + spec.categories[target.index] > code.c.size()) throw ShapeError("latent code does not match spec");
    std::fill_n(out.c.begin() + static_cast<std::ptrdiff_t>(off), spec.categories[target.index], 0.0);
  }
  return out;
}

std::vector<double> mask_vector(const LatentSpec& spec, MaskTarget target) {
  std::vector<double> m(spec.total_dim(), 1.0);
  if (target.kind == MaskTarget::Kind::continuous_unit) {
    if (target.index >= spec.continuous_dim) throw LookupError("continuous unit index out of range");
    m[target.index] = 0.0;
  } else {
    if (target.index >= spec.categories.size()) throw LookupError("discrete block index out of range");
    const std::size_t off = spec.continuous_dim + spec.block_offset(target.index);
    std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(off), spec.categories[target.index], 0.0);
  }
  return m;
}

}  // namespace blm
