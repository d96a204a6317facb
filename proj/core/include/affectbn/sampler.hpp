#ifndef AFFECTBN_SAMPLER_HPP
#define AFFECTBN_SAMPLER_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "affectbn/model.hpp"

namespace affectbn {

struct SamplerConfig {
  int chains = 4;
  int iterations = 4000;
  // Warmup sweeps are adapted (when adapt is set) and discarded; proposal
  // scales freeze afterwards. -1 selects iterations / 2.
  int warmup = -1;
  int thin = 1;
  std::uint64_t seed = 0;
  double target_acceptance = 0.44;
  bool adapt = true;
  // Center/scale the per-node design columns inside the sampler only; draws
  // are always recorded on the raw coefficient scale.
  bool standardize = false;

  int effective_warmup() const { return warmup < 0 ? iterations / 2 : warmup; }
  int kept_per_chain() const {
    return (iterations - effective_warmup()) / thin;
  }
};

// Throws ConfigError when any field is out of range or no draws would be
// kept.
void check_config(const SamplerConfig& config);

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

struct PosteriorSample {
  std::vector<std::string> parameter_names;  // ParameterLayout order
  std::vector<Matrix> chains;                // kept x parameters, per chain
  // Post-warmup acceptance rate per parameter, per chain.
  std::vector<std::vector<double>> acceptance_rates;
  SamplerConfig config;
  std::uint64_t model_fingerprint = 0;

  std::size_t n_chains() const { return chains.size(); }
  std::size_t n_parameters() const { return parameter_names.size(); }
  std::size_t kept_per_chain() const {
    return chains.empty() ? 0 : chains.front().rows;
  }
  std::size_t total_draws() const { return n_chains() * kept_per_chain(); }

  int parameter_index(std::string_view name) const;  // -1 when unknown
  // All chains concatenated in chain order.
  std::vector<double> parameter_draws(std::string_view name) const;
  // Flat parameter row for a global draw index (chain-major).
  const double* draw(std::size_t global_index) const;
};

// Adaptive scalar-at-a-time random-walk Metropolis over all parameters
// (coefficients in declaration order, then sigmas). Chains run on
// independent RNG streams derived from (seed, chain index), so the result is
// identical for any `threads` value. Initialization: coefficients at zero,
// each sigma at the sample standard deviation of its node column clamped
// into the central 1%..99% of its prior support.
PosteriorSample fit(const ModelSpec& model, const Dataset& data,
                    const SamplerConfig& config, int threads = 1);

// Classic (non-split) potential scale reduction factor. Requires >= 2 chains
// with >= 2 kept draws each; throws DiagnosticError when a chain is constant.
double rhat(const PosteriorSample& sample, std::string_view parameter);

// Effective sample size via autocorrelation with Geyer initial-positive-
// sequence truncation, computed per chain and summed. Requires >= 100 kept
// draws in total; throws DiagnosticError on constant chains.
double ess(const PosteriorSample& sample, std::string_view parameter);

// Wraps a single admissible parameter vector as a one-draw posterior (used
// for fixed-theta queries and tests). Throws DomainError when params has
// zero prior density.
PosteriorSample degenerate_posterior(const ModelSpec& model,
                                     const ParameterVector& params);

}  // namespace affectbn

#endif  // AFFECTBN_SAMPLER_HPP
