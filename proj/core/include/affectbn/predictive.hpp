#ifndef AFFECTBN_PREDICTIVE_HPP
#define AFFECTBN_PREDICTIVE_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "affectbn/model.hpp"
#include "affectbn/rng.hpp"
#include "affectbn/sampler.hpp"

namespace affectbn {

// Point evidence for a query: the covariate row plus any subset of node
// observations. For query() the covariate values must be complete; sweep()
// fills grid covariates per point before delegating.
struct Evidence {
  std::map<std::string, double, std::less<>> covariate_values;
  std::map<std::string, double, std::less<>> node_values;
};

// Probability table over the joint states of the target nodes. State index s
// assigns bit j (s >> j & 1) to targets[j].
struct QueryResult {
  std::vector<std::string> targets;
  std::vector<double> probabilities;        // size 2^|targets|, sums to 1
  std::vector<double> mc_standard_errors;   // per state
  std::size_t draws_used = 0;
  std::size_t latent_draws_per_state = 0;

  std::size_t n_states() const { return probabilities.size(); }
  int target_value(std::size_t state, std::size_t j) const {
    return static_cast<int>((state >> j) & 1u);
  }
  std::string state_label(std::size_t state) const;  // e.g. "AF=0,ML=1"
};

struct QueryOptions {
  std::size_t latent_draws = 8;  // L per (draw, state)
  std::uint64_t seed = 0;
  // 0 keeps every posterior draw; otherwise an evenly strided subsample of
  // this size is used.
  std::size_t max_draws = 0;
};

// One forward draw of every node in topo_order under fixed parameters.
// covariate_row is indexed by schema order; the result by node declaration
// order. Deterministic given the rng state.
std::vector<double> ancestral_sample(const ModelSpec& model,
                                     const ParameterVector& params,
                                     std::span<const double> covariate_row,
                                     Rng& rng);

// n_per_draw ancestral samples for every kept posterior draw, draw-major.
std::vector<std::vector<double>> posterior_predictive(
    const ModelSpec& model, const PosteriorSample& posterior,
    std::span<const double> covariate_row, std::size_t n_per_draw, Rng& rng);

// P(targets | evidence, data) by enumeration over joint target states with
// likelihood weighting over the remaining latent nodes:
//   for each posterior draw and state, latent nodes are ancestral-sampled
//   with target/observed nodes pinned, each sample is weighted by the product
//   of the observed-node densities times the probability of the target state
//   given its parents, weights are averaged over the latent draws, summed
//   over posterior draws, and normalized over states.
// Weights are accumulated in log space with max-subtraction. Per-draw RNG
// streams derive from (seed, draw index) so draws may be processed in any
// order.
QueryResult query(const ModelSpec& model, const PosteriorSample& posterior,
                  const Evidence& evidence,
                  const std::vector<std::string>& targets,
                  const QueryOptions& options = {});

struct SweepAxis {
  std::string name;  // node or covariate
  std::vector<double> values;
};

struct SweepPoint {
  std::vector<double> coordinates;  // aligned with the axes as given
  QueryResult result;
};

struct SweepResult {
  std::vector<SweepAxis> axes;
  std::vector<SweepPoint> points;  // row-major, first axis slowest
};

// Cartesian product of the grid, each point merged with fixed_evidence and
// passed to query(). The per-point seed depends only on the point's position
// in the name-sorted canonical axis order, so permuting the axes permutes
// rows without changing any point's numbers.
SweepResult sweep(const ModelSpec& model, const PosteriorSample& posterior,
                  const Evidence& fixed_evidence,
                  const std::vector<SweepAxis>& grid,
                  const std::vector<std::string>& targets,
                  const QueryOptions& options = {}, int threads = 1);

// Seed a grid point derives its query stream from.
std::uint64_t sweep_point_seed(std::uint64_t master_seed,
                               std::uint64_t canonical_index);

namespace detail {

struct WeightSummary {
  std::vector<double> probabilities;
  std::vector<double> mc_standard_errors;
};

// Normalizes per-draw mean weights given in log space (row-major draws x
// states). For a single draw, log_sq_means (log of the per-state mean of the
// squared weights) supplies the latent-sampling variance; pass an empty span
// otherwise. Invariant under a common additive offset of every log weight.
// Throws AllWeightsZeroError when every weight is zero.
WeightSummary summarize_log_weights(std::size_t n_draws, std::size_t n_states,
                                    std::span<const double> log_means,
                                    std::span<const double> log_sq_means,
                                    std::size_t latent_draws);

}  // namespace detail

}  // namespace affectbn

#endif  // AFFECTBN_PREDICTIVE_HPP
