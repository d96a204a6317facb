#include "affectbn/predictive.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace affectbn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp(std::span<const double> xs) {
  double mx = kNegInf;
  for (double x : xs) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

void assign_flat(const ParameterLayout& layout, const double* flat,
                 ParameterVector& params) {
  for (std::size_t k = 0; k < layout.size(); ++k) {
    layout.set(params, k, flat[k]);
  }
}

}  // namespace

std::string QueryResult::state_label(std::size_t state) const {
  std::string label;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    if (j > 0) label += ',';
    label += targets[j];
    label += '=';
    label += target_value(state, j) ? '1' : '0';
  }
  return label;
}

std::vector<double> ancestral_sample(const ModelSpec& model,
                                     const ParameterVector& params,
                                     std::span<const double> covariate_row,
                                     Rng& rng) {
  if (covariate_row.size() != model.covariates().size()) {
    throw SchemaMismatchError("covariate row has wrong length");
  }
  check_shape(model, params);
  std::vector<double> values(model.node_count(), 0.0);
  for (int v : model.topo_index()) {
    const double eta = linear_predictor_row(model, v, params,
                                            covariate_row.data(), values.data());
    if (model.node(v).family == NodeFamily::bernoulli_logistic) {
      values[v] = rng.bernoulli(logistic(eta)) ? 1.0 : 0.0;
    } else {
      const double sigma = params.nodes[v].sigma;
      if (!(sigma > 0.0)) {
        throw DomainError("node '" + model.node(v).name +
                          "': sigma must be > 0");
      }
      values[v] = rng.normal(eta, sigma);
    }
  }
  return values;
}

std::vector<std::vector<double>> posterior_predictive(
    const ModelSpec& model, const PosteriorSample& posterior,
    std::span<const double> covariate_row, std::size_t n_per_draw, Rng& rng) {
  if (posterior.model_fingerprint != fingerprint(model)) {
    throw FingerprintMismatchError(
        "posterior sample was drawn under a different model");
  }
  const ParameterLayout layout = ParameterLayout::create(model);
  ParameterVector params = zero_parameters(model);
  std::vector<std::vector<double>> out;
  out.reserve(posterior.total_draws() * n_per_draw);
  for (std::size_t m = 0; m < posterior.total_draws(); ++m) {
    assign_flat(layout, posterior.draw(m), params);
    for (std::size_t j = 0; j < n_per_draw; ++j) {
      out.push_back(ancestral_sample(model, params, covariate_row, rng));
    }
  }
  return out;
}

namespace detail {

WeightSummary summarize_log_weights(std::size_t n_draws, std::size_t n_states,
                                    std::span<const double> log_means,
                                    std::span<const double> log_sq_means,
                                    std::size_t latent_draws) {
  double shift = kNegInf;
  for (double lw : log_means) shift = std::max(shift, lw);
  if (!(shift > kNegInf)) {
    throw AllWeightsZeroError(
        "evidence has zero probability under every posterior draw");
  }

  std::vector<double> state_sum(n_states, 0.0);
  std::vector<double> draw_total(n_draws, 0.0);
  for (std::size_t m = 0; m < n_draws; ++m) {
    for (std::size_t s = 0; s < n_states; ++s) {
      const double w = std::exp(log_means[m * n_states + s] - shift);
      state_sum[s] += w;
      draw_total[m] += w;
    }
  }
  const double total = std::accumulate(state_sum.begin(), state_sum.end(), 0.0);

  WeightSummary summary;
  summary.probabilities.resize(n_states);
  summary.mc_standard_errors.assign(n_states, 0.0);
  for (std::size_t s = 0; s < n_states; ++s) {
    summary.probabilities[s] = state_sum[s] / total;
  }

  if (n_draws >= 2) {
    // Ratio-estimator error over per-draw mean weights.
    const double mean_total = total / static_cast<double>(n_draws);
    for (std::size_t s = 0; s < n_states; ++s) {
      const double p = summary.probabilities[s];
      double ss = 0.0;
      for (std::size_t m = 0; m < n_draws; ++m) {
        const double d =
            std::exp(log_means[m * n_states + s] - shift) - p * draw_total[m];
        ss += d * d;
      }
      summary.mc_standard_errors[s] =
          std::sqrt(ss / (static_cast<double>(n_draws) *
                          static_cast<double>(n_draws - 1))) /
          mean_total;
    }
  } else if (!log_sq_means.empty() && latent_draws >= 2) {
    // Single draw: only the latent-sampling noise is estimable. Latent
    // samples are independent across states, so the delta method needs
    // variances only.
    std::vector<double> var_mean(n_states, 0.0);
    for (std::size_t s = 0; s < n_states; ++s) {
      const double mean_sq = std::exp(log_sq_means[s] - 2.0 * shift);
      const double mean = state_sum[s];
      var_mean[s] = std::max(0.0, (mean_sq - mean * mean) /
                                      static_cast<double>(latent_draws - 1));
    }
    for (std::size_t s = 0; s < n_states; ++s) {
      const double p = summary.probabilities[s];
      double var = (1.0 - p) * (1.0 - p) * var_mean[s];
      for (std::size_t t = 0; t < n_states; ++t) {
        if (t != s) var += p * p * var_mean[t];
      }
      summary.mc_standard_errors[s] = std::sqrt(var) / total;
    }
  }
  return summary;
}

}  // namespace detail

namespace {

enum class Role { latent, observed, target };

struct QueryPlan {
  std::vector<Role> roles;
  std::vector<double> observed;   // value per node when observed
  std::vector<int> target_bit;    // bit index per node when target
  std::vector<double> covariate_row;
  std::vector<std::size_t> draw_indices;
};

QueryPlan prepare_query(const ModelSpec& model,
                        const PosteriorSample& posterior,
                        const Evidence& evidence,
                        const std::vector<std::string>& targets,
                        const QueryOptions& options) {
  if (targets.empty()) {
    throw DomainError("query requires at least one target node");
  }
  if (targets.size() > 16) {
    throw DomainError("too many target nodes (limit 16)");
  }
  if (options.latent_draws < 1) {
    throw DomainError("latent_draws must be >= 1");
  }
  if (posterior.model_fingerprint != fingerprint(model)) {
    throw FingerprintMismatchError(
        "posterior sample was drawn under a different model");
  }
  if (posterior.total_draws() == 0) {
    throw DomainError("posterior sample holds no draws");
  }

  QueryPlan plan;
  plan.roles.assign(model.node_count(), Role::latent);
  plan.observed.assign(model.node_count(), 0.0);
  plan.target_bit.assign(model.node_count(), -1);

  for (std::size_t j = 0; j < targets.size(); ++j) {
    const int v = model.node_index(targets[j]);
    if (v < 0) {
      throw DanglingReferenceError("unknown target node '" + targets[j] + "'");
    }
    if (model.node(v).family != NodeFamily::bernoulli_logistic) {
      throw DomainError("target node '" + targets[j] +
                        "' is not a discrete (bernoulli-logistic) node");
    }
    if (plan.roles[v] == Role::target) {
      throw DomainError("duplicate target node '" + targets[j] + "'");
    }
    if (evidence.node_values.count(targets[j])) {
      throw TargetObservedError("target node '" + targets[j] +
                                "' is present in the evidence");
    }
    plan.roles[v] = Role::target;
    plan.target_bit[v] = static_cast<int>(j);
  }

  for (const auto& [name, value] : evidence.node_values) {
    const int v = model.node_index(name);
    if (v < 0) {
      throw DanglingReferenceError("unknown evidence node '" + name + "'");
    }
    if (!std::isfinite(value)) {
      throw DomainError("evidence value for '" + name + "' is not finite");
    }
    if (model.node(v).family == NodeFamily::bernoulli_logistic &&
        value != 0.0 && value != 1.0) {
      throw DomainError("evidence for bernoulli node '" + name +
                        "' must be 0 or 1");
    }
    plan.roles[v] = Role::observed;
    plan.observed[v] = value;
  }

  plan.covariate_row.resize(model.covariates().size());
  for (std::size_t c = 0; c < model.covariates().size(); ++c) {
    const auto& cov = model.covariates().entries[c];
    const auto it = evidence.covariate_values.find(cov.name);
    if (it == evidence.covariate_values.end()) {
      throw MissingInputError("evidence is missing covariate '" + cov.name +
                              "'");
    }
    if (!std::isfinite(it->second)) {
      throw DomainError("covariate '" + cov.name + "' is not finite");
    }
    if (cov.kind == CovariateKind::binary && it->second != 0.0 &&
        it->second != 1.0) {
      throw DomainError("binary covariate '" + cov.name + "' must be 0 or 1");
    }
    plan.covariate_row[c] = it->second;
  }
  for (const auto& [name, value] : evidence.covariate_values) {
    (void)value;
    if (model.covariate_index(name) < 0) {
      throw DanglingReferenceError("unknown evidence covariate '" + name +
                                   "'");
    }
  }

  const std::size_t total = posterior.total_draws();
  const std::size_t want =
      options.max_draws == 0 ? total : std::min(options.max_draws, total);
  plan.draw_indices.resize(want);
  for (std::size_t j = 0; j < want; ++j) {
    plan.draw_indices[j] = j * total / want;
  }
  return plan;
}

}  // namespace

QueryResult query(const ModelSpec& model, const PosteriorSample& posterior,
                  const Evidence& evidence,
                  const std::vector<std::string>& targets,
                  const QueryOptions& options) {
  const QueryPlan plan =
      prepare_query(model, posterior, evidence, targets, options);

  const std::size_t n_states = std::size_t{1} << targets.size();
  const std::size_t n_draws = plan.draw_indices.size();
  const std::size_t latent_draws = options.latent_draws;
  const double log_l = std::log(static_cast<double>(latent_draws));

  const ParameterLayout layout = ParameterLayout::create(model);
  ParameterVector params = zero_parameters(model);

  std::vector<double> log_means(n_draws * n_states);
  std::vector<double> log_sq_means;
  if (n_draws == 1) log_sq_means.assign(n_states, kNegInf);

  std::vector<double> node_values(model.node_count());
  std::vector<double> sample_logw(latent_draws);
  std::vector<double> sample_logw2(latent_draws);

  for (std::size_t j = 0; j < n_draws; ++j) {
    assign_flat(layout, posterior.draw(plan.draw_indices[j]), params);
    Rng rng(options.seed, j);
    for (std::size_t s = 0; s < n_states; ++s) {
      for (std::size_t l = 0; l < latent_draws; ++l) {
        double logw = 0.0;
        for (int v : model.topo_index()) {
          switch (plan.roles[v]) {
            case Role::target: {
              const double value =
                  static_cast<double>((s >> plan.target_bit[v]) & 1u);
              node_values[v] = value;
              logw += node_log_density_row(model, v, params, value,
                                           plan.covariate_row.data(),
                                           node_values.data());
              break;
            }
            case Role::observed: {
              const double value = plan.observed[v];
              node_values[v] = value;
              logw += node_log_density_row(model, v, params, value,
                                           plan.covariate_row.data(),
                                           node_values.data());
              break;
            }
            case Role::latent: {
              const double eta = linear_predictor_row(
                  model, v, params, plan.covariate_row.data(),
                  node_values.data());
              if (model.node(v).family == NodeFamily::bernoulli_logistic) {
                node_values[v] = rng.bernoulli(logistic(eta)) ? 1.0 : 0.0;
              } else {
                node_values[v] = rng.normal(eta, params.nodes[v].sigma);
              }
              break;
            }
          }
        }
        sample_logw[l] = logw;
        if (n_draws == 1) sample_logw2[l] = 2.0 * logw;
      }
      log_means[j * n_states + s] = logsumexp(sample_logw) - log_l;
      if (n_draws == 1) {
        log_sq_means[s] = logsumexp(sample_logw2) - log_l;
      }
    }
  }

  detail::WeightSummary summary = detail::summarize_log_weights(
      n_draws, n_states, log_means, log_sq_means, latent_draws);

  QueryResult result;
  result.targets = targets;
  result.probabilities = std::move(summary.probabilities);
  result.mc_standard_errors = std::move(summary.mc_standard_errors);
  result.draws_used = n_draws;
  result.latent_draws_per_state = latent_draws;
  return result;
}

std::uint64_t sweep_point_seed(std::uint64_t master_seed,
                               std::uint64_t canonical_index) {
  return Rng::mix64(Rng::mix64(master_seed) ^ Rng::mix64(canonical_index));
}

SweepResult sweep(const ModelSpec& model, const PosteriorSample& posterior,
                  const Evidence& fixed_evidence,
                  const std::vector<SweepAxis>& grid,
                  const std::vector<std::string>& targets,
                  const QueryOptions& options, int threads) {
  for (const auto& axis : grid) {
    if (axis.values.empty()) {
      throw DomainError("grid axis '" + axis.name + "' has no values");
    }
    const bool is_node = model.node_index(axis.name) >= 0;
    const bool is_covariate = model.covariate_index(axis.name) >= 0;
    if (!is_node && !is_covariate) {
      throw DanglingReferenceError("unknown grid variable '" + axis.name +
                                   "'");
    }
    if (fixed_evidence.node_values.count(axis.name) ||
        fixed_evidence.covariate_values.count(axis.name)) {
      throw DomainError("grid variable '" + axis.name +
                        "' also appears in the fixed evidence");
    }
  }
  for (std::size_t a = 0; a < grid.size(); ++a) {
    for (std::size_t b = a + 1; b < grid.size(); ++b) {
      if (grid[a].name == grid[b].name) {
        throw DomainError("duplicate grid variable '" + grid[a].name + "'");
      }
    }
  }

  // Canonical (name-sorted) axis order fixes each point's RNG stream
  // independently of how the caller ordered the axes.
  std::vector<std::size_t> canonical(grid.size());
  std::iota(canonical.begin(), canonical.end(), 0);
  std::sort(canonical.begin(), canonical.end(),
            [&](std::size_t a, std::size_t b) {
              return grid[a].name < grid[b].name;
            });
  std::vector<std::uint64_t> canonical_stride(grid.size(), 1);
  for (std::size_t i = canonical.size(); i-- > 1;) {
    canonical_stride[i - 1] =
        canonical_stride[i] * grid[canonical[i]].values.size();
  }

  std::size_t n_points = 1;
  for (const auto& axis : grid) n_points *= axis.values.size();

  SweepResult result;
  result.axes = grid;
  result.points.resize(n_points);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    try {
      for (std::size_t point; (point = next.fetch_add(1)) < n_points;) {
        // Decompose in user axis order, first axis slowest.
        std::vector<std::size_t> idx(grid.size());
        std::size_t rem = point;
        for (std::size_t a = grid.size(); a-- > 0;) {
          idx[a] = rem % grid[a].values.size();
          rem /= grid[a].values.size();
        }
        std::uint64_t canonical_index = 0;
        for (std::size_t i = 0; i < canonical.size(); ++i) {
          canonical_index += idx[canonical[i]] * canonical_stride[i];
        }

        Evidence evidence = fixed_evidence;
        SweepPoint& out = result.points[point];
        out.coordinates.resize(grid.size());
        for (std::size_t a = 0; a < grid.size(); ++a) {
          const double value = grid[a].values[idx[a]];
          out.coordinates[a] = value;
          if (model.covariate_index(grid[a].name) >= 0) {
            evidence.covariate_values[grid[a].name] = value;
          } else {
            evidence.node_values[grid[a].name] = value;
          }
        }
        QueryOptions point_options = options;
        point_options.seed = sweep_point_seed(options.seed, canonical_index);
        out.result = query(model, posterior, evidence, targets, point_options);
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };

  const int workers = std::max(
      1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(
                                    n_points, 1))));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);

  return result;
}

}  // namespace affectbn
