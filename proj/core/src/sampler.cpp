#include "affectbn/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "affectbn/rng.hpp"

namespace affectbn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.9189385332046727417803297;

// Full recompute of the incremental caches every this many sweeps, so
// floating-point drift in eta/SSR stays bounded. Fixed schedule keeps runs
// reproducible.
constexpr int kRefreshInterval = 1024;

struct DesignColumn {
  const double* values = nullptr;  // length n, transformed when standardizing
  double center = 0.0;
  double scale = 1.0;
};

struct NodeWork {
  NodeFamily family = NodeFamily::gaussian_linear;
  const double* y = nullptr;
  std::size_t n = 0;
  std::vector<DesignColumn> design;  // aligned with coefficients 1..k-1
  UniformPrior sigma_prior;
};

struct Plan {
  const ModelSpec* model = nullptr;
  std::size_t n_rows = 0;
  ParameterLayout layout;
  std::vector<NodeWork> nodes;
  std::vector<double> sigma_init;  // per node; NaN for bernoulli
  // Owns the transformed column storage referenced by DesignColumn::values.
  std::vector<std::vector<double>> storage;
};

struct ColumnStats {
  double center = 0.0;
  double scale = 1.0;
};

ColumnStats column_stats(const std::vector<double>& col) {
  ColumnStats stats;
  const std::size_t n = col.size();
  if (n == 0) return stats;
  double mean = 0.0;
  for (double v : col) mean += v;
  mean /= static_cast<double>(n);
  stats.center = mean;
  if (n >= 2) {
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd > 0.0 && std::isfinite(sd)) stats.scale = sd;
  }
  return stats;
}

double sample_sd(const std::vector<double>& col) {
  if (col.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : col) mean += v;
  mean /= static_cast<double>(col.size());
  double ss = 0.0;
  for (double v : col) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(col.size() - 1));
}

Plan build_plan(const ModelSpec& model, const Dataset& data,
                bool standardize) {
  Plan plan;
  plan.model = &model;
  plan.n_rows = data.n_rows;
  plan.layout = ParameterLayout::create(model);

  const std::size_t n_cov = model.covariates().size();
  const std::size_t n_nodes = model.node_count();

  std::vector<ColumnStats> cov_stats(n_cov);
  std::vector<ColumnStats> node_stats(n_nodes);
  std::vector<const double*> cov_values(n_cov);
  std::vector<const double*> node_values(n_nodes);

  for (std::size_t c = 0; c < n_cov; ++c) {
    cov_values[c] = data.covariate_cols[c].data();
  }
  for (std::size_t v = 0; v < n_nodes; ++v) {
    node_values[v] = data.node_cols[v].data();
  }

  if (standardize) {
    for (std::size_t c = 0; c < n_cov; ++c) {
      cov_stats[c] = column_stats(data.covariate_cols[c]);
      std::vector<double> t(data.n_rows);
      for (std::size_t r = 0; r < data.n_rows; ++r) {
        t[r] = (data.covariate_cols[c][r] - cov_stats[c].center) /
               cov_stats[c].scale;
      }
      plan.storage.push_back(std::move(t));
      cov_values[c] = plan.storage.back().data();
    }
    for (std::size_t v = 0; v < n_nodes; ++v) {
      node_stats[v] = column_stats(data.node_cols[v]);
      std::vector<double> t(data.n_rows);
      for (std::size_t r = 0; r < data.n_rows; ++r) {
        t[r] =
            (data.node_cols[v][r] - node_stats[v].center) / node_stats[v].scale;
      }
      plan.storage.push_back(std::move(t));
      node_values[v] = plan.storage.back().data();
    }
  }

  plan.sigma_init.assign(n_nodes, std::numeric_limits<double>::quiet_NaN());
  plan.nodes.resize(n_nodes);
  for (std::size_t v = 0; v < n_nodes; ++v) {
    const NodeSpec& spec = model.node(static_cast<int>(v));
    NodeWork& work = plan.nodes[v];
    work.family = spec.family;
    work.y = data.node_cols[v].data();
    work.n = data.n_rows;
    for (int c : model.node_covariate_cols(static_cast<int>(v))) {
      work.design.push_back(
          {cov_values[c], cov_stats[c].center, cov_stats[c].scale});
    }
    for (int p : model.node_parent_nodes(static_cast<int>(v))) {
      work.design.push_back(
          {node_values[p], node_stats[p].center, node_stats[p].scale});
    }
    if (spec.family == NodeFamily::gaussian_linear) {
      work.sigma_prior = *spec.sigma_prior;
      const double width = work.sigma_prior.hi - work.sigma_prior.lo;
      const double sd = sample_sd(data.node_cols[v]);
      plan.sigma_init[v] =
          std::clamp(sd, work.sigma_prior.lo + 0.01 * width,
                     work.sigma_prior.lo + 0.99 * width);
    }
  }
  return plan;
}

// Per-chain mutable state over the standardized parameterization. Raw
// intercepts are cached so the prior (stated on raw coefficients) can be
// evaluated in O(1) per proposal.
struct ChainState {
  std::vector<double> flat;           // layout order; sigmas on the raw scale
  std::vector<double> raw_intercept;  // per node
  std::vector<std::vector<double>> eta;
  std::vector<double> bern_loglik;  // per node (bernoulli only)
  std::vector<double> ssr;          // per node (gaussian only)
  std::vector<double> eta_scratch;
};

// Recomputes eta, SSR, Bernoulli log-likelihoods and raw intercepts from the
// current flat parameter values.
void refresh_caches(const Plan& plan, ChainState& state) {
  const std::size_t n_nodes = plan.nodes.size();
  // Gather per-node standardized coefficients from the flat vector.
  std::vector<std::vector<double>> coef(n_nodes);
  for (std::size_t k = 0; k < plan.layout.size(); ++k) {
    const auto& e = plan.layout.entries[k];
    if (e.is_sigma()) continue;
    auto& c = coef[e.node];
    if (c.size() <= static_cast<std::size_t>(e.coef)) c.resize(e.coef + 1);
    c[e.coef] = state.flat[k];
  }
  for (std::size_t v = 0; v < n_nodes; ++v) {
    const NodeWork& work = plan.nodes[v];
    const auto& c = coef[v];
    auto& eta = state.eta[v];
    eta.assign(work.n, c[0]);
    for (std::size_t j = 0; j + 1 < c.size(); ++j) {
      const double* col = work.design[j].values;
      const double b = c[j + 1];
      for (std::size_t r = 0; r < work.n; ++r) eta[r] += b * col[r];
    }
    double raw0 = c[0];
    for (std::size_t j = 0; j + 1 < c.size(); ++j) {
      raw0 -= c[j + 1] * work.design[j].center / work.design[j].scale;
    }
    state.raw_intercept[v] = raw0;

    if (work.family == NodeFamily::gaussian_linear) {
      double ssr = 0.0;
      for (std::size_t r = 0; r < work.n; ++r) {
        const double res = work.y[r] - eta[r];
        ssr += res * res;
      }
      state.ssr[v] = ssr;
    } else {
      double total = 0.0;
      for (std::size_t r = 0; r < work.n; ++r) {
        total += work.y[r] == 1.0 ? log_sigmoid(eta[r]) : log_sigmoid(-eta[r]);
      }
      state.bern_loglik[v] = total;
    }
  }
}

double normal_lpdf_var(double x, double mean, double variance) {
  const double d = x - mean;
  return -kHalfLog2Pi - 0.5 * std::log(variance) - 0.5 * d * d / variance;
}

struct ChainResult {
  Matrix draws;
  std::vector<double> acceptance;
};

ChainResult run_chain(const Plan& plan, const SamplerConfig& config,
                      const std::vector<double>& init_flat,
                      const std::vector<double>& init_scales, int chain_id) {
  const ModelSpec& model = *plan.model;
  const std::size_t n_params = plan.layout.size();
  const int warmup = config.effective_warmup();
  const int kept = config.kept_per_chain();

  Rng rng(config.seed, static_cast<std::uint64_t>(chain_id));

  ChainState state;
  state.flat = init_flat;
  state.raw_intercept.assign(model.node_count(), 0.0);
  state.eta.resize(model.node_count());
  state.bern_loglik.assign(model.node_count(), 0.0);
  state.ssr.assign(model.node_count(), 0.0);
  state.eta_scratch.resize(plan.n_rows);
  refresh_caches(plan, state);

  std::vector<double> log_scale(n_params);
  for (std::size_t k = 0; k < n_params; ++k) {
    log_scale[k] = std::log(init_scales[k]);
  }

  ChainResult result;
  result.draws = Matrix(static_cast<std::size_t>(kept), n_params);
  result.acceptance.assign(n_params, 0.0);

  // Flat index of each node's sigma entry, for quick sigma lookups.
  std::vector<int> sigma_entry(model.node_count(), -1);
  for (std::size_t k = 0; k < n_params; ++k) {
    if (plan.layout.entries[k].is_sigma()) {
      sigma_entry[plan.layout.entries[k].node] = static_cast<int>(k);
    }
  }

  std::size_t kept_count = 0;
  for (int t = 1; t <= config.iterations; ++t) {
    const double gamma = std::pow(static_cast<double>(t), -0.6);
    for (std::size_t k = 0; k < n_params; ++k) {
      const auto& entry = plan.layout.entries[k];
      const NodeWork& work = plan.nodes[entry.node];
      const double scale = std::exp(log_scale[k]);
      const double current = state.flat[k];
      const double proposed = current + scale * rng.normal();

      double log_ratio;
      bool accepted = false;

      if (entry.is_sigma()) {
        const auto& sp = work.sigma_prior;
        if (proposed <= sp.lo || proposed >= sp.hi) {
          log_ratio = kNegInf;  // zero prior density outside the support
        } else {
          const double s0 = current;
          const double s1 = proposed;
          const double n = static_cast<double>(work.n);
          log_ratio = n * (std::log(s0) - std::log(s1)) +
                      state.ssr[entry.node] *
                          (0.5 / (s0 * s0) - 0.5 / (s1 * s1));
        }
        const double u = rng.uniform();
        const double alpha =
            log_ratio >= 0.0 ? 1.0 : std::exp(std::max(log_ratio, -745.0));
        if (u < alpha) {
          accepted = true;
          state.flat[k] = proposed;
        }
        if (config.adapt && t <= warmup) {
          log_scale[k] =
              std::clamp(log_scale[k] + gamma * (alpha - config.target_acceptance),
                         -40.0, 40.0);
        }
      } else {
        const int v = entry.node;
        const NodeSpec& spec = model.node(v);
        const double delta = proposed - current;

        // Prior delta on the raw scale. A slope proposal also shifts the raw
        // intercept when columns are centered.
        double raw0_new = state.raw_intercept[v];
        double prior_delta = 0.0;
        if (entry.coef == 0) {
          raw0_new = state.raw_intercept[v] + delta;
          const auto& p0 = spec.coefficient_priors[0];
          prior_delta = normal_lpdf_var(raw0_new, p0.mean, p0.variance) -
                        normal_lpdf_var(state.raw_intercept[v], p0.mean,
                                        p0.variance);
        } else {
          const DesignColumn& dc = work.design[entry.coef - 1];
          const auto& pj = spec.coefficient_priors[entry.coef];
          const double raw_old = current / dc.scale;
          const double raw_new = proposed / dc.scale;
          prior_delta = normal_lpdf_var(raw_new, pj.mean, pj.variance) -
                        normal_lpdf_var(raw_old, pj.mean, pj.variance);
          raw0_new = state.raw_intercept[v] - delta * dc.center / dc.scale;
          const auto& p0 = spec.coefficient_priors[0];
          prior_delta += normal_lpdf_var(raw0_new, p0.mean, p0.variance) -
                         normal_lpdf_var(state.raw_intercept[v], p0.mean,
                                         p0.variance);
        }

        // Data delta: only this node's factor changes.
        auto& eta = state.eta[v];
        auto& eta_new = state.eta_scratch;
        double data_delta;
        double ssr_new = 0.0;
        double bern_new = 0.0;
        if (entry.coef == 0) {
          for (std::size_t r = 0; r < work.n; ++r) eta_new[r] = eta[r] + delta;
        } else {
          const double* col = work.design[entry.coef - 1].values;
          for (std::size_t r = 0; r < work.n; ++r) {
            eta_new[r] = eta[r] + delta * col[r];
          }
        }
        if (work.family == NodeFamily::gaussian_linear) {
          for (std::size_t r = 0; r < work.n; ++r) {
            const double res = work.y[r] - eta_new[r];
            ssr_new += res * res;
          }
          const double sigma = state.flat[sigma_entry[v]];
          data_delta = (state.ssr[v] - ssr_new) / (2.0 * sigma * sigma);
        } else {
          for (std::size_t r = 0; r < work.n; ++r) {
            bern_new += work.y[r] == 1.0 ? log_sigmoid(eta_new[r])
                                         : log_sigmoid(-eta_new[r]);
          }
          data_delta = bern_new - state.bern_loglik[v];
        }

        log_ratio = prior_delta + data_delta;
        const double u = rng.uniform();
        const double alpha =
            log_ratio >= 0.0 ? 1.0 : std::exp(std::max(log_ratio, -745.0));
        if (u < alpha) {
          accepted = true;
          state.flat[k] = proposed;
          state.raw_intercept[v] = raw0_new;
          std::swap(eta, eta_new);
          if (work.family == NodeFamily::gaussian_linear) {
            state.ssr[v] = ssr_new;
          } else {
            state.bern_loglik[v] = bern_new;
          }
        }
        if (config.adapt && t <= warmup) {
          log_scale[k] =
              std::clamp(log_scale[k] + gamma * (alpha - config.target_acceptance),
                         -40.0, 40.0);
        }
      }

      if (t > warmup && accepted) result.acceptance[k] += 1.0;
    }

    if (t % kRefreshInterval == 0) refresh_caches(plan, state);

    if (t > warmup && (t - warmup) % config.thin == 0) {
      double* row = result.draws.data.data() + kept_count * n_params;
      for (std::size_t k = 0; k < n_params; ++k) {
        const auto& e = plan.layout.entries[k];
        if (e.is_sigma()) {
          row[k] = state.flat[k];
        } else if (e.coef == 0) {
          row[k] = state.raw_intercept[e.node];
        } else {
          row[k] = state.flat[k] / plan.nodes[e.node].design[e.coef - 1].scale;
        }
      }
      ++kept_count;
    }
  }

  const double post_sweeps =
      static_cast<double>(config.iterations - warmup);
  for (auto& a : result.acceptance) a /= post_sweeps;
  return result;
}

}  // namespace

void check_config(const SamplerConfig& config) {
  if (config.chains < 1) throw ConfigError("chains must be >= 1");
  if (config.iterations < 1) throw ConfigError("iterations must be >= 1");
  const int warmup = config.effective_warmup();
  if (warmup < 0 || warmup >= config.iterations) {
    throw ConfigError("warmup must satisfy 0 <= warmup < iterations");
  }
  if (config.thin < 1) throw ConfigError("thin must be >= 1");
  if (!(config.target_acceptance > 0.0 && config.target_acceptance < 1.0)) {
    throw ConfigError("target_acceptance must lie in (0,1)");
  }
  if (config.kept_per_chain() < 1) {
    throw ConfigError("configuration keeps no draws: (iterations - warmup) / "
                      "thin must be >= 1");
  }
}

int PosteriorSample::parameter_index(std::string_view name) const {
  for (std::size_t i = 0; i < parameter_names.size(); ++i) {
    if (parameter_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<double> PosteriorSample::parameter_draws(
    std::string_view name) const {
  const int p = parameter_index(name);
  if (p < 0) {
    throw DiagnosticError("unknown parameter '" + std::string(name) + "'");
  }
  std::vector<double> out;
  out.reserve(total_draws());
  for (const auto& chain : chains) {
    for (std::size_t r = 0; r < chain.rows; ++r) {
      out.push_back(chain.at(r, static_cast<std::size_t>(p)));
    }
  }
  return out;
}

const double* PosteriorSample::draw(std::size_t global_index) const {
  const std::size_t per_chain = kept_per_chain();
  const std::size_t c = global_index / per_chain;
  return chains[c].row(global_index % per_chain);
}

PosteriorSample fit(const ModelSpec& model, const Dataset& data,
                    const SamplerConfig& config, int threads) {
  check_config(config);
  if (data.covariate_cols.size() != model.covariates().size() ||
      data.node_cols.size() != model.node_count()) {
    throw SchemaMismatchError("dataset does not match model schema");
  }

  const Plan plan = build_plan(model, data, config.standardize);
  const std::size_t n_params = plan.layout.size();

  std::vector<double> init_flat(n_params, 0.0);
  for (std::size_t k = 0; k < n_params; ++k) {
    const auto& e = plan.layout.entries[k];
    if (e.is_sigma()) init_flat[k] = plan.sigma_init[e.node];
  }

  {
    const ParameterVector init = plan.layout.unflatten(model, init_flat);
    const double lp = log_unnormalized_posterior(model, init, data);
    if (!std::isfinite(lp)) {
      throw NonFiniteStartError(
          "initial point has non-finite unnormalized posterior");
    }
  }

  std::vector<double> init_scales(n_params, 1.0);
  for (std::size_t k = 0; k < n_params; ++k) {
    const auto& e = plan.layout.entries[k];
    const NodeWork& work = plan.nodes[e.node];
    if (e.is_sigma()) {
      init_scales[k] = 0.1 * (work.sigma_prior.hi - work.sigma_prior.lo);
    } else {
      const auto& prior = model.node(e.node).coefficient_priors[e.coef];
      const double s = e.coef == 0 ? 1.0 : work.design[e.coef - 1].scale;
      init_scales[k] = 0.5 * std::sqrt(prior.variance) * s;
    }
  }

  std::vector<ChainResult> results(config.chains);
  const int workers =
      std::max(1, std::min(threads, config.chains));
  if (workers == 1) {
    for (int c = 0; c < config.chains; ++c) {
      results[c] = run_chain(plan, config, init_flat, init_scales, c);
    }
  } else {
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
      try {
        for (int c; (c = next.fetch_add(1)) < config.chains;) {
          results[c] = run_chain(plan, config, init_flat, init_scales, c);
        }
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }

  PosteriorSample sample;
  sample.parameter_names.reserve(n_params);
  for (const auto& e : plan.layout.entries) sample.parameter_names.push_back(e.name);
  sample.config = config;
  sample.model_fingerprint = fingerprint(model);
  sample.chains.reserve(config.chains);
  sample.acceptance_rates.reserve(config.chains);
  for (auto& r : results) {
    sample.chains.push_back(std::move(r.draws));
    sample.acceptance_rates.push_back(std::move(r.acceptance));
  }
  return sample;
}

namespace {

std::vector<std::vector<double>> chain_columns(const PosteriorSample& sample,
                                               std::string_view parameter) {
  const int p = sample.parameter_index(parameter);
  if (p < 0) {
    throw DiagnosticError("unknown parameter '" + std::string(parameter) +
                          "'");
  }
  std::vector<std::vector<double>> cols;
  cols.reserve(sample.n_chains());
  for (const auto& chain : sample.chains) {
    std::vector<double> col(chain.rows);
    for (std::size_t r = 0; r < chain.rows; ++r) {
      col[r] = chain.at(r, static_cast<std::size_t>(p));
    }
    cols.push_back(std::move(col));
  }
  return cols;
}

double mean_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs, double mean) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

double rhat(const PosteriorSample& sample, std::string_view parameter) {
  const auto cols = chain_columns(sample, parameter);
  const std::size_t m = cols.size();
  if (m < 2) throw DiagnosticError("rhat requires >= 2 chains");
  const std::size_t n = cols.front().size();
  if (n < 2) throw DiagnosticError("rhat requires >= 2 kept draws per chain");

  std::vector<double> means(m);
  double w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean_of(cols[j]);
    const double var_j = sample_variance(cols[j], means[j]);
    if (var_j == 0.0) {
      throw DiagnosticError("rhat undefined: chain " + std::to_string(j) +
                            " is constant for parameter '" +
                            std::string(parameter) + "'");
    }
    w += var_j;
  }
  w /= static_cast<double>(m);
  const double between = sample_variance(means, mean_of(means));  // B/n
  const double n_d = static_cast<double>(n);
  const double var_plus = (n_d - 1.0) / n_d * w + between;
  return std::sqrt(var_plus / w);
}

namespace {

// Geyer initial-positive-sequence ESS for one chain.
double chain_ess(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  const double mean = mean_of(xs);
  double c0 = 0.0;
  for (double x : xs) c0 += (x - mean) * (x - mean);
  c0 /= static_cast<double>(n);
  if (c0 == 0.0) {
    throw DiagnosticError("ess undefined: constant chain");
  }

  auto rho = [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) {
      acc += (xs[i] - mean) * (xs[i + t] - mean);
    }
    return acc / static_cast<double>(n) / c0;
  };

  double tau_sum = 0.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double gamma = rho(2 * k) + rho(2 * k + 1);
    if (gamma <= 0.0) break;
    tau_sum += gamma;
  }
  const double tau = std::max(2.0 * tau_sum - 1.0, 1e-12);
  return static_cast<double>(n) / tau;
}

}  // namespace

double ess(const PosteriorSample& sample, std::string_view parameter) {
  const auto cols = chain_columns(sample, parameter);
  std::size_t total = 0;
  for (const auto& col : cols) total += col.size();
  if (total < 100) {
    throw DiagnosticError("ess requires >= 100 kept draws in total");
  }
  double out = 0.0;
  for (const auto& col : cols) out += chain_ess(col);
  return out;
}

PosteriorSample degenerate_posterior(const ModelSpec& model,
                                     const ParameterVector& params) {
  check_shape(model, params);
  if (!std::isfinite(log_prior(model, params))) {
    throw DomainError(
        "parameter vector is inadmissible (zero prior density)");
  }
  const ParameterLayout layout = ParameterLayout::create(model);
  PosteriorSample sample;
  for (const auto& e : layout.entries) sample.parameter_names.push_back(e.name);
  Matrix draws(1, layout.size());
  const std::vector<double> flat = layout.flatten(params);
  std::copy(flat.begin(), flat.end(), draws.data.begin());
  sample.chains.push_back(std::move(draws));
  sample.acceptance_rates.push_back(
      std::vector<double>(layout.size(), 1.0));
  sample.config.chains = 1;
  sample.config.iterations = 1;
  sample.config.warmup = 0;
  sample.config.thin = 1;
  sample.config.adapt = false;
  sample.model_fingerprint = fingerprint(model);
  return sample;
}

}  // namespace affectbn
