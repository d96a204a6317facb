#include "support/random_models.hpp"

#include <string>

namespace testsupport {

using namespace affectbn;

RandomModel random_dag(Rng& rng, std::size_t max_nodes, bool bernoulli_only,
                       std::size_t max_covariates) {
  const std::size_t n_nodes = 1 + rng.next_u64() % max_nodes;
  const std::size_t n_cov =
      max_covariates == 0 ? 0 : rng.next_u64() % (max_covariates + 1);

  CovariateSchema schema;
  for (std::size_t c = 0; c < n_cov; ++c) {
    Covariate cov;
    cov.name = "x" + std::to_string(c);
    cov.kind = rng.bernoulli(0.5) ? CovariateKind::binary
                                  : CovariateKind::continuous;
    schema.entries.push_back(std::move(cov));
  }

  // Hidden rank permutation; edges only run from lower to higher rank.
  std::vector<std::size_t> rank(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) rank[i] = i;
  for (std::size_t i = n_nodes; i > 1; --i) {
    std::swap(rank[i - 1], rank[rng.next_u64() % i]);
  }

  std::vector<NodeSpec> nodes(n_nodes);
  for (std::size_t v = 0; v < n_nodes; ++v) {
    nodes[v].name = "N" + std::to_string(v);
    nodes[v].family = bernoulli_only || rng.bernoulli(0.5)
                          ? NodeFamily::bernoulli_logistic
                          : NodeFamily::gaussian_linear;
    for (std::size_t u = 0; u < n_nodes; ++u) {
      if (rank[u] < rank[v] && rng.bernoulli(0.5)) {
        nodes[v].parents.push_back("N" + std::to_string(u));
      }
    }
    for (std::size_t c = 0; c < n_cov; ++c) {
      if (rng.bernoulli(0.5)) {
        nodes[v].covariates.push_back("x" + std::to_string(c));
      }
    }
    nodes[v].coefficient_priors.assign(nodes[v].coefficient_count(),
                                       NormalPrior{0.0, 25.0});
    if (nodes[v].family == NodeFamily::gaussian_linear) {
      nodes[v].sigma_prior = UniformPrior{0.0, 30.0};
    }
  }

  RandomModel out{ModelSpec::create(std::move(schema), std::move(nodes)), {}};
  out.params = zero_parameters(out.model);
  for (std::size_t v = 0; v < out.model.node_count(); ++v) {
    for (double& coef : out.params.nodes[v].coefficients) {
      coef = 0.8 * rng.normal();
    }
    if (out.model.node(static_cast<int>(v)).family ==
        NodeFamily::gaussian_linear) {
      out.params.nodes[v].sigma = rng.uniform(0.5, 4.0);
    }
  }
  return out;
}

}  // namespace testsupport
