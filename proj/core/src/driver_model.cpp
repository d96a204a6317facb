#include "affectbn/driver_model.hpp"

#include <cmath>

#include "affectbn/predictive.hpp"
#include "affectbn/rng.hpp"

namespace affectbn {

namespace {

NodeSpec gaussian_node(std::string name, std::vector<std::string> parents) {
  NodeSpec node;
  node.name = std::move(name);
  node.family = NodeFamily::gaussian_linear;
  node.covariates = {"Sex", "Age", "BMI"};
  node.parents = std::move(parents);
  node.coefficient_priors.assign(node.coefficient_count(), NormalPrior{0.0, 25.0});
  node.sigma_prior = UniformPrior{0.0, 30.0};
  return node;
}

NodeSpec bernoulli_root(std::string name) {
  NodeSpec node;
  node.name = std::move(name);
  node.family = NodeFamily::bernoulli_logistic;
  node.covariates = {"Sex", "Age", "BMI"};
  node.coefficient_priors.assign(node.coefficient_count(), NormalPrior{0.0, 25.0});
  return node;
}

}  // namespace

ModelSpec bertha_preset() {
  CovariateSchema schema;
  schema.entries = {
      {"Sex", CovariateKind::binary, "1 if man", std::nullopt},
      {"Age", CovariateKind::continuous, "years", std::pair{24.0, 61.0}},
      {"BMI", CovariateKind::continuous, "", std::pair{17.65, 35.16}},
  };

  std::vector<NodeSpec> nodes;
  nodes.push_back(bernoulli_root("ML"));
  nodes.push_back(bernoulli_root("AF"));
  nodes.push_back(gaussian_node("SDD", {"AF", "ML"}));
  nodes.push_back(gaussian_node("MHR", {"SDD", "AF", "ML"}));
  nodes.push_back(gaussian_node("RLH", {"MHR", "SDD", "AF", "ML"}));
  nodes.push_back(gaussian_node("SRT", {"RLH", "MHR", "SDD"}));
  nodes.push_back(gaussian_node("MNB", {"SRT"}));

  return ModelSpec::create(std::move(schema), std::move(nodes));
}

ParameterVector reference_theta() {
  const ModelSpec model = bertha_preset();
  ParameterVector theta = zero_parameters(model);
  auto set = [&](const char* name, std::vector<double> coef,
                 double sigma = 0.0) {
    const int v = model.node_index(name);
    theta.nodes[v].coefficients = std::move(coef);
    theta.nodes[v].sigma = sigma;
  };

  // Calibrated by forward simulation against the documented node means
  // (SDD 53.17, MHR 73.94, RLH 3.51, SRT 63.07, MNB 15.26); see
  // tests/test_driver_model.cpp for the checks that pin these down.
  set("ML", {2.811, -0.3, -0.045, -0.02});
  set("AF", {1.0154, 0.2, -0.05, 0.03});
  set("SDD", {14.2554, 3.0, -0.25, 2.0, -6.0, -4.0}, 12.0);
  set("MHR", {19.3963, 4.0, 0.15, 2.0, -0.2, 5.0, 3.0}, 8.0);
  set("RLH", {0.8283, 0.3, -0.02, 0.05, 0.04, -0.03, 0.8, 0.6}, 2.5);
  set("SRT", {5.6955, -2.0, 0.5, 0.8, 1.2, -0.2, 0.5}, 14.0);
  set("MNB", {2.5362, 0.5, 0.05, 0.2, 0.08}, 2.2);
  return theta;
}

std::vector<std::vector<double>> synth_covariates(std::size_t n,
                                                  std::uint64_t seed) {
  std::vector<std::vector<double>> cols(3);
  for (auto& col : cols) col.reserve(n);
  Rng rng(seed, 0);
  for (std::size_t r = 0; r < n; ++r) {
    cols[0].push_back(rng.bernoulli(9.0 / 17.0) ? 1.0 : 0.0);
    cols[1].push_back(rng.uniform(24.0, 61.0));
    cols[2].push_back(rng.uniform(17.65, 35.16));
  }
  return cols;
}

Dataset synth_dataset(const ParameterVector& params, std::size_t n,
                      std::uint64_t seed) {
  const ModelSpec model = bertha_preset();
  check_shape(model, params);
  if (!std::isfinite(log_prior(model, params))) {
    throw DomainError(
        "reference parameters are inadmissible (zero prior density)");
  }

  std::vector<std::vector<double>> cov_cols = synth_covariates(n, seed);
  std::vector<std::vector<double>> node_cols(model.node_count());
  for (auto& col : node_cols) col.reserve(n);

  Rng rng(seed, 1);
  std::vector<double> row(model.covariates().size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = cov_cols[c][r];
    const std::vector<double> values =
        ancestral_sample(model, params, row, rng);
    for (std::size_t v = 0; v < values.size(); ++v) {
      node_cols[v].push_back(values[v]);
    }
  }
  return Dataset::create(model, std::move(cov_cols), std::move(node_cols));
}

}  // namespace affectbn
