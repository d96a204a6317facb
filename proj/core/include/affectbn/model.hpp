#ifndef AFFECTBN_MODEL_HPP
#define AFFECTBN_MODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "affectbn/error.hpp"

namespace affectbn {

enum class CovariateKind { binary, continuous };
enum class NodeFamily { bernoulli_logistic, gaussian_linear };

struct NormalPrior {
  double mean = 0.0;
  double variance = 25.0;
};

struct UniformPrior {
  double lo = 0.0;
  double hi = 30.0;
};

struct Covariate {
  std::string name;
  CovariateKind kind = CovariateKind::continuous;
  std::string unit;  // free text, may be empty
  std::optional<std::pair<double, double>> range;
};

struct CovariateSchema {
  std::vector<Covariate> entries;

  std::size_t size() const { return entries.size(); }
  // Index into entries, or -1 when the name is unknown.
  int index_of(std::string_view name) const;
};

// One conditional in the network. Coefficients are ordered: intercept,
// covariates (as declared here), parents (as declared here).
struct NodeSpec {
  std::string name;
  NodeFamily family = NodeFamily::gaussian_linear;
  std::vector<std::string> parents;
  std::vector<std::string> covariates;
  std::vector<NormalPrior> coefficient_priors;
  std::optional<UniformPrior> sigma_prior;  // gaussian_linear only

  std::size_t coefficient_count() const {
    return 1 + covariates.size() + parents.size();
  }
};

// Validates schema + nodes and returns a topological order of node names,
// ties broken lexicographically. Throws CycleError naming a node on a cycle,
// DanglingReferenceError for unresolved parent/covariate names, and
// ValidationError for structural breaches (duplicate names, prior shape,
// family constraints).
std::vector<std::string> validate(const CovariateSchema& covariates,
                                  const std::vector<NodeSpec>& nodes);

// A validated DAG plus index tables. Immutable after create(); safe to share
// across threads.
class ModelSpec {
 public:
  static ModelSpec create(CovariateSchema covariates,
                          std::vector<NodeSpec> nodes);

  const CovariateSchema& covariates() const { return covariates_; }
  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const NodeSpec& node(int index) const { return nodes_[index]; }
  std::size_t node_count() const { return nodes_.size(); }

  const std::vector<std::string>& topo_order() const { return topo_order_; }
  // Topological order as declaration indices.
  const std::vector<int>& topo_index() const { return topo_index_; }

  int node_index(std::string_view name) const;       // -1 when unknown
  int covariate_index(std::string_view name) const;  // -1 when unknown

  // Per node, covariate column indices / parent node indices in the order the
  // node declares them.
  const std::vector<int>& node_covariate_cols(int node) const {
    return covariate_cols_[node];
  }
  const std::vector<int>& node_parent_nodes(int node) const {
    return parent_nodes_[node];
  }

 private:
  ModelSpec() = default;

  CovariateSchema covariates_;
  std::vector<NodeSpec> nodes_;
  std::vector<std::string> topo_order_;
  std::vector<int> topo_index_;
  std::map<std::string, int, std::less<>> node_index_;
  std::map<std::string, int, std::less<>> covariate_index_;
  std::vector<std::vector<int>> covariate_cols_;
  std::vector<std::vector<int>> parent_nodes_;
};

// Re-runs validation on an already-built model; returns its topological order.
std::vector<std::string> validate(const ModelSpec& model);

// Stable structural hash of a model (names, families, edges, priors,
// declaration order). Used to pair posterior files with the spec that
// produced them.
std::uint64_t fingerprint(const ModelSpec& model);

struct NodeParams {
  std::vector<double> coefficients;  // intercept, covariates, parents
  double sigma = 0.0;                // meaningful for gaussian_linear only
};

// Aligned with ModelSpec node declaration order.
struct ParameterVector {
  std::vector<NodeParams> nodes;
};

// All coefficients zero; gaussian sigmas set to `sigma`.
ParameterVector zero_parameters(const ModelSpec& model, double sigma = 1.0);

// Throws SchemaMismatchError unless params has one entry per node with the
// declared coefficient count.
void check_shape(const ModelSpec& model, const ParameterVector& params);

// Complete-case column store. Covariate columns follow schema order, node
// columns follow declaration order; binary columns hold only 0/1.
struct Dataset {
  std::size_t n_rows = 0;
  std::vector<std::vector<double>> covariate_cols;
  std::vector<std::vector<double>> node_cols;

  static Dataset create(const ModelSpec& model,
                        std::vector<std::vector<double>> covariate_cols,
                        std::vector<std::vector<double>> node_cols);
};

// Name-keyed value assignment for the single-row entry points.
using Assignment = std::map<std::string, double, std::less<>>;

// Overflow-safe 1/(1+exp(-x)).
double logistic(double x);

// log(logistic(x)) without intermediate overflow/underflow.
double log_sigmoid(double x);

double normal_log_pdf(double x, double mean, double sd);

// value * log p + (1-value) * log(1-p) with p = logistic(eta), in log-stable
// form. value must be 0 or 1.
double bernoulli_logit_log_pmf(double value, double eta);

// intercept + dot(coefficients, [covariate values, parent values]) in the
// node's declared order. Throws MissingInputError naming the absent variable.
double linear_predictor(const ModelSpec& model, std::string_view node,
                        const ParameterVector& params,
                        const Assignment& covariates,
                        const Assignment& parent_values);

// Fast variant: covariate values indexed by schema order, node values by
// declaration order. No completeness checks.
double linear_predictor_row(const ModelSpec& model, int node,
                            const ParameterVector& params,
                            const double* covariate_values,
                            const double* node_values);

// Log conditional density of one node at `value` given covariates and parent
// values. DomainError for a non-binary value at a Bernoulli node or for
// sigma <= 0 at a Gaussian node.
double node_log_density(const ModelSpec& model, std::string_view node,
                        const ParameterVector& params, double value,
                        const Assignment& covariates,
                        const Assignment& parent_values);

double node_log_density_row(const ModelSpec& model, int node,
                            const ParameterVector& params, double value,
                            const double* covariate_values,
                            const double* node_values);

// Sum over rows (row-major) of the sum over nodes in topo_order of
// node_log_density. -inf propagates as soon as any factor is -inf.
double log_likelihood(const ModelSpec& model, const ParameterVector& params,
                      const Dataset& data);

// Sum of coefficient normal log densities plus sigma uniform log densities,
// accumulated in topo_order. -inf when any sigma falls outside the open
// interval of its prior.
double log_prior(const ModelSpec& model, const ParameterVector& params);

// log_prior + log_likelihood; a -inf prior short-circuits the likelihood.
double log_unnormalized_posterior(const ModelSpec& model,
                                  const ParameterVector& params,
                                  const Dataset& data);

// Flat addressing of all parameters: coefficients node-major in declaration
// order (named <node>.b0, <node>.b.<covariate|parent>), then sigmas in
// declaration order (named <node>.sigma). This is both the sampler sweep
// order and the posterior CSV column order.
struct ParameterLayout {
  struct Entry {
    int node = 0;
    int coef = -1;  // index into NodeParams::coefficients; -1 for sigma
    std::string name;

    bool is_sigma() const { return coef < 0; }
  };

  std::vector<Entry> entries;

  static ParameterLayout create(const ModelSpec& model);

  std::size_t size() const { return entries.size(); }
  int index_of(std::string_view name) const;  // -1 when unknown

  std::vector<double> flatten(const ParameterVector& params) const;
  ParameterVector unflatten(const ModelSpec& model,
                            const std::vector<double>& flat) const;

  double get(const ParameterVector& params, std::size_t k) const;
  void set(ParameterVector& params, std::size_t k, double value) const;
};

}  // namespace affectbn

#endif  // AFFECTBN_MODEL_HPP
