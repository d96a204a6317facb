#include "affectbn/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

namespace affectbn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.9189385332046727417803297;  // 0.5*ln(2*pi)

std::string quoted(std::string_view s) {
  std::string out = "'";
  out += s;
  out += "'";
  return out;
}

}  // namespace

int CovariateSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> validate(const CovariateSchema& covariates,
                                  const std::vector<NodeSpec>& nodes) {
  // Covariate schema checks.
  std::set<std::string> covariate_names;
  for (const auto& cov : covariates.entries) {
    if (cov.name.empty()) {
      throw ValidationError("covariate with empty name");
    }
    if (!covariate_names.insert(cov.name).second) {
      throw ValidationError("duplicate covariate name " + quoted(cov.name));
    }
    if (cov.range && !(cov.range->first < cov.range->second)) {
      throw ValidationError("covariate " + quoted(cov.name) +
                            ": range lo must be < hi");
    }
  }

  if (nodes.empty()) {
    throw ValidationError("model has no nodes");
  }

  std::map<std::string, int, std::less<>> node_index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    if (node.name.empty()) {
      throw ValidationError("node with empty name");
    }
    if (!node_index.emplace(node.name, static_cast<int>(i)).second) {
      throw ValidationError("duplicate node name " + quoted(node.name));
    }
    if (covariate_names.count(node.name)) {
      throw ValidationError("name " + quoted(node.name) +
                            " used for both a node and a covariate");
    }
  }

  for (const auto& node : nodes) {
    std::set<std::string_view> seen_parents;
    for (const auto& parent : node.parents) {
      if (parent == node.name) {
        throw ValidationError("node " + quoted(node.name) +
                              " lists itself as a parent");
      }
      if (!node_index.count(parent)) {
        throw DanglingReferenceError("node " + quoted(node.name) +
                                     ": unknown parent " + quoted(parent));
      }
      if (!seen_parents.insert(parent).second) {
        throw ValidationError("node " + quoted(node.name) +
                              ": duplicate parent " + quoted(parent));
      }
    }
    std::set<std::string_view> seen_covariates;
    for (const auto& cov : node.covariates) {
      if (!covariate_names.count(std::string(cov))) {
        throw DanglingReferenceError("node " + quoted(node.name) +
                                     ": unknown covariate " + quoted(cov));
      }
      if (!seen_covariates.insert(cov).second) {
        throw ValidationError("node " + quoted(node.name) +
                              ": duplicate covariate " + quoted(cov));
      }
    }
    if (node.coefficient_priors.size() != node.coefficient_count()) {
      std::ostringstream msg;
      msg << "node '" << node.name << "': expected "
          << node.coefficient_count() << " coefficient priors, got "
          << node.coefficient_priors.size();
      throw ValidationError(msg.str());
    }
    for (const auto& prior : node.coefficient_priors) {
      if (!(prior.variance > 0.0) || !std::isfinite(prior.variance) ||
          !std::isfinite(prior.mean)) {
        throw ValidationError("node " + quoted(node.name) +
                              ": coefficient prior variance must be finite "
                              "and > 0");
      }
    }
    if (node.family == NodeFamily::bernoulli_logistic) {
      if (node.sigma_prior) {
        throw ValidationError("node " + quoted(node.name) +
                              ": bernoulli-logistic nodes carry no "
                              "sigma_prior");
      }
    } else {
      if (!node.sigma_prior) {
        throw ValidationError("node " + quoted(node.name) +
                              ": gaussian-linear nodes require a sigma_prior");
      }
      const auto& sp = *node.sigma_prior;
      if (!(sp.lo >= 0.0) || !(sp.hi > sp.lo) || !std::isfinite(sp.hi)) {
        throw ValidationError("node " + quoted(node.name) +
                              ": sigma_prior requires 0 <= lo < hi");
      }
    }
  }

  // Kahn's algorithm with a lexicographic min-heap so the order is
  // deterministic under node permutation.
  const std::size_t n = nodes.size();
  std::vector<int> remaining_parents(n, 0);
  std::vector<std::vector<int>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    remaining_parents[i] = static_cast<int>(nodes[i].parents.size());
    for (const auto& parent : nodes[i].parents) {
      children[node_index.find(parent)->second].push_back(
          static_cast<int>(i));
    }
  }

  auto by_name = [&](int a, int b) { return nodes[a].name > nodes[b].name; };
  std::priority_queue<int, std::vector<int>, decltype(by_name)> ready(by_name);
  for (std::size_t i = 0; i < n; ++i) {
    if (remaining_parents[i] == 0) ready.push(static_cast<int>(i));
  }

  std::vector<std::string> order;
  order.reserve(n);
  std::vector<bool> placed(n, false);
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    placed[v] = true;
    order.push_back(nodes[v].name);
    for (int child : children[v]) {
      if (--remaining_parents[child] == 0) ready.push(child);
    }
  }

  if (order.size() != n) {
    // Walk parent links inside the unplaced set until a node repeats; that
    // node sits on a cycle.
    int v = 0;
    while (placed[v]) ++v;
    std::vector<bool> visited(n, false);
    while (!visited[v]) {
      visited[v] = true;
      for (const auto& parent : nodes[v].parents) {
        const int p = node_index.find(parent)->second;
        if (!placed[p]) {
          v = p;
          break;
        }
      }
    }
    throw CycleError("node " + quoted(nodes[v].name) + " lies on a cycle");
  }
  return order;
}

ModelSpec ModelSpec::create(CovariateSchema covariates,
                            std::vector<NodeSpec> nodes) {
  ModelSpec model;
  model.topo_order_ = validate(covariates, nodes);
  model.covariates_ = std::move(covariates);
  model.nodes_ = std::move(nodes);

  for (std::size_t i = 0; i < model.nodes_.size(); ++i) {
    model.node_index_.emplace(model.nodes_[i].name, static_cast<int>(i));
  }
  for (std::size_t i = 0; i < model.covariates_.entries.size(); ++i) {
    model.covariate_index_.emplace(model.covariates_.entries[i].name,
                                   static_cast<int>(i));
  }
  model.topo_index_.reserve(model.topo_order_.size());
  for (const auto& name : model.topo_order_) {
    model.topo_index_.push_back(model.node_index(name));
  }
  model.covariate_cols_.resize(model.nodes_.size());
  model.parent_nodes_.resize(model.nodes_.size());
  for (std::size_t i = 0; i < model.nodes_.size(); ++i) {
    for (const auto& cov : model.nodes_[i].covariates) {
      model.covariate_cols_[i].push_back(model.covariate_index(cov));
    }
    for (const auto& parent : model.nodes_[i].parents) {
      model.parent_nodes_[i].push_back(model.node_index(parent));
    }
  }
  return model;
}

int ModelSpec::node_index(std::string_view name) const {
  const auto it = node_index_.find(name);
  return it == node_index_.end() ? -1 : it->second;
}

int ModelSpec::covariate_index(std::string_view name) const {
  const auto it = covariate_index_.find(name);
  return it == covariate_index_.end() ? -1 : it->second;
}

std::vector<std::string> validate(const ModelSpec& model) {
  return validate(model.covariates(), model.nodes());
}

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x0000'0100'0000'01b3ULL;
    }
  }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf2'9ce4'8422'2325ULL;
};

}  // namespace

std::uint64_t fingerprint(const ModelSpec& model) {
  Fnv1a h;
  h.u64(model.covariates().size());
  for (const auto& cov : model.covariates().entries) {
    h.str(cov.name);
    h.u64(cov.kind == CovariateKind::binary ? 1 : 2);
    h.str(cov.unit);
    h.u64(cov.range ? 1 : 0);
    if (cov.range) {
      h.f64(cov.range->first);
      h.f64(cov.range->second);
    }
  }
  h.u64(model.node_count());
  for (const auto& node : model.nodes()) {
    h.str(node.name);
    h.u64(node.family == NodeFamily::bernoulli_logistic ? 1 : 2);
    h.u64(node.parents.size());
    for (const auto& parent : node.parents) h.str(parent);
    h.u64(node.covariates.size());
    for (const auto& cov : node.covariates) h.str(cov);
    h.u64(node.coefficient_priors.size());
    for (const auto& prior : node.coefficient_priors) {
      h.f64(prior.mean);
      h.f64(prior.variance);
    }
    h.u64(node.sigma_prior ? 1 : 0);
    if (node.sigma_prior) {
      h.f64(node.sigma_prior->lo);
      h.f64(node.sigma_prior->hi);
    }
  }
  return h.value();
}

ParameterVector zero_parameters(const ModelSpec& model, double sigma) {
  ParameterVector params;
  params.nodes.resize(model.node_count());
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    params.nodes[i].coefficients.assign(model.node(i).coefficient_count(),
                                        0.0);
    params.nodes[i].sigma = sigma;
  }
  return params;
}

void check_shape(const ModelSpec& model, const ParameterVector& params) {
  if (params.nodes.size() != model.node_count()) {
    throw SchemaMismatchError("parameter vector has " +
                              std::to_string(params.nodes.size()) +
                              " node entries, model has " +
                              std::to_string(model.node_count()));
  }
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    if (params.nodes[i].coefficients.size() !=
        model.node(i).coefficient_count()) {
      throw SchemaMismatchError(
          "node " + quoted(model.node(i).name) + ": expected " +
          std::to_string(model.node(i).coefficient_count()) +
          " coefficients, got " +
          std::to_string(params.nodes[i].coefficients.size()));
    }
  }
}

Dataset Dataset::create(const ModelSpec& model,
                        std::vector<std::vector<double>> covariate_cols,
                        std::vector<std::vector<double>> node_cols) {
  if (covariate_cols.size() != model.covariates().size() ||
      node_cols.size() != model.node_count()) {
    throw SchemaMismatchError("dataset column count does not match model");
  }
  Dataset data;
  data.n_rows = node_cols.empty() ? 0 : node_cols.front().size();
  for (const auto& col : covariate_cols) {
    if (col.size() != data.n_rows) {
      throw SchemaMismatchError("dataset columns have unequal lengths");
    }
  }
  for (const auto& col : node_cols) {
    if (col.size() != data.n_rows) {
      throw SchemaMismatchError("dataset columns have unequal lengths");
    }
  }

  auto check_column = [&](const std::vector<double>& col,
                          const std::string& name, bool binary) {
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (!std::isfinite(col[r])) {
        throw MissingValueError("column " + quoted(name) + ", row " +
                                std::to_string(r) +
                                ": missing or non-finite value");
      }
      if (binary && col[r] != 0.0 && col[r] != 1.0) {
        throw NonBinaryValueError("column " + quoted(name) + ", row " +
                                  std::to_string(r) +
                                  ": binary column holds non-0/1 value");
      }
    }
  };
  for (std::size_t c = 0; c < covariate_cols.size(); ++c) {
    const auto& cov = model.covariates().entries[c];
    check_column(covariate_cols[c], cov.name,
                 cov.kind == CovariateKind::binary);
  }
  for (std::size_t c = 0; c < node_cols.size(); ++c) {
    const auto& node = model.node(static_cast<int>(c));
    check_column(node_cols[c], node.name,
                 node.family == NodeFamily::bernoulli_logistic);
  }

  data.covariate_cols = std::move(covariate_cols);
  data.node_cols = std::move(node_cols);
  return data;
}

double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x <= 0.0) {
    return x - std::log1p(std::exp(x));
  }
  return -std::log1p(std::exp(-x));
}

double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

double bernoulli_logit_log_pmf(double value, double eta) {
  if (value == 1.0) return log_sigmoid(eta);
  if (value == 0.0) return log_sigmoid(-eta);
  throw DomainError("bernoulli value must be 0 or 1, got " +
                    std::to_string(value));
}

namespace {

double lookup(const Assignment& values, const std::string& name) {
  const auto it = values.find(name);
  if (it == values.end()) {
    throw MissingInputError("missing value for " + quoted(name));
  }
  return it->second;
}

int require_node(const ModelSpec& model, std::string_view name) {
  const int index = model.node_index(name);
  if (index < 0) {
    throw DanglingReferenceError("unknown node " + quoted(name));
  }
  return index;
}

}  // namespace

double linear_predictor(const ModelSpec& model, std::string_view node,
                        const ParameterVector& params,
                        const Assignment& covariates,
                        const Assignment& parent_values) {
  const int v = require_node(model, node);
  check_shape(model, params);
  const NodeSpec& spec = model.node(v);
  const auto& coef = params.nodes[v].coefficients;
  double acc = coef[0];
  std::size_t k = 1;
  for (const auto& name : spec.covariates) {
    acc += coef[k++] * lookup(covariates, name);
  }
  for (const auto& name : spec.parents) {
    acc += coef[k++] * lookup(parent_values, name);
  }
  return acc;
}

double linear_predictor_row(const ModelSpec& model, int node,
                            const ParameterVector& params,
                            const double* covariate_values,
                            const double* node_values) {
  const auto& coef = params.nodes[node].coefficients;
  const auto& cov_cols = model.node_covariate_cols(node);
  const auto& parent_nodes = model.node_parent_nodes(node);
  double acc = coef[0];
  std::size_t k = 1;
  for (int c : cov_cols) acc += coef[k++] * covariate_values[c];
  for (int p : parent_nodes) acc += coef[k++] * node_values[p];
  return acc;
}

namespace {

double node_log_density_at(const ModelSpec& model, int node,
                           const ParameterVector& params, double value,
                           double eta) {
  const NodeSpec& spec = model.node(node);
  if (spec.family == NodeFamily::bernoulli_logistic) {
    return bernoulli_logit_log_pmf(value, eta);
  }
  const double sigma = params.nodes[node].sigma;
  if (!(sigma > 0.0)) {
    throw DomainError("node " + quoted(spec.name) + ": sigma must be > 0");
  }
  return normal_log_pdf(value, eta, sigma);
}

}  // namespace

double node_log_density(const ModelSpec& model, std::string_view node,
                        const ParameterVector& params, double value,
                        const Assignment& covariates,
                        const Assignment& parent_values) {
  const int v = require_node(model, node);
  const double eta =
      linear_predictor(model, node, params, covariates, parent_values);
  return node_log_density_at(model, v, params, value, eta);
}

double node_log_density_row(const ModelSpec& model, int node,
                            const ParameterVector& params, double value,
                            const double* covariate_values,
                            const double* node_values) {
  const double eta =
      linear_predictor_row(model, node, params, covariate_values, node_values);
  return node_log_density_at(model, node, params, value, eta);
}

double log_likelihood(const ModelSpec& model, const ParameterVector& params,
                      const Dataset& data) {
  check_shape(model, params);
  if (data.covariate_cols.size() != model.covariates().size() ||
      data.node_cols.size() != model.node_count()) {
    throw SchemaMismatchError("dataset does not match model schema");
  }

  const std::size_t n_cov = data.covariate_cols.size();
  const std::size_t n_nodes = data.node_cols.size();
  std::vector<double> cov_row(n_cov);
  std::vector<double> node_row(n_nodes);

  // Row-major with per-row subtotals, nodes in topo order: the summation
  // order is part of the contract (bit-reproducible runs, exact
  // factorization and row-doubling properties).
  double total = 0.0;
  for (std::size_t r = 0; r < data.n_rows; ++r) {
    for (std::size_t c = 0; c < n_cov; ++c) cov_row[c] = data.covariate_cols[c][r];
    for (std::size_t c = 0; c < n_nodes; ++c) node_row[c] = data.node_cols[c][r];
    double row_total = 0.0;
    for (int v : model.topo_index()) {
      row_total += node_log_density_row(model, v, params, node_row[v],
                                        cov_row.data(), node_row.data());
      if (row_total == kNegInf) return kNegInf;
    }
    total += row_total;
  }
  return total;
}

double log_prior(const ModelSpec& model, const ParameterVector& params) {
  check_shape(model, params);
  double total = 0.0;
  for (int v : model.topo_index()) {
    const NodeSpec& spec = model.node(v);
    const auto& coef = params.nodes[v].coefficients;
    for (std::size_t k = 0; k < coef.size(); ++k) {
      const auto& prior = spec.coefficient_priors[k];
      total += normal_log_pdf(coef[k], prior.mean, std::sqrt(prior.variance));
    }
    if (spec.family == NodeFamily::gaussian_linear) {
      const auto& sp = *spec.sigma_prior;
      const double sigma = params.nodes[v].sigma;
      if (!(sigma > sp.lo) || !(sigma < sp.hi)) return kNegInf;
      total += -std::log(sp.hi - sp.lo);
    }
  }
  return total;
}

double log_unnormalized_posterior(const ModelSpec& model,
                                  const ParameterVector& params,
                                  const Dataset& data) {
  const double prior = log_prior(model, params);
  if (prior == kNegInf) return kNegInf;
  return prior + log_likelihood(model, params, data);
}

ParameterLayout ParameterLayout::create(const ModelSpec& model) {
  ParameterLayout layout;
  for (std::size_t v = 0; v < model.node_count(); ++v) {
    const NodeSpec& spec = model.node(static_cast<int>(v));
    layout.entries.push_back(
        {static_cast<int>(v), 0, spec.name + ".b0"});
    int k = 1;
    for (const auto& cov : spec.covariates) {
      layout.entries.push_back(
          {static_cast<int>(v), k++, spec.name + ".b." + cov});
    }
    for (const auto& parent : spec.parents) {
      layout.entries.push_back(
          {static_cast<int>(v), k++, spec.name + ".b." + parent});
    }
  }
  for (std::size_t v = 0; v < model.node_count(); ++v) {
    const NodeSpec& spec = model.node(static_cast<int>(v));
    if (spec.family == NodeFamily::gaussian_linear) {
      layout.entries.push_back(
          {static_cast<int>(v), -1, spec.name + ".sigma"});
    }
  }
  return layout;
}

int ParameterLayout::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<double> ParameterLayout::flatten(
    const ParameterVector& params) const {
  std::vector<double> flat(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    flat[i] = get(params, i);
  }
  return flat;
}

ParameterVector ParameterLayout::unflatten(
    const ModelSpec& model, const std::vector<double>& flat) const {
  if (flat.size() != entries.size()) {
    throw SchemaMismatchError("flat parameter vector has wrong length");
  }
  ParameterVector params = zero_parameters(model);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    set(params, i, flat[i]);
  }
  return params;
}

double ParameterLayout::get(const ParameterVector& params,
                            std::size_t k) const {
  const Entry& e = entries[k];
  return e.is_sigma() ? params.nodes[e.node].sigma
                      : params.nodes[e.node].coefficients[e.coef];
}

void ParameterLayout::set(ParameterVector& params, std::size_t k,
                          double value) const {
  const Entry& e = entries[k];
  if (e.is_sigma()) {
    params.nodes[e.node].sigma = value;
  } else {
    params.nodes[e.node].coefficients[e.coef] = value;
  }
}

}  // namespace affectbn
