#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>

#include "affectbn/driver_model.hpp"
#include "affectbn/model.hpp"
#include "affectbn/predictive.hpp"
#include "affectbn/rng.hpp"
#include "affectbn/sampler.hpp"
#include "doctest.h"
#include "support/oracles.hpp"
#include "support/chain_fixture.hpp"
#include "support/random_models.hpp"

using namespace affectbn;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("ancestral samples: support, determinism, standard-normal marginals") {
  const ModelSpec model = bertha_preset();
  const ParameterVector params = zero_parameters(model, 1.0);
  const std::vector<double> row = {1.0, 40.0, 25.0};

  Rng rng_a(11, 0);
  Rng rng_b(11, 0);
  const auto sample_a = ancestral_sample(model, params, row, rng_a);
  const auto sample_b = ancestral_sample(model, params, row, rng_b);
  CHECK(sample_a == sample_b);

  Rng rng(12, 0);
  const int af = model.node_index("AF");
  const int mhr = model.node_index("MHR");
  double mean_mhr = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto values = ancestral_sample(model, params, row, rng);
    const double b = values[af];
    CHECK((b == 0.0 || b == 1.0));
    mean_mhr += values[mhr];
  }
  mean_mhr /= n;
  // All coefficients zero, sigma 1: every continuous node is standard normal
  // marginally.
  CHECK(std::abs(mean_mhr) < 0.02);
}

TEST_CASE("posterior_predictive basics") {
  const ModelSpec model = testsupport::chain_model();
  const ParameterVector theta = testsupport::chain_theta(model);
  const PosteriorSample posterior = degenerate_posterior(model, theta);
  const std::vector<double> row = {0.0, 30.0, 22.0};

  Rng rng(3, 0);
  CHECK(posterior_predictive(model, posterior, row, 0, rng).empty());

  Rng rng_pp(4, 0);
  Rng rng_anc(4, 0);
  const auto pp = posterior_predictive(model, posterior, row, 3, rng_pp);
  REQUIRE(pp.size() == 3);
  for (const auto& draw : pp) {
    CHECK(draw == ancestral_sample(model, theta, row, rng_anc));
  }

  const ModelSpec other = bertha_preset();
  const PosteriorSample wrong =
      degenerate_posterior(other, zero_parameters(other, 1.0));
  Rng rng2(5, 0);
  CHECK_THROWS_AS(posterior_predictive(model, wrong, row, 1, rng2),
                  FingerprintMismatchError);
}

TEST_CASE("posterior_predictive tracks the generator mean after a fit") {
  const ModelSpec model = testsupport::chain_model();
  const ParameterVector theta = testsupport::chain_theta(model);

  const std::size_t n = 300;
  Rng gen(71, 0);
  std::vector<std::vector<double>> cov_cols(3);
  std::vector<std::vector<double>> node_cols(3);
  std::vector<double> row(3);
  for (std::size_t i = 0; i < n; ++i) {
    row[0] = gen.bernoulli(0.5) ? 1.0 : 0.0;
    row[1] = gen.uniform(24.0, 61.0);
    row[2] = gen.uniform(17.65, 35.16);
    for (int c = 0; c < 3; ++c) cov_cols[c].push_back(row[c]);
    const auto values = ancestral_sample(model, theta, row, gen);
    for (int v = 0; v < 3; ++v) node_cols[v].push_back(values[v]);
  }
  const Dataset data = Dataset::create(model, cov_cols, node_cols);

  SamplerConfig config;
  config.chains = 2;
  config.iterations = 3000;
  config.warmup = 1500;
  config.thin = 3;
  config.seed = 8;
  config.standardize = true;
  const PosteriorSample posterior = fit(model, data, config);

  const std::vector<double> cov_row = {0.0, 40.0, 25.0};
  Rng truth_rng(91, 0);
  double truth = 0.0;
  const int truth_n = 200000;
  for (int i = 0; i < truth_n; ++i) {
    truth += ancestral_sample(model, theta, cov_row, truth_rng)[2];
  }
  truth /= truth_n;

  Rng rng(92, 0);
  const auto pp = posterior_predictive(model, posterior, cov_row, 1, rng);
  std::vector<double> mnb;
  mnb.reserve(pp.size());
  for (const auto& draw : pp) mnb.push_back(draw[2]);
  const double est = oracle::mean(mnb);
  // Draws share posterior uncertainty, so use a generous multiple of the
  // naive standard error.
  const double se = std::sqrt(oracle::sample_variance(mnb) /
                              static_cast<double>(mnb.size()));
  CHECK(std::abs(est - truth) < 6.0 * se);
}

TEST_CASE("query: two independent fair coins") {
  const ModelSpec model = bertha_preset();
  const PosteriorSample posterior =
      degenerate_posterior(model, zero_parameters(model, 1.0));
  Evidence evidence;
  evidence.covariate_values = {{"Sex", 0.0}, {"Age", 30.0}, {"BMI", 22.0}};

  QueryOptions options;
  options.latent_draws = 2;
  options.seed = 1;
  const QueryResult result =
      query(model, posterior, evidence, {"AF", "ML"}, options);
  REQUIRE(result.n_states() == 4);
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(result.probabilities[s] == doctest::Approx(0.25).epsilon(1e-12));
  }
  CHECK(result.state_label(1) == "AF=1,ML=0");
  CHECK(result.draws_used == 1);
}

TEST_CASE("query: conditioning consistency with AF observed") {
  const ModelSpec model = bertha_preset();
  const PosteriorSample posterior =
      degenerate_posterior(model, reference_theta());
  Evidence evidence;
  evidence.covariate_values = {{"Sex", 1.0}, {"Age", 45.0}, {"BMI", 26.0}};
  evidence.node_values = {{"AF", 1.0}};

  QueryOptions options;
  options.latent_draws = 4;
  options.seed = 3;
  const QueryResult result = query(model, posterior, evidence, {"ML"}, options);
  REQUIRE(result.n_states() == 2);
  CHECK(result.targets == std::vector<std::string>{"ML"});
  CHECK(result.probabilities[0] + result.probabilities[1] ==
        doctest::Approx(1.0).epsilon(1e-12));
  // Both roots: with AF observed and no continuous evidence the answer is
  // exactly P(ML | covariates).
  const ParameterVector theta = reference_theta();
  const auto& ml = theta.nodes[model.node_index("ML")].coefficients;
  const double p1 = logistic(ml[0] + ml[1] * 1.0 + ml[2] * 45.0 + ml[3] * 26.0);
  CHECK(result.probabilities[1] == doctest::Approx(p1).epsilon(1e-12));
}

TEST_CASE("query matches the Simpson quadrature oracle on the 3-node chain") {
  const ModelSpec model = testsupport::chain_model();
  const ParameterVector theta = testsupport::chain_theta(model);
  const PosteriorSample posterior = degenerate_posterior(model, theta);

  const double sex = 0.0, age = 20.0, bmi = 22.0, mnb = 20.0;
  const double truth = testsupport::chain_oracle(model, theta, sex, age, bmi, mnb);

  Evidence evidence;
  evidence.covariate_values = {{"Sex", sex}, {"Age", age}, {"BMI", bmi}};
  evidence.node_values = {{"MNB", mnb}};

  QueryOptions options;
  options.latent_draws = 64;
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    options.seed = seed;
    const QueryResult result =
        query(model, posterior, evidence, {"ML"}, options);
    const double err = std::abs(result.probabilities[1] - truth);
    if (err <= 3.0 * result.mc_standard_errors[1]) ++hits;
    CHECK(result.mc_standard_errors[1] > 0.0);
  }
  CHECK(hits >= 4);
}

TEST_CASE("query matches exact enumeration with a sampled discrete latent") {
  // 3-node all-Bernoulli chain N0 -> N1 -> N2 with N1 latent: stochastic
  // weighting converges to the enumeration answer.
  CovariateSchema schema;
  std::vector<NodeSpec> nodes(3);
  nodes[0].name = "N0";
  nodes[1].name = "N1";
  nodes[1].parents = {"N0"};
  nodes[2].name = "N2";
  nodes[2].parents = {"N1"};
  for (auto& n : nodes) {
    n.family = NodeFamily::bernoulli_logistic;
    n.coefficient_priors.assign(n.coefficient_count(), NormalPrior{0.0, 25.0});
  }
  const ModelSpec model = ModelSpec::create(schema, nodes);
  ParameterVector theta = zero_parameters(model);
  theta.nodes[0].coefficients = {0.3};
  theta.nodes[1].coefficients = {-0.5, 1.2};
  theta.nodes[2].coefficients = {0.2, -1.6};

  std::vector<oracle::DiscreteNode> oracle_nodes(3);
  oracle_nodes[0].coef = {0.3};
  oracle_nodes[1].parents = {0};
  oracle_nodes[1].coef = {-0.5, 1.2};
  oracle_nodes[2].parents = {1};
  oracle_nodes[2].coef = {0.2, -1.6};
  const auto truth = oracle::enumerate_query(oracle_nodes, {}, {{2, 1}}, {0});

  const PosteriorSample posterior = degenerate_posterior(model, theta);
  Evidence evidence;
  evidence.node_values = {{"N2", 1.0}};
  QueryOptions options;
  options.latent_draws = 4000;
  options.seed = 17;
  const QueryResult result = query(model, posterior, evidence, {"N0"}, options);
  CHECK(std::abs(result.probabilities[1] - truth[1]) <=
        3.0 * result.mc_standard_errors[1] + 1e-9);
}

TEST_CASE("query error paths") {
  const ModelSpec model = bertha_preset();
  const PosteriorSample posterior =
      degenerate_posterior(model, reference_theta());
  Evidence evidence;
  evidence.covariate_values = {{"Sex", 0.0}, {"Age", 30.0}, {"BMI", 22.0}};

  SUBCASE("target observed") {
    Evidence with_ml = evidence;
    with_ml.node_values = {{"ML", 1.0}};
    CHECK_THROWS_AS(query(model, posterior, with_ml, {"ML"}, {}),
                    TargetObservedError);
  }
  SUBCASE("continuous target rejected") {
    CHECK_THROWS_AS(query(model, posterior, evidence, {"MHR"}, {}),
                    DomainError);
  }
  SUBCASE("unknown target") {
    CHECK_THROWS_AS(query(model, posterior, evidence, {"ZZ"}, {}),
                    DanglingReferenceError);
  }
  SUBCASE("missing covariate") {
    Evidence partial;
    partial.covariate_values = {{"Sex", 0.0}, {"Age", 30.0}};
    CHECK_THROWS_WITH_AS(query(model, posterior, partial, {"ML"}, {}),
                         doctest::Contains("BMI"), MissingInputError);
  }
  SUBCASE("non-binary evidence for a bernoulli node") {
    Evidence bad = evidence;
    bad.node_values = {{"AF", 0.5}};
    CHECK_THROWS_AS(query(model, posterior, bad, {"ML"}, {}), DomainError);
  }
  SUBCASE("fingerprint mismatch") {
    const ModelSpec other = testsupport::chain_model();
    const PosteriorSample wrong =
        degenerate_posterior(other, testsupport::chain_theta(other));
    CHECK_THROWS_AS(query(model, wrong, evidence, {"ML"}, {}),
                    FingerprintMismatchError);
  }
  SUBCASE("empty targets") {
    CHECK_THROWS_AS(query(model, posterior, evidence, {}, {}), DomainError);
  }
}

TEST_CASE("weight normalization is scale invariant and flags zero weights") {
  const std::vector<double> base = {-3.0, -1.5, -2.0, -9.0,
                                    -2.5, -1.0, -4.0, -6.0};
  const auto a = detail::summarize_log_weights(2, 4, base, {}, 8);
  std::vector<double> shifted = base;
  for (double& lw : shifted) lw += 123.456;
  const auto b = detail::summarize_log_weights(2, 4, shifted, {}, 8);
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(a.probabilities[s] ==
          doctest::Approx(b.probabilities[s]).epsilon(1e-12));
    CHECK(a.mc_standard_errors[s] ==
          doctest::Approx(b.mc_standard_errors[s]).epsilon(1e-12));
  }
  double total = 0.0;
  for (double p : a.probabilities) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<double> all_zero(4, kNegInf);
  CHECK_THROWS_AS(detail::summarize_log_weights(1, 4, all_zero, {}, 8),
                  AllWeightsZeroError);
}

TEST_CASE("query with L and 2L latent draws converges") {
  const ModelSpec model = testsupport::chain_model();
  const ParameterVector theta = testsupport::chain_theta(model);
  const PosteriorSample posterior = degenerate_posterior(model, theta);
  Evidence evidence;
  evidence.covariate_values = {{"Sex", 1.0}, {"Age", 35.0}, {"BMI", 24.0}};
  evidence.node_values = {{"MNB", 17.0}};

  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    QueryOptions small;
    small.latent_draws = 16;
    small.seed = seed;
    QueryOptions big;
    big.latent_draws = 32;
    big.seed = seed + 1000;
    const QueryResult a = query(model, posterior, evidence, {"ML"}, small);
    const QueryResult b = query(model, posterior, evidence, {"ML"}, big);
    const double tol = 3.0 * std::sqrt(std::pow(a.mc_standard_errors[1], 2) +
                                       std::pow(b.mc_standard_errors[1], 2));
    if (std::abs(a.probabilities[1] - b.probabilities[1]) <= tol) ++hits;
  }
  CHECK(hits >= 18);
}

TEST_CASE("sweep: single point equals query, axis order permutes rows only") {
  const ModelSpec model = bertha_preset();
  const PosteriorSample posterior =
      degenerate_posterior(model, reference_theta());
  Evidence fixed;
  fixed.covariate_values = {{"Sex", 0.0}, {"Age", 30.0}, {"BMI", 22.0}};

  QueryOptions options;
  options.latent_draws = 4;
  options.seed = 99;

  SUBCASE("1x1 grid reduces to one query") {
    const std::vector<SweepAxis> grid = {{"MNB", {16.0}}};
    const SweepResult swept =
        sweep(model, posterior, fixed, grid, {"AF", "ML"}, options);
    REQUIRE(swept.points.size() == 1);

    Evidence merged = fixed;
    merged.node_values = {{"MNB", 16.0}};
    QueryOptions point = options;
    point.seed = sweep_point_seed(options.seed, 0);
    const QueryResult direct =
        query(model, posterior, merged, {"AF", "ML"}, point);
    CHECK(swept.points[0].result.probabilities == direct.probabilities);
  }

  SUBCASE("axis permutation") {
    const std::vector<SweepAxis> grid_ab = {{"MNB", {14.0, 18.0}},
                                            {"SRT", {40.0, 80.0, 120.0}}};
    const std::vector<SweepAxis> grid_ba = {{"SRT", {40.0, 80.0, 120.0}},
                                            {"MNB", {14.0, 18.0}}};
    const SweepResult ab =
        sweep(model, posterior, fixed, grid_ab, {"AF", "ML"}, options, 2);
    const SweepResult ba =
        sweep(model, posterior, fixed, grid_ba, {"AF", "ML"}, options, 2);
    REQUIRE(ab.points.size() == 6);
    REQUIRE(ba.points.size() == 6);
    for (const auto& point : ab.points) {
      bool found = false;
      for (const auto& other : ba.points) {
        if (other.coordinates[0] == point.coordinates[1] &&
            other.coordinates[1] == point.coordinates[0]) {
          found = true;
          CHECK(other.result.probabilities == point.result.probabilities);
          CHECK(other.result.mc_standard_errors ==
                point.result.mc_standard_errors);
        }
      }
      CHECK(found);
    }
  }

  SUBCASE("grid variable clashing with fixed evidence") {
    Evidence clash = fixed;
    clash.node_values = {{"MNB", 15.0}};
    const std::vector<SweepAxis> grid = {{"MNB", {16.0}}};
    CHECK_THROWS_AS(sweep(model, posterior, clash, grid, {"AF", "ML"}, options),
                    DomainError);
  }

  SUBCASE("thread count does not change results") {
    const std::vector<SweepAxis> grid = {{"MNB", {14.0, 18.0}},
                                         {"Age", {25.0, 45.0}}};
    Evidence no_age;
    no_age.covariate_values = {{"Sex", 0.0}, {"BMI", 22.0}};
    const SweepResult one =
        sweep(model, posterior, no_age, grid, {"AF", "ML"}, options, 1);
    const SweepResult four =
        sweep(model, posterior, no_age, grid, {"AF", "ML"}, options, 4);
    REQUIRE(one.points.size() == four.points.size());
    for (std::size_t i = 0; i < one.points.size(); ++i) {
      CHECK(one.points[i].result.probabilities ==
            four.points[i].result.probabilities);
    }
  }
}

TEST_CASE("query over random all-Bernoulli networks matches enumeration") {
  // Spot version of the acceptance criterion: full evidence over the
  // non-target nodes makes the weighting exact.
  Rng rng(4242, 0);
  for (int rep = 0; rep < 25; ++rep) {
    const auto rm = testsupport::random_dag(rng, 4, true, 2);
    const auto& model = rm.model;

    std::vector<double> cov_row(model.covariates().size());
    Evidence evidence;
    for (std::size_t c = 0; c < cov_row.size(); ++c) {
      const auto& cov = model.covariates().entries[c];
      cov_row[c] = cov.kind == CovariateKind::binary
                       ? (rng.bernoulli(0.5) ? 1.0 : 0.0)
                       : rng.normal();
      evidence.covariate_values[cov.name] = cov_row[c];
    }

    const std::size_t n_targets =
        1 + rng.next_u64() % std::min<std::size_t>(model.node_count(), 2);
    std::vector<std::string> targets;
    std::vector<int> target_idx;
    std::map<int, int> observed;
    for (std::size_t v = 0; v < model.node_count(); ++v) {
      if (targets.size() < n_targets &&
          (model.node_count() - v <= n_targets - targets.size() ||
           rng.bernoulli(0.5))) {
        targets.push_back(model.node(static_cast<int>(v)).name);
        target_idx.push_back(static_cast<int>(v));
      } else {
        const int value = rng.bernoulli(0.5) ? 1 : 0;
        observed[static_cast<int>(v)] = value;
        evidence.node_values[model.node(static_cast<int>(v)).name] = value;
      }
    }

    std::vector<oracle::DiscreteNode> oracle_nodes(model.node_count());
    for (std::size_t v = 0; v < model.node_count(); ++v) {
      oracle_nodes[v].coef = rm.params.nodes[v].coefficients;
      for (int p : model.node_parent_nodes(static_cast<int>(v))) {
        oracle_nodes[v].parents.push_back(p);
      }
      for (int c : model.node_covariate_cols(static_cast<int>(v))) {
        oracle_nodes[v].covariates.push_back(c);
      }
    }
    const auto truth =
        oracle::enumerate_query(oracle_nodes, cov_row, observed, target_idx);

    const PosteriorSample posterior = degenerate_posterior(model, rm.params);
    QueryOptions options;
    options.latent_draws = 1;
    options.seed = 1000 + rep;
    const QueryResult result =
        query(model, posterior, evidence, targets, options);
    REQUIRE(result.probabilities.size() == truth.size());
    for (std::size_t s = 0; s < truth.size(); ++s) {
      CHECK(std::abs(result.probabilities[s] - truth[s]) <= 1e-10);
      CHECK(result.mc_standard_errors[s] == 0.0);  // weights are exact
    }
  }
}
