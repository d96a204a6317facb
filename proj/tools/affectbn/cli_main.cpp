#include <charconv>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "affectbn/cli.hpp"

namespace affectbn::cli {

namespace {

// --seed beats the AFFECTBN_SEED environment variable, which beats 1.
std::uint64_t resolve_seed(bool flag_given, std::uint64_t flag_value) {
  if (flag_given) return flag_value;
  if (const char* env = std::getenv("AFFECTBN_SEED")) {
    std::string_view text(env);
    std::uint64_t value = 0;
    const auto [p, ec] =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || p != text.data() + text.size()) {
      throw UsageError(std::string("AFFECTBN_SEED is not a valid seed: '") +
                       env + "'");
    }
    return value;
  }
  return 1;
}

}  // namespace

int run_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Driver mental-state Bayesian network: simulate, fit, "
               "diagnose, query, sweep"};
  app.name("affectbn");
  app.require_subcommand(1);

  SimulateArgs simulate_args;
  std::string simulate_theta;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Write a synthetic dataset CSV for the preset model");
  simulate->add_option("--model", simulate_args.model_path, "Model spec JSON")
      ->required();
  simulate->add_option("--theta", simulate_theta,
                       "Parameter JSON (default: shipped reference values)");
  simulate->add_option("--n", simulate_args.n, "Number of rows")->required();
  std::uint64_t simulate_seed = 1;
  CLI::Option* simulate_seed_opt =
      simulate->add_option("--seed", simulate_seed, "RNG seed");
  simulate->add_option("--out", simulate_args.out_path, "Output CSV path")
      ->required();

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit", "Sample the posterior by adaptive Metropolis-within-Gibbs");
  fit->add_option("--model", fit_args.model_path, "Model spec JSON")
      ->required();
  fit->add_option("--data", fit_args.data_path, "Dataset CSV")->required();
  fit->add_option("--chains", fit_args.config.chains, "Number of chains");
  fit->add_option("--iters", fit_args.config.iterations,
                  "Sweeps per chain, warmup included");
  fit->add_option("--warmup", fit_args.config.warmup,
                  "Warmup sweeps (default: iters/2)");
  fit->add_option("--thin", fit_args.config.thin, "Keep every thin-th draw");
  std::uint64_t fit_seed = 1;
  CLI::Option* fit_seed_opt = fit->add_option("--seed", fit_seed, "RNG seed");
  fit->add_option("--target-accept", fit_args.config.target_acceptance,
                  "Adaptation target acceptance rate");
  bool fit_no_adapt = false;
  fit->add_flag("--no-adapt", fit_no_adapt, "Disable warmup adaptation");
  fit->add_flag("--standardize", fit_args.config.standardize,
                "Center/scale design columns inside the sampler");
  fit->add_option("--threads", fit_args.threads, "Worker threads for chains");
  fit->add_option("--out", fit_args.out_path,
                  "Output CSV path (sidecar: <out>.meta.json)")
      ->required();

  QueryArgs query_args;
  CLI::App* query = app.add_subcommand(
      "query", "Posterior probability table over target states");
  query->add_option("--model", query_args.model_path, "Model spec JSON")
      ->required();
  query->add_option("--posterior", query_args.posterior_path,
                    "Posterior CSV from fit")
      ->required();
  query->add_option("--evidence", query_args.evidence,
                    "name=value pairs, e.g. Sex=0,Age=20,BMI=22,MNB=20");
  query->add_option("--targets", query_args.targets,
                    "Comma-separated discrete target nodes")
      ->required();
  query->add_option("--latent-draws", query_args.latent_draws,
                    "Latent samples per (draw, state)");
  std::uint64_t query_seed = 1;
  CLI::Option* query_seed_opt =
      query->add_option("--seed", query_seed, "RNG seed");
  query->add_option("--max-draws", query_args.max_draws,
                    "Subsample the posterior to this many draws (0 = all)");
  std::string query_out;
  CLI::Option* query_out_opt =
      query->add_option("--out", query_out, "Also write the table as CSV");

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Query over a Cartesian grid of evidence values");
  sweep->add_option("--model", sweep_args.model_path, "Model spec JSON")
      ->required();
  sweep->add_option("--posterior", sweep_args.posterior_path,
                    "Posterior CSV from fit")
      ->required();
  sweep->add_option("--evidence", sweep_args.evidence,
                    "Fixed name=value pairs");
  sweep->add_option("--grid", sweep_args.grid,
                    "Axes name=lo:hi:count, e.g. "
                    "SRT=19.45:191.76:25,MNB=9.42:23.38:25")
      ->required();
  sweep->add_option("--targets", sweep_args.targets,
                    "Comma-separated discrete target nodes")
      ->required();
  sweep->add_option("--latent-draws", sweep_args.latent_draws,
                    "Latent samples per (draw, state)");
  std::uint64_t sweep_seed = 1;
  CLI::Option* sweep_seed_opt =
      sweep->add_option("--seed", sweep_seed, "RNG seed");
  sweep->add_option("--max-draws", sweep_args.max_draws,
                    "Subsample the posterior to this many draws (0 = all)");
  sweep->add_option("--threads", sweep_args.threads,
                    "Worker threads for grid points");
  sweep->add_option("--out", sweep_args.out_path, "Output CSV path")
      ->required();

  DiagnoseArgs diagnose_args;
  std::string diagnose_model;
  CLI::App* diagnose =
      app.add_subcommand("diagnose", "Print rhat/ess per parameter");
  diagnose->add_option("--posterior", diagnose_args.posterior_path,
                       "Posterior CSV from fit")
      ->required();
  CLI::Option* diagnose_model_opt = diagnose->add_option(
      "--model", diagnose_model, "Verify the posterior against this spec");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("affectbn");
  for (const auto& arg : args) argv.push_back(arg.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(simulate)) {
      if (simulate->count("--theta")) simulate_args.theta_path = simulate_theta;
      simulate_args.seed =
          resolve_seed(simulate_seed_opt->count() > 0, simulate_seed);
      return cmd_simulate(simulate_args, out);
    }
    if (app.got_subcommand(fit)) {
      fit_args.config.adapt = !fit_no_adapt;
      fit_args.config.seed = resolve_seed(fit_seed_opt->count() > 0, fit_seed);
      return cmd_fit(fit_args, out);
    }
    if (app.got_subcommand(query)) {
      query_args.seed = resolve_seed(query_seed_opt->count() > 0, query_seed);
      if (query_out_opt->count()) query_args.out_path = query_out;
      return cmd_query(query_args, out);
    }
    if (app.got_subcommand(sweep)) {
      sweep_args.seed = resolve_seed(sweep_seed_opt->count() > 0, sweep_seed);
      return cmd_sweep(sweep_args, out);
    }
    if (app.got_subcommand(diagnose)) {
      if (diagnose_model_opt->count()) {
        diagnose_args.model_path = diagnose_model;
      }
      return cmd_diagnose(diagnose_args, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace affectbn::cli
