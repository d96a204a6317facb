#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "affectbn/cli.hpp"
#include "affectbn/driver_model.hpp"
#include "affectbn/io.hpp"

namespace affectbn::cli {

namespace {

std::string fixed(double value, int width, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%*.*f", width, precision, value);
  return buf;
}

std::string label(const char* text, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%*s", width, text);
  return buf;
}

double pooled_mean(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

double pooled_sd(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

// Column label for a joint target state, e.g. "AF0_ML1".
std::string state_column(const QueryResult& result, std::size_t state) {
  std::string out;
  for (std::size_t j = 0; j < result.targets.size(); ++j) {
    if (j > 0) out += '_';
    out += result.targets[j];
    out += result.target_value(state, j) ? '1' : '0';
  }
  return out;
}

void print_query_result(const QueryResult& result, std::ostream& out) {
  int state_width = 16;
  for (std::size_t s = 0; s < result.n_states(); ++s) {
    state_width = std::max(state_width,
                           static_cast<int>(result.state_label(s).size()) + 2);
  }
  out << label("state", state_width) << label("probability", 14)
      << label("mc_se", 12) << "\n";
  for (std::size_t s = 0; s < result.n_states(); ++s) {
    out << label(result.state_label(s).c_str(), state_width)
        << fixed(result.probabilities[s], 14, 6)
        << fixed(result.mc_standard_errors[s], 12, 6) << "\n";
  }
  out << "draws used: " << result.draws_used
      << ", latent draws per state: " << result.latent_draws_per_state << "\n"
      << "averaging: unnormalized state weights summed over posterior draws, "
         "then normalized\n";
}

std::string query_csv(const QueryResult& result) {
  std::string csv;
  for (const auto& target : result.targets) {
    csv += target;
    csv += ',';
  }
  csv += "probability,mc_se\n";
  for (std::size_t s = 0; s < result.n_states(); ++s) {
    for (std::size_t j = 0; j < result.targets.size(); ++j) {
      csv += result.target_value(s, j) ? '1' : '0';
      csv += ',';
    }
    csv += format_double(result.probabilities[s]);
    csv += ',';
    csv += format_double(result.mc_standard_errors[s]);
    csv += '\n';
  }
  return csv;
}

}  // namespace

int cmd_simulate(const SimulateArgs& args, std::ostream& out) {
  const ModelSpec model = parse_spec(read_file(args.model_path));
  const ModelSpec preset = bertha_preset();
  if (fingerprint(model) != fingerprint(preset)) {
    throw UsageError(
        "simulate generates data for the shipped preset model only; '" +
        args.model_path + "' is not the preset spec");
  }
  ParameterVector theta;
  if (args.theta_path) {
    theta = parse_theta(read_file(*args.theta_path), model);
  } else {
    theta = reference_theta();
  }
  const Dataset data = synth_dataset(theta, args.n, args.seed);
  write_file(args.out_path, write_dataset(model, data));
  out << "wrote " << data.n_rows << " rows to " << args.out_path << "\n";
  return kExitOk;
}

int cmd_fit(const FitArgs& args, std::ostream& out) {
  const ModelSpec model = parse_spec(read_file(args.model_path));
  const Dataset data = read_dataset(read_file(args.data_path), model);
  const PosteriorSample sample = fit(model, data, args.config, args.threads);
  write_posterior(sample, args.out_path, meta_path_for(args.out_path));

  out << label("parameter", -22) << label("mean", 12) << label("sd", 11)
      << label("rhat", 9) << label("ess", 10) << "\n";
  for (const auto& name : sample.parameter_names) {
    const auto draws = sample.parameter_draws(name);
    const double mean = pooled_mean(draws);
    const double sd = pooled_sd(draws, mean);
    std::string rhat_text = label("n/a", 9);
    std::string ess_text = label("n/a", 10);
    try {
      rhat_text = fixed(rhat(sample, name), 9, 4);
    } catch (const DiagnosticError&) {
    }
    try {
      ess_text = fixed(ess(sample, name), 10, 1);
    } catch (const DiagnosticError&) {
    }
    out << label(name.c_str(), -22) << fixed(mean, 12, 4) << fixed(sd, 11, 4)
        << rhat_text << ess_text << "\n";
  }
  out << "wrote " << sample.total_draws() << " draws ("
      << sample.n_chains() << " chains) to " << args.out_path << "\n";
  return kExitOk;
}

int cmd_query(const QueryArgs& args, std::ostream& out) {
  const ModelSpec model = parse_spec(read_file(args.model_path));
  const PosteriorSample posterior = read_posterior(
      args.posterior_path, meta_path_for(args.posterior_path), model);
  const Evidence evidence = parse_evidence(args.evidence, model);
  const std::vector<std::string> targets = split_list(args.targets);
  if (targets.empty()) {
    throw UsageError("--targets must name at least one node");
  }
  QueryOptions options;
  options.latent_draws = args.latent_draws;
  options.seed = args.seed;
  options.max_draws = args.max_draws;
  const QueryResult result = query(model, posterior, evidence, targets, options);
  print_query_result(result, out);
  if (args.out_path) {
    write_file(*args.out_path, query_csv(result));
    out << "wrote table to " << *args.out_path << "\n";
  }
  return kExitOk;
}

int cmd_sweep(const SweepArgs& args, std::ostream& out) {
  const ModelSpec model = parse_spec(read_file(args.model_path));
  const PosteriorSample posterior = read_posterior(
      args.posterior_path, meta_path_for(args.posterior_path), model);
  const Evidence evidence = parse_evidence(args.evidence, model);
  const std::vector<SweepAxis> grid = parse_grid(args.grid, model);
  if (grid.empty()) {
    throw UsageError("--grid must name at least one axis");
  }
  const std::vector<std::string> targets = split_list(args.targets);
  if (targets.empty()) {
    throw UsageError("--targets must name at least one node");
  }
  QueryOptions options;
  options.latent_draws = args.latent_draws;
  options.seed = args.seed;
  options.max_draws = args.max_draws;
  const SweepResult result = sweep(model, posterior, evidence, grid, targets,
                                   options, args.threads);

  std::string csv;
  for (const auto& axis : result.axes) {
    csv += axis.name;
    csv += ',';
  }
  const QueryResult& first = result.points.front().result;
  for (std::size_t s = 0; s < first.n_states(); ++s) {
    csv += "p_" + state_column(first, s) + ",";
  }
  for (std::size_t s = 0; s < first.n_states(); ++s) {
    csv += "se_" + state_column(first, s);
    csv += s + 1 < first.n_states() ? ',' : '\n';
  }
  for (const auto& point : result.points) {
    for (double coord : point.coordinates) {
      csv += format_double(coord);
      csv += ',';
    }
    for (std::size_t s = 0; s < point.result.n_states(); ++s) {
      csv += format_double(point.result.probabilities[s]);
      csv += ',';
    }
    for (std::size_t s = 0; s < point.result.n_states(); ++s) {
      csv += format_double(point.result.mc_standard_errors[s]);
      csv += s + 1 < point.result.n_states() ? ',' : '\n';
    }
  }
  write_file(args.out_path, csv);
  out << "wrote " << result.points.size() << " grid points to "
      << args.out_path << "\n";
  return kExitOk;
}

int cmd_diagnose(const DiagnoseArgs& args, std::ostream& out) {
  PosteriorSample posterior;
  if (args.model_path) {
    const ModelSpec model = parse_spec(read_file(*args.model_path));
    posterior = read_posterior(args.posterior_path,
                               meta_path_for(args.posterior_path), model);
  } else {
    posterior = read_posterior_unchecked(
        args.posterior_path, meta_path_for(args.posterior_path));
  }

  bool converged = true;
  out << label("parameter", -22) << label("rhat", 9) << label("ess", 10)
      << "\n";
  for (const auto& name : posterior.parameter_names) {
    std::string rhat_text = label("n/a", 9);
    std::string ess_text = label("n/a", 10);
    try {
      const double r = rhat(posterior, name);
      rhat_text = fixed(r, 9, 4);
      if (r > 1.01) converged = false;
    } catch (const DiagnosticError&) {
    }
    try {
      ess_text = fixed(ess(posterior, name), 10, 1);
    } catch (const DiagnosticError&) {
    }
    out << label(name.c_str(), -22) << rhat_text << ess_text << "\n";
  }
  if (!converged) {
    out << "convergence failure: at least one rhat exceeds 1.01\n";
    return kExitFailure;
  }
  out << "all rhat <= 1.01\n";
  return kExitOk;
}

}  // namespace affectbn::cli
