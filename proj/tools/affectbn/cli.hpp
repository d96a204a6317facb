#ifndef AFFECTBN_TOOLS_CLI_HPP
#define AFFECTBN_TOOLS_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "affectbn/model.hpp"
#include "affectbn/predictive.hpp"
#include "affectbn/sampler.hpp"

namespace affectbn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Command-line misuse (malformed evidence/grid strings, unresolved names);
// mapped to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Comma-separated name=value pairs. Names must resolve to a covariate or a
// node; binary variables only accept 0/1.
Evidence parse_evidence(std::string_view text, const ModelSpec& model);

// Comma-separated name=lo:hi:count axes, count evenly spaced values with
// both endpoints included.
std::vector<SweepAxis> parse_grid(std::string_view text,
                                  const ModelSpec& model);

std::vector<double> linspace(double lo, double hi, std::size_t count);

// Comma-separated identifiers; empty input gives an empty list.
std::vector<std::string> split_list(std::string_view text);

// Sidecar path paired with a posterior CSV: "<csv>.meta.json".
std::string meta_path_for(const std::string& csv_path);

struct SimulateArgs {
  std::string model_path;
  std::optional<std::string> theta_path;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  std::string out_path;
};

struct FitArgs {
  std::string model_path;
  std::string data_path;
  std::string out_path;
  SamplerConfig config;
  int threads = 1;
};

struct QueryArgs {
  std::string model_path;
  std::string posterior_path;
  std::string evidence;
  std::string targets;
  std::size_t latent_draws = 8;
  std::uint64_t seed = 1;
  std::size_t max_draws = 0;
  std::optional<std::string> out_path;
};

struct SweepArgs {
  std::string model_path;
  std::string posterior_path;
  std::string evidence;
  std::string grid;
  std::string targets;
  std::string out_path;
  std::size_t latent_draws = 8;
  std::uint64_t seed = 1;
  std::size_t max_draws = 0;
  int threads = 1;
};

struct DiagnoseArgs {
  std::string posterior_path;
  std::optional<std::string> model_path;
};

int cmd_simulate(const SimulateArgs& args, std::ostream& out);
int cmd_fit(const FitArgs& args, std::ostream& out);
int cmd_query(const QueryArgs& args, std::ostream& out);
int cmd_sweep(const SweepArgs& args, std::ostream& out);
int cmd_diagnose(const DiagnoseArgs& args, std::ostream& out);

// Full CLI: args exclude the program name. Returns the process exit code.
int run_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace affectbn::cli

#endif  // AFFECTBN_TOOLS_CLI_HPP
