#ifndef AFFECTBN_IO_HPP
#define AFFECTBN_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "affectbn/model.hpp"
#include "affectbn/sampler.hpp"

namespace affectbn {

// Model spec documents (JSON, strict: unknown keys rejected). Serialization
// is canonical: parse(serialize(m)) == m and serialize(parse(t)) is
// byte-stable for canonical t.
ModelSpec parse_spec(std::string_view text);
std::string serialize_spec(const ModelSpec& model);

// Parameter vectors (JSON object keyed by node name with "coefficients" and,
// for gaussian nodes, "sigma").
ParameterVector parse_theta(std::string_view text, const ModelSpec& model);
std::string serialize_theta(const ModelSpec& model,
                            const ParameterVector& params);

// Dataset CSV: header row of column names, comma-separated binary64 values,
// LF newlines. Columns are matched by name; extra columns are ignored.
Dataset read_dataset(std::string_view csv_text, const ModelSpec& model);
std::string write_dataset(const ModelSpec& model, const Dataset& data);

// Posterior persistence: a CSV of kept draws
// (chain,iteration,<node>.b0,...,<node>.sigma,...) plus a JSON sidecar with
// the config echo, model fingerprint and acceptance rates. Values round-trip
// binary64 exactly.
void write_posterior(const PosteriorSample& sample,
                     const std::filesystem::path& csv_path,
                     const std::filesystem::path& meta_path);
PosteriorSample read_posterior(const std::filesystem::path& csv_path,
                               const std::filesystem::path& meta_path,
                               const ModelSpec& model);
// Loads without a model; skips the fingerprint and support checks.
PosteriorSample read_posterior_unchecked(
    const std::filesystem::path& csv_path,
    const std::filesystem::path& meta_path);

// Shortest decimal form that parses back to the same binary64.
std::string format_double(double value);

std::string fingerprint_hex(std::uint64_t fp);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace affectbn

#endif  // AFFECTBN_IO_HPP
