#include <charconv>
#include <string>

#include "affectbn/cli.hpp"

namespace affectbn::cli {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_real(std::string_view field, std::string_view token) {
  double value = 0.0;
  const auto [p, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || p != field.data() + field.size()) {
    throw UsageError("malformed evidence token '" + std::string(token) +
                     "': '" + std::string(field) + "' is not a real number");
  }
  return value;
}

std::size_t parse_count(std::string_view field, std::string_view token) {
  std::size_t value = 0;
  const auto [p, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || p != field.data() + field.size() || value == 0) {
    throw UsageError("malformed grid token '" + std::string(token) +
                     "': count must be a positive integer");
  }
  return value;
}

}  // namespace

Evidence parse_evidence(std::string_view text, const ModelSpec& model) {
  Evidence evidence;
  if (text.empty()) return evidence;
  for (std::string_view token : split(text, ',')) {
    const std::size_t eq = token.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw UsageError("malformed evidence token '" + std::string(token) +
                       "' (expected name=value)");
    }
    const std::string name(token.substr(0, eq));
    const double value = parse_real(token.substr(eq + 1), token);
    const int cov = model.covariate_index(name);
    const int node = model.node_index(name);
    if (cov >= 0) {
      if (model.covariates().entries[cov].kind == CovariateKind::binary &&
          value != 0.0 && value != 1.0) {
        throw UsageError("evidence token '" + std::string(token) +
                         "': binary covariate '" + name + "' must be 0 or 1");
      }
      if (!evidence.covariate_values.emplace(name, value).second) {
        throw UsageError("duplicate evidence for '" + name + "'");
      }
    } else if (node >= 0) {
      if (model.node(node).family == NodeFamily::bernoulli_logistic &&
          value != 0.0 && value != 1.0) {
        throw UsageError("evidence token '" + std::string(token) +
                         "': binary node '" + name + "' must be 0 or 1");
      }
      if (!evidence.node_values.emplace(name, value).second) {
        throw UsageError("duplicate evidence for '" + name + "'");
      }
    } else {
      throw UsageError("evidence token '" + std::string(token) +
                       "': unknown variable '" + name + "'");
    }
  }
  return evidence;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> values;
  values.reserve(count);
  if (count == 1) {
    values.push_back(lo);
    return values;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    values.push_back(i + 1 == count ? hi : lo + static_cast<double>(i) * step);
  }
  return values;
}

std::vector<SweepAxis> parse_grid(std::string_view text,
                                  const ModelSpec& model) {
  std::vector<SweepAxis> axes;
  if (text.empty()) return axes;
  for (std::string_view token : split(text, ',')) {
    const std::size_t eq = token.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw UsageError("malformed grid token '" + std::string(token) +
                       "' (expected name=lo:hi:count)");
    }
    const std::string name(token.substr(0, eq));
    const auto parts = split(token.substr(eq + 1), ':');
    if (parts.size() != 3) {
      throw UsageError("malformed grid token '" + std::string(token) +
                       "' (expected name=lo:hi:count)");
    }
    if (model.covariate_index(name) < 0 && model.node_index(name) < 0) {
      throw UsageError("grid token '" + std::string(token) +
                       "': unknown variable '" + name + "'");
    }
    SweepAxis axis;
    axis.name = name;
    const double lo = parse_real(parts[0], token);
    const double hi = parse_real(parts[1], token);
    axis.values = linspace(lo, hi, parse_count(parts[2], token));
    axes.push_back(std::move(axis));
  }
  return axes;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> names;
  if (text.empty()) return names;
  for (std::string_view token : split(text, ',')) {
    if (token.empty()) {
      throw UsageError("empty name in list '" + std::string(text) + "'");
    }
    names.emplace_back(token);
  }
  return names;
}

std::string meta_path_for(const std::string& csv_path) {
  return csv_path + ".meta.json";
}

}  // namespace affectbn::cli
