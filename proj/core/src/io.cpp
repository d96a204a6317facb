#include "affectbn/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "json.hpp"

namespace affectbn {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& message) {
  throw ParseError(message);
}

const json& get_member(const json& obj, const char* key,
                       const std::string& context) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    parse_fail(context + ": missing key '" + key + "'");
  }
  return *it;
}

void reject_unknown_keys(const json& obj,
                         std::initializer_list<const char*> allowed,
                         const std::string& context) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) parse_fail(context + ": unknown key '" + key + "'");
  }
}

std::string get_string(const json& obj, const char* key,
                       const std::string& context) {
  const json& v = get_member(obj, key, context);
  if (!v.is_string()) parse_fail(context + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

double get_number(const json& v, const std::string& context) {
  if (!v.is_number()) parse_fail(context + " must be a number");
  return v.get<double>();
}

}  // namespace

ModelSpec parse_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    parse_fail(e.what());
  }
  if (!doc.is_object()) parse_fail("spec: top level must be an object");
  reject_unknown_keys(doc, {"covariates", "nodes"}, "spec");

  CovariateSchema schema;
  const json& covariates = get_member(doc, "covariates", "spec");
  if (!covariates.is_array()) parse_fail("spec: 'covariates' must be an array");
  for (std::size_t i = 0; i < covariates.size(); ++i) {
    const json& c = covariates[i];
    const std::string context = "covariates[" + std::to_string(i) + "]";
    if (!c.is_object()) parse_fail(context + " must be an object");
    reject_unknown_keys(c, {"name", "kind", "unit", "range"}, context);
    Covariate cov;
    cov.name = get_string(c, "name", context);
    const std::string kind = get_string(c, "kind", context);
    if (kind == "binary") {
      cov.kind = CovariateKind::binary;
    } else if (kind == "continuous") {
      cov.kind = CovariateKind::continuous;
    } else {
      parse_fail(context + ": kind must be 'binary' or 'continuous'");
    }
    if (c.contains("unit")) cov.unit = get_string(c, "unit", context);
    if (c.contains("range")) {
      const json& r = c["range"];
      if (!r.is_array() || r.size() != 2) {
        parse_fail(context + ": range must be [lo, hi]");
      }
      cov.range = {get_number(r[0], context + ".range[0]"),
                   get_number(r[1], context + ".range[1]")};
    }
    schema.entries.push_back(std::move(cov));
  }

  std::vector<NodeSpec> nodes;
  const json& node_list = get_member(doc, "nodes", "spec");
  if (!node_list.is_array()) parse_fail("spec: 'nodes' must be an array");
  for (std::size_t i = 0; i < node_list.size(); ++i) {
    const json& n = node_list[i];
    const std::string context = "nodes[" + std::to_string(i) + "]";
    if (!n.is_object()) parse_fail(context + " must be an object");
    reject_unknown_keys(n,
                        {"name", "family", "parents", "covariates",
                         "coefficient_priors", "sigma_prior"},
                        context);
    NodeSpec node;
    node.name = get_string(n, "name", context);
    const std::string family = get_string(n, "family", context);
    if (family == "bernoulli-logistic") {
      node.family = NodeFamily::bernoulli_logistic;
    } else if (family == "gaussian-linear") {
      node.family = NodeFamily::gaussian_linear;
    } else {
      parse_fail(context +
                 ": family must be 'bernoulli-logistic' or 'gaussian-linear'");
    }
    auto read_names = [&](const char* key, std::vector<std::string>& out) {
      const json& arr = get_member(n, key, context);
      if (!arr.is_array()) parse_fail(context + ": '" + key + "' must be an array");
      for (const json& item : arr) {
        if (!item.is_string()) {
          parse_fail(context + ": '" + key + "' entries must be strings");
        }
        out.push_back(item.get<std::string>());
      }
    };
    read_names("parents", node.parents);
    read_names("covariates", node.covariates);
    const json& priors = get_member(n, "coefficient_priors", context);
    if (!priors.is_array()) {
      parse_fail(context + ": 'coefficient_priors' must be an array");
    }
    for (std::size_t k = 0; k < priors.size(); ++k) {
      const json& p = priors[k];
      const std::string pcontext =
          context + ".coefficient_priors[" + std::to_string(k) + "]";
      if (!p.is_object()) parse_fail(pcontext + " must be an object");
      reject_unknown_keys(p, {"mean", "variance"}, pcontext);
      node.coefficient_priors.push_back(
          {get_number(get_member(p, "mean", pcontext), pcontext + ".mean"),
           get_number(get_member(p, "variance", pcontext),
                      pcontext + ".variance")});
    }
    if (n.contains("sigma_prior")) {
      const json& sp = n["sigma_prior"];
      const std::string scontext = context + ".sigma_prior";
      if (!sp.is_object()) parse_fail(scontext + " must be an object");
      reject_unknown_keys(sp, {"lo", "hi"}, scontext);
      node.sigma_prior =
          UniformPrior{get_number(get_member(sp, "lo", scontext), scontext + ".lo"),
                       get_number(get_member(sp, "hi", scontext), scontext + ".hi")};
    }
    nodes.push_back(std::move(node));
  }

  return ModelSpec::create(std::move(schema), std::move(nodes));
}

std::string serialize_spec(const ModelSpec& model) {
  json doc;
  json covariates = json::array();
  for (const auto& cov : model.covariates().entries) {
    json c;
    c["name"] = cov.name;
    c["kind"] = cov.kind == CovariateKind::binary ? "binary" : "continuous";
    if (!cov.unit.empty()) c["unit"] = cov.unit;
    if (cov.range) c["range"] = {cov.range->first, cov.range->second};
    covariates.push_back(std::move(c));
  }
  doc["covariates"] = std::move(covariates);

  json nodes = json::array();
  for (const auto& node : model.nodes()) {
    json n;
    n["name"] = node.name;
    n["family"] = node.family == NodeFamily::bernoulli_logistic
                      ? "bernoulli-logistic"
                      : "gaussian-linear";
    n["parents"] = node.parents;
    n["covariates"] = node.covariates;
    json priors = json::array();
    for (const auto& prior : node.coefficient_priors) {
      priors.push_back({{"mean", prior.mean}, {"variance", prior.variance}});
    }
    n["coefficient_priors"] = std::move(priors);
    if (node.sigma_prior) {
      n["sigma_prior"] = {{"lo", node.sigma_prior->lo},
                          {"hi", node.sigma_prior->hi}};
    }
    nodes.push_back(std::move(n));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2) + "\n";
}

ParameterVector parse_theta(std::string_view text, const ModelSpec& model) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    parse_fail(e.what());
  }
  if (!doc.is_object()) parse_fail("theta: top level must be an object");

  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (model.node_index(key) < 0) {
      throw ValidationError("theta: unknown node '" + key + "'");
    }
  }

  ParameterVector params = zero_parameters(model);
  for (std::size_t v = 0; v < model.node_count(); ++v) {
    const NodeSpec& spec = model.node(static_cast<int>(v));
    const auto it = doc.find(spec.name);
    if (it == doc.end()) {
      throw ValidationError("theta: missing node '" + spec.name + "'");
    }
    const json& entry = *it;
    const std::string context = "theta." + spec.name;
    if (!entry.is_object()) parse_fail(context + " must be an object");
    reject_unknown_keys(entry, {"coefficients", "sigma"}, context);
    const json& coef = get_member(entry, "coefficients", context);
    if (!coef.is_array()) {
      parse_fail(context + ": 'coefficients' must be an array");
    }
    if (coef.size() != spec.coefficient_count()) {
      throw ValidationError(context + ": expected " +
                            std::to_string(spec.coefficient_count()) +
                            " coefficients, got " +
                            std::to_string(coef.size()));
    }
    for (std::size_t k = 0; k < coef.size(); ++k) {
      params.nodes[v].coefficients[k] =
          get_number(coef[k], context + ".coefficients");
    }
    if (spec.family == NodeFamily::gaussian_linear) {
      params.nodes[v].sigma =
          get_number(get_member(entry, "sigma", context), context + ".sigma");
    } else if (entry.contains("sigma")) {
      throw ValidationError(context +
                            ": bernoulli-logistic nodes carry no sigma");
    }
  }
  return params;
}

std::string serialize_theta(const ModelSpec& model,
                            const ParameterVector& params) {
  check_shape(model, params);
  json doc;
  for (std::size_t v = 0; v < model.node_count(); ++v) {
    const NodeSpec& spec = model.node(static_cast<int>(v));
    json entry;
    entry["coefficients"] = params.nodes[v].coefficients;
    if (spec.family == NodeFamily::gaussian_linear) {
      entry["sigma"] = params.nodes[v].sigma;
    }
    doc[spec.name] = std::move(entry);
  }
  return doc.dump(2) + "\n";
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

// Locale-free full-field parse; empty fields signal a missing value via NaN.
double parse_cell(std::string_view field, std::size_t line_number,
                  std::string_view column) {
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto [p, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || p != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(line_number) + ", column '" +
                     std::string(column) + "': cannot parse '" +
                     std::string(field) + "'");
  }
  return value;
}

}  // namespace

Dataset read_dataset(std::string_view csv_text, const ModelSpec& model) {
  const auto lines = split_lines(csv_text);
  if (lines.empty()) parse_fail("dataset: missing header row");

  const auto header = split_fields(lines[0]);
  std::map<std::string, std::size_t, std::less<>> column_of;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!column_of.emplace(std::string(header[c]), c).second) {
      parse_fail("dataset: duplicate column '" + std::string(header[c]) + "'");
    }
  }
  auto require_column = [&](const std::string& name) {
    const auto it = column_of.find(name);
    if (it == column_of.end()) {
      throw MissingColumnError("dataset is missing column '" + name + "'");
    }
    return it->second;
  };

  std::vector<std::size_t> cov_src;
  for (const auto& cov : model.covariates().entries) {
    cov_src.push_back(require_column(cov.name));
  }
  std::vector<std::size_t> node_src;
  for (const auto& node : model.nodes()) {
    node_src.push_back(require_column(node.name));
  }

  const std::size_t n_rows = lines.size() - 1;
  std::vector<std::vector<double>> cov_cols(cov_src.size());
  std::vector<std::vector<double>> node_cols(node_src.size());
  for (auto& col : cov_cols) col.reserve(n_rows);
  for (auto& col : node_cols) col.reserve(n_rows);

  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t line_number = r + 2;
    const auto fields = split_fields(lines[r + 1]);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_number) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < cov_src.size(); ++c) {
      cov_cols[c].push_back(parse_cell(fields[cov_src[c]], line_number,
                                       model.covariates().entries[c].name));
    }
    for (std::size_t c = 0; c < node_src.size(); ++c) {
      node_cols[c].push_back(parse_cell(fields[node_src[c]], line_number,
                                        model.node(static_cast<int>(c)).name));
    }
  }
  return Dataset::create(model, std::move(cov_cols), std::move(node_cols));
}

std::string write_dataset(const ModelSpec& model, const Dataset& data) {
  std::string out;
  bool first = true;
  for (const auto& cov : model.covariates().entries) {
    if (!first) out += ',';
    out += cov.name;
    first = false;
  }
  for (const auto& node : model.nodes()) {
    if (!first) out += ',';
    out += node.name;
    first = false;
  }
  out += '\n';
  for (std::size_t r = 0; r < data.n_rows; ++r) {
    first = true;
    for (const auto& col : data.covariate_cols) {
      if (!first) out += ',';
      out += format_double(col[r]);
      first = false;
    }
    for (const auto& col : data.node_cols) {
      if (!first) out += ',';
      out += format_double(col[r]);
      first = false;
    }
    out += '\n';
  }
  return out;
}

std::string format_double(double value) {
  char buf[40];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, p);
}

std::string fingerprint_hex(std::uint64_t fp) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[fp & 0xf];
    fp >>= 4;
  }
  return out;
}

void write_posterior(const PosteriorSample& sample,
                     const std::filesystem::path& csv_path,
                     const std::filesystem::path& meta_path) {
  std::string csv = "chain,iteration";
  for (const auto& name : sample.parameter_names) {
    csv += ',';
    csv += name;
  }
  csv += '\n';
  const int warmup = sample.config.effective_warmup();
  for (std::size_t c = 0; c < sample.n_chains(); ++c) {
    const Matrix& chain = sample.chains[c];
    for (std::size_t r = 0; r < chain.rows; ++r) {
      csv += std::to_string(c);
      csv += ',';
      csv += std::to_string(warmup +
                            static_cast<int>(r + 1) * sample.config.thin);
      for (std::size_t p = 0; p < chain.cols; ++p) {
        csv += ',';
        csv += format_double(chain.at(r, p));
      }
      csv += '\n';
    }
  }
  write_file(csv_path, csv);

  json meta;
  meta["config"] = {{"chains", sample.config.chains},
                    {"iterations", sample.config.iterations},
                    {"warmup", warmup},
                    {"thin", sample.config.thin},
                    {"seed", sample.config.seed},
                    {"target_acceptance", sample.config.target_acceptance},
                    {"adapt", sample.config.adapt},
                    {"standardize", sample.config.standardize}};
  meta["model_fingerprint"] = fingerprint_hex(sample.model_fingerprint);
  meta["parameters"] = sample.parameter_names;
  meta["acceptance_rates"] = sample.acceptance_rates;
  write_file(meta_path, meta.dump(2) + "\n");
}

namespace {

std::uint64_t parse_fingerprint_hex(const std::string& hex) {
  if (hex.size() != 16) parse_fail("sidecar: malformed model_fingerprint");
  std::uint64_t fp = 0;
  for (char ch : hex) {
    fp <<= 4;
    if (ch >= '0' && ch <= '9') {
      fp |= static_cast<std::uint64_t>(ch - '0');
    } else if (ch >= 'a' && ch <= 'f') {
      fp |= static_cast<std::uint64_t>(ch - 'a' + 10);
    } else {
      parse_fail("sidecar: malformed model_fingerprint");
    }
  }
  return fp;
}

}  // namespace

PosteriorSample read_posterior_unchecked(
    const std::filesystem::path& csv_path,
    const std::filesystem::path& meta_path) {
  PosteriorSample sample;

  json meta;
  try {
    meta = json::parse(read_file(meta_path));
  } catch (const json::parse_error& e) {
    parse_fail(std::string("sidecar: ") + e.what());
  }
  if (!meta.is_object()) parse_fail("sidecar: top level must be an object");
  try {
    const json& config = get_member(meta, "config", "sidecar");
    sample.config.chains = config.at("chains").get<int>();
    sample.config.iterations = config.at("iterations").get<int>();
    sample.config.warmup = config.at("warmup").get<int>();
    sample.config.thin = config.at("thin").get<int>();
    sample.config.seed = config.at("seed").get<std::uint64_t>();
    sample.config.target_acceptance =
        config.at("target_acceptance").get<double>();
    sample.config.adapt = config.at("adapt").get<bool>();
    sample.config.standardize = config.at("standardize").get<bool>();
    sample.model_fingerprint = parse_fingerprint_hex(
        get_member(meta, "model_fingerprint", "sidecar").get<std::string>());
    sample.parameter_names = get_member(meta, "parameters", "sidecar")
                                 .get<std::vector<std::string>>();
    sample.acceptance_rates =
        get_member(meta, "acceptance_rates", "sidecar")
            .get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    parse_fail(std::string("sidecar: ") + e.what());
  }

  const std::string csv = read_file(csv_path);
  const auto lines = split_lines(csv);
  if (lines.empty()) parse_fail("posterior CSV: missing header row");
  {
    std::string expected = "chain,iteration";
    for (const auto& name : sample.parameter_names) {
      expected += ',';
      expected += name;
    }
    if (lines[0] != expected) {
      parse_fail("posterior CSV: header does not match sidecar parameters");
    }
  }

  const std::size_t n_params = sample.parameter_names.size();
  const std::size_t kept =
      static_cast<std::size_t>(sample.config.kept_per_chain());
  const std::size_t n_chains = static_cast<std::size_t>(sample.config.chains);
  if (lines.size() - 1 != kept * n_chains) {
    parse_fail("posterior CSV: expected " + std::to_string(kept * n_chains) +
               " draw rows, got " + std::to_string(lines.size() - 1));
  }

  sample.chains.assign(n_chains, Matrix(kept, n_params));
  std::vector<std::size_t> filled(n_chains, 0);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    if (fields.size() != n_params + 2) {
      throw ParseError("line " + std::to_string(r + 1) + ": expected " +
                       std::to_string(n_params + 2) + " fields, got " +
                       std::to_string(fields.size()));
    }
    const double chain_d = parse_cell(fields[0], r + 1, "chain");
    const std::size_t c = static_cast<std::size_t>(chain_d);
    if (!(chain_d >= 0) || c >= n_chains || chain_d != std::floor(chain_d)) {
      throw ParseError("line " + std::to_string(r + 1) +
                       ": invalid chain index");
    }
    if (filled[c] >= kept) {
      throw ParseError("line " + std::to_string(r + 1) +
                       ": too many rows for chain " + std::to_string(c));
    }
    for (std::size_t p = 0; p < n_params; ++p) {
      sample.chains[c].at(filled[c], p) =
          parse_cell(fields[p + 2], r + 1, sample.parameter_names[p]);
    }
    ++filled[c];
  }
  return sample;
}

PosteriorSample read_posterior(const std::filesystem::path& csv_path,
                               const std::filesystem::path& meta_path,
                               const ModelSpec& model) {
  PosteriorSample sample = read_posterior_unchecked(csv_path, meta_path);
  if (sample.model_fingerprint != fingerprint(model)) {
    throw FingerprintMismatchError(
        "posterior file was produced under a different model (fingerprint " +
        fingerprint_hex(sample.model_fingerprint) + ", expected " +
        fingerprint_hex(fingerprint(model)) + ")");
  }
  const ParameterLayout layout = ParameterLayout::create(model);
  if (layout.size() != sample.parameter_names.size()) {
    parse_fail("posterior CSV: parameter count does not match model");
  }
  for (std::size_t k = 0; k < layout.size(); ++k) {
    if (layout.entries[k].name != sample.parameter_names[k]) {
      parse_fail("posterior CSV: parameter '" + sample.parameter_names[k] +
                 "' does not match model layout");
    }
  }
  // Sigma draws must sit strictly inside their prior supports.
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto& entry = layout.entries[k];
    if (!entry.is_sigma()) continue;
    const auto& sp = *model.node(entry.node).sigma_prior;
    for (const auto& chain : sample.chains) {
      for (std::size_t r = 0; r < chain.rows; ++r) {
        const double sigma = chain.at(r, k);
        if (!(sigma > sp.lo) || !(sigma < sp.hi)) {
          parse_fail("posterior CSV: draw for '" + entry.name +
                     "' lies outside its prior support");
        }
      }
    }
  }
  return sample;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open file '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ParseError("cannot open file '" + path.string() + "' for writing");
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw ParseError("failed writing file '" + path.string() + "'");
  }
}

}  // namespace affectbn
