#include "vcam/io.hpp"

#include <unistd.h>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace vcam::io {

using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw std::runtime_error("cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dataset_to_csv(const TimeSeriesDataset& data) {
  std::string out = "t,y";
  for (int k = 1; k <= data.covariate_count(); ++k) out += ",x" + std::to_string(k);
  out += '\n';
  for (int t = 0; t < data.length(); ++t) {
    out += std::to_string(t + 1);
    out += ',';
    out += format_double(data.response()[t]);
    for (int k = 0; k < data.covariate_count(); ++k) {
      out += ',';
      out += format_double(data.covariates()(t, k));
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view field, const std::string& where) {
  field = trim(field);
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw std::invalid_argument(where + ": cannot parse '" + std::string(field) + "' as a number");
  }
  return value;
}

const char* to_string(ComponentKind kind) {
  return kind == ComponentKind::additive ? "additive" : "varying_coefficient";
}

const char* to_string(ComponentShape shape) {
  switch (shape) {
    case ComponentShape::spline: return "spline";
    case ComponentShape::constant: return "constant";
    case ComponentShape::linear: return "linear";
  }
  return "spline";
}

ComponentShape parse_shape(const std::string& s) {
  if (s == "spline") return ComponentShape::spline;
  if (s == "constant") return ComponentShape::constant;
  if (s == "linear") return ComponentShape::linear;
  throw std::invalid_argument("fit artifact: unknown component shape '" + s + "'");
}

json vector_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void csv_row(std::string& out, const std::string& record, const std::string& key, const std::string& value) {
  out += csv_field(record) + ',' + csv_field(key) + ',' + csv_field(value) + '\n';
}

}  // namespace

TimeSeriesDataset dataset_from_csv(std::string_view text, const std::string& source) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  if (lines.empty()) throw std::invalid_argument(source + ": empty file, missing header t,y,x1,...");
  const auto header = split(lines.front(), ',');
  std::vector<std::string> names;
  for (auto h : header) names.emplace_back(trim(h));
  if (names.empty() || names[0] != "t") throw std::invalid_argument(source + ": missing column 't'");
  if (names.size() < 2 || names[1] != "y") throw std::invalid_argument(source + ": missing column 'y'");
  if (names.size() < 3) throw std::invalid_argument(source + ": missing column 'x1'");
  const int p = static_cast<int>(names.size()) - 2;
  for (int k = 1; k <= p; ++k) {
    const std::string expected = "x" + std::to_string(k);
    if (names[k + 1] != expected) {
      throw std::invalid_argument(source + ": missing column '" + expected + "' (found '" + names[k + 1] + "')");
    }
  }
  const int T = static_cast<int>(lines.size()) - 1;
  if (T < 1) throw std::invalid_argument(source + ": no observations");
  Vector y(T);
  Matrix x(T, p);
  for (int t = 0; t < T; ++t) {
    const std::string where = source + " line " + std::to_string(t + 2);
    const auto fields = split(lines[t + 1], ',');
    if (static_cast<int>(fields.size()) != p + 2) {
      throw std::invalid_argument(where + ": expected " + std::to_string(p + 2) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    const double index = parse_number(fields[0], where + " column 't'");
    if (index != t + 1) throw std::invalid_argument(where + ": column 't' must count 1..T in order");
    y[t] = parse_number(fields[1], where + " column 'y'");
    for (int k = 0; k < p; ++k) x(t, k) = parse_number(fields[k + 2], where + " column 'x" + std::to_string(k + 1) + "'");
  }
  return TimeSeriesDataset(std::move(y), std::move(x));
}

TimeSeriesDataset read_dataset(const std::filesystem::path& path) {
  return dataset_from_csv(read_file(path), path.string());
}

std::string grid_to_csv(const std::vector<std::pair<double, double>>& grid) {
  std::string out = "x,value\n";
  for (const auto& [x, v] : grid) out += format_double(x) + ',' + format_double(v) + '\n';
  return out;
}

json component_to_json(const ComponentFunction& f) {
  json j;
  j["kind"] = to_string(f.kind);
  j["shape"] = to_string(f.shape);
  j["order"] = f.basis.order();
  j["knots"] = std::vector<double>(f.basis.knots().begin(), f.basis.knots().end());
  j["coeffs"] = vector_json(f.coeffs);
  if (f.kind == ComponentKind::additive) j["anchor"] = f.anchor;
  return j;
}

ComponentFunction component_from_json(const json& j) {
  try {
    SplineBasis basis = SplineBasis::from_knots(j.at("order").get<int>(), j.at("knots").get<std::vector<double>>());
    Vector coeffs = vector_from_json(j.at("coeffs"));
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "additive" && kind != "varying_coefficient") {
      throw std::invalid_argument("fit artifact: unknown component kind '" + kind + "'");
    }
    ComponentFunction f = kind == "additive"
                              ? additive(std::move(basis), std::move(coeffs), j.at("anchor").get<double>())
                              : varying_coefficient(std::move(basis), std::move(coeffs));
    f.shape = parse_shape(j.value("shape", std::string("spline")));
    return f;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("fit artifact: malformed component: ") + e.what());
  }
}

json fit_to_json(const VcamFit& fit) {
  json j;
  j["format"] = "vcam-fit";
  j["version"] = 1;
  j["covariates"] = fit.covariate_count();
  j["alpha"] = json::array();
  for (const auto& a : fit.alpha) j["alpha"].push_back(component_to_json(a));
  j["beta"] = json::array();
  for (const auto& b : fit.beta) j["beta"].push_back(component_to_json(b));
  j["scales"] = vector_json(fit.scales);
  const auto& d = fit.diagnostics;
  j["diagnostics"] = {{"rss", d.rss},
                      {"bic", d.bic},
                      {"segment_length", d.segment_length},
                      {"interior_knots", d.interior_knots},
                      {"group_count", d.group_count},
                      {"rank_deficient_groups", d.rank_deficient_groups},
                      {"rounds", d.rounds}};
  return j;
}

VcamFit fit_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "vcam-fit") throw std::invalid_argument("fit artifact: wrong format tag");
    VcamFit fit;
    for (const auto& a : j.at("alpha")) fit.alpha.push_back(component_from_json(a));
    for (const auto& b : j.at("beta")) fit.beta.push_back(component_from_json(b));
    if (fit.alpha.size() != fit.beta.size() + 1) {
      throw std::invalid_argument("fit artifact: needs p + 1 alpha and p beta components");
    }
    fit.scales = vector_from_json(j.at("scales"));
    const json& d = j.at("diagnostics");
    fit.diagnostics.rss = d.at("rss").get<double>();
    fit.diagnostics.bic = d.at("bic").get<double>();
    fit.diagnostics.segment_length = d.at("segment_length").get<int>();
    fit.diagnostics.interior_knots = d.at("interior_knots").get<int>();
    fit.diagnostics.group_count = d.at("group_count").get<int>();
    fit.diagnostics.rank_deficient_groups = d.at("rank_deficient_groups").get<int>();
    fit.diagnostics.rounds = d.at("rounds").get<int>();
    return fit;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("fit artifact: ") + e.what());
  }
}

VcamFit read_fit(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": not valid JSON: " + e.what());
  }
  return fit_from_json(j);
}

json identification_to_json(const IdentificationResult& r, const PenaltyConfig& cfg) {
  const auto trajectories = [](const LqaTrace& trace, std::size_t terms) {
    json per_term = json::array();
    for (std::size_t k = 0; k < terms; ++k) {
      json path = json::array();
      for (const auto& row : trace.norms) path.push_back(row.at(k));
      per_term.push_back(std::move(path));
    }
    return per_term;
  };
  const std::size_t p = r.alpha_constant.size();
  json j;
  j["format"] = "vcam-identification";
  j["version"] = 1;
  j["lambda"] = r.lambda;
  j["mu"] = r.mu;
  j["d1"] = r.d1;
  j["d2"] = r.d2;
  j["alpha_constant"] = r.alpha_constant;
  j["beta_linear"] = r.beta_linear;
  json terms = json::array();
  for (std::size_t k = 0; k < p; ++k) {
    std::string label = "varying-coefficient additive";
    if (r.alpha_constant[k] && r.beta_linear[k]) label = "linear";
    else if (r.alpha_constant[k]) label = "pure additive";
    else if (r.beta_linear[k]) label = "pure varying-coefficient";
    terms.push_back({{"term", k + 1}, {"structure", label}});
  }
  j["terms"] = std::move(terms);
  j["rss1"] = r.rss1;
  j["rss2"] = r.rss2;
  j["lambda_grid"] = cfg.lambda_grid;
  j["lambda_bic"] = r.lambda_bic;
  j["mu_grid"] = cfg.mu_grid;
  j["mu_bic"] = r.mu_bic;
  j["stage1"] = {{"iterations", r.stage1_trace.iterations},
                 {"converged", r.stage1_trace.converged},
                 {"objective", r.stage1_trace.objective},
                 {"derivative_norms", trajectories(r.stage1_trace, p)}};
  j["stage2"] = {{"iterations", r.stage2_trace.iterations},
                 {"converged", r.stage2_trace.converged},
                 {"objective", r.stage2_trace.objective},
                 {"curvature_norms", trajectories(r.stage2_trace, p)}};
  j["alpha_p"] = json::array();
  for (const auto& a : r.alpha_p) j["alpha_p"].push_back(component_to_json(a));
  j["beta_p"] = json::array();
  for (const auto& b : r.beta_p) j["beta_p"].push_back(component_to_json(b));
  return j;
}

json truth_to_json(const SimulatedData& sim, const std::string& example, std::uint64_t seed, std::uint64_t stream) {
  json j;
  j["format"] = "vcam-truth";
  j["version"] = 1;
  j["example"] = example;
  j["seed"] = seed;
  j["stream"] = stream;
  j["length"] = sim.data.length();
  j["sigma"] = sim.truth.model.sigma;
  j["alpha_constant"] = sim.truth.model.alpha_constant;
  j["beta_linear"] = sim.truth.model.beta_linear;
  j["noise"] = vector_json(sim.truth.noise);
  return j;
}

std::string report_to_csv(const MonteCarloReport& r) {
  std::string out = "record,key,value\n";
  csv_row(out, "meta", "scenario", r.scenario);
  csv_row(out, "meta", "T", std::to_string(r.length));
  csv_row(out, "meta", "Q", std::to_string(r.replications));
  csv_row(out, "meta", "seed", std::to_string(r.base_seed));
  csv_row(out, "meta", "succeeded", std::to_string(r.succeeded));
  csv_row(out, "meta", "failed", std::to_string(r.failures.size()));
  for (const auto& m : r.mise) {
    const std::string key = m.estimator + "/" + m.function;
    csv_row(out, "mise_mean", key, format_double(m.mean));
    csv_row(out, "mise_sd", key, format_double(m.sd));
    csv_row(out, "mise_count", key, std::to_string(m.count));
  }
  if (r.identification) {
    const auto counts = [&](const char* name, const OutcomeCounts& c) {
      csv_row(out, "fit_outcome", std::string(name) + "/correct", std::to_string(c.correct));
      csv_row(out, "fit_outcome", std::string(name) + "/over", std::to_string(c.over));
      csv_row(out, "fit_outcome", std::string(name) + "/under", std::to_string(c.under));
    };
    counts("additive_terms", r.additive_terms);
    counts("varying_terms", r.varying_terms);
    counts("true_model", r.true_model);
  }
  for (const auto& [key, n] : r.chosen_parameters) csv_row(out, "chosen", key, std::to_string(n));
  for (const auto& f : r.failures) csv_row(out, "failure", std::to_string(f.replicate), f.message);
  return out;
}

std::string report_to_table(const MonteCarloReport& r) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "scenario %s  T=%d  Q=%d  seed=%llu  succeeded=%d  failed=%zu  (%.1f s)\n",
                r.scenario.c_str(), r.length, r.replications, static_cast<unsigned long long>(r.base_seed),
                r.succeeded, r.failures.size(), r.wall_seconds);
  os << line;
  std::snprintf(line, sizeof line, "%-22s %-8s %12s %12s %6s\n", "estimator", "function", "mean MISE", "sd", "n");
  os << line;
  for (const auto& m : r.mise) {
    std::snprintf(line, sizeof line, "%-22s %-8s %12.6f %12.6f %6d\n", m.estimator.c_str(), m.function.c_str(),
                  m.mean, m.sd, m.count);
    os << line;
  }
  if (r.identification) {
    os << "\nidentification      C-F   O-F   U-F\n";
    const auto row = [&](const char* name, const OutcomeCounts& c) {
      std::snprintf(line, sizeof line, "%-18s %5d %5d %5d\n", name, c.correct, c.over, c.under);
      os << line;
    };
    row("additive terms", r.additive_terms);
    row("varying terms", r.varying_terms);
    row("true model", r.true_model);
  }
  if (!r.chosen_parameters.empty()) {
    os << "\nchosen tuning parameters\n";
    for (const auto& [key, n] : r.chosen_parameters) os << "  " << key << ": " << n << '\n';
  }
  for (const auto& f : r.failures) os << "replicate " << f.replicate << " failed: " << f.message << '\n';
  return os.str();
}

}  // namespace vcam::io
