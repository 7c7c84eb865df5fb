#include "locrobust/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "locrobust/error.hpp"
#include "locrobust/harness/csv.hpp"

namespace locrobust::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ValidationError("field '" + key + "': expected a number, got '" + v + "'");
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ValidationError("field '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, std::string>) {
      out += xs[i];
    } else if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

}  // namespace

std::vector<int> ExperimentConfig::panel_lengths() const {
  if (!T_grid.empty()) return T_grid;
  return {probit.T};
}

bool ExperimentConfig::uses(const std::string& estimator) const {
  return std::find(estimators.begin(), estimators.end(), estimator) != estimators.end();
}

void set_field(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "experiment") {
    if (value != "montecarlo" && value != "biascurve" && value != "sweep")
      throw ValidationError("field 'experiment': expected montecarlo, biascurve or sweep, got '" +
                            value + "'");
    c.experiment = value;
  } else if (key == "model") {
    if (value != "probit") throw ValidationError("field 'model': only 'probit' is supported");
    c.model = value;
  } else if (key == "beta") {
    c.probit.beta = to_double(key, value);
  } else if (key == "mu1") {
    c.probit.mu1 = to_double(key, value);
  } else if (key == "mu2") {
    c.probit.mu2 = to_double(key, value);
  } else if (key == "sigma") {
    c.probit.sigma = to_double(key, value);
  } else if (key == "T") {
    c.probit.T = to_int<int>(key, value);
  } else if (key == "T_grid") {
    c.T_grid.clear();
    for (const auto& v : split_list(value)) c.T_grid.push_back(to_int<int>(key, v));
  } else if (key == "dgp") {
    c.dgp = models::parse_probit_dgp(value);
  } else if (key == "nu") {
    c.nu = to_double(key, value);
  } else if (key == "nu_grid") {
    c.nu_grid.clear();
    for (const auto& v : split_list(value)) c.nu_grid.push_back(to_double(key, v));
  } else if (key == "n") {
    c.n = to_int<long>(key, value);
  } else if (key == "S") {
    c.S = to_int<long>(key, value);
  } else if (key == "replications") {
    c.replications = to_int<long>(key, value);
  } else if (key == "fresh_draws") {
    c.fresh_draws = to_int<int>(key, value);
  } else if (key == "quadrature_nodes") {
    c.quadrature_nodes = to_int<int>(key, value);
  } else if (key == "p") {
    c.p_values.clear();
    for (const auto& v : split_list(value)) c.p_values.push_back(to_double(key, v));
  } else if (key == "ci_p") {
    c.ci_p = to_double(key, value);
  } else if (key == "mu") {
    c.mu = to_double(key, value);
  } else if (key == "estimators") {
    c.estimators = split_list(value);
    for (const auto& e : c.estimators)
      if (e != "RE" && e != "EB" && e != "LP" && e != "MMSE")
        throw ValidationError("field 'estimators': unknown estimator '" + e +
                              "' (expected RE, EB, LP, MMSE)");
  } else if (key == "curve_y0") {
    c.curve_y0 = to_double(key, value);
  } else if (key == "seed") {
    c.seed = to_int<std::uint64_t>(key, value);
  } else if (key == "threads") {
    c.threads = to_int<int>(key, value);
  } else if (key == "output") {
    c.output = value;
  } else if (key == "raw_output") {
    c.raw_output = value;
  } else {
    throw ValidationError("unknown field '" + key + "'");
  }
}

void validate(const ExperimentConfig& c) {
  require(c.replications >= 1, "replications must be >= 1");
  require(c.n >= 1, "n must be >= 1");
  require(c.S >= 2, "S must be >= 2");
  require(c.probit.sigma > 0.0, "sigma must be positive");
  for (int t : c.panel_lengths()) require(t >= 1, "panel lengths must be >= 1");
  require(!c.p_values.empty(), "at least one p value is required");
  for (double p : c.p_values) require(p > 0.0 && p < 1.0, "p values must lie in (0, 1)");
  require(c.ci_p > 0.0 && c.ci_p < 1.0, "ci_p must lie in (0, 1)");
  require(c.mu > 0.0 && c.mu < 1.0, "mu must lie in (0, 1)");
  require(c.fresh_draws >= 1, "fresh_draws must be >= 1");
  require(c.quadrature_nodes >= 2, "quadrature_nodes must be >= 2");
  require(c.curve_y0 == 0.0 || c.curve_y0 == 1.0, "curve_y0 must be 0 or 1");
  require(c.threads >= 0, "threads must be >= 0");
  if (c.experiment == "sweep") require(!c.nu_grid.empty(), "sweep requires nu_grid");
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ValidationError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError(where + "missing key");
    try {
      set_field(c, key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  try {
    validate(c);
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string canonical(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "experiment = " << c.experiment << '\n'
    << "model = " << c.model << '\n'
    << "beta = " << format_double(c.probit.beta) << '\n'
    << "mu1 = " << format_double(c.probit.mu1) << '\n'
    << "mu2 = " << format_double(c.probit.mu2) << '\n'
    << "sigma = " << format_double(c.probit.sigma) << '\n'
    << "T = " << c.probit.T << '\n'
    << "T_grid = " << join(c.T_grid) << '\n'
    << "dgp = " << models::to_string(c.dgp) << '\n'
    << "nu = " << format_double(c.nu) << '\n'
    << "nu_grid = " << join(c.nu_grid) << '\n'
    << "n = " << c.n << '\n'
    << "S = " << c.S << '\n'
    << "replications = " << c.replications << '\n'
    << "fresh_draws = " << c.fresh_draws << '\n'
    << "quadrature_nodes = " << c.quadrature_nodes << '\n'
    << "p = " << join(c.p_values) << '\n'
    << "ci_p = " << format_double(c.ci_p) << '\n'
    << "mu = " << format_double(c.mu) << '\n'
    << "estimators = " << join(c.estimators) << '\n'
    << "curve_y0 = " << format_double(c.curve_y0) << '\n'
    << "seed = " << c.seed << '\n';
  return o.str();
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical(c)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace locrobust::harness
