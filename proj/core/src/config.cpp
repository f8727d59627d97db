#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "ncbsbl/experiment.hpp"
#include "ncbsbl/sbl_baselines.hpp"

namespace ncbsbl {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

double parse_plain(const std::string& tok, const std::string& key) {
  if (tok == "inf" || tok == "+inf") return kNoiseless;
  if (tok == "-inf") return -kNoiseless;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse number '" + tok + "'");
  }
  if (used != tok.size()) throw ConfigError("key '" + key + "': trailing text in '" + tok + "'");
  return v;
}

// Numbers, optionally written as multiples of pi: "0.5", "pi", "-pi/4", "3*pi/4".
double parse_number(std::string_view raw, const std::string& key) {
  std::string tok = trim(raw);
  if (tok.empty()) throw ConfigError("key '" + key + "': empty value");
  const auto pi_pos = tok.find("pi");
  if (pi_pos == std::string::npos) return parse_plain(tok, key);

  double factor = 1.0;
  std::string head = trim(std::string_view(tok).substr(0, pi_pos));
  if (!head.empty() && head.back() == '*') {
    head.pop_back();
    factor = parse_plain(trim(head), key);
  } else if (head == "-") {
    factor = -1.0;
  } else if (!head.empty() && head != "+") {
    throw ConfigError("key '" + key + "': cannot parse '" + tok + "'");
  }
  std::string tail = trim(std::string_view(tok).substr(pi_pos + 2));
  double divisor = 1.0;
  if (!tail.empty()) {
    if (tail.front() != '/') throw ConfigError("key '" + key + "': cannot parse '" + tok + "'");
    divisor = parse_plain(trim(std::string_view(tail).substr(1)), key);
    if (divisor == 0.0) throw ConfigError("key '" + key + "': division by zero");
  }
  return factor * kPi / divisor;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

// "a, b, c" or an inclusive range "start:step:stop".
std::vector<double> parse_list(std::string_view value, const std::string& key) {
  std::vector<double> out;
  if (value.find(':') != std::string_view::npos && value.find(',') == std::string_view::npos) {
    const auto parts = split(value, ':');
    if (parts.size() != 3) throw ConfigError("key '" + key + "': range must be start:step:stop");
    const double a = parse_number(parts[0], key);
    const double step = parse_number(parts[1], key);
    const double b = parse_number(parts[2], key);
    if (!(step > 0.0) || b < a) throw ConfigError("key '" + key + "': empty or invalid range");
    const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
    for (std::size_t k = 0; k <= n; ++k) out.push_back(a + static_cast<double>(k) * step);
    return out;
  }
  for (const auto& tok : split(value, ',')) out.push_back(parse_number(tok, key));
  return out;
}

std::size_t parse_count(std::string_view value, const std::string& key) {
  const std::string tok = trim(value);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw ConfigError("key '" + key + "': expected a nonnegative integer, got '" + tok + "'");
  }
  return static_cast<std::size_t>(std::stoull(tok));
}

bool parse_bool(std::string_view value, const std::string& key) {
  const std::string tok = trim(value);
  if (tok == "true" || tok == "1" || tok == "yes") return true;
  if (tok == "false" || tok == "0" || tok == "no") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + tok + "'");
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt_double(v[i]);
  }
  return out;
}

}  // namespace

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::nc_bsbl: return "nc_bsbl";
    case SolverKind::sbl: return "sbl";
    case SolverKind::nc_sbl: return "nc_sbl";
  }
  return "unknown";
}

SolverKind parse_solver_kind(std::string_view name) {
  if (name == "nc_bsbl") return SolverKind::nc_bsbl;
  if (name == "sbl") return SolverKind::sbl;
  if (name == "nc_sbl") return SolverKind::nc_sbl;
  throw ConfigError("unknown solver '" + std::string(name) + "' (expected nc_bsbl, sbl, nc_sbl)");
}

std::vector<double> ExperimentSpec::nc_sbl_phases() const {
  if (nc_sbl_phis) return *nc_sbl_phis;
  return std::vector<double>(scenario.num_sources(),
                             scenario.phis_rad.empty() ? 0.0 : scenario.phis_rad.front());
}

void ExperimentSpec::validate() const {
  try {
    scenario.validate();
    solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (trials == 0) throw ConfigError("trials must be at least 1");
  if (snr_grid_db.empty()) throw ConfigError("snr_grid_db must not be empty");
  if (solvers.empty()) throw ConfigError("solvers must not be empty");
  if (threads == 0) throw ConfigError("threads must be at least 1");
  for (double s : snr_grid_db) {
    if (std::isnan(s) || s == -kNoiseless) throw ConfigError("SNR values must be finite or +inf");
  }
  if (std::find(solvers.begin(), solvers.end(), SolverKind::nc_sbl) != solvers.end()) {
    const auto phis = nc_sbl_phases();
    if (phis.size() != scenario.num_sources()) {
      throw ConfigError("nc_sbl_phis_rad needs one phase per source");
    }
    try {
      common_phase(phis);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
}

ExperimentSpec parse_config(std::string_view text) {
  ExperimentSpec spec;
  double grid_min = spec.scenario.grid.theta_min();
  double grid_step = spec.scenario.grid.step();
  double grid_max = spec.scenario.grid.theta_max();

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));

    if (key == "num_elements" || key == "M") {
      spec.scenario.num_elements = parse_count(value, key);
    } else if (key == "snapshots" || key == "L") {
      spec.scenario.snapshots = parse_count(value, key);
    } else if (key == "thetas_deg") {
      spec.scenario.thetas_deg = parse_list(value, key);
    } else if (key == "phis_rad") {
      spec.scenario.phis_rad = parse_list(value, key);
    } else if (key == "grid") {
      const auto parts = split(value, ':');
      if (parts.size() != 3) throw ConfigError("key 'grid': expected min:step:max");
      grid_min = parse_number(parts[0], key);
      grid_step = parse_number(parts[1], key);
      grid_max = parse_number(parts[2], key);
    } else if (key == "snr_grid_db") {
      spec.snr_grid_db = parse_list(value, key);
    } else if (key == "trials") {
      spec.trials = parse_count(value, key);
    } else if (key == "solvers") {
      spec.solvers.clear();
      for (const auto& tok : split(value, ',')) spec.solvers.push_back(parse_solver_kind(tok));
    } else if (key == "seed_base") {
      spec.seed_base = parse_count(value, key);
    } else if (key == "source_kind") {
      try {
        spec.scenario.source_kind = parse_source_kind(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "on_grid") {
      spec.scenario.on_grid = parse_bool(value, key);
    } else if (key == "nc_sbl_phis_rad") {
      spec.nc_sbl_phis = parse_list(value, key);
    } else if (key == "beta_mode") {
      try {
        spec.solver.beta_mode = parse_beta_mode(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "max_iter") {
      spec.solver.max_iter = parse_count(value, key);
    } else if (key == "eps_min") {
      spec.solver.eps_min = parse_number(value, key);
    } else if (key == "r_clip") {
      spec.solver.r_clip = parse_number(value, key);
    } else if (key == "prune_floor") {
      spec.solver.prune_floor = parse_number(value, key);
    } else if (key == "escape_local_minima") {
      spec.solver.escape_local_minima = parse_bool(value, key);
    } else if (key == "threads") {
      spec.threads = parse_count(value, key);
    } else if (key == "output_dir") {
      spec.output_dir = value;
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  try {
    spec.scenario.grid = GridSpec::make(grid_min, grid_max, grid_step);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("key 'grid': ") + e.what());
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_config_text(const ExperimentSpec& spec) {
  const auto& sc = spec.scenario;
  std::ostringstream out;
  out << "num_elements = " << sc.num_elements << '\n'
      << "snapshots = " << sc.snapshots << '\n'
      << "thetas_deg = " << fmt_list(sc.thetas_deg) << '\n'
      << "phis_rad = " << fmt_list(sc.phis_rad) << '\n'
      << "grid = " << fmt_double(sc.grid.theta_min()) << ':' << fmt_double(sc.grid.step()) << ':'
      << fmt_double(sc.grid.theta_max()) << '\n'
      << "source_kind = " << to_string(sc.source_kind) << '\n'
      << "on_grid = " << (sc.on_grid ? "true" : "false") << '\n'
      << "snr_grid_db = " << fmt_list(spec.snr_grid_db) << '\n'
      << "trials = " << spec.trials << '\n'
      << "solvers = ";
  for (std::size_t i = 0; i < spec.solvers.size(); ++i) {
    out << (i ? ", " : "") << to_string(spec.solvers[i]);
  }
  out << '\n';
  if (spec.nc_sbl_phis) out << "nc_sbl_phis_rad = " << fmt_list(*spec.nc_sbl_phis) << '\n';
  out << "seed_base = " << spec.seed_base << '\n'
      << "beta_mode = " << to_string(spec.solver.beta_mode) << '\n'
      << "max_iter = " << spec.solver.max_iter << '\n'
      << "eps_min = " << fmt_double(spec.solver.eps_min) << '\n'
      << "r_clip = " << fmt_double(spec.solver.r_clip) << '\n'
      << "prune_floor = " << fmt_double(spec.solver.prune_floor) << '\n'
      << "escape_local_minima = " << (spec.solver.escape_local_minima ? "true" : "false") << '\n'
      << "threads = " << spec.threads << '\n'
      << "output_dir = " << spec.output_dir.string() << '\n';
  return out.str();
}

}  // namespace ncbsbl
