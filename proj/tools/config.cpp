#include "config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "rotor/errors.hpp"

namespace rotorcli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("expected a number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError("'" + t + "' is not a finite number");
  }
  return v;
}

std::int64_t to_int(const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError("'" + t + "' is not an integer");
  }
  return v;
}

std::uint64_t to_unsigned(const std::string& text) {
  const std::int64_t v = to_int(text);
  if (v < 0) throw ConfigError("'" + trim(text) + "' must be >= 0");
  return static_cast<std::uint64_t>(v);
}

std::vector<double> to_list(const std::string& text) {
  const std::string t = trim(text);
  std::vector<double> out;
  if (t.empty()) return out;
  if (t.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(to_double(item));
    if (parts.size() != 3) throw ConfigError("ranges are written start:stop:step");
    const double a = parts[0], b = parts[1], step = parts[2];
    if (!(step > 0.0) || b < a) throw ConfigError("range needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(a + step * static_cast<double>(i));
    return out;
  }
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"omega_r_hz", [](RunConfig& c, const std::string& v) { c.omega_r_hz = to_double(v); }},
      {"ell_bar", [](RunConfig& c, const std::string& v) { c.ell_bar = to_int(v); }},
      {"sigma_ell", [](RunConfig& c, const std::string& v) { c.sigma_ell = to_double(v); }},
      {"kappa", [](RunConfig& c, const std::string& v) { c.kappa = to_double(v); }},
      {"window_halfwidth", [](RunConfig& c, const std::string& v) { c.window_halfwidth = to_int(v); }},
      {"frame",
       [](RunConfig& c, const std::string& v) {
         const std::string t = trim(v);
         if (t == "lab") c.frame = rotor::Frame::lab;
         else if (t == "corotating") c.frame = rotor::Frame::corotating;
         else throw ConfigError("frame must be lab or corotating");
       }},
      {"noise_center_khz", [](RunConfig& c, const std::string& v) { c.noise_center_khz = to_double(v); }},
      {"noise_fwhm_khz", [](RunConfig& c, const std::string& v) { c.noise_fwhm_khz = to_double(v); }},
      {"d_target_hbar2_per_ms", [](RunConfig& c, const std::string& v) { c.d_target = to_double(v); }},
      {"noise_dt_ms", [](RunConfig& c, const std::string& v) { c.noise_dt_ms = to_double(v); }},
      {"ambient_d_hbar2_per_ms", [](RunConfig& c, const std::string& v) { c.ambient_d = to_double(v); }},
      {"t_max_ms", [](RunConfig& c, const std::string& v) { c.t_max_ms = to_double(v); }},
      {"t_step_ms", [](RunConfig& c, const std::string& v) { c.t_step_ms = to_double(v); }},
      {"t_fit_min_ms", [](RunConfig& c, const std::string& v) { c.t_fit_min_ms = to_double(v); }},
      {"centers_khz", [](RunConfig& c, const std::string& v) { c.centers_khz = to_list(v); }},
      {"delta_ell",
       [](RunConfig& c, const std::string& v) {
         c.delta_ell.clear();
         for (double d : to_list(v)) {
           if (d != std::floor(d)) throw ConfigError("delta_ell entries must be integers");
           c.delta_ell.push_back(static_cast<int>(d));
         }
       }},
      {"tau_ms", [](RunConfig& c, const std::string& v) { c.tau_ms = to_list(v); }},
      {"tau_points", [](RunConfig& c, const std::string& v) { c.tau_points = to_unsigned(v); }},
      {"tau_span_over_gamma", [](RunConfig& c, const std::string& v) { c.tau_span_over_gamma = to_double(v); }},
      {"phase_points", [](RunConfig& c, const std::string& v) { c.phase_points = to_unsigned(v); }},
      {"contrast_factor", [](RunConfig& c, const std::string& v) { c.contrast_factor = to_double(v); }},
      {"d_list_hbar2_per_ms", [](RunConfig& c, const std::string& v) { c.d_list = to_list(v); }},
      {"engine", [](RunConfig& c, const std::string& v) { c.engine = parse_engine(trim(v)); }},
      {"lindblad_dt_ms", [](RunConfig& c, const std::string& v) { c.lindblad_dt_ms = to_double(v); }},
      {"n_traj", [](RunConfig& c, const std::string& v) { c.n_traj = to_unsigned(v); }},
      {"master_seed", [](RunConfig& c, const std::string& v) { c.master_seed = to_unsigned(v); }},
      {"threads", [](RunConfig& c, const std::string& v) { c.threads = static_cast<unsigned>(to_unsigned(v)); }},
      {"output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = trim(v); }},
  };
  return table;
}

}  // namespace

const char* engine_name(Engine e) {
  switch (e) {
    case Engine::none: return "none";
    case Engine::lindblad: return "lindblad";
    case Engine::trajectory: return "trajectory";
  }
  return "?";
}

Engine parse_engine(const std::string& name) {
  if (name == "none") return Engine::none;
  if (name == "lindblad") return Engine::lindblad;
  if (name == "trajectory") return Engine::trajectory;
  throw ConfigError("engine must be none, lindblad or trajectory (got '" + name + "')");
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(omega_r_hz > 0.0, "omega_r_hz must be positive");
  require(ell_bar >= 0, "ell_bar must be >= 0");
  require(sigma_ell >= 1.0, "sigma_ell must be >= 1");
  require(window_halfwidth >= 0, "window_halfwidth must be >= 0");
  require(noise_fwhm_khz > 0.0 && noise_center_khz >= 0.0, "noise band must have fwhm > 0 and center >= 0");
  require(noise_dt_ms > 0.0, "noise_dt_ms must be positive");
  require(d_target >= 0.0 && ambient_d >= 0.0, "diffusion coefficients must be >= 0");
  require(t_max_ms > 0.0 && t_step_ms > 0.0 && t_step_ms <= t_max_ms, "need 0 < t_step_ms <= t_max_ms");
  require(t_fit_min_ms >= 0.0 && t_fit_min_ms < t_max_ms, "t_fit_min_ms must lie in [0, t_max_ms)");
  require(!delta_ell.empty(), "delta_ell list is empty");
  for (int d : delta_ell) require(d >= 1, "delta_ell entries must be >= 1");
  for (double t : tau_ms) require(t >= 0.0, "tau_ms entries must be >= 0");
  require(tau_points >= 5, "tau_points must be >= 5");
  require(tau_span_over_gamma > 0.0, "tau_span_over_gamma must be positive");
  require(phase_points >= 8, "phase_points must be >= 8");
  require(contrast_factor >= 0.0 && contrast_factor <= 1.0, "contrast_factor must lie in [0, 1]");
  for (double d : d_list) require(d > 0.0, "d_list_hbar2_per_ms entries must be positive");
  for (double f : centers_khz) require(f >= 0.0, "centers_khz entries must be >= 0");
  require(lindblad_dt_ms >= 0.0, "lindblad_dt_ms must be >= 0");
  require(n_traj >= 1, "n_traj must be >= 1");
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig cfg;
  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = line.substr(eq + 1);
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (const auto prev = seen.find(key); prev != seen.end()) {
      throw ConfigError(where + "key '" + key + "' already set on line " + std::to_string(prev->second));
    }
    seen[key] = lineno;
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

std::string canonical_text(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  std::vector<double> dl(c.delta_ell.begin(), c.delta_ell.end());
  os << "omega_r_hz=" << c.omega_r_hz << "\nell_bar=" << c.ell_bar << "\nsigma_ell=" << c.sigma_ell
     << "\nkappa=" << c.kappa << "\nwindow_halfwidth=" << c.window_halfwidth
     << "\nframe=" << (c.frame == rotor::Frame::lab ? "lab" : "corotating")
     << "\nnoise_center_khz=" << c.noise_center_khz << "\nnoise_fwhm_khz=" << c.noise_fwhm_khz
     << "\nd_target_hbar2_per_ms=" << c.d_target << "\nnoise_dt_ms=" << c.noise_dt_ms
     << "\nambient_d_hbar2_per_ms=" << c.ambient_d << "\nt_max_ms=" << c.t_max_ms
     << "\nt_step_ms=" << c.t_step_ms << "\nt_fit_min_ms=" << c.t_fit_min_ms
     << "\ncenters_khz=" << join(c.centers_khz) << "\ndelta_ell=" << join(dl)
     << "\ntau_ms=" << join(c.tau_ms) << "\ntau_points=" << c.tau_points
     << "\ntau_span_over_gamma=" << c.tau_span_over_gamma << "\nphase_points=" << c.phase_points
     << "\ncontrast_factor=" << c.contrast_factor << "\nd_list_hbar2_per_ms=" << join(c.d_list)
     << "\nengine=" << engine_name(c.engine) << "\nlindblad_dt_ms=" << c.lindblad_dt_ms
     << "\nn_traj=" << c.n_traj << "\n";
  return os.str();
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace rotorcli
