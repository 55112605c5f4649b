#include "commands.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "rotor/errors.hpp"
#include "rotor/lindblad.hpp"
#include "rotor/noise.hpp"

namespace rotorcli {

using namespace rotor;

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

std::vector<double> time_grid(const RunConfig& c) {
  std::vector<double> t;
  const auto n = static_cast<std::size_t>(std::floor(c.t_max_ms / c.t_step_ms + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) t.push_back(c.t_step_ms * static_cast<double>(k));
  return t;
}

RotorParams rotor_params(const RunConfig& c, double diffusion, double t_max, int dl, double coverage) {
  RotorParams p;
  p.omega_r = c.omega_r();
  p.ell_bar = c.ell_bar;
  p.sigma_ell = c.sigma_ell;
  p.kappa = c.kappa;
  p.frame = c.frame;
  p.window_halfwidth = c.window_halfwidth > 0
                           ? c.window_halfwidth
                           : default_window_halfwidth(c.sigma_ell, diffusion, t_max, dl, coverage);
  return p;
}

EnsembleSpec make_ensemble(const RunConfig& c, const RotorParams& rotor, double diffusion, double t_max) {
  EnsembleSpec s;
  s.n_traj = c.n_traj;
  s.rotor = rotor;
  s.noise.center_khz = c.noise_center_khz;
  s.noise.fwhm_khz = c.noise_fwhm_khz;
  s.noise.dt = c.noise_dt_ms;
  s.noise.amplitude = TargetDiffusion{diffusion, rotor.omega_rot(), rotor.kappa};
  s.dt = c.noise_dt_ms;
  s.t_max = t_max;
  s.master_seed = c.master_seed;
  s.ambient_diffusion = c.ambient_d;
  return s;
}

std::ofstream open_output(const RunConfig& c, const std::string& name, const std::string& command) {
  const std::filesystem::path dir(c.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = dir / name;
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  char buf[128];
  std::snprintf(buf, sizeof buf, "# rotorsim %s config_hash=%016" PRIx64 " seed=%" PRIu64 "\n", command.c_str(),
                config_hash(c), c.master_seed);
  os << buf;
  return os;
}

std::vector<double> positive_or_empty(const std::vector<double>& s) {
  if (s.empty() || std::any_of(s.begin(), s.end(), [](double x) { return !(x > 0.0); })) return {};
  return s;
}

const std::vector<ParameterUnit> kDiffusionUnits{{"sigma0_sq", "hbar^2"}, {"D", "hbar^2/ms"}};
const std::vector<ParameterUnit> kLorentzUnits{
    {"center", "kHz"}, {"fwhm", "kHz"}, {"peak", "hbar^2/ms"}, {"floor", "hbar^2/ms"}};
const std::vector<ParameterUnit> kGammaUnits{{"C0", ""}, {"gamma", "1/ms"}};

FitResult fit_diffusion_table(const std::vector<double>& t, const std::vector<double>& var,
                              const std::vector<double>& se, double t_min) {
  std::vector<double> ts, vs, ss;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_min) continue;
    ts.push_back(t[k]);
    vs.push_back(var[k]);
    if (!se.empty()) ss.push_back(se[k]);
  }
  return fit_variance_growth(ts, vs, positive_or_empty(ss));
}

FitResult fit_gamma(const std::vector<double>& tau, const std::vector<double>& c,
                    const std::vector<double>& se, const RunConfig& cfg, int dl) {
  // Deterministic contrasts carry only round-off scatter, so weights would
  // be meaningless there.
  const std::vector<double> w = cfg.engine == Engine::trajectory ? positive_or_empty(se) : std::vector<double>{};
  return fit_stretched_exp(tau, c, w, true, cfg.omega_r(), dl);
}

std::vector<double> default_centers(double resonance_khz) {
  std::vector<double> out;
  for (int k = -6; k <= 6; ++k) {
    const double f = resonance_khz + 8.0 * k;
    if (f >= 0.0) out.push_back(f);
  }
  return out;
}

}  // namespace

std::vector<double> CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ConfigError("CSV has no column '" + name + "'");
  const auto j = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.at(j));
  return out;
}

bool CsvTable::has(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (t.columns.empty()) {
      t.columns = cells;
      continue;
    }
    if (cells.size() != t.columns.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": wrong number of fields");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str()) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad number");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw ConfigError(path.string() + ": no header");
  return t;
}

DiffusionOutcome cmd_diffusion(const RunConfig& cfg, std::ostream& log, const std::filesystem::path& from_csv) {
  cfg.validate();
  DiffusionOutcome out;
  const double total_d = cfg.d_target + cfg.ambient_d;
  bool influence_se = false;
  double slope_se = 0.0;

  if (!from_csv.empty()) {
    const CsvTable table = read_csv(from_csv);
    out.t = table.column("t_ms");
    out.var = table.column("var_Lz");
    out.var_se = table.has("var_Lz_se") ? table.column("var_Lz_se") : std::vector<double>(out.t.size(), 0.0);
    out.mean = table.has("mean_Lz") ? table.column("mean_Lz") : std::vector<double>(out.t.size(), 0.0);
  } else {
    const auto times = time_grid(cfg);
    if (cfg.engine == Engine::lindblad) {
      LindbladParams lp;
      lp.diffusion = total_d;
      lp.rotor = rotor_params(cfg, total_d, cfg.t_max_ms, 0, 6.0);
      lp.t_max = cfg.t_max_ms;
      lp.dt = cfg.lindblad_dt_ms > 0.0 ? cfg.lindblad_dt_ms : std::min(lp.max_stable_dt(0), cfg.t_step_ms);
      const RotorState psi0 = build_coherent_state(lp.rotor);
      std::vector<double> pop;
      for (const auto& a : psi0.amplitudes) pop.push_back(std::norm(a));
      for (const auto& s : evolve_moments(psi0.window, pop, lp, times)) {
        out.t.push_back(s.t);
        out.var.push_back(s.variance);
        out.var_se.push_back(0.0);
        out.mean.push_back(s.mean);
      }
    } else if (cfg.engine == Engine::trajectory) {
      const RotorParams rp = rotor_params(cfg, total_d, cfg.t_max_ms, 0, kTrajectoryCoverage);
      EnsembleSpec spec = make_ensemble(cfg, rp, cfg.d_target, cfg.t_max_ms);
      spec.record_times = times;
      const EnsembleMoments m = ensemble_moments(spec, build_coherent_state(rp), cfg.threads);
      out.t = m.t;
      out.var = m.var;
      out.var_se = m.var_se;
      out.mean = m.mean;
      if (m.n_traj > 1) {
        influence_se = true;
        slope_se = variance_slope(m, cfg.t_fit_min_ms).slope_se;
      }
    } else {
      throw ConfigError("the diffusion command needs engine lindblad or trajectory");
    }
    auto os = open_output(cfg, "diffusion.csv", "diffusion");
    os << "t_ms,var_Lz,var_Lz_se,mean_Lz\n";
    os.precision(12);
    for (std::size_t k = 0; k < out.t.size(); ++k) {
      os << out.t[k] << ',' << out.var[k] << ',' << out.var_se[k] << ',' << out.mean[k] << '\n';
    }
  }

  // Trajectory variances at different times share trajectories, so the
  // slope is fitted unweighted and its error taken from the influence sum.
  out.fit = fit_diffusion_table(out.t, out.var, influence_se ? std::vector<double>{} : out.var_se,
                                cfg.t_fit_min_ms);
  if (influence_se) {
    out.fit.covariance(1, 1) = 0.25 * slope_se * slope_se;
    out.fit.covariance(0, 1) = out.fit.covariance(1, 0) = 0.0;
  }
  auto fs = open_output(cfg, "diffusion_fit.csv", "diffusion");
  write_fit_csv(fs, out.fit, kDiffusionUnits);
  log << "diffusion (" << (from_csv.empty() ? engine_name(cfg.engine) : "csv") << ")\n"
      << fit_report(out.fit, kDiffusionUnits);
  if (from_csv.empty()) log << "  configured D = " << total_d << " hbar^2/ms\n";
  return out;
}

ResonanceOutcome cmd_resonance(const RunConfig& cfg, std::ostream& log, const std::filesystem::path& from_csv) {
  cfg.validate();
  ResonanceOutcome out;
  const RotorParams rp0 = rotor_params(cfg, cfg.d_target, cfg.t_max_ms, 0, kTrajectoryCoverage);
  out.resonance_khz = 2.0 * rp0.omega_rot() / kTwoPi;

  if (!from_csv.empty()) {
    const CsvTable table = read_csv(from_csv);
    const auto f = table.column("fc_kHz");
    const auto d = table.column("D_fit");
    const auto se = table.has("D_se") ? table.column("D_se") : std::vector<double>(f.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) out.scan.push_back({f[i], d[i], se[i]});
  } else {
    const std::vector<double> centers = cfg.centers_khz.empty() ? default_centers(out.resonance_khz) : cfg.centers_khz;
    const double fmax = *std::max_element(centers.begin(), centers.end());
    if (cfg.noise_dt_ms > 1.0 / (20.0 * (fmax + cfg.noise_fwhm_khz)) * (1.0 + 1e-12)) {
      throw ConfigError("noise_dt_ms does not resolve the highest scan center");
    }
    EnsembleSpec spec = make_ensemble(cfg, rp0, cfg.d_target, cfg.t_max_ms);
    if (cfg.engine == Engine::trajectory) {
      spec.record_times = time_grid(cfg);
      out.scan = resonance_scan(spec, build_coherent_state(rp0), centers, cfg.t_fit_min_ms, cfg.threads);
    } else if (cfg.engine == Engine::lindblad) {
      // Markovian rate 4 kappa^2 S(2 omega_rot) at the same fixed drive.
      NoiseSpec ns = calibrate(spec.noise);
      for (double fc : centers) {
        ns.center_khz = fc;
        out.scan.push_back({fc, 4.0 * cfg.kappa * cfg.kappa * analytic_psd(ns, 2.0 * rp0.omega_rot()), 0.0});
      }
    } else {
      throw ConfigError("the resonance command needs engine lindblad or trajectory");
    }
    auto os = open_output(cfg, "resonance.csv", "resonance");
    write_scan_csv(os, out.scan);
  }

  std::vector<double> f, d, se;
  for (const auto& p : out.scan) {
    f.push_back(p.center_khz);
    d.push_back(p.diffusion);
    se.push_back(p.diffusion_se);
  }
  out.fit = fit_lorentzian(f, d, positive_or_empty(se));
  auto fs = open_output(cfg, "resonance_fit.csv", "resonance");
  write_fit_csv(fs, out.fit, kLorentzUnits);
  log << "resonance (" << (from_csv.empty() ? engine_name(cfg.engine) : "csv") << ")\n"
      << fit_report(out.fit, kLorentzUnits) << "  expected center 2 omega_rot = " << out.resonance_khz << " kHz\n";
  return out;
}

RamseyCurve ramsey_curve(const RunConfig& cfg, double diffusion, int dl) {
  RamseyCurve c;
  c.delta_ell = dl;
  c.diffusion = diffusion;
  const double omega_r = cfg.omega_r();
  const bool noisy = cfg.engine != Engine::none && diffusion + cfg.ambient_d > 0.0;
  c.gamma_theory = diffusion > 0.0 ? analytic_gamma(diffusion, omega_r, dl) : 0.0;

  std::vector<double> taus = cfg.tau_ms;
  if (taus.empty()) {
    const double total = diffusion + cfg.ambient_d;
    const double tmax = noisy ? cfg.tau_span_over_gamma / analytic_gamma(total, omega_r, dl)
                              : 2.0 * node_time(omega_r, dl);
    taus = linspace(0.0, tmax, cfg.tau_points);
  }
  const double tmax = *std::max_element(taus.begin(), taus.end());
  const double total = cfg.engine == Engine::none ? 0.0 : diffusion + cfg.ambient_d;

  SequenceSpec seq;
  seq.delta_ell = dl;
  seq.rotor = rotor_params(cfg, total, tmax, dl, cfg.engine == Engine::trajectory ? kTrajectoryCoverage : 6.0);
  seq.phase_scan = uniform_phase_scan(cfg.phase_points);
  seq.contrast_factor = cfg.contrast_factor;
  switch (cfg.engine) {
    case Engine::none: seq.environment = NoEnvironment{}; break;
    case Engine::lindblad: seq.environment = LindbladEnvironment{total, cfg.lindblad_dt_ms}; break;
    case Engine::trajectory:
      seq.environment = TrajectoryEnvironment{make_ensemble(cfg, seq.rotor, diffusion, std::max(tmax, cfg.noise_dt_ms))};
      break;
  }
  c.results = run_tau_scan(seq, taus, build_coherent_state(seq.rotor), cfg.threads);

  if (noisy) {
    std::vector<double> t, v, s;
    for (const auto& r : c.results) {
      t.push_back(r.tau);
      v.push_back(r.contrast.contrast);
      s.push_back(r.contrast.contrast_se);
    }
    c.fit = fit_gamma(t, v, s, cfg, dl);
  }
  return c;
}

std::vector<RamseyCurve> cmd_ramsey(const RunConfig& cfg, std::ostream& log, const std::filesystem::path& from_csv) {
  cfg.validate();
  std::vector<RamseyCurve> curves;
  if (!from_csv.empty()) {
    const CsvTable table = read_csv(from_csv);
    RamseyCurve c;
    c.delta_ell = cfg.delta_ell.front();
    c.diffusion = cfg.d_target;
    c.gamma_theory = cfg.d_target > 0.0 ? analytic_gamma(cfg.d_target, cfg.omega_r(), c.delta_ell) : 0.0;
    const auto se = table.has("contrast_se") ? table.column("contrast_se") : std::vector<double>{};
    c.fit = fit_gamma(table.column("tau_ms"), table.column("contrast"), se, cfg, c.delta_ell);
    curves.push_back(std::move(c));
  } else {
    for (int dl : cfg.delta_ell) {
      curves.push_back(ramsey_curve(cfg, cfg.d_target, dl));
      auto os = open_output(cfg, "ramsey_dl" + std::to_string(dl) + ".csv", "ramsey");
      write_contrast_csv(os, curves.back().results);
    }
  }
  log << "ramsey (" << (from_csv.empty() ? engine_name(cfg.engine) : "csv") << ")\n";
  for (const auto& c : curves) {
    log << " delta_ell = " << c.delta_ell << '\n';
    if (c.fit) {
      auto fs = open_output(cfg, "ramsey_fit_dl" + std::to_string(c.delta_ell) + ".csv", "ramsey");
      write_fit_csv(fs, *c.fit, kGammaUnits);
      log << fit_report(*c.fit, kGammaUnits) << "  theory gamma = " << c.gamma_theory << " 1/ms\n";
    } else {
      double worst = 0.0;
      for (const auto& r : c.results) {
        worst = std::max(worst, std::abs(r.contrast.contrast -
                                         std::abs(std::cos(cfg.omega_r() * c.delta_ell * c.delta_ell * r.tau))));
      }
      log << "  max |C - |cos(omega_r dl^2 tau)|| = " << worst << '\n';
    }
  }
  return curves;
}

ScalingOutcome cmd_scaling(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.engine == Engine::none) throw ConfigError("the scaling command needs engine lindblad or trajectory");
  ScalingOutcome out;
  for (double d : cfg.d_list) {
    for (int dl : cfg.delta_ell) {
      const RamseyCurve c = ramsey_curve(cfg, d, dl);
      out.rows.push_back({d, dl, c.fit->value("gamma"), c.fit->uncertainty("gamma"), c.gamma_theory});
    }
  }
  auto series = [&](auto keep, auto xval) {
    std::vector<double> x, y, s;
    for (const auto& r : out.rows) {
      if (!keep(r)) continue;
      x.push_back(xval(r));
      y.push_back(r.gamma);
      s.push_back(r.gamma_se);
    }
    return fit_powerlaw(x, y, positive_or_empty(s));
  };

  auto os = open_output(cfg, "scaling.csv", "scaling");
  os << "D_hbar2_per_ms,delta_ell,gamma_fit,gamma_se,gamma_theory\n";
  os.precision(12);
  for (const auto& r : out.rows) {
    os << r.diffusion << ',' << r.delta_ell << ',' << r.gamma << ',' << r.gamma_se << ',' << r.gamma_theory << '\n';
  }

  std::vector<double> distinct_dl(cfg.delta_ell.begin(), cfg.delta_ell.end());
  std::sort(distinct_dl.begin(), distinct_dl.end());
  distinct_dl.erase(std::unique(distinct_dl.begin(), distinct_dl.end()), distinct_dl.end());
  std::vector<double> distinct_d = cfg.d_list;
  std::sort(distinct_d.begin(), distinct_d.end());
  distinct_d.erase(std::unique(distinct_d.begin(), distinct_d.end()), distinct_d.end());

  log << "scaling (" << engine_name(cfg.engine) << ")\n";
  auto es = open_output(cfg, "scaling_exponents.csv", "scaling");
  es << "D_hbar2_per_ms,A,A_se,p,p_se\n";
  es.precision(12);
  if (distinct_dl.size() >= 3) {
    for (double d : distinct_d) {
      out.exponent_fits.push_back(series([d](const ScalingRow& r) { return r.diffusion == d; },
                                         [](const ScalingRow& r) { return static_cast<double>(r.delta_ell); }));
      const FitResult& f = out.exponent_fits.back();
      es << d << ',' << f.value("A") << ',' << f.uncertainty("A") << ',' << f.value("p") << ','
         << f.uncertainty("p") << '\n';
      out.mean_exponent += f.value("p") / static_cast<double>(distinct_d.size());
      log << "  D = " << d << ": gamma ~ delta_ell^" << format_uncertainty(f.value("p"), f.uncertainty("p")) << '\n';
    }
    log << "  mean exponent " << out.mean_exponent << " (theory 2/3)\n";
  }
  auto vs = open_output(cfg, "scaling_vs_d.csv", "scaling");
  vs << "delta_ell,A,A_se,slope,slope_se\n";
  vs.precision(12);
  if (distinct_d.size() >= 3) {
    for (double dl : distinct_dl) {
      out.slope_fits.push_back(series([dl](const ScalingRow& r) { return r.delta_ell == dl; },
                                      [](const ScalingRow& r) { return r.diffusion; }));
      const FitResult& f = out.slope_fits.back();
      vs << dl << ',' << f.value("A") << ',' << f.uncertainty("A") << ',' << f.value("p") << ','
         << f.uncertainty("p") << '\n';
      out.mean_slope += f.value("p") / static_cast<double>(distinct_dl.size());
      log << "  delta_ell = " << dl << ": gamma ~ D^" << format_uncertainty(f.value("p"), f.uncertainty("p")) << '\n';
    }
    log << "  mean slope " << out.mean_slope << " (theory 1/3)\n";
  }
  return out;
}

ValidateOutcome cmd_validate(const RunConfig& cfg, std::ostream& log) {
  ValidateOutcome out;
  auto add = [&](std::string name, double value, double tol) {
    out.checks.push_back({std::move(name), value, tol, value <= tol});
  };
  const double omega_r = hz_to_rad_per_ms(13.0);

  {
    const LadderWindow w{-80, 80};
    RotorState s{w, std::vector<cplx>(w.size())};
    for (std::int64_t l = 0; l <= 40; ++l) s.amplitudes[w.index(l)] = std::pow(0.5, static_cast<double>(l));
    const double n = std::sqrt(s.norm_squared());
    for (auto& a : s.amplitudes) a /= n;
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 20; ++i) pairs.emplace_back(-kPi + kTwoPi * i / 20.0 + 0.1, 0.3 + 0.7 * i);
    const auto rows = angle_decay_check(RotorDensity::from_state(s), 70.0, 0.02, pairs, 0.0, cfg.threads);
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.relative_error);
    add("angle_decay_relative_error", worst, 1e-6);
  }
  {
    LindbladParams lp;
    lp.diffusion = 70.0;
    lp.rotor.ell_bar = 5538;
    lp.rotor.sigma_ell = 20.0;
    lp.rotor.window_halfwidth = default_window_halfwidth(20.0, 70.0, 3.0);
    lp.t_max = 3.0;
    lp.dt = lp.max_stable_dt(0);
    const RotorState psi0 = build_coherent_state(lp.rotor);
    std::vector<double> pop;
    for (const auto& a : psi0.amplitudes) pop.push_back(std::norm(a));
    const auto times = linspace(0.0, 3.0, 7);
    const auto m = evolve_moments(psi0.window, pop, lp, times);
    double drift = 0.0;
    std::vector<double> v;
    for (const auto& s : m) {
      drift = std::max(drift, std::abs(s.mean - 5538.0));
      v.push_back(s.variance);
    }
    add("mean_Lz_drift_hbar", drift, 1e-8);
    const FitResult f = fit_variance_growth(times, v);
    add("variance_slope_relative_error", std::abs(f.value("D") - 70.0) / 70.0, 5e-3);
  }
  {
    double worst = 0.0;
    for (int dl : {1, 2, 3}) {
      SequenceSpec seq;
      seq.delta_ell = dl;
      seq.rotor.ell_bar = 5538;
      seq.rotor.window_halfwidth = default_window_halfwidth(1.0, 70.0, 3.0, dl);
      seq.environment = LindbladEnvironment{70.0};
      seq.phase_scan = uniform_phase_scan(8);
      const std::vector<double> taus{0.5, 1.5, 3.0};
      const auto res = run_tau_scan(seq, taus, build_coherent_state(seq.rotor), cfg.threads);
      for (const auto& r : res) {
        const double expect =
            std::abs(std::cos(omega_r * dl * dl * r.tau)) * analytic_contrast(70.0, omega_r, dl, r.tau);
        worst = std::max(worst, std::abs(r.contrast.contrast - expect));
      }
    }
    add("ramsey_contrast_deviation", worst, 1e-3);
  }
  add("node_time_dl3_vs_2.137ms", std::abs(node_time(omega_r, 3) - 2.137), 1e-3);
  add("node_time_dl1_vs_19.23ms", std::abs(node_time(omega_r, 1) - 19.23), 1e-2);
  add("centrifugal_144kHz_1.44MHz", std::abs(centrifugal_correction(144.0, 1440.0) - 2.0e-2), 1e-15);
  {
    const auto tau = linspace(0.1, 3.0, 20);
    std::vector<double> c;
    for (double t : tau) c.push_back(0.9 * std::exp(-std::pow(0.5 * t, 3)));
    const FitResult f = fit_stretched_exp(tau, c, {}, false, omega_r, 1);
    add("stretched_exp_recovery", std::abs(f.value("gamma") - 0.5) / 0.5, 1e-6);
  }
  {
    EnsembleSpec s;
    s.n_traj = 1;
    s.rotor.ell_bar = 5538;
    s.rotor.window_halfwidth = default_window_halfwidth(1.0, 70.0, 0.5, 0, kTrajectoryCoverage);
    s.noise.amplitude = TargetDiffusion{70.0, s.rotor.omega_rot(), 1.0};
    s.t_max = 0.5;
    const auto field = frame_field(s, 0);
    const std::vector<std::size_t> rec{5000};
    const auto r = run_trajectory(build_coherent_state(s.rotor), field, s.rotor, s.dt, rec);
    add("trajectory_norm_drift", r.max_norm_drift, 1e-8);
  }

  out.all_pass = std::all_of(out.checks.begin(), out.checks.end(), [](const CheckRow& c) { return c.pass; });
  auto os = open_output(cfg, "validate.csv", "validate");
  os << "check,value,tolerance,pass\n";
  os.precision(6);
  for (const auto& c : out.checks) {
    os << c.name << ',' << c.value << ',' << c.tolerance << ',' << (c.pass ? 1 : 0) << '\n';
    log << (c.pass ? "PASS " : "FAIL ") << c.name << " = " << c.value << " (tolerance " << c.tolerance << ")\n";
  }
  return out;
}

}  // namespace rotorcli
