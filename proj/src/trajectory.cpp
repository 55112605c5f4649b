#include "rotor/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

#include "rotor/errors.hpp"
#include "rotor/parallel.hpp"

namespace rotor {

namespace {

constexpr std::size_t kBlockSize = 8;
constexpr std::uint64_t kAmbientStreamOffset = 1ULL << 40;

double edge_population(std::span<const cplx> psi) {
  const std::size_t n = psi.size();
  double s = 0.0;
  for (std::size_t j = 0; j < std::min<std::size_t>(2, n); ++j) s += std::norm(psi[j]);
  for (std::size_t j = n > 2 ? n - 2 : 2; j < n; ++j) s += std::norm(psi[j]);
  return s;
}

double norm2(std::span<const cplx> psi) {
  double s = 0.0;
  for (const auto& c : psi) s += std::norm(c);
  return s;
}

std::size_t total_steps(const EnsembleSpec& spec) {
  return static_cast<std::size_t>(std::floor(spec.t_max / spec.dt + 1e-9));
}

}  // namespace

void EnsembleSpec::validate() const {
  if (n_traj < 1) throw DomainError("n_traj must be >= 1");
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (!(t_max > 0.0)) throw DomainError("t_max must be positive");
  if (std::abs(dt - noise.dt) > 1e-12 * dt) {
    throw DomainError("trajectory dt must equal the noise sample spacing");
  }
  if (ambient_diffusion < 0.0) throw DomainError("ambient D must be >= 0");
  noise.validate();
  rotor.validate();
  const double limit = kTwoPi / 20.0;
  if (rotor.frame == Frame::lab) {
    if (2.0 * rotor.omega_rot() * dt > limit) {
      throw DomainError("dt does not resolve the 2 omega_rot oscillation in the lab frame");
    }
  } else {
    const double residual = 4.0 * rotor.omega_r * static_cast<double>(rotor.window_halfwidth + 1);
    if (residual * dt > limit) throw DomainError("dt does not resolve the residual free phase");
  }
  for (double t : record_times) {
    if (t < 0.0 || t > t_max * (1.0 + 1e-12)) throw DomainError("record time outside [0, t_max]");
  }
}

std::vector<std::size_t> EnsembleSpec::record_steps() const {
  std::vector<std::size_t> steps;
  if (record_times.empty()) return {0, total_steps(*this)};
  for (double t : record_times) steps.push_back(static_cast<std::size_t>(std::llround(t / dt)));
  if (!std::is_sorted(steps.begin(), steps.end())) throw DomainError("record times must ascend");
  return steps;
}

std::vector<cplx> frame_field(const EnsembleSpec& spec, std::size_t index) {
  const NoiseTrajectory noise = [&] {
    NoiseSpec ns = spec.noise;
    ns.seed = spec.master_seed;
    return generate(ns, spec.t_max, index);
  }();
  std::vector<cplx> field = noise.samples;
  if (spec.rotor.frame == Frame::corotating) {
    const double w = 2.0 * spec.rotor.omega_rot() * spec.dt;
    for (std::size_t i = 0; i < field.size(); ++i) {
      field[i] *= std::polar(1.0, std::fmod(w * static_cast<double>(i), kTwoPi));
    }
  }
  if (spec.ambient_diffusion > 0.0) {
    // White noise with two-sided PSD D_amb / 4 kappa^2.
    const double psd = spec.ambient_diffusion / (4.0 * spec.rotor.kappa * spec.rotor.kappa);
    const double sigma = std::sqrt(psd / spec.dt);
    std::mt19937_64 rng(substream_seed(spec.master_seed, kAmbientStreamOffset + index));
    std::normal_distribution<double> normal(0.0, sigma);
    for (auto& f : field) f += normal(rng);
  }
  return field;
}

SplitStepPropagator::SplitStepPropagator(const RotorParams& rotor, const LadderWindow& window,
                                         double dt)
    : kappa_(rotor.kappa), dt_(dt), half_phase_(window.size()) {
  const std::int64_t ref = rotor.frame == Frame::lab ? 0 : rotor.ell_bar;
  for (std::size_t i = 0; i < window.size(); ++i) {
    const std::int64_t a = window.ell(i) - ref;
    const double angle = std::fmod(0.5 * rotor.omega_r * dt * static_cast<double>(a * a), kTwoPi);
    half_phase_[i] = std::polar(1.0, -angle);
  }
  const std::size_t half = window.size() / 2 + 1;
  rhs_.resize(half);
  cprime_.resize(half);
}

void SplitStepPropagator::step(std::span<cplx> psi, cplx eps_mid) {
  for (std::size_t i = 0; i < psi.size(); ++i) psi[i] *= half_phase_[i];
  if (eps_mid != cplx{}) kick(psi, 0.5 * dt_ * kappa_ * eps_mid);
  for (std::size_t i = 0; i < psi.size(); ++i) psi[i] *= half_phase_[i];
}

// Solves (1 + iB) x = (1 - iB) psi, B = b L+^2 + conj(b) L-^2, on each
// sublattice. Along a sublattice B is tridiagonal with b below the diagonal.
void SplitStepPropagator::kick(std::span<cplx> psi, cplx b) {
  const cplx lower = cplx{0.0, 1.0} * b;
  const cplx upper = cplx{0.0, 1.0} * std::conj(b);
  const std::size_t n = psi.size();
  for (std::size_t start = 0; start < std::min<std::size_t>(2, n); ++start) {
    const std::size_t m = (n - start + 1) / 2;
    auto at = [&](std::size_t j) -> cplx& { return psi[start + 2 * j]; };
    for (std::size_t j = 0; j < m; ++j) {
      cplx r = at(j);
      if (j > 0) r -= lower * at(j - 1);
      if (j + 1 < m) r -= upper * at(j + 1);
      rhs_[j] = r;
    }
    cprime_[0] = upper;
    for (std::size_t j = 1; j < m; ++j) {
      const cplx denom = 1.0 - lower * cprime_[j - 1];
      cprime_[j] = upper / denom;
      rhs_[j] = (rhs_[j] - lower * rhs_[j - 1]) / denom;
    }
    at(m - 1) = rhs_[m - 1];
    for (std::size_t j = m - 1; j-- > 0;) at(j) = rhs_[j] - cprime_[j] * at(j + 1);
  }
}

TrajectoryResult run_trajectory(const RotorState& psi0, std::span<const cplx> field,
                                const RotorParams& rotor, double dt,
                                std::span<const std::size_t> record_steps) {
  if (!record_steps.empty() && field.size() <= record_steps.back()) {
    throw DomainError("noise history shorter than the requested evolution");
  }
  SplitStepPropagator prop(rotor, psi0.window, dt);
  TrajectoryResult out;
  std::vector<cplx> psi = psi0.amplitudes;
  const double n0 = norm2(psi);
  std::size_t step = 0;
  for (std::size_t target : record_steps) {
    for (; step < target; ++step) {
      prop.step(psi, 0.5 * (field[step] + field[step + 1]));
      out.max_edge_population = std::max(out.max_edge_population, edge_population(psi));
    }
    if (out.max_edge_population > kEdgeTolerance) {
      throw TruncationError("trajectory reached the window edge (population " +
                            std::to_string(out.max_edge_population) + ")");
    }
    const double drift = std::abs(norm2(psi) - n0);
    out.max_norm_drift = std::max(out.max_norm_drift, drift);
    if (drift > kNormDriftTolerance) {
      throw NormDriftError("trajectory norm drifted by " + std::to_string(drift));
    }
    out.t.push_back(dt * static_cast<double>(target));
    out.states.push_back({psi0.window, psi});
  }
  return out;
}

double advance_branches(std::span<std::vector<cplx>> branches, std::span<const cplx> field,
                        const RotorParams& rotor, double dt, std::size_t first_step,
                        std::size_t last_step) {
  if (branches.empty() || last_step <= first_step) return 0.0;
  if (field.size() <= last_step) throw DomainError("noise history shorter than the sequence");
  const LadderWindow w = LadderWindow::centered(rotor.ell_bar, rotor.window_halfwidth);
  if (branches.front().size() != w.size()) throw DomainError("branch size does not match window");
  SplitStepPropagator prop(rotor, w, dt);
  double edge = 0.0;
  for (std::size_t s = first_step; s < last_step; ++s) {
    const cplx eps = 0.5 * (field[s] + field[s + 1]);
    double e = 0.0;
    for (auto& b : branches) {
      prop.step(b, eps);
      e += edge_population(b);
    }
    edge = std::max(edge, e);
  }
  return edge;
}

EnsembleMoments ensemble_moments(const EnsembleSpec& spec, const RotorState& psi0,
                                 unsigned threads) {
  spec.validate();
  const auto steps = spec.record_steps();
  const std::size_t n = spec.n_traj;
  const std::size_t nr = steps.size();
  const LadderWindow& w = psi0.window;
  EnsembleMoments m;
  m.n_traj = n;
  m.center = (w.ell_min + w.ell_max) / 2;
  m.first.assign(n, std::vector<double>(nr));
  m.second.assign(n, std::vector<double>(nr));

  parallel_for(n, threads, [&](std::size_t i) {
    const auto field = frame_field(spec, i);
    const TrajectoryResult r = run_trajectory(psi0, field, spec.rotor, spec.dt, steps);
    for (std::size_t k = 0; k < nr; ++k) {
      const auto& a = r.states[k].amplitudes;
      double norm = 0.0, s1 = 0.0, s2 = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) {
        const double p = std::norm(a[j]);
        const double l = static_cast<double>(w.ell(j) - m.center);
        norm += p;
        s1 += p * l;
        s2 += p * l * l;
      }
      m.first[i][k] = s1 / norm;
      m.second[i][k] = s2 / norm;
    }
  });

  const double dn = static_cast<double>(n);
  for (std::size_t k = 0; k < nr; ++k) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sx += m.first[i][k];
      sy += m.second[i][k];
    }
    const double xbar = sx / dn, ybar = sy / dn;
    double vx = 0.0, vi = 0.0;
    const double ibar = ybar - 2.0 * xbar * xbar;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = m.first[i][k] - xbar;
      const double di = m.second[i][k] - 2.0 * xbar * m.first[i][k] - ibar;
      vx += dx * dx;
      vi += di * di;
    }
    const double denom = n > 1 ? dn * (dn - 1.0) : 1.0;
    m.t.push_back(spec.dt * static_cast<double>(steps[k]));
    m.mean.push_back(static_cast<double>(m.center) + xbar);
    m.mean_se.push_back(n > 1 ? std::sqrt(vx / denom) : 0.0);
    m.var.push_back(ybar - xbar * xbar);
    m.var_se.push_back(n > 1 ? std::sqrt(vi / denom) : 0.0);
  }
  return m;
}

SlopeEstimate variance_slope(const EnsembleMoments& m, double t_min) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < m.t.size(); ++k) {
    if (m.t[k] >= t_min) idx.push_back(k);
  }
  if (idx.size() < 2) throw DomainError("variance slope needs >= 2 record times");
  double tbar = 0.0;
  for (auto k : idx) tbar += m.t[k];
  tbar /= static_cast<double>(idx.size());
  double stt = 0.0;
  for (auto k : idx) stt += (m.t[k] - tbar) * (m.t[k] - tbar);
  if (!(stt > 0.0)) throw DomainError("variance slope needs distinct record times");

  SlopeEstimate est;
  double vbar = 0.0;
  for (auto k : idx) {
    est.slope += (m.t[k] - tbar) / stt * m.var[k];
    vbar += m.var[k];
  }
  vbar /= static_cast<double>(idx.size());
  est.intercept = vbar - est.slope * tbar;

  const std::size_t n = m.n_traj;
  if (n > 1) {
    const double dn = static_cast<double>(n);
    std::vector<double> xbar(m.t.size(), 0.0);
    for (auto k : idx) {
      for (std::size_t i = 0; i < n; ++i) xbar[k] += m.first[i][k];
      xbar[k] /= dn;
    }
    std::vector<double> phi(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto k : idx) {
        const double infl = m.second[i][k] - 2.0 * xbar[k] * m.first[i][k];
        phi[i] += (m.t[k] - tbar) / stt * infl;
      }
    }
    double pbar = 0.0;
    for (double p : phi) pbar += p;
    pbar /= dn;
    double v = 0.0;
    for (double p : phi) v += (p - pbar) * (p - pbar);
    est.slope_se = std::sqrt(v / (dn * (dn - 1.0)));
  }
  return est;
}

EnsembleDensity ensemble_density(const EnsembleSpec& spec, const RotorState& psi0,
                                 unsigned threads) {
  spec.validate();
  const auto steps = spec.record_steps();
  const std::size_t n = spec.n_traj;
  const std::size_t nr = steps.size();
  const auto dim = static_cast<Eigen::Index>(psi0.window.size());

  struct Partial {
    std::vector<Eigen::MatrixXcd> sum;
    std::vector<Eigen::MatrixXd> sum_abs2;
  };
  auto zero_partial = [&] {
    Partial p;
    p.sum.assign(nr, Eigen::MatrixXcd::Zero(dim, dim));
    p.sum_abs2.assign(nr, Eigen::MatrixXd::Zero(dim, dim));
    return p;
  };

  Partial total = zero_partial();
  const std::size_t n_blocks = (n + kBlockSize - 1) / kBlockSize;
  const unsigned wave = std::max(1u, threads == 0 ? default_thread_count() : threads);
  for (std::size_t first = 0; first < n_blocks; first += wave) {
    const std::size_t count = std::min<std::size_t>(wave, n_blocks - first);
    std::vector<Partial> parts(count);
    parallel_for(count, threads, [&](std::size_t b) {
      Partial p = zero_partial();
      const std::size_t lo = (first + b) * kBlockSize;
      const std::size_t hi = std::min(n, lo + kBlockSize);
      for (std::size_t i = lo; i < hi; ++i) {
        const auto field = frame_field(spec, i);
        const TrajectoryResult r = run_trajectory(psi0, field, spec.rotor, spec.dt, steps);
        for (std::size_t k = 0; k < nr; ++k) {
          Eigen::Map<const Eigen::VectorXcd> v(r.states[k].amplitudes.data(), dim);
          const Eigen::MatrixXcd rho = v * v.adjoint();
          p.sum[k] += rho;
          p.sum_abs2[k] += rho.cwiseAbs2();
        }
      }
      parts[b] = std::move(p);
    });
    for (auto& p : parts) {
      for (std::size_t k = 0; k < nr; ++k) {
        total.sum[k] += p.sum[k];
        total.sum_abs2[k] += p.sum_abs2[k];
      }
    }
  }

  EnsembleDensity out;
  out.n_traj = n;
  const double dn = static_cast<double>(n);
  for (std::size_t k = 0; k < nr; ++k) {
    out.t.push_back(spec.dt * static_cast<double>(steps[k]));
    Eigen::MatrixXcd mean = total.sum[k] / dn;
    Eigen::MatrixXd se = Eigen::MatrixXd::Zero(dim, dim);
    if (n > 1) {
      const Eigen::MatrixXd spread = (total.sum_abs2[k] / dn - mean.cwiseAbs2()).cwiseMax(0.0);
      se = (spread * (dn / (dn - 1.0)) / dn).cwiseSqrt();
    }
    out.mean.push_back({psi0.window, std::move(mean)});
    out.standard_error.push_back(std::move(se));
  }
  return out;
}

std::vector<ScanPoint> resonance_scan(const EnsembleSpec& spec, const RotorState& psi0,
                                      std::span<const double> centers_khz, double t_fit_min,
                                      unsigned threads) {
  EnsembleSpec base = spec;
  base.noise.amplitude = DriveSigma{drive_sigma(spec.noise)};
  std::vector<ScanPoint> out;
  for (double fc : centers_khz) {
    EnsembleSpec s = base;
    s.noise.center_khz = fc;
    const EnsembleMoments m = ensemble_moments(s, psi0, threads);
    const SlopeEstimate e = variance_slope(m, t_fit_min);
    out.push_back({fc, 0.5 * e.slope, 0.5 * e.slope_se});
  }
  return out;
}

void write_ensemble_csv(std::ostream& os, const EnsembleMoments& m) {
  os << "t_ms,var_Lz,var_Lz_se,mean_Lz\n";
  os.precision(12);
  for (std::size_t k = 0; k < m.t.size(); ++k) {
    os << m.t[k] << ',' << m.var[k] << ',' << m.var_se[k] << ',' << m.mean[k] << '\n';
  }
}

void write_scan_csv(std::ostream& os, std::span<const ScanPoint> scan) {
  os << "fc_kHz,D_fit,D_se\n";
  os.precision(12);
  for (const auto& p : scan) os << p.center_khz << ',' << p.diffusion << ',' << p.diffusion_se << '\n';
}

}  // namespace rotor
