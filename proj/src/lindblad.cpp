#include "rotor/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "rotor/errors.hpp"
#include "rotor/parallel.hpp"

namespace rotor {

namespace {

constexpr std::size_t kCheckInterval = 100;
constexpr double kHermiticityTolerance = 1e-10;
constexpr double kPositivityFloor = 1e-8;

// out_j = cp x_{j-2} + cm x_{j+2} + c0 x_j, zero outside [0, n)
void stencil(const cplx* x, cplx* out, std::size_t n, cplx cp, cplx cm, double c0) {
  for (std::size_t j = 0; j < n; ++j) {
    cplx v = c0 * x[j];
    if (j >= 2) v += cp * x[j - 2];
    if (j + 2 < n) v += cm * x[j + 2];
    out[j] = v;
  }
}

// Rate at which weight leaves the window through the two absorbing edges.
double edge_flux(const cplx* x, std::size_t n, double quarter_d) {
  double s = 0.0;
  for (std::size_t j = 0; j < std::min<std::size_t>(2, n); ++j) s += x[j].real();
  for (std::size_t j = n >= 2 ? n - 2 : 0; j < n; ++j) s += x[j].real();
  return quarter_d * s;
}

std::size_t step_count(double duration, double dt) {
  if (duration <= 0.0) return 0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration / dt - 1e-9)));
}

void check_records(std::span<const double> record_times) {
  double prev = 0.0;
  for (double t : record_times) {
    if (!(t >= prev)) throw DomainError("record times must be ascending and >= 0");
    prev = t;
  }
}

}  // namespace

double LindbladParams::max_stable_dt(std::int64_t k_max) const {
  double bound = std::numeric_limits<double>::infinity();
  if (diffusion > 0.0) bound = 0.05 / diffusion;
  if (include_hamiltonian && k_max > 0) {
    bound = std::min(bound, 0.1 / (4.0 * rotor.omega_r * static_cast<double>(k_max)));
  }
  return bound;
}

void LindbladParams::validate(std::int64_t k_max) const {
  if (!(diffusion >= 0.0)) throw DomainError("D must be >= 0");
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (!(t_max >= 0.0)) throw DomainError("t_max must be >= 0");
  if (dt > max_stable_dt(k_max) * (1.0 + 1e-12)) {
    throw DomainError("dt " + std::to_string(dt) + " ms exceeds the stability bound " +
                      std::to_string(max_stable_dt(k_max)) + " ms");
  }
}

DiagonalDynamics DiagonalDynamics::from(const LindbladParams& p) {
  return {p.diffusion, p.rotor.omega_r, p.include_hamiltonian,
          p.rotor.frame == Frame::lab ? 0 : p.rotor.ell_bar};
}

double propagate_diagonal(std::span<cplx> values, std::int64_t k, std::int64_t first_row,
                          const DiagonalDynamics& dyn, double duration, std::size_t steps) {
  const std::size_t n = values.size();
  if (n == 0 || steps == 0 || duration == 0.0) return 0.0;
  const double h = duration / static_cast<double>(steps);
  const double q = 0.25 * dyn.diffusion;
  const double c0 = -0.5 * dyn.diffusion;
  const double rate = dyn.include_hamiltonian ? 4.0 * dyn.omega_r * static_cast<double>(k) : 0.0;
  const bool track = k == 0;

  std::vector<cplx> k1(n), k2(n), k3(n), k4(n), tmp(n);
  cplx* x = values.data();
  double leaked = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const double t0 = h * static_cast<double>(s);
    auto coeffs = [&](double t) {
      const cplx e = std::polar(q, rate * t);
      return std::pair{e, std::conj(e)};
    };
    const auto [p0, m0] = coeffs(t0);
    const auto [ph, mh] = coeffs(t0 + 0.5 * h);
    const auto [p1, m1] = coeffs(t0 + h);

    double f1 = 0.0, f2 = 0.0, f3 = 0.0, f4 = 0.0;
    if (track) f1 = edge_flux(x, n, q);
    stencil(x, k1.data(), n, p0, m0, c0);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
    if (track) f2 = edge_flux(tmp.data(), n, q);
    stencil(tmp.data(), k2.data(), n, ph, mh, c0);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
    if (track) f3 = edge_flux(tmp.data(), n, q);
    stencil(tmp.data(), k3.data(), n, ph, mh, c0);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + h * k3[j];
    if (track) f4 = edge_flux(tmp.data(), n, q);
    stencil(tmp.data(), k4.data(), n, p1, m1, c0);
    for (std::size_t j = 0; j < n; ++j) {
      x[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    leaked += (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
  }

  if (dyn.include_hamiltonian && k != 0) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::int64_t a = first_row + static_cast<std::int64_t>(j) - dyn.phase_reference;
      const std::int64_t diff = k * (2 * a - k);
      const double angle = std::fmod(dyn.omega_r * duration * static_cast<double>(diff), kTwoPi);
      x[j] *= std::polar(1.0, -angle);
    }
  }
  return leaked;
}

KDiagonalStore::KDiagonalStore(const LadderWindow& window) : window_(window) {
  const auto n = static_cast<std::int64_t>(window.size());
  diagonals_.resize(static_cast<std::size_t>(2 * n - 1));
  for (std::int64_t k = -(n - 1); k <= n - 1; ++k) {
    diagonals_[static_cast<std::size_t>(k + n - 1)].assign(static_cast<std::size_t>(n - std::abs(k)),
                                                           cplx{});
  }
}

KDiagonalStore KDiagonalStore::from_density(const RotorDensity& rho) {
  KDiagonalStore s(rho.window);
  const std::int64_t kmax = s.max_order();
  for (std::int64_t k = -kmax; k <= kmax; ++k) {
    auto d = s.diagonal(k);
    const std::int64_t r0 = k > 0 ? k : 0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(r0 + static_cast<std::int64_t>(j));
      d[j] = rho.matrix(r, r - k);
    }
  }
  return s;
}

RotorDensity KDiagonalStore::to_density() const {
  const auto n = static_cast<Eigen::Index>(window_.size());
  RotorDensity rho{window_, Eigen::MatrixXcd::Zero(n, n)};
  const std::int64_t kmax = max_order();
  for (std::int64_t k = -kmax; k <= kmax; ++k) {
    const auto d = diagonal(k);
    const std::int64_t r0 = k > 0 ? k : 0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(r0 + static_cast<std::int64_t>(j));
      rho.matrix(r, r - k) = d[j];
    }
  }
  return rho;
}

std::span<cplx> KDiagonalStore::diagonal(std::int64_t k) {
  return diagonals_.at(static_cast<std::size_t>(k + max_order()));
}

std::span<const cplx> KDiagonalStore::diagonal(std::int64_t k) const {
  return diagonals_.at(static_cast<std::size_t>(k + max_order()));
}

double KDiagonalStore::trace() const {
  double s = 0.0;
  for (const auto& c : diagonal(0)) s += c.real();
  return s;
}

double KDiagonalStore::hermiticity_defect() const {
  double worst = 0.0;
  for (std::int64_t k = 0; k <= max_order(); ++k) {
    const auto up = diagonal(k);
    const auto down = diagonal(-k);
    // up[j] = rho(r0 + j, j), down[j] = rho(j, r0 + j)
    for (std::size_t j = 0; j < up.size(); ++j) {
      worst = std::max(worst, std::abs(up[j] - std::conj(down[j])));
    }
  }
  return worst;
}

RotorDensity dissipator_apply(const RotorDensity& rho, double diffusion) {
  const auto n = static_cast<Eigen::Index>(rho.size());
  RotorDensity rate{rho.window, Eigen::MatrixXcd::Zero(n, n)};
  const double q = 0.25 * diffusion;
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) {
      cplx v = -2.0 * rho.matrix(r, c);
      if (r >= 2 && c >= 2) v += rho.matrix(r - 2, c - 2);
      if (r + 2 < n && c + 2 < n) v += rho.matrix(r + 2, c + 2);
      rate.matrix(r, c) = q * v;
    }
  }
  return rate;
}

std::vector<DensitySample> evolve(const RotorDensity& rho0, const LindbladParams& params,
                                  std::span<const double> record_times, unsigned threads) {
  const std::vector<double> default_times{0.0, params.t_max};
  if (record_times.empty()) record_times = default_times;
  check_records(record_times);
  KDiagonalStore store = KDiagonalStore::from_density(rho0);
  const std::int64_t kmax = store.max_order();
  params.validate(kmax);
  const DiagonalDynamics dyn = DiagonalDynamics::from(params);

  const double trace0 = store.trace();
  double leaked = 0.0;
  double now = 0.0;
  const auto n_diag = static_cast<std::size_t>(2 * kmax + 1);
  std::vector<double> chunk_leak(n_diag);
  std::vector<DensitySample> out;
  out.reserve(record_times.size());

  for (double target : record_times) {
    const double span_t = target - now;
    const std::size_t steps = step_count(span_t, params.dt);
    const double h = steps ? span_t / static_cast<double>(steps) : 0.0;
    std::size_t done = 0;
    while (done < steps) {
      const std::size_t chunk = std::min(kCheckInterval, steps - done);
      const double dur = h * static_cast<double>(chunk);
      parallel_for(n_diag, threads, [&](std::size_t i) {
        const std::int64_t k = static_cast<std::int64_t>(i) - kmax;
        chunk_leak[i] = propagate_diagonal(store.diagonal(k), k, store.first_row(k), dyn, dur, chunk);
      });
      leaked += chunk_leak[static_cast<std::size_t>(kmax)];
      done += chunk;

      if (leaked > kLeakageBudget) {
        throw TruncationError("leakage " + std::to_string(leaked) +
                              " exceeds the budget; widen the ladder window");
      }
      const double drift = std::abs(store.trace() + leaked - trace0);
      if (drift > kTraceTolerance) {
        throw StabilityError("trace drift " + std::to_string(drift) + "; reduce dt");
      }
      if (store.hermiticity_defect() > kHermiticityTolerance) {
        throw StabilityError("density lost Hermiticity; reduce dt");
      }
    }
    now = target;
    RotorDensity rho = store.to_density();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.matrix, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kPositivityFloor) {
      throw StabilityError("density lost positivity at t = " + std::to_string(target) + " ms");
    }
    out.push_back({target, std::move(rho), leaked});
  }
  return out;
}

std::vector<MomentSample> evolve_moments(const LadderWindow& window,
                                         std::span<const double> populations,
                                         const LindbladParams& params,
                                         std::span<const double> record_times) {
  if (populations.size() != window.size()) throw DomainError("population size does not match window");
  const std::vector<double> default_times{0.0, params.t_max};
  if (record_times.empty()) record_times = default_times;
  check_records(record_times);
  // Populations never feel H0, so only the D bound applies.
  params.validate(0);
  const DiagonalDynamics dyn = DiagonalDynamics::from(params);

  std::vector<cplx> x(populations.begin(), populations.end());
  std::vector<double> pop(x.size());
  double trace0 = 0.0;
  for (double p : populations) trace0 += p;
  double leaked = 0.0;
  double now = 0.0;
  std::vector<MomentSample> out;
  out.reserve(record_times.size());
  for (double target : record_times) {
    const double span_t = target - now;
    const std::size_t steps = step_count(span_t, params.dt);
    const double h = steps ? span_t / static_cast<double>(steps) : 0.0;
    std::size_t done = 0;
    while (done < steps) {
      const std::size_t chunk = std::min(kCheckInterval, steps - done);
      leaked += propagate_diagonal(x, 0, window.ell_min, dyn, h * static_cast<double>(chunk), chunk);
      done += chunk;
      if (leaked > kLeakageBudget) {
        throw TruncationError("leakage " + std::to_string(leaked) +
                              " exceeds the budget; widen the ladder window");
      }
      double tr = 0.0;
      for (const auto& c : x) tr += c.real();
      if (std::abs(tr + leaked - trace0) > kTraceTolerance) {
        throw StabilityError("trace drift beyond tolerance; reduce dt");
      }
    }
    now = target;
    for (std::size_t i = 0; i < x.size(); ++i) pop[i] = x[i].real();
    const Moments m = population_moments(window, pop);
    out.push_back({target, m.mean, m.variance, leaked});
  }
  return out;
}

std::vector<MomentSample> evolve_moments(const RotorDensity& rho0, const LindbladParams& params,
                                         std::span<const double> record_times) {
  std::vector<double> pop(rho0.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    pop[i] = rho0.matrix(k, k).real();
  }
  return evolve_moments(rho0.window, pop, params, record_times);
}

std::vector<AngleDecayRow> angle_decay_check(const RotorDensity& rho0, double diffusion,
                                             double t,
                                             std::span<const std::pair<double, double>> pairs,
                                             double dt, unsigned threads) {
  LindbladParams p;
  p.diffusion = diffusion;
  p.include_hamiltonian = false;
  p.t_max = t;
  if (dt <= 0.0) {
    dt = t > 0.0 ? t / 100.0 : 1.0;
    if (diffusion > 0.0) dt = std::min(dt, 0.05 / diffusion);
  }
  p.dt = dt;
  const std::vector<double> times{t};
  const RotorDensity rho_t = evolve(rho0, p, times, threads).back().rho;

  std::vector<AngleDecayRow> rows;
  rows.reserve(pairs.size());
  for (const auto& [phi, phi2] : pairs) {
    const double before = std::abs(angle_coherence(rho0, phi, phi2));
    if (!(before > 1e-300)) {
      throw DomainError("initial angle coherence vanishes at the requested pair");
    }
    AngleDecayRow row;
    row.phi = phi;
    row.phi_prime = phi2;
    row.measured = std::abs(angle_coherence(rho_t, phi, phi2)) / before;
    const double s = std::sin(phi - phi2);
    row.analytic = std::exp(-diffusion * s * s * t);
    row.relative_error = std::abs(row.measured - row.analytic) / row.analytic;
    rows.push_back(row);
  }
  return rows;
}

void write_moment_csv(std::ostream& os, std::span<const MomentSample> samples) {
  os << "t_ms,mean_Lz,var_Lz,leakage\n";
  os.precision(12);
  for (const auto& s : samples) os << s.t << ',' << s.mean << ',' << s.variance << ',' << s.leakage << '\n';
}

void write_angle_decay_csv(std::ostream& os, std::span<const AngleDecayRow> rows) {
  os << "phi_rad,phi_prime_rad,measured,analytic,relative_error\n";
  os.precision(12);
  for (const auto& r : rows) {
    os << r.phi << ',' << r.phi_prime << ',' << r.measured << ',' << r.analytic << ','
       << r.relative_error << '\n';
  }
}

}  // namespace rotor
