#include "rotor/ramsey.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "rotor/errors.hpp"
#include "rotor/lindblad.hpp"
#include "rotor/parallel.hpp"

namespace rotor {

namespace {

constexpr double kPulseLeakTolerance = 1e-6;

Eigen::Matrix2cd single_atom(double theta, double phi, int sign) {
  const double c = std::cos(theta), s = std::sin(theta) * sign;
  Eigen::Matrix2cd u;
  // basis {S, D}; sigma+ = |D><S|
  u << c, std::polar(s, -phi), -std::polar(s, phi), c;
  return u;
}

std::int64_t shift(int delta_ell, std::size_t a, std::size_t c) {
  return static_cast<std::int64_t>(delta_ell) * (kExcitation[a] - kExcitation[c]);
}

// rho = sum_ab |a><b| (x) rho_ab; for each block only the coherence order
// k_ab = delta_ell (e_a - e_b) is ever populated when starting from
// |SS><SS| (x) rho0 (pulses map order k_cd of block cd onto k_ab, the
// environment conserves it). Block ab is stored by row: v[i] = rho_ab(i, i - k_ab).
struct Sector {
  std::size_t n = 0;
  std::int64_t ell_min = 0;
  int delta_ell = 1;
  std::array<std::vector<cplx>, 16> blocks;

  std::int64_t order(std::size_t a, std::size_t b) const { return shift(delta_ell, a, b); }
  std::vector<cplx>& block(std::size_t a, std::size_t b) { return blocks[4 * a + b]; }
  const std::vector<cplx>& block(std::size_t a, std::size_t b) const { return blocks[4 * a + b]; }
  // rows whose column i - k lies in the window
  std::pair<std::size_t, std::size_t> rows(std::int64_t k) const {
    const auto nn = static_cast<std::int64_t>(n);
    return {static_cast<std::size_t>(std::max<std::int64_t>(0, k)),
            static_cast<std::size_t>(std::min(nn, nn + k))};
  }
  double trace() const {
    double s = 0.0;
    for (std::size_t a = 0; a < 4; ++a) {
      for (const auto& v : block(a, a)) s += v.real();
    }
    return s;
  }
};

Sector initial_sector(const RotorState& psi0, int delta_ell) {
  Sector s;
  s.n = psi0.window.size();
  s.ell_min = psi0.window.ell_min;
  s.delta_ell = delta_ell;
  for (auto& b : s.blocks) b.assign(s.n, cplx{});
  auto& ss = s.block(0, 0);
  for (std::size_t i = 0; i < s.n; ++i) ss[i] = std::norm(psi0.amplitudes[i]);
  return s;
}

cplx pulsed_entry(const Sector& old, const Eigen::Matrix4cd& m, std::size_t a, std::size_t b,
                  std::size_t i) {
  cplx v{};
  const auto n = static_cast<std::int64_t>(old.n);
  for (std::size_t c = 0; c < 4; ++c) {
    const std::int64_t src = static_cast<std::int64_t>(i) - old.order(a, c);
    if (src < 0 || src >= n) continue;
    for (std::size_t d = 0; d < 4; ++d) {
      const cplx w = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) *
                     std::conj(m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(d)));
      if (w == cplx{}) continue;
      v += w * old.block(c, d)[static_cast<std::size_t>(src)];
    }
  }
  return v;
}

void check_pulse_loss(double before, double after) {
  if (before - after > kPulseLeakTolerance) {
    throw TruncationError("pulse shifted probability " + std::to_string(before - after) +
                          " out of the window");
  }
}

Sector pulse_sector(const Sector& old, const Eigen::Matrix4cd& m) {
  Sector out;
  out.n = old.n;
  out.ell_min = old.ell_min;
  out.delta_ell = old.delta_ell;
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      auto& v = out.block(a, b);
      v.assign(old.n, cplx{});
      const auto [lo, hi] = old.rows(old.order(a, b));
      for (std::size_t i = lo; i < hi; ++i) v[i] = pulsed_entry(old, m, a, b, i);
    }
  }
  check_pulse_loss(old.trace(), out.trace());
  return out;
}

// P(D) after the final pulse, computing only the diagonal blocks.
double measure_after_pulse(const Sector& old, const Eigen::Matrix4cd& m) {
  double prob[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t i = 0; i < old.n; ++i) prob[a] += pulsed_entry(old, m, a, a, i).real();
  }
  check_pulse_loss(old.trace(), prob[0] + prob[1] + prob[2] + prob[3]);
  return prob[3] + 0.5 * (prob[1] + prob[2]);
}

struct FreeEvolution {
  DiagonalDynamics dyn;
  std::size_t steps = 1;
  double internal_rate = 0.0;  // delta_ell omega_rot in the lab frame, else 0
};

// Evolves blocks a <= b and mirrors the rest. Returns the probability lost
// through the window edges.
double evolve_sector(Sector& s, const FreeEvolution& fe, double duration) {
  if (duration <= 0.0) return 0.0;
  double leaked = 0.0;
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a; b < 4; ++b) {
      const std::int64_t k = s.order(a, b);
      const auto [lo, hi] = s.rows(k);
      auto& v = s.block(a, b);
      const double l = propagate_diagonal(std::span<cplx>(v.data() + lo, hi - lo), k,
                                          s.ell_min + static_cast<std::int64_t>(lo), fe.dyn,
                                          duration, fe.steps);
      if (a == b) leaked += l;
      if (fe.internal_rate != 0.0 && a != b) {
        const double de = static_cast<double>(kExcitation[a] - kExcitation[b]);
        const cplx ph = std::polar(1.0, std::fmod(fe.internal_rate * de * duration, kTwoPi));
        for (auto& c : v) c *= ph;
      }
    }
  }
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      // rho_ab(i, i - k_ab) = conj(rho_ba(i - k_ab, i))
      const std::int64_t k = s.order(a, b);
      const auto& src = s.block(b, a);
      auto& dst = s.block(a, b);
      const auto [lo, hi] = s.rows(k);
      std::fill(dst.begin(), dst.end(), cplx{});
      for (std::size_t i = lo; i < hi; ++i) dst[i] = std::conj(src[static_cast<std::size_t>(static_cast<std::int64_t>(i) - k)]);
    }
  }
  return leaked;
}

}  // namespace

const char* internal_label(Internal a) {
  switch (a) {
    case Internal::SS: return "SS";
    case Internal::SD: return "SD";
    case Internal::DS: return "DS";
    case Internal::DD: return "DD";
  }
  return "?";
}

Eigen::Matrix4cd pulse_matrix(const PulseSpec& spec) {
  if (spec.delta_ell < 1) throw DomainError("delta_ell must be a positive integer");
  const double theta = spec.kind == PulseKind::half_pi ? kPi / 4.0 : kPi / 2.0;
  const Eigen::Matrix2cd u1 = single_atom(theta, spec.laser_phase, 1);
  const Eigen::Matrix2cd u2 = single_atom(theta, spec.laser_phase, spec.parity_sign());
  Eigen::Matrix4cd m;
  for (int i1 = 0; i1 < 2; ++i1)
    for (int i2 = 0; i2 < 2; ++i2)
      for (int j1 = 0; j1 < 2; ++j1)
        for (int j2 = 0; j2 < 2; ++j2) m(2 * i1 + i2, 2 * j1 + j2) = u1(i1, j1) * u2(i2, j2);
  return m;
}

double CompositeState::norm_squared() const {
  double s = 0.0;
  for (const auto& b : branches)
    for (const auto& c : b) s += std::norm(c);
  return s;
}

double CompositeState::probability(Internal a) const {
  double s = 0.0;
  for (const auto& c : branches[static_cast<std::size_t>(a)]) s += std::norm(c);
  return s;
}

void CompositeState::validate() const {
  for (const auto& b : branches) {
    if (b.size() != window.size()) throw DomainError("branch size does not match window");
  }
  if (std::abs(norm_squared() - 1.0) > 1e-10) throw DomainError("composite state not normalized");
}

CompositeState CompositeState::product(Internal a, const RotorState& psi) {
  CompositeState s;
  s.window = psi.window;
  for (auto& b : s.branches) b.assign(psi.window.size(), cplx{});
  s.branches[static_cast<std::size_t>(a)] = psi.amplitudes;
  return s;
}

CompositeState apply_pulse(const PulseSpec& spec, const CompositeState& state,
                           double leak_tolerance) {
  const Eigen::Matrix4cd m = pulse_matrix(spec);
  const auto n = static_cast<std::int64_t>(state.window.size());
  CompositeState out;
  out.window = state.window;
  for (auto& b : out.branches) b.assign(state.window.size(), cplx{});
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t c = 0; c < 4; ++c) {
      const cplx w = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
      if (w == cplx{}) continue;
      const std::int64_t s = shift(spec.delta_ell, a, c);
      for (std::int64_t j = 0; j < n; ++j) {
        const std::int64_t i = j + s;
        if (i < 0 || i >= n) continue;
        out.branches[a][static_cast<std::size_t>(i)] += w * state.branches[c][static_cast<std::size_t>(j)];
      }
    }
  }
  const double lost = state.norm_squared() - out.norm_squared();
  if (lost > leak_tolerance) {
    throw TruncationError("pulse shifted probability " + std::to_string(lost) +
                          " out of the window");
  }
  return out;
}

Eigen::MatrixXcd pulse_operator(const PulseSpec& spec, const LadderWindow& window) {
  const Eigen::Matrix4cd m = pulse_matrix(spec);
  const auto n = static_cast<std::int64_t>(window.size());
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(4 * n, 4 * n);
  for (std::int64_t a = 0; a < 4; ++a) {
    for (std::int64_t c = 0; c < 4; ++c) {
      const std::int64_t s = shift(spec.delta_ell, static_cast<std::size_t>(a), static_cast<std::size_t>(c));
      for (std::int64_t j = 0; j < n; ++j) {
        const std::int64_t i = j + s;
        if (i < 0 || i >= n) continue;
        u(a * n + i, c * n + j) = m(a, c);
      }
    }
  }
  return u;
}

void SequenceSpec::validate() const {
  if (!(tau >= 0.0)) throw DomainError("tau must be >= 0");
  if (delta_ell < 1) throw DomainError("delta_ell must be a positive integer");
  if (phase_scan.size() < 8) throw DomainError("phase scan needs >= 8 points");
  if (contrast_factor < 0.0 || contrast_factor > 1.0) {
    throw DomainError("contrast factor must lie in [0, 1]");
  }
  rotor.validate();
  if (const auto* l = std::get_if<LindbladEnvironment>(&environment)) {
    if (!(l->diffusion >= 0.0)) throw DomainError("D must be >= 0");
  }
}

std::vector<double> uniform_phase_scan(std::size_t n) {
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
  return p;
}

ContrastFit fit_contrast(std::span<const double> phases, std::span<const double> p_d) {
  const std::size_t n = phases.size();
  if (n != p_d.size()) throw DomainError("phase and signal lengths differ");
  if (n < 8) throw DomainError("contrast fit needs >= 8 phase points");
  std::vector<double> wrapped(phases.begin(), phases.end());
  for (auto& p : wrapped) {
    p = std::fmod(p, kTwoPi);
    if (p < 0.0) p += kTwoPi;
  }
  std::sort(wrapped.begin(), wrapped.end());
  double gap = wrapped.front() + kTwoPi - wrapped.back();
  for (std::size_t i = 1; i < n; ++i) gap = std::max(gap, wrapped[i] - wrapped[i - 1]);
  if (gap >= kPi) throw DomainError("phase scan does not span the full circle");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = std::cos(phases[i]);
    x(r, 2) = std::sin(phases[i]);
    y(r) = p_d[i];
  }
  const Eigen::Matrix3d xtx = x.transpose() * x;
  const Eigen::Vector3d beta = xtx.ldlt().solve(x.transpose() * y);
  const double rss = (y - x * beta).squaredNorm();
  const double s2 = rss / static_cast<double>(n - 3);
  const Eigen::Matrix3d cov = s2 * xtx.inverse();

  ContrastFit f;
  f.offset = beta(0);
  const double a = beta(1), b = beta(2);
  const double r = std::hypot(a, b);
  if (r < 1e-12) {
    f.degenerate = true;
    f.contrast_se = 2.0 * std::sqrt(std::max(0.0, 0.5 * (cov(1, 1) + cov(2, 2))));
    return f;
  }
  f.contrast = 2.0 * r;
  f.fringe_phase = std::atan2(-b, -a);
  const double vc = (a * a * cov(1, 1) + b * b * cov(2, 2) + 2.0 * a * b * cov(1, 2)) / (r * r);
  const double vp = (b * b * cov(1, 1) + a * a * cov(2, 2) - 2.0 * a * b * cov(1, 2)) / (r * r * r * r);
  f.contrast_se = 2.0 * std::sqrt(std::max(0.0, vc));
  f.fringe_phase_se = std::sqrt(std::max(0.0, vp));
  return f;
}

namespace {

PulseSpec make_pulse(int delta_ell, PulseKind kind, double phase) {
  PulseSpec p;
  p.delta_ell = delta_ell;
  p.kind = kind;
  p.laser_phase = phase;
  return p;
}

double internal_rate(const SequenceSpec& seq) {
  return seq.rotor.frame == Frame::lab ? static_cast<double>(seq.delta_ell) * seq.rotor.omega_rot()
                                       : 0.0;
}

void finish(SequenceResult& r, const SequenceSpec& seq) {
  for (auto& p : r.p_d) p = 0.5 + seq.contrast_factor * (p - 0.5);
  for (auto& s : r.p_d_se) s *= seq.contrast_factor;
  r.contrast = fit_contrast(r.phases, r.p_d);
}

SequenceResult run_deterministic(const SequenceSpec& seq, const RotorState& psi0, double diffusion,
                                 double dt) {
  FreeEvolution fe;
  fe.dyn.diffusion = diffusion;
  fe.dyn.omega_r = seq.rotor.omega_r;
  fe.dyn.include_hamiltonian = true;
  fe.dyn.phase_reference = seq.rotor.frame == Frame::lab ? 0 : seq.rotor.ell_bar;
  fe.internal_rate = internal_rate(seq);
  const double half = 0.5 * seq.tau;
  if (diffusion > 0.0 && half > 0.0) {
    LindbladParams lp;
    lp.diffusion = diffusion;
    lp.rotor = seq.rotor;
    lp.t_max = seq.tau;
    lp.dt = dt > 0.0 ? dt : std::min(lp.max_stable_dt(2 * seq.delta_ell), half);
    lp.validate(2 * seq.delta_ell);
    fe.steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(half / lp.dt - 1e-9)));
  }

  const double phi0 = seq.laser_phase_offset;
  Sector s = initial_sector(psi0, seq.delta_ell);
  const double trace0 = s.trace();
  s = pulse_sector(s, pulse_matrix(make_pulse(seq.delta_ell, PulseKind::half_pi, phi0)));
  double leaked = evolve_sector(s, fe, half);
  s = pulse_sector(s, pulse_matrix(make_pulse(seq.delta_ell, PulseKind::pi, phi0)));
  leaked += evolve_sector(s, fe, half);
  if (leaked > kLeakageBudget) {
    throw TruncationError("leakage " + std::to_string(leaked) + " exceeds the budget");
  }
  if (std::abs(s.trace() + leaked - trace0) > kTraceTolerance) {
    throw StabilityError("trace drift during the sequence; reduce dt");
  }

  SequenceResult r;
  r.tau = seq.tau;
  r.leakage = leaked;
  r.phases = seq.phase_scan;
  for (double phi : seq.phase_scan) {
    const Eigen::Matrix4cd m = pulse_matrix(make_pulse(seq.delta_ell, PulseKind::half_pi, phi0 + phi));
    r.p_d.push_back(measure_after_pulse(s, m) / trace0);
  }
  finish(r, seq);
  return r;
}

void internal_phases(CompositeState& st, double rate, double duration) {
  if (rate == 0.0) return;
  for (std::size_t a = 1; a < 4; ++a) {
    const cplx ph = std::polar(1.0, std::fmod(rate * kExcitation[a] * duration, kTwoPi));
    for (auto& c : st.branches[a]) c *= ph;
  }
}

SequenceResult run_trajectories(const SequenceSpec& seq, const RotorState& psi0,
                                const TrajectoryEnvironment& env, unsigned threads) {
  EnsembleSpec es = env.ensemble;
  es.rotor = seq.rotor;
  const auto half_steps = static_cast<std::size_t>(std::llround(0.5 * seq.tau / es.dt));
  const std::size_t steps = 2 * half_steps;
  es.t_max = std::max(static_cast<double>(steps) * es.dt, es.dt);
  es.record_times.clear();
  es.validate();
  if (!(psi0.window == seq.rotor.window())) throw DomainError("psi0 window must match the rotor window");
  const double realized = static_cast<double>(steps) * es.dt;
  const double rate = internal_rate(seq);
  const double phi0 = seq.laser_phase_offset;
  const std::size_t np = seq.phase_scan.size();
  const std::size_t n = es.n_traj;

  std::vector<std::vector<double>> per(n, std::vector<double>(np));
  parallel_for(n, threads, [&](std::size_t i) {
    const auto field = frame_field(es, i);
    CompositeState st = CompositeState::product(Internal::SS, psi0);
    st = apply_pulse(make_pulse(seq.delta_ell, PulseKind::half_pi, phi0), st);
    double edge = advance_branches(st.branches, field, seq.rotor, es.dt, 0, half_steps);
    internal_phases(st, rate, 0.5 * realized);
    st = apply_pulse(make_pulse(seq.delta_ell, PulseKind::pi, phi0), st);
    edge = std::max(edge, advance_branches(st.branches, field, seq.rotor, es.dt, half_steps, steps));
    internal_phases(st, rate, 0.5 * realized);
    if (edge > kEdgeTolerance) throw TruncationError("trajectory reached the window edge");
    const double norm = st.norm_squared();
    for (std::size_t j = 0; j < np; ++j) {
      const CompositeState f =
          apply_pulse(make_pulse(seq.delta_ell, PulseKind::half_pi, phi0 + seq.phase_scan[j]), st);
      per[i][j] = (f.probability(Internal::DD) +
                   0.5 * (f.probability(Internal::DS) + f.probability(Internal::SD))) / norm;
    }
  });

  SequenceResult r;
  r.tau = realized;
  r.phases = seq.phase_scan;
  const double dn = static_cast<double>(n);
  for (std::size_t j = 0; j < np; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += per[i][j];
    const double mean = s / dn;
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (per[i][j] - mean) * (per[i][j] - mean);
    r.p_d.push_back(mean);
    r.p_d_se.push_back(n > 1 ? std::sqrt(v / (dn * (dn - 1.0))) : 0.0);
  }
  finish(r, seq);
  return r;
}

}  // namespace

SequenceResult run_sequence(const SequenceSpec& seq, const RotorState& psi0, unsigned threads) {
  seq.validate();
  return std::visit(
      [&](const auto& env) -> SequenceResult {
        using T = std::decay_t<decltype(env)>;
        if constexpr (std::is_same_v<T, NoEnvironment>) {
          return run_deterministic(seq, psi0, 0.0, 0.0);
        } else if constexpr (std::is_same_v<T, LindbladEnvironment>) {
          return run_deterministic(seq, psi0, env.diffusion, env.dt);
        } else {
          return run_trajectories(seq, psi0, env, threads);
        }
      },
      seq.environment);
}

std::vector<SequenceResult> run_tau_scan(const SequenceSpec& seq, std::span<const double> taus,
                                         const RotorState& psi0, unsigned threads) {
  std::vector<SequenceResult> out(taus.size());
  auto one = [&](std::size_t i) {
    SequenceSpec s = seq;
    s.tau = taus[i];
    return run_sequence(s, psi0, threads);
  };
  if (std::holds_alternative<TrajectoryEnvironment>(seq.environment)) {
    for (std::size_t i = 0; i < taus.size(); ++i) out[i] = one(i);
  } else {
    parallel_for(taus.size(), threads, [&](std::size_t i) { out[i] = one(i); });
  }
  return out;
}

double analytic_contrast(double diffusion, double omega_r, int delta_ell, double tau) {
  const double x = 2.0 * omega_r * delta_ell * tau;
  const double sinc = std::abs(x) < 1e-4 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  return std::exp(-0.5 * diffusion * tau * (1.0 - sinc));
}

double analytic_gamma(double diffusion, double omega_r, int delta_ell) {
  const double dl = static_cast<double>(delta_ell);
  return std::cbrt(omega_r * omega_r * dl * dl * diffusion / 3.0);
}

double full_signal(double diffusion, double omega_r, int delta_ell, double tau) {
  const double dl = static_cast<double>(delta_ell);
  return 0.5 - 0.5 * std::cos(omega_r * dl * dl * tau) *
                   analytic_contrast(diffusion, omega_r, delta_ell, tau);
}

double node_time(double omega_r, int delta_ell) {
  if (!(omega_r > 0.0) || delta_ell < 1) throw DomainError("node time needs omega_r > 0, delta_ell >= 1");
  const double dl = static_cast<double>(delta_ell);
  return kPi / (2.0 * dl * dl * omega_r);
}

cplx bessel_coupling(double g0, double k, double r, double theta, int delta_ell, double z) {
  if (!(theta > 0.0) || theta > kPi / 2.0) throw DomainError("theta must lie in (0, pi/2]");
  if (delta_ell < 0) throw DomainError("delta_ell must be >= 0");
  static constexpr std::array<cplx, 4> minus_i_pow{cplx{1, 0}, cplx{0, -1}, cplx{-1, 0}, cplx{0, 1}};
  const double j = std::cyl_bessel_j(static_cast<double>(delta_ell), k * r * std::sin(theta));
  return g0 * std::polar(1.0, -k * z * std::cos(theta)) * minus_i_pow[static_cast<std::size_t>(delta_ell % 4)] * j;
}

void write_contrast_csv(std::ostream& os, std::span<const SequenceResult> results) {
  os << "tau_ms,contrast,contrast_se,fringe_phase\n";
  os.precision(12);
  for (const auto& r : results) {
    os << r.tau << ',' << r.contrast.contrast << ',' << r.contrast.contrast_se << ','
       << r.contrast.fringe_phase << '\n';
  }
}

void write_phase_scan_csv(std::ostream& os, const SequenceResult& result) {
  os << "phi_L_rad,P_D\n";
  os.precision(12);
  for (std::size_t i = 0; i < result.phases.size(); ++i) os << result.phases[i] << ',' << result.p_d[i] << '\n';
}

}  // namespace rotor
