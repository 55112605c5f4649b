#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rotor/errors.hpp"
#include "rotor/ramsey.hpp"

using namespace rotor;

namespace {

Eigen::Matrix2cd single_atom(double theta, double phi, int parity) {
  const double sign = parity;
  Eigen::Matrix2cd u;
  u << std::cos(theta), sign * std::polar(1.0, -phi) * std::sin(theta),
      -sign * std::polar(1.0, phi) * std::sin(theta), std::cos(theta);
  return u;
}

Eigen::Matrix4cd kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::Matrix4cd m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return m;
}

SequenceSpec sequence(double tau, int dl, double sigma, Environment env) {
  SequenceSpec s;
  s.tau = tau;
  s.delta_ell = dl;
  s.rotor.ell_bar = 5538;
  s.rotor.sigma_ell = sigma;
  s.rotor.window_halfwidth = default_window_halfwidth(sigma, 0.0, 0.0, dl);
  s.environment = env;
  s.phase_scan = uniform_phase_scan(16);
  return s;
}

// Composite density evolved entry by entry: ell-blocks of the four internal
// states, free Hamiltonian and dissipator act within each block.
Eigen::MatrixXcd lindblad_oracle(Eigen::MatrixXcd rho, const RotorParams& rotor, double diffusion,
                                 double t, int steps) {
  const auto w = rotor.window();
  const auto n = static_cast<Eigen::Index>(w.size());
  Eigen::VectorXd h(4 * n);
  for (Eigen::Index i = 0; i < 4 * n; ++i) {
    const double m = static_cast<double>(w.ell(static_cast<std::size_t>(i % n)) - rotor.ell_bar);
    h(i) = rotor.omega_r * m * m;
  }
  auto rhs = [&](const Eigen::MatrixXcd& r) {
    Eigen::MatrixXcd out(4 * n, 4 * n);
    for (Eigen::Index i = 0; i < 4 * n; ++i) {
      for (Eigen::Index j = 0; j < 4 * n; ++j) {
        const Eigen::Index li = i % n, lj = j % n;
        cplx d = -2.0 * r(i, j);
        if (li >= 2 && lj >= 2) d += r(i - 2, j - 2);
        if (li + 2 < n && lj + 2 < n) d += r(i + 2, j + 2);
        out(i, j) = cplx{0.0, -(h(i) - h(j))} * r(i, j) + 0.25 * diffusion * d;
      }
    }
    return out;
  };
  const double dt = t / steps;
  for (int k = 0; k < steps; ++k) {
    const Eigen::MatrixXcd k1 = rhs(rho);
    const Eigen::MatrixXcd k2 = rhs(rho + 0.5 * dt * k1);
    const Eigen::MatrixXcd k3 = rhs(rho + 0.5 * dt * k2);
    const Eigen::MatrixXcd k4 = rhs(rho + dt * k3);
    rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return rho;
}

double bessel_series(int n, double x) {
  double sum = 0.0;
  for (int m = 0; m < 40; ++m) {
    sum += std::pow(-1.0, m) / (std::tgamma(m + 1.0) * std::tgamma(m + n + 1.0)) * std::pow(x / 2, 2 * m + n);
  }
  return sum;
}

}  // namespace

TEST_SUITE("ramsey") {

TEST_CASE("pulse matrices") {
  for (int dl : {1, 2, 3}) {
    for (double phi : {0.0, 0.8, -2.1}) {
      const PulseSpec half{dl, PulseKind::half_pi, phi};
      const Eigen::Matrix4cd m = pulse_matrix(half);
      CHECK((m * m.adjoint() - Eigen::Matrix4cd::Identity()).norm() < 1e-14);
      const int s = dl % 2 == 0 ? 1 : -1;
      CHECK((m - kron(single_atom(kPi / 4, phi, 1), single_atom(kPi / 4, phi, s))).norm() < 1e-14);
      const Eigen::Matrix4cd pi = pulse_matrix({dl, PulseKind::pi, phi});
      CHECK((pi * pi - Eigen::Matrix4cd::Identity()).norm() < 1e-14);
    }
  }
  CHECK(PulseSpec{1}.parity_sign() == -1);
  CHECK(PulseSpec{2}.parity_sign() == 1);
}

TEST_CASE("half pulse on SS spreads the branches") {
  const auto w = LadderWindow::centered(50, 6);
  const CompositeState st = CompositeState::product(Internal::SS, RotorState::delta(w, 50));
  const CompositeState out = apply_pulse({1, PulseKind::half_pi, 0.0}, st);
  CHECK(out.probability(Internal::SS) == doctest::Approx(0.25));
  CHECK(out.probability(Internal::SD) == doctest::Approx(0.25));
  CHECK(out.probability(Internal::DS) == doctest::Approx(0.25));
  CHECK(out.probability(Internal::DD) == doctest::Approx(0.25));
  // each D excitation carries the rotor up by delta_ell
  CHECK(std::abs(out.branches[3][w.index(52)]) == doctest::Approx(0.5));
  CHECK(std::abs(out.branches[1][w.index(51)]) == doctest::Approx(0.5));
  // the symmetric single-excitation combination interferes with the parity sign
  const cplx sym = out.branches[1][w.index(51)] + out.branches[2][w.index(51)];
  CHECK(std::abs(sym) < 1e-15);
  const CompositeState even = apply_pulse({2, PulseKind::half_pi, 0.0}, st);
  CHECK(std::abs(even.branches[1][w.index(52)] + even.branches[2][w.index(52)]) == doctest::Approx(1.0));
}

TEST_CASE("dense pulse operator agrees with the branch update and is unitary inside") {
  const auto w = LadderWindow::centered(20, 10);
  const PulseSpec spec{2, PulseKind::half_pi, 0.4};
  const Eigen::MatrixXcd u = pulse_operator(spec, w);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  CompositeState st{w, {}};
  const auto n = static_cast<Eigen::Index>(w.size());
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(4 * n);
  for (int a = 0; a < 4; ++a) {
    st.branches[static_cast<std::size_t>(a)].assign(w.size(), cplx{});
    for (std::int64_t l = 16; l <= 24; ++l) {
      const cplx c{g(rng), g(rng)};
      st.branches[static_cast<std::size_t>(a)][w.index(l)] = c;
      v(a * n + static_cast<Eigen::Index>(w.index(l))) = c;
    }
  }
  const Eigen::VectorXcd uv = u * v;
  CHECK(uv.norm() == doctest::Approx(v.norm()).epsilon(1e-14));
  CHECK((u.adjoint() * uv - v).norm() < 1e-12);
  const double scale = std::sqrt(st.norm_squared());
  for (auto& b : st.branches)
    for (auto& c : b) c /= scale;
  const CompositeState out = apply_pulse(spec, st);
  for (int a = 0; a < 4; ++a) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(std::abs(out.branches[static_cast<std::size_t>(a)][i] * scale -
                     uv(a * n + static_cast<Eigen::Index>(i))) < 1e-12);
    }
  }
}

TEST_CASE("pulses refuse to shift population out of the window") {
  const auto w = LadderWindow::centered(50, 6);
  const CompositeState st = CompositeState::product(Internal::SS, RotorState::delta(w, 55));
  CHECK_THROWS_AS(apply_pulse({1, PulseKind::half_pi, 0.0}, st), TruncationError);
  CHECK_NOTHROW(apply_pulse({1, PulseKind::half_pi, 0.0}, CompositeState::product(Internal::SS, RotorState::delta(w, 54))));
}

TEST_CASE("no environment: contrast is the free-rotation envelope") {
  for (double sigma : {5.0, 20.0, 50.0}) {
    for (int dl : {1, 2}) {
      for (double tau : {0.0, 1.3, 4.0, 15.0}) {
        const SequenceSpec seq = sequence(tau, dl, sigma, NoEnvironment{});
        const SequenceResult r = run_sequence(seq, build_coherent_state(seq.rotor));
        const double expect = std::abs(std::cos(seq.rotor.omega_r * dl * dl * tau));
        CHECK(r.contrast.contrast == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
        for (double p : r.p_d) {
          CHECK(p >= -1e-12);
          CHECK(p <= 1.0 + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("Lindblad environment follows the analytic contrast") {
  for (int dl : {1, 3}) {
    for (double tau : {0.5, 1.5, 3.0}) {
      const double d = 2.1;
      SequenceSpec seq = sequence(tau, dl, 5.0, LindbladEnvironment{d});
      seq.rotor.window_halfwidth = default_window_halfwidth(5.0, d, tau, dl);
      const SequenceResult r = run_sequence(seq, build_coherent_state(seq.rotor));
      const double expect =
          std::abs(std::cos(seq.rotor.omega_r * dl * dl * tau)) * analytic_contrast(d, seq.rotor.omega_r, dl, tau);
      CHECK(r.contrast.contrast == doctest::Approx(expect).epsilon(1e-3).scale(1.0));
      CHECK(r.leakage < 1e-6);
    }
  }
}

TEST_CASE("sector method agrees with a dense composite master equation") {
  RotorParams rotor;
  rotor.ell_bar = 100;
  rotor.sigma_ell = 1.5;
  rotor.window_halfwidth = 16;
  const double d = 5.0, tau = 0.4;
  const int dl = 1;
  const RotorState psi0 = build_coherent_state(rotor);
  const auto w = rotor.window();
  const auto n = static_cast<Eigen::Index>(w.size());
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(4 * n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = psi0.amplitudes[static_cast<std::size_t>(i)];

  const Eigen::MatrixXcd u1 = pulse_operator({dl, PulseKind::half_pi, 0.0}, w);
  const Eigen::MatrixXcd upi = pulse_operator({dl, PulseKind::pi, 0.0}, w);
  Eigen::MatrixXcd rho = u1 * v * v.adjoint() * u1.adjoint();
  rho = lindblad_oracle(rho, rotor, d, tau / 2, 200);
  rho = upi * rho * upi.adjoint();
  rho = lindblad_oracle(rho, rotor, d, tau / 2, 200);

  SequenceSpec seq;
  seq.tau = tau;
  seq.delta_ell = dl;
  seq.rotor = rotor;
  seq.environment = LindbladEnvironment{d};
  seq.phase_scan = uniform_phase_scan(8);
  const SequenceResult r = run_sequence(seq, psi0, 1);
  for (std::size_t j = 0; j < seq.phase_scan.size(); ++j) {
    const Eigen::MatrixXcd u2 = pulse_operator({dl, PulseKind::half_pi, seq.phase_scan[j]}, w);
    const Eigen::MatrixXcd fin = u2 * rho * u2.adjoint();
    const double pdd = fin.diagonal().segment(3 * n, n).real().sum();
    const double psd = fin.diagonal().segment(n, 2 * n).real().sum();
    CHECK(r.p_d[j] == doctest::Approx(pdd + 0.5 * psd).epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("zero-noise trajectories reproduce the noiseless sequence") {
  EnsembleSpec ens;
  ens.n_traj = 2;
  ens.noise.amplitude = DriveSigma{0.0};
  ens.t_max = 1.0;
  SequenceSpec seq = sequence(1.0, 2, 5.0, NoEnvironment{});
  ens.rotor = seq.rotor;
  const RotorState psi0 = build_coherent_state(seq.rotor);
  const SequenceResult a = run_sequence(seq, psi0);
  seq.environment = TrajectoryEnvironment{ens};
  const SequenceResult b = run_sequence(seq, psi0);
  CHECK(b.tau == doctest::Approx(1.0));
  for (std::size_t j = 0; j < a.p_d.size(); ++j) {
    CHECK(b.p_d[j] == doctest::Approx(a.p_d[j]).epsilon(1e-8).scale(1.0));
    CHECK(b.p_d_se[j] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("global phase of the rotor state is irrelevant and the laser phase moves the fringe") {
  SequenceSpec seq = sequence(2.0, 1, 5.0, LindbladEnvironment{1.0});
  seq.rotor.window_halfwidth = default_window_halfwidth(5.0, 1.0, 2.0, 1);
  RotorState psi0 = build_coherent_state(seq.rotor);
  const SequenceResult a = run_sequence(seq, psi0);
  for (auto& c : psi0.amplitudes) c *= std::polar(1.0, 1.234);
  const SequenceResult b = run_sequence(seq, psi0);
  for (std::size_t j = 0; j < a.p_d.size(); ++j) CHECK(a.p_d[j] == doctest::Approx(b.p_d[j]).epsilon(1e-13));

  seq.laser_phase_offset = 0.5;
  const SequenceResult c = run_sequence(seq, psi0);
  CHECK(c.contrast.contrast == doctest::Approx(a.contrast.contrast).epsilon(1e-9));

  seq.laser_phase_offset = 0.0;
  seq.contrast_factor = 0.8;
  const SequenceResult d = run_sequence(seq, psi0);
  CHECK(d.contrast.contrast == doctest::Approx(0.8 * a.contrast.contrast).epsilon(1e-9));
}

TEST_CASE("sequence validation") {
  SequenceSpec seq = sequence(1.0, 1, 5.0, NoEnvironment{});
  seq.phase_scan = uniform_phase_scan(4);
  CHECK_THROWS_AS(seq.validate(), DomainError);
  seq = sequence(1.0, 1, 5.0, NoEnvironment{});
  seq.contrast_factor = 1.5;
  CHECK_THROWS_AS(seq.validate(), DomainError);
}

TEST_CASE("contrast fit") {
  const auto phases = uniform_phase_scan(24);
  std::vector<double> p;
  for (double phi : phases) p.push_back(0.5 - 0.15 * std::cos(phi - 0.7));
  const ContrastFit exact = fit_contrast(phases, p);
  CHECK(exact.contrast == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(exact.fringe_phase == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(exact.offset == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.005);
  for (auto& x : p) x += g(rng);
  const ContrastFit noisy = fit_contrast(phases, p);
  CHECK(std::abs(noisy.contrast - 0.3) < 0.01);
  CHECK(noisy.contrast_se > 0.0);
  CHECK(noisy.contrast_se < 0.01);

  const std::vector<double> flat(24, 0.5);
  CHECK(fit_contrast(phases, flat).degenerate);

  std::vector<double> clustered, pc;
  for (int i = 0; i < 10; ++i) {
    clustered.push_back(0.2 * i);
    pc.push_back(0.5);
  }
  CHECK_THROWS_AS(fit_contrast(clustered, pc), DomainError);
  CHECK_THROWS_AS(fit_contrast(std::span(phases).first(6), std::span(p).first(6)), DomainError);
}

TEST_CASE("analytic formulas") {
  const double wr = hz_to_rad_per_ms(13.0);
  CHECK(node_time(wr, 1) == doctest::Approx(19.23).epsilon(1e-3));
  CHECK(node_time(wr, 3) == doctest::Approx(2.137).epsilon(1e-3));
  CHECK(analytic_contrast(70.0, wr, 1, 0.0) == doctest::Approx(1.0));
  // short times: 1 - sinc(x) ~ x^2 / 6, so C ~ exp(-(2/3) D omega^2 dl^2 tau^3)
  const double tau = 0.05;
  CHECK(std::log(analytic_contrast(70.0, wr, 2, tau)) ==
        doctest::Approx(-(2.0 / 3.0) * 70.0 * wr * wr * 4 * std::pow(tau, 3)).epsilon(1e-3));
  CHECK(analytic_gamma(70.0, wr, 2) == doctest::Approx(std::cbrt(wr * wr * 4 * 70.0 / 3.0)));
  CHECK(full_signal(70.0, wr, 1, 0.0) == doctest::Approx(0.0));
  CHECK(full_signal(0.0, wr, 1, node_time(wr, 1)) == doctest::Approx(0.5));
}

TEST_CASE("Bessel coupling against a power series") {
  const double g0 = 2.0, k = 3.0, r = 0.8;
  for (int dl : {0, 1, 2, 3}) {
    for (double theta : {0.3, 1.0, kPi / 2}) {
      const cplx c = bessel_coupling(g0, k, r, theta, dl);
      const cplx phase = std::pow(cplx{0.0, -1.0}, dl);
      CHECK(std::abs(c - g0 * phase * bessel_series(dl, k * r * std::sin(theta))) < 1e-12);
    }
  }
  const cplx z = bessel_coupling(1.0, 2.0, 0.5, 0.4, 1, 0.7);
  CHECK(std::arg(z / bessel_coupling(1.0, 2.0, 0.5, 0.4, 1)) == doctest::Approx(-2.0 * 0.7 * std::cos(0.4)));
  CHECK_THROWS_AS(bessel_coupling(1.0, 1.0, 1.0, 0.0, 1), DomainError);
  CHECK_THROWS_AS(bessel_coupling(1.0, 1.0, 1.0, 2.0, 1), DomainError);
}

TEST_CASE("CSV export") {
  const SequenceSpec seq = sequence(1.0, 1, 5.0, NoEnvironment{});
  const std::vector<SequenceResult> r{run_sequence(seq, build_coherent_state(seq.rotor))};
  std::ostringstream a, b;
  write_contrast_csv(a, r);
  write_phase_scan_csv(b, r[0]);
  CHECK(a.str().rfind("tau_ms,contrast,contrast_se,fringe_phase\n", 0) == 0);
  CHECK(b.str().rfind("phi_L_rad,P_D\n", 0) == 0);
}

}
