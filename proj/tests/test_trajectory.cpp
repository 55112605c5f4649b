#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rotor/errors.hpp"
#include "rotor/trajectory.hpp"

using namespace rotor;

namespace {

EnsembleSpec base_spec(double diffusion, double t_max, std::size_t n) {
  EnsembleSpec s;
  s.n_traj = n;
  s.rotor.ell_bar = 5538;
  s.rotor.sigma_ell = 1.0;
  s.rotor.window_halfwidth = default_window_halfwidth(1.0, diffusion, t_max, 0, kTrajectoryCoverage);
  s.noise.amplitude = TargetDiffusion{diffusion, s.rotor.omega_rot(), s.rotor.kappa};
  s.t_max = t_max;
  s.master_seed = 11;
  for (int k = 0; k <= 10; ++k) s.record_times.push_back(t_max * k / 10.0);
  return s;
}

}  // namespace

TEST_SUITE("trajectory") {

TEST_CASE("zero field reproduces free evolution") {
  RotorParams p;
  p.ell_bar = 5538;
  p.sigma_ell = 3;
  p.window_halfwidth = 30;
  const RotorState psi0 = build_coherent_state(p);
  const std::size_t steps = 2000;
  const std::vector<cplx> field(steps + 1);
  const std::vector<std::size_t> rec{steps};
  for (Frame f : {Frame::lab, Frame::corotating}) {
    p.frame = f;
    const auto r = run_trajectory(psi0, field, p, 1e-4, rec);
    const auto ph = free_evolution_phases(p, 0.2);
    for (std::size_t i = 0; i < ph.size(); ++i) {
      CHECK(std::abs(r.states[0].amplitudes[i] - ph[i] * psi0.amplitudes[i]) < 1e-10);
    }
  }
}

TEST_CASE("static drive on a clamped two-level pair matches the exact exponential") {
  RotorParams p;
  p.ell_bar = 0;
  p.frame = Frame::lab;
  const LadderWindow w{0, 2};
  const double dt = 1e-4, t = 1.0;
  const cplx eps{4.0, -2.5};
  SplitStepPropagator prop(p, w, dt);
  std::vector<cplx> psi{1.0, 0.0, 0.0};
  for (int k = 0; k < 10000; ++k) prop.step(psi, eps);

  Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
  for (int i = 0; i < 3; ++i) h(i, i) = p.omega_r * i * i;
  h(2, 0) = p.kappa * eps;
  h(0, 2) = p.kappa * std::conj(eps);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(h);
  const Eigen::Vector3cd phase = (es.eigenvalues().cast<cplx>() * cplx{0.0, -t}).array().exp();
  const Eigen::Vector3cd exact = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint() *
                                 Eigen::Vector3cd(1.0, 0.0, 0.0);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(psi[static_cast<std::size_t>(i)] - exact(i)) < 1e-4);
}

TEST_CASE("norm is conserved on a long noisy run") {
  EnsembleSpec s = base_spec(70.0, 3.0, 1);
  const RotorState psi0 = build_coherent_state(s.rotor);
  const auto field = frame_field(s, 0);
  const std::vector<std::size_t> rec{30000};
  const auto r = run_trajectory(psi0, field, s.rotor, s.dt, rec);
  CHECK(r.max_norm_drift < 1e-8);
  CHECK(r.max_edge_population < kEdgeTolerance);
}

TEST_CASE("results do not depend on the thread count") {
  EnsembleSpec s = base_spec(70.0, 0.2, 20);
  const RotorState psi0 = build_coherent_state(s.rotor);
  const auto a = ensemble_moments(s, psi0, 1);
  const auto b = ensemble_moments(s, psi0, 3);
  CHECK(a.var == b.var);
  CHECK(a.mean == b.mean);
  const auto da = ensemble_density(s, psi0, 1);
  const auto db = ensemble_density(s, psi0, 3);
  CHECK(da.mean.back().matrix == db.mean.back().matrix);
}

TEST_CASE("a single trajectory gives a pure state") {
  EnsembleSpec s = base_spec(70.0, 0.2, 1);
  const RotorState psi0 = build_coherent_state(s.rotor);
  const auto d = ensemble_density(s, psi0, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d.mean.back().matrix, Eigen::EigenvaluesOnly);
  const auto ev = es.eigenvalues();
  CHECK(ev(ev.size() - 1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(ev.head(ev.size() - 1).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(d.standard_error.back().maxCoeff() == 0.0);
}

TEST_CASE("switching the noise off freezes the populations") {
  EnsembleSpec s = base_spec(0.0, 0.2, 4);
  s.noise.amplitude = DriveSigma{0.0};
  s.rotor.sigma_ell = 3.0;
  s.rotor.window_halfwidth = 30;
  const RotorState psi0 = build_coherent_state(s.rotor);
  const auto m = ensemble_moments(s, psi0, 1);
  for (double v : m.var) CHECK(v == doctest::Approx(9.0).epsilon(1e-10));
  for (double x : m.mean) CHECK(x == doctest::Approx(5538.0).epsilon(1e-14));
}

TEST_CASE("variance grows at 2D for a resonant drive") {
  EnsembleSpec s = base_spec(70.0, 0.5, 200);
  const RotorState psi0 = build_coherent_state(s.rotor);
  const auto m = ensemble_moments(s, psi0);
  const auto e = variance_slope(m, 0.1);
  CHECK(e.slope_se > 0.0);
  CHECK(std::abs(e.slope - 140.0) < 4.0 * e.slope_se + 0.1 * 140.0);
  CHECK(e.slope_se < 0.3 * e.slope);
  std::ostringstream os;
  write_ensemble_csv(os, m);
  CHECK(os.str().rfind("t_ms,var_Lz,var_Lz_se,mean_Lz\n", 0) == 0);
}

TEST_CASE("white ambient floor diffuses at its own rate") {
  EnsembleSpec s = base_spec(20.0, 0.5, 150);
  s.noise.amplitude = DriveSigma{0.0};
  s.ambient_diffusion = 20.0;
  const RotorState psi0 = build_coherent_state(s.rotor);
  const auto m = ensemble_moments(s, psi0);
  const auto e = variance_slope(m, 0.0);
  CHECK(std::abs(0.5 * e.slope - 20.0) < 4.0 * 0.5 * e.slope_se + 2.0);
}

TEST_CASE("resonance scan peaks at twice the rotation frequency") {
  EnsembleSpec s = base_spec(70.0, 0.3, 40);
  const RotorState psi0 = build_coherent_state(s.rotor);
  const std::vector<double> centers{240.0, 288.0, 336.0};
  const auto scan = resonance_scan(s, psi0, centers, 0.05);
  REQUIRE(scan.size() == 3);
  CHECK(scan[1].diffusion > 3.0 * scan[0].diffusion);
  CHECK(scan[1].diffusion > 3.0 * scan[2].diffusion);
  std::ostringstream os;
  write_scan_csv(os, scan);
  CHECK(os.str().rfind("fc_kHz,D_fit,D_se\n", 0) == 0);
}

TEST_CASE("configuration and truncation failures") {
  EnsembleSpec s = base_spec(70.0, 0.5, 2);
  s.dt = 2e-4;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = base_spec(70.0, 0.5, 2);
  s.n_traj = 0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = base_spec(70.0, 0.5, 2);
  s.rotor.frame = Frame::lab;
  s.rotor.ell_bar = 20000;
  CHECK_THROWS_AS(s.validate(), DomainError);  // 2 omega_rot not resolved at 1e-4 ms
  s = base_spec(70.0, 0.5, 2);
  s.rotor.window_halfwidth = 6;
  const RotorState psi0 = build_coherent_state(s.rotor);
  CHECK_THROWS_AS(ensemble_moments(s, psi0, 1), TruncationError);
}

}
