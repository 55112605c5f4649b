#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rotor/errors.hpp"
#include "rotor/lindblad.hpp"

using namespace rotor;

namespace {

// Dense Schroedinger-picture oracle: RK4 on the full matrix equation.
Eigen::MatrixXcd dense_oracle(const RotorDensity& rho0, const LindbladParams& p, double t, int steps) {
  const auto n = static_cast<Eigen::Index>(rho0.size());
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i + 2 < n; ++i) s(i + 2, i) = 1.0;
  const std::int64_t ref = p.rotor.frame == Frame::lab ? 0 : p.rotor.ell_bar;
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = static_cast<double>(rho0.window.ell(static_cast<std::size_t>(i)) - ref);
    h(i) = p.include_hamiltonian ? p.rotor.omega_r * a * a : 0.0;
  }
  auto rhs = [&](const Eigen::MatrixXcd& r) {
    Eigen::MatrixXcd out = -cplx{0, 1} * (h.asDiagonal() * r - r * h.asDiagonal());
    out += 0.25 * p.diffusion * (s * r * s.adjoint() + s.adjoint() * r * s - 2.0 * r);
    return out;
  };
  Eigen::MatrixXcd r = rho0.matrix;
  const double dt = t / steps;
  for (int k = 0; k < steps; ++k) {
    const Eigen::MatrixXcd k1 = rhs(r);
    const Eigen::MatrixXcd k2 = rhs(r + 0.5 * dt * k1);
    const Eigen::MatrixXcd k3 = rhs(r + 0.5 * dt * k2);
    const Eigen::MatrixXcd k4 = rhs(r + dt * k3);
    r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return r;
}

RotorDensity random_pure(const LadderWindow& w, std::int64_t lo, std::int64_t hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  RotorState s{w, std::vector<cplx>(w.size())};
  for (std::int64_t l = lo; l <= hi; ++l) s.amplitudes[w.index(l)] = {g(rng), g(rng)};
  const double n = std::sqrt(s.norm_squared());
  for (auto& c : s.amplitudes) c /= n;
  return RotorDensity::from_state(s);
}

double second_moment_rate(const RotorDensity& rate) {
  double s = 0.0;
  for (std::size_t i = 0; i < rate.size(); ++i) {
    const double l = static_cast<double>(rate.window.ell(i));
    s += l * l * rate.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
  }
  return s;
}

}  // namespace

TEST_SUITE("lindblad") {

TEST_CASE("dissipator of a maximally mixed state vanishes in the interior") {
  const LadderWindow w{-10, 10};
  RotorDensity rho{w, Eigen::MatrixXcd::Identity(21, 21) / 21.0};
  const RotorDensity rate = dissipator_apply(rho, 5.0);
  for (Eigen::Index i = 2; i < 19; ++i) CHECK(std::abs(rate.matrix(i, i)) < 1e-15);
}

TEST_CASE("dissipator on a number state gives d<L^2>/dt = 2D") {
  const LadderWindow w{-10, 10};
  const RotorDensity rho = RotorDensity::from_state(RotorState::delta(w, 3));
  const RotorDensity rate = dissipator_apply(rho, 70.0);
  CHECK(second_moment_rate(rate) == doctest::Approx(140.0));
}

TEST_CASE("dissipator rate is Hermitian and traceless for interior support") {
  const LadderWindow w{-10, 10};
  const RotorDensity rho = random_pure(w, -5, 5, 1);
  const RotorDensity rate = dissipator_apply(rho, 3.0);
  CHECK((rate.matrix - rate.matrix.adjoint()).norm() < 1e-14);
  CHECK(std::abs(rate.trace()) < 1e-14);
}

TEST_CASE("RK4 per k-diagonal agrees with a dense oracle") {
  for (Frame f : {Frame::lab, Frame::corotating}) {
    LindbladParams p;
    p.diffusion = 3.0;
    p.rotor.ell_bar = 40;
    p.rotor.window_halfwidth = 20;
    p.rotor.frame = f;
    p.dt = 2e-3;
    const auto w = p.rotor.window();
    const RotorDensity rho0 = random_pure(w, 36, 44, 9);
    const std::vector<double> times{0.5};
    const auto out = evolve(rho0, p, times, 1);
    const Eigen::MatrixXcd ref = dense_oracle(rho0, p, 0.5, 20000);
    CHECK((out.back().rho.matrix - ref).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("unitary limit: populations fixed, coherences pick up exact phases") {
  LindbladParams p;
  p.diffusion = 0.0;
  p.rotor.ell_bar = 5538;
  p.rotor.window_halfwidth = 6;
  p.rotor.frame = Frame::lab;
  p.dt = 0.01;
  const auto w = p.rotor.window();
  const RotorDensity rho0 = random_pure(w, 5534, 5542, 4);
  const double t = 0.7;
  const std::vector<double> times{t};
  const RotorDensity rho = evolve(rho0, p, times, 1).back().rho;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double l = static_cast<double>(w.ell(i)), m = static_cast<double>(w.ell(j));
      const cplx expect = rho0.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                          std::polar(1.0, -p.rotor.omega_r * (l * l - m * m) * t);
      CHECK(std::abs(rho.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - expect) < 1e-9);
    }
  }
}

TEST_CASE("k-diagonals never mix") {
  LindbladParams p;
  p.diffusion = 10.0;
  p.rotor.window_halfwidth = 30;
  p.dt = 1e-3;
  const auto w = p.rotor.window();
  RotorState s{w, std::vector<cplx>(w.size())};
  s.amplitudes[w.index(0)] = std::sqrt(0.5);
  s.amplitudes[w.index(3)] = cplx{0.0, std::sqrt(0.5)};
  const std::vector<double> times{0.2};
  const RotorDensity rho = evolve(RotorDensity::from_state(s), p, times, 1).back().rho;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      const auto k = static_cast<std::int64_t>(i) - static_cast<std::int64_t>(j);
      if (k != 0 && std::abs(k) != 3) {
        CHECK(rho.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == cplx{});
      }
    }
  }
}

TEST_CASE("variance law for a broad coherent state") {
  LindbladParams p;
  p.diffusion = 70.0;
  p.rotor.ell_bar = 5538;
  p.rotor.sigma_ell = 20;
  p.rotor.window_halfwidth = default_window_halfwidth(20, 70, 1.0);
  p.dt = 5e-4;
  const RotorDensity rho0 = RotorDensity::from_state(build_coherent_state(p.rotor));
  const std::vector<double> times{0.0, 0.5, 1.0};
  const auto out = evolve(rho0, p, times);
  const Moments m = moments(out.back().rho);
  CHECK(m.variance == doctest::Approx(540.0).epsilon(5e-3));
  CHECK(std::abs(m.mean - 5538.0) < 1e-9);
  CHECK(out.back().leakage < 1e-6);

  // the population-only path gives the same moments
  const auto fast = evolve_moments(rho0, p, times);
  CHECK(fast.back().variance == doctest::Approx(m.variance).epsilon(1e-12));
  CHECK(fast.back().mean == doctest::Approx(m.mean).epsilon(1e-15));
}

TEST_CASE("results do not depend on the thread count") {
  LindbladParams p;
  p.diffusion = 20.0;
  p.rotor.ell_bar = 300;
  p.rotor.sigma_ell = 3;
  p.rotor.window_halfwidth = 40;
  p.dt = 1e-3;
  const RotorDensity rho0 = RotorDensity::from_state(build_coherent_state(p.rotor));
  const std::vector<double> times{0.3};
  const auto a = evolve(rho0, p, times, 1);
  const auto b = evolve(rho0, p, times, 3);
  CHECK(a.back().rho.matrix == b.back().rho.matrix);
}

TEST_CASE("trace, Hermiticity and positivity survive a long run") {
  LindbladParams p;
  p.diffusion = 50.0;
  p.rotor.ell_bar = 100;
  p.rotor.sigma_ell = 2;
  p.rotor.window_halfwidth = default_window_halfwidth(2, 50, 1.0);
  p.dt = 1e-3;
  const RotorDensity rho0 = RotorDensity::from_state(build_coherent_state(p.rotor));
  const std::vector<double> times{0.25, 0.5, 0.75, 1.0};
  const auto out = evolve(rho0, p, times);
  for (const auto& s : out) {
    CHECK(std::abs(s.rho.trace().real() + s.leakage - 1.0) < 1e-10);
    CHECK((s.rho.matrix - s.rho.matrix.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s.rho.matrix, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() > -1e-8);
  }
}

TEST_CASE("leakage and step-size failures") {
  LindbladParams p;
  p.diffusion = 70.0;
  p.rotor.window_halfwidth = 6;
  p.dt = 5e-4;
  const RotorDensity rho0 = RotorDensity::from_state(build_coherent_state(p.rotor));
  const std::vector<double> times{1.0};
  CHECK_THROWS_AS(evolve(rho0, p, times), TruncationError);
  CHECK_THROWS_AS(evolve_moments(rho0, p, times), TruncationError);
  p.dt = 1e-2;
  CHECK_THROWS_AS(evolve(rho0, p, times), DomainError);
}

TEST_CASE("leakage accounting matches the lost trace") {
  LindbladParams p;
  p.diffusion = 10.0;
  p.rotor.window_halfwidth = 6;
  p.dt = 1e-3;
  const auto w = p.rotor.window();
  const std::vector<double> pop = [&] {
    std::vector<double> v(w.size(), 0.0);
    v[w.index(5)] = 1.0;
    return v;
  }();
  // run the k = 0 diagonal by hand to see the flux without the budget check
  std::vector<cplx> x(pop.begin(), pop.end());
  const double leaked = propagate_diagonal(x, 0, w.ell_min, DiagonalDynamics::from(p), 0.05, 50);
  double tr = 0.0;
  for (const auto& c : x) tr += c.real();
  CHECK(leaked > 1e-3);
  CHECK(tr + leaked == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("angle decay law examples") {
  const LadderWindow w{-60, 60};
  RotorState s{w, std::vector<cplx>(w.size())};
  for (std::int64_t l = 0; l <= 40; ++l) s.amplitudes[w.index(l)] = std::pow(0.5, static_cast<double>(l));
  const double n = std::sqrt(s.norm_squared());
  for (auto& c : s.amplitudes) c /= n;
  const RotorDensity rho0 = RotorDensity::from_state(s);
  const std::vector<std::pair<double, double>> pairs{{0.4, 0.4}, {0.3, 0.3 + kPi}, {kPi / 2, 0.0}};
  const auto rows = angle_decay_check(rho0, 1.0, 1.0, pairs);
  CHECK(rows[0].measured == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rows[1].measured == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rows[2].measured == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
  for (const auto& r : rows) CHECK(r.relative_error < 1e-6);
  std::ostringstream os;
  write_angle_decay_csv(os, rows);
  CHECK(os.str().rfind("phi_rad,phi_prime_rad,measured,analytic,relative_error\n", 0) == 0);
}

TEST_CASE("moment CSV") {
  std::ostringstream os;
  const std::vector<MomentSample> s{{0.0, 1.0, 2.0, 0.0}};
  write_moment_csv(os, s);
  CHECK(os.str() == "t_ms,mean_Lz,var_Lz,leakage\n0,1,2,0\n");
}

}
