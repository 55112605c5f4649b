#include <doctest.h>

#include <cmath>
#include <random>

#include "rotor/rotor_core.hpp"

using namespace rotor;

TEST_SUITE("rotor_core") {

TEST_CASE("window bookkeeping") {
  const auto w = LadderWindow::centered(100, 5);
  CHECK(w.size() == 11);
  CHECK(w.ell(0) == 95);
  CHECK(w.index(100) == 5);
  CHECK(w.contains(105));
  CHECK_FALSE(w.contains(106));
}

TEST_CASE("params validation") {
  RotorParams p;
  p.ell_bar = 5538;
  p.sigma_ell = 20;
  p.window_halfwidth = 119;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p.window_halfwidth = 120;
  CHECK_FALSE(p.validate());
  p.ell_bar = 100;
  CHECK(p.validate());  // advisory: ell_bar < 10 sigma
  p.sigma_ell = 0.5;
  CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("default window covers the diffused spread") {
  CHECK(default_window_halfwidth(20, 70, 1.0) == static_cast<std::int64_t>(std::ceil(6 * std::sqrt(540.0))));
  CHECK(default_window_halfwidth(1, 0, 1.0, 3) == 6 + 6);
  CHECK(default_window_halfwidth(1, 0, 1.0, 0, 8.0) == 8);
}

TEST_CASE("coherent state") {
  RotorParams p;
  p.ell_bar = 5538;
  p.sigma_ell = 20;
  p.window_halfwidth = 150;
  const RotorState s = build_coherent_state(p);
  CHECK(s.norm_squared() == doctest::Approx(1.0).epsilon(1e-14));
  const Moments m = moments(s);
  CHECK(m.mean == doctest::Approx(5538.0).epsilon(1e-13));
  CHECK(m.variance == doctest::Approx(400.0).epsilon(1e-10));

  p.window_halfwidth = 100;
  CHECK_THROWS_AS(build_coherent_state(p), TruncationError);
}

TEST_CASE("ladder shifts") {
  const auto w = LadderWindow::centered(0, 4);
  const RotorState d = RotorState::delta(w, 1);
  const LadderShift up = apply_ladder(d, 2);
  CHECK(std::abs(up.state.amplitude_at(3) - cplx{1.0}) < 1e-15);
  CHECK(up.retained_norm == doctest::Approx(1.0));
  CHECK_THROWS_AS(apply_ladder(d, 4), TruncationError);
  const LadderShift down = apply_ladder(d, -5);
  CHECK(std::abs(down.state.amplitude_at(-4) - cplx{1.0}) < 1e-15);
}

TEST_CASE("free phases in both frames") {
  RotorParams p;
  p.ell_bar = 5538;
  p.window_halfwidth = 6;
  p.frame = Frame::lab;
  CHECK(free_phase_angle(p, 5540, 5538, 1.0) ==
        doctest::Approx(p.omega_r * (5540.0 * 5540.0 - 5538.0 * 5538.0)));
  p.frame = Frame::corotating;
  CHECK(free_phase_angle(p, 5540, 5538, 1.0) == doctest::Approx(4.0 * p.omega_r));

  // In either frame the phase of exp(-i H0 t) on ell is omega_r f(ell) t.
  const auto ph = free_evolution_phases(p, 0.3);
  const auto w = p.window();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double m = static_cast<double>(w.ell(i) - p.ell_bar);
    CHECK(std::abs(ph[i] - std::polar(1.0, -p.omega_r * m * m * 0.3)) < 1e-12);
  }
}

TEST_CASE("moments of a population list") {
  const LadderWindow w{10, 14};
  const std::vector<double> pop{0.0, 0.5, 0.0, 0.5, 0.0};
  const Moments m = population_moments(w, pop);
  CHECK(m.mean == doctest::Approx(12.0));
  CHECK(m.variance == doctest::Approx(1.0));
}

TEST_CASE("angle coherence against a direct double sum") {
  const LadderWindow w{-3, 4};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  RotorState s{w, std::vector<cplx>(w.size())};
  for (auto& c : s.amplitudes) c = {g(rng), g(rng)};
  const double n = std::sqrt(s.norm_squared());
  for (auto& c : s.amplitudes) c /= n;
  const RotorDensity rho = RotorDensity::from_state(s);

  for (const auto& [phi, phi2] : std::vector<std::pair<double, double>>{{0.3, -1.1}, {2.0, 2.5}, {-0.7, 3.0}}) {
    cplx direct{};
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (std::size_t j = 0; j < w.size(); ++j) {
        direct += std::polar(1.0, static_cast<double>(w.ell(i)) * phi) *
                  rho.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                  std::polar(1.0, -static_cast<double>(w.ell(j)) * phi2);
      }
    }
    direct /= kTwoPi;
    CHECK(std::abs(angle_coherence(rho, phi, phi2) - direct) < 1e-14);
    // Hermiticity in the angle basis
    CHECK(std::abs(std::conj(angle_coherence(rho, phi, phi2)) - angle_coherence(rho, phi2, phi)) < 1e-14);
  }

  const RotorDensity eig = RotorDensity::from_state(RotorState::delta(w, 2));
  CHECK(std::abs(angle_coherence(eig, 0.4, 1.9)) == doctest::Approx(1.0 / kTwoPi));
}

TEST_CASE("density validation") {
  const auto w = LadderWindow::centered(0, 3);
  RotorDensity rho = RotorDensity::from_state(RotorState::delta(w, 1));
  CHECK_NOTHROW(rho.validate());
  rho.matrix(0, 1) = 0.1;
  CHECK_THROWS_AS(rho.validate(), DomainError);
}

TEST_CASE("centrifugal correction") {
  CHECK(centrifugal_correction(144.0, 1440.0) == doctest::Approx(2.0e-2).epsilon(1e-15));
  CHECK(centrifugal_correction(0.0, 1.0) == 0.0);
  CHECK_THROWS_AS(centrifugal_correction(2.0, 1.0), DomainError);
}

}
