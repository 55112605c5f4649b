#include "rotor/rotor_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rotor {

bool RotorParams::validate() const {
  if (!(omega_r > 0.0)) throw DomainError("omega_r must be positive");
  if (!(sigma_ell >= 1.0)) throw DomainError("sigma_ell must be >= 1");
  const auto min_w = static_cast<std::int64_t>(std::ceil(6.0 * sigma_ell));
  if (window_halfwidth < min_w) {
    throw DomainError("window halfwidth " + std::to_string(window_halfwidth) +
                      " is below ceil(6 sigma_ell) = " + std::to_string(min_w));
  }
  return static_cast<double>(ell_bar) < 10.0 * sigma_ell;
}

std::int64_t default_window_halfwidth(double sigma0, double diffusion, double t_max,
                                      int delta_ell_max, double coverage) {
  const double spread = std::sqrt(sigma0 * sigma0 + 2.0 * std::max(diffusion, 0.0) * t_max);
  return static_cast<std::int64_t>(std::ceil(coverage * spread)) + 2 * delta_ell_max;
}

double RotorState::norm_squared() const {
  double s = 0.0;
  for (const auto& c : amplitudes) s += std::norm(c);
  return s;
}

RotorState RotorState::delta(const LadderWindow& w, std::int64_t ell) {
  if (!w.contains(ell)) throw TruncationError("delta state outside window");
  RotorState s{w, std::vector<cplx>(w.size())};
  s.amplitudes[w.index(ell)] = 1.0;
  return s;
}

RotorDensity RotorDensity::from_state(const RotorState& psi) {
  const auto n = static_cast<Eigen::Index>(psi.amplitudes.size());
  Eigen::Map<const Eigen::VectorXcd> v(psi.amplitudes.data(), n);
  return {psi.window, v * v.adjoint()};
}

void RotorDensity::validate(double psd_floor) const {
  const auto n = static_cast<Eigen::Index>(size());
  if (matrix.rows() != n || matrix.cols() != n) throw DomainError("density shape mismatch");
  const double herm = (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-12) throw DomainError("density is not Hermitian");
  if (std::abs(trace() - 1.0) > 1e-10) throw DomainError("density trace differs from 1");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(matrix, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -psd_floor) throw DomainError("density is not PSD");
}

RotorState build_coherent_state(const RotorParams& params) {
  const auto need = static_cast<std::int64_t>(std::ceil(6.0 * params.sigma_ell));
  if (params.window_halfwidth < need) {
    throw TruncationError("window does not contain +-6 sigma_ell around ell_bar");
  }
  const LadderWindow w = params.window();
  RotorState s{w, std::vector<cplx>(w.size())};
  const double inv4s2 = 1.0 / (4.0 * params.sigma_ell * params.sigma_ell);
  double norm = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double m = static_cast<double>(w.ell(i) - params.ell_bar);
    const double a = std::exp(-m * m * inv4s2);
    s.amplitudes[i] = a;
    norm += a * a;
  }
  const double scale = 1.0 / std::sqrt(norm);
  for (auto& c : s.amplitudes) c *= scale;
  return s;
}

LadderShift apply_ladder(const RotorState& state, std::int64_t power, double leak_tolerance) {
  const auto n = static_cast<std::int64_t>(state.amplitudes.size());
  LadderShift out{{state.window, std::vector<cplx>(state.amplitudes.size())}, 0.0};
  double lost = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t j = i + power;
    const auto& c = state.amplitudes[static_cast<std::size_t>(i)];
    if (j < 0 || j >= n) {
      lost += std::norm(c);
    } else {
      out.state.amplitudes[static_cast<std::size_t>(j)] = c;
      out.retained_norm += std::norm(c);
    }
  }
  if (lost > leak_tolerance) {
    throw TruncationError("ladder shift by " + std::to_string(power) +
                          " pushes probability " + std::to_string(lost) + " out of the window");
  }
  return out;
}

double free_phase_angle(const RotorParams& params, std::int64_t ell, std::int64_t ell_prime,
                        double t) {
  const std::int64_t ref = params.frame == Frame::lab ? 0 : params.ell_bar;
  const std::int64_t a = ell - ref;
  const std::int64_t b = ell_prime - ref;
  // a^2 - b^2 = (a - b)(a + b), exact in 64-bit for any realistic window.
  const std::int64_t diff = (a - b) * (a + b);
  return params.omega_r * t * static_cast<double>(diff);
}

std::vector<cplx> free_evolution_phases(const RotorParams& params, double t) {
  const LadderWindow w = params.window();
  const std::int64_t ref = params.frame == Frame::lab ? 0 : params.ell_bar;
  std::vector<cplx> ph(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::int64_t a = w.ell(i) - ref;
    const double angle = std::fmod(params.omega_r * t * static_cast<double>(a * a), kTwoPi);
    ph[i] = std::polar(1.0, -angle);
  }
  return ph;
}

Moments population_moments(const LadderWindow& window, std::span<const double> populations) {
  // Accumulate relative to the window center to avoid cancellation at large ell.
  const std::int64_t center = (window.ell_min + window.ell_max) / 2;
  double total = 0.0, s1 = 0.0;
  for (std::size_t i = 0; i < populations.size(); ++i) {
    const double m = static_cast<double>(window.ell(i) - center);
    total += populations[i];
    s1 += m * populations[i];
  }
  if (!(total > 0.0)) return {static_cast<double>(center), 0.0};
  const double mean_rel = s1 / total;
  double s2 = 0.0;
  for (std::size_t i = 0; i < populations.size(); ++i) {
    const double d = static_cast<double>(window.ell(i) - center) - mean_rel;
    s2 += d * d * populations[i];
  }
  return {static_cast<double>(center) + mean_rel, s2 / total};
}

Moments moments(const RotorDensity& rho) {
  std::vector<double> pop(rho.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    pop[i] = rho.matrix(k, k).real();
  }
  return population_moments(rho.window, pop);
}

Moments moments(const RotorState& psi) {
  std::vector<double> pop(psi.amplitudes.size());
  std::transform(psi.amplitudes.begin(), psi.amplitudes.end(), pop.begin(),
                 [](const cplx& c) { return std::norm(c); });
  return population_moments(psi.window, pop);
}

cplx angle_coherence(const RotorDensity& rho, double phi, double phi_prime) {
  const auto n = static_cast<Eigen::Index>(rho.size());
  // Phases relative to ell_min keep the exponentials well conditioned; the
  // common factor exp(i ell_min (phi - phi')) is restored at the end.
  Eigen::VectorXcd left(n), right(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double j = static_cast<double>(i);
    left(i) = std::polar(1.0, j * phi);
    right(i) = std::polar(1.0, -j * phi_prime);
  }
  const cplx inner = left.transpose() * rho.matrix * right;
  const double base = std::fmod(static_cast<double>(rho.window.ell_min) * (phi - phi_prime), kTwoPi);
  return std::polar(1.0, base) * inner / kTwoPi;
}

double centrifugal_correction(double omega_rot, double omega_x) {
  if (!(omega_x > 0.0) || omega_rot < 0.0 || omega_rot >= omega_x) {
    throw DomainError("centrifugal correction requires 0 <= omega_rot < omega_x");
  }
  const double ratio = omega_rot / omega_x;
  return 2.0 * ratio * ratio;
}

}  // namespace rotor
