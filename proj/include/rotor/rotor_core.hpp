#pragma once

// Planar rotor on a truncated angular-momentum ladder.
//
// The ladder window always stores absolute quantum numbers ell; the frame
// only selects which free-evolution phases are used. In the corotating
// frame the phases are built from m = ell - ell_bar, which removes the
// rigid rotation at omega_rot = 2 omega_r ell_bar.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "rotor/errors.hpp"
#include "rotor/units.hpp"

namespace rotor {

enum class Frame { lab, corotating };

struct LadderWindow {
  std::int64_t ell_min = 0;
  std::int64_t ell_max = 0;  // inclusive

  std::size_t size() const { return static_cast<std::size_t>(ell_max - ell_min + 1); }
  std::int64_t ell(std::size_t i) const { return ell_min + static_cast<std::int64_t>(i); }
  std::size_t index(std::int64_t ell) const { return static_cast<std::size_t>(ell - ell_min); }
  bool contains(std::int64_t ell) const { return ell >= ell_min && ell <= ell_max; }

  static LadderWindow centered(std::int64_t center, std::int64_t halfwidth) {
    return {center - halfwidth, center + halfwidth};
  }
  bool operator==(const LadderWindow&) const = default;
};

struct RotorParams {
  double omega_r = hz_to_rad_per_ms(13.0);  // rad/ms
  std::int64_t ell_bar = 0;
  double sigma_ell = 1.0;
  std::int64_t window_halfwidth = 6;
  double kappa = 1.0;  // V = kappa (eps L+^2 + eps* L-^2)
  Frame frame = Frame::corotating;

  double omega_rot() const { return 2.0 * omega_r * static_cast<double>(ell_bar); }
  LadderWindow window() const { return LadderWindow::centered(ell_bar, window_halfwidth); }

  /// Throws DomainError on a hard invariant violation. Returns true when the
  /// advisory ell_bar >> sigma_ell condition does not hold.
  bool validate() const;
};

/// W = ceil(c sqrt(sigma0^2 + 2 D t_max)) + 2 delta_ell_max with coverage c.
/// Single noise trajectories wander further than the ensemble spread, so
/// kTrajectoryCoverage is used for them.
std::int64_t default_window_halfwidth(double sigma0, double diffusion, double t_max,
                                      int delta_ell_max = 0, double coverage = 6.0);
inline constexpr double kTrajectoryCoverage = 8.0;

struct RotorState {
  LadderWindow window;
  std::vector<cplx> amplitudes;

  double norm_squared() const;
  cplx amplitude_at(std::int64_t ell) const {
    return window.contains(ell) ? amplitudes[window.index(ell)] : cplx{};
  }
  static RotorState delta(const LadderWindow& w, std::int64_t ell);
};

struct RotorDensity {
  LadderWindow window;
  Eigen::MatrixXcd matrix;

  std::size_t size() const { return window.size(); }
  cplx trace() const { return matrix.trace(); }

  static RotorDensity from_state(const RotorState& psi);
  /// Hermitian to 1e-12, unit trace to 1e-10, eigenvalues >= -psd_floor.
  void validate(double psd_floor = 1e-10) const;
};

struct Moments {
  double mean = 0.0;      // <L_z> / hbar
  double variance = 0.0;  // Var(L_z) / hbar^2
};

// Gaussian amplitudes exp(-(ell - ell_bar)^2 / 4 sigma^2) with flat phase.
RotorState build_coherent_state(const RotorParams& params);

struct LadderShift {
  RotorState state;
  double retained_norm = 1.0;  // norm^2 of the content kept inside the window
};

/// Applies L+^power (power < 0 means L-^|power|). Throws TruncationError when
/// more than `leak_tolerance` of the probability would leave the window.
LadderShift apply_ladder(const RotorState& state, std::int64_t power,
                         double leak_tolerance = 1e-6);

/// Diagonal of exp(-i H0 t) over the window in the params' frame.
std::vector<cplx> free_evolution_phases(const RotorParams& params, double t);

/// Phase exponent omega_r t (f(ell) - f(ell')) with f = ell^2 (lab) or
/// (ell - ell_bar)^2 (corotating), computed from exact integer differences.
double free_phase_angle(const RotorParams& params, std::int64_t ell, std::int64_t ell_prime,
                        double t);

/// Moments of the normalized in-window population distribution.
Moments moments(const RotorDensity& rho);
Moments moments(const RotorState& psi);
Moments population_moments(const LadderWindow& window, std::span<const double> populations);

/// <phi| rho |phi'> with <phi|ell> = exp(i ell phi) / sqrt(2 pi).
cplx angle_coherence(const RotorDensity& rho, double phi, double phi_prime);

/// Fractional reduction 2 omega_rot^2 / omega_x^2 of omega_r from centrifugal
/// stretching. Throws DomainError unless 0 <= omega_rot < omega_x.
double centrifugal_correction(double omega_rot, double omega_x);

}  // namespace rotor
