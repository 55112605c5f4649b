#pragma once

// Master equation  d rho/dt = -i[H0, rho] + (D/4)(L-^2 rho L+^2 + L+^2 rho L-^2 - 2 rho)
// on a truncated ladder window.
//
// Both terms preserve the coherence order k = ell - ell', so every
// k-diagonal evolves on its own. Each diagonal is integrated with fixed-step
// RK4 in the interaction picture of H0, where the dissipator picks up the
// ell-independent phases exp(+-4 i omega_r k t); the free phases are then
// applied exactly. Entries outside the window are treated as zero
// (absorbing boundary) and the probability that flows out is tracked.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rotor/rotor_core.hpp"

namespace rotor {

struct LindbladParams {
  double diffusion = 0.0;  // D in hbar^2/ms
  RotorParams rotor;
  double dt = 1e-3;  // ms
  double t_max = 1.0;
  bool include_hamiltonian = true;

  /// Largest dt with dt D <= 0.05 and dt 4 omega_r k_max <= 0.1.
  double max_stable_dt(std::int64_t k_max) const;
  void validate(std::int64_t k_max) const;
};

inline constexpr double kLeakageBudget = 1e-6;
inline constexpr double kTraceTolerance = 1e-8;

/// Dynamics shared by every diagonal of one run.
struct DiagonalDynamics {
  double diffusion = 0.0;
  double omega_r = 0.0;
  bool include_hamiltonian = true;
  std::int64_t phase_reference = 0;  // 0 in the lab frame, ell_bar when corotating

  static DiagonalDynamics from(const LindbladParams& p);
};

/// Advances the entries rho(ell, ell - k), ell = first_row + j, by `duration`
/// using `steps` RK4 steps. Values are in the Schroedinger picture of the
/// chosen frame on entry and exit. Returns the probability that left the
/// window (the real part is meaningful for k = 0).
double propagate_diagonal(std::span<cplx> values, std::int64_t k, std::int64_t first_row,
                          const DiagonalDynamics& dyn, double duration, std::size_t steps);

/// Storage of a density by coherence order.
class KDiagonalStore {
 public:
  KDiagonalStore() = default;
  explicit KDiagonalStore(const LadderWindow& window);
  static KDiagonalStore from_density(const RotorDensity& rho);

  RotorDensity to_density() const;
  const LadderWindow& window() const { return window_; }
  std::int64_t max_order() const { return static_cast<std::int64_t>(window_.size()) - 1; }

  std::span<cplx> diagonal(std::int64_t k);
  std::span<const cplx> diagonal(std::int64_t k) const;
  /// Row ell of the first stored entry on diagonal k.
  std::int64_t first_row(std::int64_t k) const { return window_.ell_min + (k > 0 ? k : 0); }

  double trace() const;
  /// max |rho(ell, ell') - conj(rho(ell', ell))|
  double hermiticity_defect() const;

 private:
  LadderWindow window_;
  std::vector<std::vector<cplx>> diagonals_;  // index k + max_order
};

/// Elementwise generator (D/4)(rho[l-2,l'-2] + rho[l+2,l'+2] - 2 rho[l,l']).
/// The result is a traceless Hermitian matrix, stored in a RotorDensity shell.
RotorDensity dissipator_apply(const RotorDensity& rho, double diffusion);

struct DensitySample {
  double t = 0.0;
  RotorDensity rho;
  double leakage = 0.0;
};

/// Full-density evolution, recorded at each time in record_times (ascending,
/// starting at or after 0). Hermiticity and trace are checked every 100
/// steps, positivity at each record. Diagonals are processed in parallel;
/// the result does not depend on the thread count.
std::vector<DensitySample> evolve(const RotorDensity& rho0, const LindbladParams& params,
                                  std::span<const double> record_times, unsigned threads = 0);

struct MomentSample {
  double t = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double leakage = 0.0;
};

/// Population (k = 0) evolution only; enough for <L_z> and Var(L_z).
std::vector<MomentSample> evolve_moments(const LadderWindow& window,
                                         std::span<const double> populations,
                                         const LindbladParams& params,
                                         std::span<const double> record_times);
std::vector<MomentSample> evolve_moments(const RotorDensity& rho0, const LindbladParams& params,
                                         std::span<const double> record_times);

struct AngleDecayRow {
  double phi = 0.0;
  double phi_prime = 0.0;
  double measured = 0.0;  // |<phi|rho(t)|phi'>| / |<phi|rho(0)|phi'>|
  double analytic = 0.0;  // exp(-D sin^2(phi - phi') t)
  double relative_error = 0.0;
};

/// Pure-dissipator evolution of rho0 for time t compared with the exact
/// angle-basis decay law.
std::vector<AngleDecayRow> angle_decay_check(const RotorDensity& rho0, double diffusion,
                                             double t,
                                             std::span<const std::pair<double, double>> pairs,
                                             double dt = 0.0, unsigned threads = 0);

void write_moment_csv(std::ostream& os, std::span<const MomentSample> samples);
void write_angle_decay_csv(std::ostream& os, std::span<const AngleDecayRow> rows);

}  // namespace rotor
