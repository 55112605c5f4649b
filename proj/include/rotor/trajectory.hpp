#pragma once

// Stochastic Schroedinger evolution under V_t = kappa (eps_t L+^2 + eps*_t L-^2).
//
// One step of length dt: half a step of exact free phase, a Crank-Nicolson
// (Cayley) kick for V at the step midpoint, then another half free step.
// The Cayley form (1 + iB)^-1 (1 - iB) is exactly unitary; since V only
// couples ell to ell +- 2, it splits into two tridiagonal solves on the even
// and odd sublattices of the window.
//
// In the corotating frame the field seen by the rotor is
// eps_t exp(2 i omega_rot t), so the resonance at 2 omega_rot lands at zero
// frequency and dt only has to resolve the noise band.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rotor/noise.hpp"
#include "rotor/rotor_core.hpp"

namespace rotor {

struct EnsembleSpec {
  std::size_t n_traj = 100;
  NoiseSpec noise;
  RotorParams rotor;
  double dt = 1.0e-4;  // ms, must equal noise.dt
  double t_max = 1.0;
  std::uint64_t master_seed = 0;
  std::vector<double> record_times;  // empty: {0, t_max}
  /// Optional white background of diffusion D_amb, added to eps_t from its
  /// own substream.
  double ambient_diffusion = 0.0;

  void validate() const;
  /// Record times snapped to whole steps.
  std::vector<std::size_t> record_steps() const;
};

/// Field seen by the rotor over [0, t_max] for trajectory `index`, already
/// rotated into the spec's frame and including any ambient floor.
std::vector<cplx> frame_field(const EnsembleSpec& spec, std::size_t index);

class SplitStepPropagator {
 public:
  SplitStepPropagator(const RotorParams& rotor, const LadderWindow& window, double dt);

  /// One step with the midpoint field eps_mid (already in the frame).
  void step(std::span<cplx> psi, cplx eps_mid);
  std::size_t size() const { return half_phase_.size(); }

 private:
  void kick(std::span<cplx> psi, cplx b);

  double kappa_;
  double dt_;
  std::vector<cplx> half_phase_;
  std::vector<cplx> rhs_, cprime_;
};

struct TrajectoryResult {
  std::vector<double> t;
  std::vector<RotorState> states;
  double max_norm_drift = 0.0;
  double max_edge_population = 0.0;
};

inline constexpr double kNormDriftTolerance = 1e-6;
inline constexpr double kEdgeTolerance = 1e-6;

/// Evolves psi0 under the given frame field (one sample per step boundary,
/// so field.size() must exceed the last record step). States are stored at
/// `record_steps`.
TrajectoryResult run_trajectory(const RotorState& psi0, std::span<const cplx> field,
                                const RotorParams& rotor, double dt,
                                std::span<const std::size_t> record_steps);

/// Same for several rotor branches that share one noise history (internal
/// states of a composite system). Branch amplitudes are advanced in place
/// from step `first_step` to `last_step`; returns the summed edge population.
double advance_branches(std::span<std::vector<cplx>> branches, std::span<const cplx> field,
                        const RotorParams& rotor, double dt, std::size_t first_step,
                        std::size_t last_step);

struct EnsembleMoments {
  std::vector<double> t;
  std::vector<double> mean;
  std::vector<double> mean_se;
  std::vector<double> var;
  std::vector<double> var_se;
  std::size_t n_traj = 0;
  /// Per-trajectory <L_z> - c and <L_z^2> relative to the window center c,
  /// [trajectory][record]; kept so slopes can carry correlated errors.
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::int64_t center = 0;
};

EnsembleMoments ensemble_moments(const EnsembleSpec& spec, const RotorState& psi0,
                                 unsigned threads = 0);

struct SlopeEstimate {
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
};

/// OLS line through Var(L_z)(t) over records with t >= t_min. The standard
/// error propagates the per-trajectory influence of every point, so time
/// correlations within a trajectory are accounted for.
SlopeEstimate variance_slope(const EnsembleMoments& m, double t_min = 0.0);

struct EnsembleDensity {
  std::vector<double> t;
  std::vector<RotorDensity> mean;
  std::vector<Eigen::MatrixXd> standard_error;  // per entry, |.| of complex SE
  std::size_t n_traj = 0;
};

EnsembleDensity ensemble_density(const EnsembleSpec& spec, const RotorState& psi0,
                                 unsigned threads = 0);

struct ScanPoint {
  double center_khz = 0.0;
  double diffusion = 0.0;
  double diffusion_se = 0.0;
};

/// D(f_c) at fixed white-drive sigma. Every center reuses the same noise
/// streams so the scan is smooth in f_c.
std::vector<ScanPoint> resonance_scan(const EnsembleSpec& spec, const RotorState& psi0,
                                      std::span<const double> centers_khz, double t_fit_min,
                                      unsigned threads = 0);

void write_ensemble_csv(std::ostream& os, const EnsembleMoments& m);
void write_scan_csv(std::ostream& os, std::span<const ScanPoint> scan);

}  // namespace rotor
