#pragma once

// Two-ion Ramsey sequence with a Hahn echo on the rotational sideband of
// order delta_ell:  X_pi/2 -- tau/2 -- X_pi -- tau/2 -- X_pi/2(phi_L), then
// P(D) = Prob(DD) + (Prob(DS) + Prob(SD)) / 2.
//
// Internal basis order is {SS, SD, DS, DD}; the first letter is atom 1.
// A pulse acts as U = sum_ac M_ac |a><c| (x) L+^(delta_ell (e_a - e_c)),
// with e the number of D excitations and M the tensor product of two
// single-atom rotations
//     R(theta, phi) = cos(theta) 1 + sin(theta) (-e^{i phi} sigma+ + e^{-i phi} sigma-),
// theta = pi/4 for X_pi/2 and pi/2 for X_pi. The second atom's sine terms
// carry the parity sign (-1)^delta_ell.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rotor/rotor_core.hpp"
#include "rotor/trajectory.hpp"

namespace rotor {

enum class Internal { SS = 0, SD = 1, DS = 2, DD = 3 };
inline constexpr std::array<Internal, 4> kInternalBasis{Internal::SS, Internal::SD, Internal::DS,
                                                        Internal::DD};
inline constexpr std::array<int, 4> kExcitation{0, 1, 1, 2};
const char* internal_label(Internal a);

enum class PulseKind { half_pi, pi };

struct PulseSpec {
  int delta_ell = 1;
  PulseKind kind = PulseKind::half_pi;
  double laser_phase = 0.0;

  int parity_sign() const { return delta_ell % 2 == 0 ? 1 : -1; }
};

/// The 4x4 internal matrix M of the pulse.
Eigen::Matrix4cd pulse_matrix(const PulseSpec& spec);

struct CompositeState {
  LadderWindow window;
  std::array<std::vector<cplx>, 4> branches;  // indexed by Internal

  double norm_squared() const;
  double probability(Internal a) const;
  /// Throws DomainError unless normalized to 1e-10.
  void validate() const;
  static CompositeState product(Internal a, const RotorState& psi);
};

/// Applies the pulse; throws TruncationError if more than `leak_tolerance`
/// of the probability would be shifted out of the window.
CompositeState apply_pulse(const PulseSpec& spec, const CompositeState& state,
                           double leak_tolerance = 1e-6);

/// Dense matrix of the pulse on the window, rows and columns ordered
/// (internal, ell) with ell fastest. Exactly unitary on states whose support
/// stays 2 delta_ell away from the window edges.
Eigen::MatrixXcd pulse_operator(const PulseSpec& spec, const LadderWindow& window);

struct NoEnvironment {};
struct LindbladEnvironment {
  double diffusion = 0.0;
  double dt = 0.0;  // 0 picks the largest stable step
};
struct TrajectoryEnvironment {
  EnsembleSpec ensemble;  // rotor, dt, noise, n_traj and seed are used
};
using Environment = std::variant<NoEnvironment, LindbladEnvironment, TrajectoryEnvironment>;

struct SequenceSpec {
  double tau = 0.0;  // ms
  int delta_ell = 1;
  RotorParams rotor;
  Environment environment = NoEnvironment{};
  std::vector<double> phase_scan;  // final-pulse phases phi_L
  double contrast_factor = 1.0;    // C0 for imperfect operations
  double laser_phase_offset = 0.0;

  void validate() const;
};

/// Evenly spaced phases over [0, 2 pi).
std::vector<double> uniform_phase_scan(std::size_t n);

struct ContrastFit {
  double contrast = 0.0;
  double contrast_se = 0.0;
  double fringe_phase = 0.0;
  double fringe_phase_se = 0.0;
  double offset = 0.0;
  bool degenerate = false;
};

/// Least-squares fit P = o - (C/2) cos(phi - phi0). Requires >= 8 points
/// without a gap of pi or more around the circle.
ContrastFit fit_contrast(std::span<const double> phases, std::span<const double> p_d);

struct SequenceResult {
  double tau = 0.0;  // as realized (echo snapped to the step grid for trajectories)
  std::vector<double> phases;
  std::vector<double> p_d;
  std::vector<double> p_d_se;  // trajectory environment only
  ContrastFit contrast;
  double leakage = 0.0;
};

/// Runs one sequence from |SS> (x) psi0. For the deterministic environments
/// only the populations of psi0 enter.
SequenceResult run_sequence(const SequenceSpec& seq, const RotorState& psi0, unsigned threads = 0);

/// One sequence per tau, in parallel for the deterministic environments.
std::vector<SequenceResult> run_tau_scan(const SequenceSpec& seq, std::span<const double> taus,
                                         const RotorState& psi0, unsigned threads = 0);

/// exp(-(D tau / 2)(1 - sinc(2 omega_r delta_ell tau)))
double analytic_contrast(double diffusion, double omega_r, int delta_ell, double tau);
/// (omega_r^2 delta_ell^2 D / 3)^(1/3)
double analytic_gamma(double diffusion, double omega_r, int delta_ell);
/// 1/2 - cos(omega_r delta_ell^2 tau) C(tau) / 2
double full_signal(double diffusion, double omega_r, int delta_ell, double tau);
/// First zero of cos(omega_r delta_ell^2 tau).
double node_time(double omega_r, int delta_ell);

/// g0 exp(-i k z cos(theta)) (-i)^delta_ell J_delta_ell(k r sin(theta)).
cplx bessel_coupling(double g0, double k, double r, double theta, int delta_ell, double z = 0.0);

void write_contrast_csv(std::ostream& os, std::span<const SequenceResult> results);
void write_phase_scan_csv(std::ostream& os, const SequenceResult& result);

}  // namespace rotor
