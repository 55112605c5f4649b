#pragma once

// Band-pass filtered Gaussian noise for the field-gradient environment.
//
// PSD convention (used everywhere in this library): two-sided, in angular
// frequency,
//
//     S(omega) = \int d tau  E[eps_t eps*_{t - tau}] exp(i omega tau),
//
// so that \int S(omega) d omega / 2 pi equals the variance of eps_t. With
// omega in rad/ms and eps in rad/ms, S carries rad^2/ms. Mixing this up with
// a one-sided or per-Hz density silently rescales D by 2 or 2 pi.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rotor/units.hpp"

namespace rotor {

/// Standard deviation of the white drive per sample.
struct DriveSigma {
  double sigma = 0.0;
};
/// Target S_eps at the filter center 2 pi f_c.
struct PeakPsd {
  double value = 0.0;
};
/// Target diffusion coefficient D = 4 kappa^2 S_eps(2 omega_rot).
struct TargetDiffusion {
  double diffusion = 0.0;  // hbar^2/ms
  double omega_rot = 0.0;  // rad/ms
  double kappa = 1.0;
};
using NoiseAmplitude = std::variant<DriveSigma, PeakPsd, TargetDiffusion>;

struct NoiseSpec {
  double center_khz = 288.0;
  double fwhm_khz = 19.0;
  NoiseAmplitude amplitude = DriveSigma{};
  double dt = 1.0e-4;  // ms
  std::uint64_t seed = 0;
  double fixed_phase = 0.0;  // global phase chi of eps_t

  /// Largest step that resolves the band: 1 / (20 (f_c + fwhm)).
  double max_dt() const { return 1.0 / (20.0 * (center_khz + fwhm_khz)); }
  void validate() const;
};

struct NoiseTrajectory {
  std::vector<cplx> samples;  // eps at t_i = i dt
  double dt = 0.0;
  double duration = 0.0;
  NoiseSpec spec;
  std::vector<std::string> warnings;

  double time(std::size_t i) const { return dt * static_cast<double>(i); }
};

/// AR(2) coefficients v_k = a1 v_{k-1} + a2 v_{k-2} + sigma w_k for a damped
/// resonator with poles at exp((-gamma/2 +- i omega_c) dt), gamma = 2 pi fwhm.
struct Resonator {
  double a1 = 0.0;
  double a2 = 0.0;
};
Resonator resonator(const NoiseSpec& spec);

/// Resolves the amplitude variant to the white-drive standard deviation.
double drive_sigma(const NoiseSpec& spec);

/// Exact two-sided PSD of the discrete resonator process at omega (rad/ms).
double analytic_psd(const NoiseSpec& spec, double omega);

/// Stationary variance of the real band-passed process.
double analytic_variance(const NoiseSpec& spec);

/// Replaces any amplitude target with the equivalent DriveSigma.
NoiseSpec calibrate(const NoiseSpec& spec);

/// Seed of substream `stream` derived from a master seed (splitmix64 mixing).
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream);

/// Generates eps_t over [0, duration]; deterministic in (spec, duration, stream).
NoiseTrajectory generate(const NoiseSpec& spec, double duration, std::uint64_t stream = 0);

struct Psd {
  std::vector<double> omega;    // rad/ms, ascending, two-sided
  std::vector<double> density;  // S_eps(omega)
  std::size_t segments = 0;
  double resolution = 0.0;  // bin spacing in rad/ms

  /// Linear interpolation; throws RangeError outside the sampled support.
  double at(double omega) const;
  /// \int S d omega / 2 pi over the whole support.
  double integrated_power() const;
};

/// Welch estimate with a Hann window and 50 % overlap. segment_length = 0
/// picks the longest segment that still yields 8 segments.
Psd estimate_psd(std::span<const cplx> samples, double dt, std::size_t segment_length = 0);
Psd estimate_psd(const NoiseTrajectory& traj, std::size_t segment_length = 0);

/// D = 4 kappa^2 S_eps(2 omega_rot).
double diffusion_from_psd(const Psd& psd, double omega_rot, double kappa);

void write_psd_csv(std::ostream& os, const Psd& psd);
void write_trajectory_csv(std::ostream& os, const NoiseTrajectory& traj);

}  // namespace rotor
