#pragma once

// Flat key = value run configuration. Every dimensioned key carries its unit
// in the name; '#' starts a comment; lists are comma separated or written as
// start:stop:step.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rotor/rotor_core.hpp"

namespace rotorcli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Engine { none, lindblad, trajectory };

struct RunConfig {
  // rotor
  double omega_r_hz = 13.0;
  std::int64_t ell_bar = 5538;
  double sigma_ell = 1.0;
  double kappa = 1.0;
  std::int64_t window_halfwidth = 0;  // 0 picks the default coverage
  rotor::Frame frame = rotor::Frame::corotating;

  // noise
  double noise_center_khz = 288.0;
  double noise_fwhm_khz = 19.0;
  double d_target = 70.0;  // hbar^2/ms at 2 omega_rot
  double noise_dt_ms = 1e-4;
  double ambient_d = 0.0;

  // diffusion protocol
  double t_max_ms = 1.0;
  double t_step_ms = 0.1;
  double t_fit_min_ms = 0.0;

  // resonance scan
  std::vector<double> centers_khz;  // empty: 240..336 in 8 kHz steps

  // Ramsey sequence
  std::vector<int> delta_ell{1, 2, 3};
  std::vector<double> tau_ms;  // empty: automatic grid per (D, delta_ell)
  std::size_t tau_points = 12;
  double tau_span_over_gamma = 1.2;
  std::size_t phase_points = 16;
  double contrast_factor = 1.0;

  // scaling
  std::vector<double> d_list{2.1, 13.0, 70.0, 1000.0};

  // numerics
  Engine engine = Engine::lindblad;
  double lindblad_dt_ms = 0.0;  // 0: largest stable step
  std::size_t n_traj = 100;
  std::uint64_t master_seed = 0;
  unsigned threads = 0;
  std::string output_dir = ".";

  double omega_r() const { return rotor::hz_to_rad_per_ms(omega_r_hz); }
  /// Range checks that do not need a simulation.
  void validate() const;
};

/// Parses a config stream; `source` names it in error messages, which have
/// the form "<source>:<line>: <problem>".
RunConfig parse_config(std::istream& in, const std::string& source = "config");
RunConfig load_config(const std::filesystem::path& path);

/// Canonical key = value listing of every field, in a fixed order.
std::string canonical_text(const RunConfig& cfg);
/// FNV-1a 64 of the canonical text with the seed left out.
std::uint64_t config_hash(const RunConfig& cfg);

const char* engine_name(Engine e);
Engine parse_engine(const std::string& name);

}  // namespace rotorcli
