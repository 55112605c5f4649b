#pragma once

// The five front-end commands. Each writes its CSVs into cfg.output_dir,
// prints a short summary to `log` and returns what it computed so tests can
// inspect it without parsing files.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "rotor/fit.hpp"
#include "rotor/ramsey.hpp"
#include "rotor/trajectory.hpp"

namespace rotorcli {

struct DiffusionOutcome {
  std::vector<double> t, var, var_se, mean;
  rotor::FitResult fit;
};

struct ResonanceOutcome {
  std::vector<rotor::ScanPoint> scan;
  rotor::FitResult fit;
  double resonance_khz = 0.0;  // 2 omega_rot / 2 pi
};

struct RamseyCurve {
  int delta_ell = 1;
  double diffusion = 0.0;
  std::vector<rotor::SequenceResult> results;
  std::optional<rotor::FitResult> fit;
  double gamma_theory = 0.0;
};

struct ScalingRow {
  double diffusion = 0.0;
  int delta_ell = 1;
  double gamma = 0.0;
  double gamma_se = 0.0;
  double gamma_theory = 0.0;
};

struct ScalingOutcome {
  std::vector<ScalingRow> rows;
  std::vector<rotor::FitResult> exponent_fits;  // gamma vs delta_ell, one per D
  std::vector<rotor::FitResult> slope_fits;     // gamma vs D, one per delta_ell
  double mean_exponent = 0.0;
  double mean_slope = 0.0;
};

struct CheckRow {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ValidateOutcome {
  std::vector<CheckRow> checks;
  bool all_pass = false;
};

/// With from_csv set, the simulation is skipped and the CSV (in the schema
/// the command writes) is fitted instead.
DiffusionOutcome cmd_diffusion(const RunConfig& cfg, std::ostream& log,
                               const std::filesystem::path& from_csv = {});
ResonanceOutcome cmd_resonance(const RunConfig& cfg, std::ostream& log,
                               const std::filesystem::path& from_csv = {});
std::vector<RamseyCurve> cmd_ramsey(const RunConfig& cfg, std::ostream& log,
                                    const std::filesystem::path& from_csv = {});
ScalingOutcome cmd_scaling(const RunConfig& cfg, std::ostream& log);
ValidateOutcome cmd_validate(const RunConfig& cfg, std::ostream& log);

/// One Ramsey contrast curve with its stretched-exponential fit.
RamseyCurve ramsey_curve(const RunConfig& cfg, double diffusion, int delta_ell);

/// Columns of a CSV written by this tool; '#' lines are skipped.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<double> column(const std::string& name) const;
  bool has(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace rotorcli
