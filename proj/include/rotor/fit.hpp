#pragma once

// Estimators that turn simulated curves into gamma, D, exponents and
// resonance parameters. Nonlinear fits use damped least squares with
// analytic Jacobians (GSL trust-region Levenberg-Marquardt) and fall back to
// a Nelder-Mead simplex when the Jacobian is ill-conditioned or the damped
// iteration fails.

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace rotor {

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  // sqrt of the (weighted) sum of squares
  bool converged = false;
  int n_iter = 0;
  std::string method;
  std::vector<std::string> flags;  // "ill_posed", "negative_intercept", ...
  std::string message;

  double value(std::string_view name) const;
  double uncertainty(std::string_view name) const;
  bool has_flag(std::string_view flag) const;
};

/// Weighted residuals r_i(p) = (y_i - model_i(p)) / sigma_i and their Jacobian.
/// The output buffers arrive sized n_data and n_data x n_params.
struct LeastSquaresProblem {
  std::size_t n_data = 0;
  std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)> residuals;
  std::function<void(const Eigen::VectorXd& p, Eigen::MatrixXd& jac)> jacobian;
};

struct FitOptions {
  int max_iter = 500;
  double xtol = 1e-14;
  double gtol = 1e-14;
  double ftol = 0.0;
  /// Sigmas are absolute: no rescaling of the covariance by chi^2/dof.
  bool absolute_sigma = false;
};

FitResult least_squares(std::vector<std::string> names, const Eigen::VectorXd& start,
                        const LeastSquaresProblem& problem, const FitOptions& options = {});

/// Appendix rule: include the cos(omega_r delta_ell^2 tau) profile when
/// delta_ell^2 omega_r / (2 pi gamma) > 0.1.
bool modulation_needed(double gamma, double omega_r, int delta_ell);

/// C(tau) = C0 exp(-(gamma tau)^3) [ |cos(omega_r delta_ell^2 tau)| ].
/// gamma is fitted through log(gamma). sigma may be empty (unit weights).
FitResult fit_stretched_exp(std::span<const double> tau, std::span<const double> contrast,
                            std::span<const double> sigma, bool with_modulation, double omega_r,
                            int delta_ell);

/// y = A x^p by weighted regression of log y on log x. sigma_y may be empty.
FitResult fit_powerlaw(std::span<const double> x, std::span<const double> y,
                       std::span<const double> sigma_y = {});

/// floor + peak / (1 + (2 (f - center) / fwhm)^2)
FitResult fit_lorentzian(std::span<const double> f, std::span<const double> y,
                         std::span<const double> sigma = {});
double lorentzian(double f, double center, double fwhm, double peak, double floor);

/// sigma_ell^2(t) = sigma0_sq + 2 D t; reports {sigma0_sq, D}.
FitResult fit_variance_growth(std::span<const double> t, std::span<const double> var,
                              std::span<const double> sigma = {});

enum class DecayShape { exponential, gaussian };
/// A exp(-t/T) or A exp(-(t/T)^2); reports {amplitude, decay_time}.
FitResult fit_fringe_decay(std::span<const double> t, std::span<const double> amplitude,
                           DecayShape shape);

/// sigma_ell = 1 / (4 omega_r T) with omega_r in rad per unit of T.
double sigma_from_fringe_decay(double decay_time, double omega_r);

/// Compact value(uncertainty) notation, e.g. 0.71(5) or 156(20).
std::string format_uncertainty(double value, double uncertainty);

struct ParameterUnit {
  std::string name;
  std::string unit;
};
void write_fit_csv(std::ostream& os, const FitResult& fit, std::span<const ParameterUnit> units = {});
std::string fit_report(const FitResult& fit, std::span<const ParameterUnit> units = {});

}  // namespace rotor
