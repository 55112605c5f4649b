#include "rotor/fit.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rotor/errors.hpp"
#include "rotor/units.hpp"

namespace rotor {

namespace {

void quiet_gsl() {
  static std::once_flag once;
  std::call_once(once, [] { gsl_set_error_handler_off(); });
}

struct GslContext {
  const LeastSquaresProblem* problem;
  Eigen::VectorXd p, r;
  Eigen::MatrixXd jac;
};

Eigen::VectorXd to_eigen(const gsl_vector* v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) out(static_cast<Eigen::Index>(i)) = gsl_vector_get(v, i);
  return out;
}

int gsl_f(const gsl_vector* x, void* data, gsl_vector* f) {
  auto* ctx = static_cast<GslContext*>(data);
  ctx->p = to_eigen(x);
  ctx->r.resize(static_cast<Eigen::Index>(f->size));
  ctx->problem->residuals(ctx->p, ctx->r);
  for (std::size_t i = 0; i < f->size; ++i) {
    const double v = ctx->r(static_cast<Eigen::Index>(i));
    if (!std::isfinite(v)) return GSL_EDOM;
    gsl_vector_set(f, i, v);
  }
  return GSL_SUCCESS;
}

// GSL wants the Jacobian of f = r; our residuals are y - model, so the
// problem's Jacobian is already d r / d p.
int gsl_df(const gsl_vector* x, void* data, gsl_matrix* j) {
  auto* ctx = static_cast<GslContext*>(data);
  ctx->p = to_eigen(x);
  ctx->jac.resize(static_cast<Eigen::Index>(j->size1), static_cast<Eigen::Index>(j->size2));
  ctx->problem->jacobian(ctx->p, ctx->jac);
  for (std::size_t r = 0; r < j->size1; ++r)
    for (std::size_t c = 0; c < j->size2; ++c)
      gsl_matrix_set(j, r, c, ctx->jac(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
  return GSL_SUCCESS;
}

double sum_squares(const LeastSquaresProblem& problem, const Eigen::VectorXd& p) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(problem.n_data));
  problem.residuals(p, r);
  const double s = r.squaredNorm();
  return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
}

double gsl_simplex_cost(const gsl_vector* x, void* data) {
  const auto* problem = static_cast<const LeastSquaresProblem*>(data);
  return sum_squares(*problem, to_eigen(x));
}

struct SimplexOutcome {
  Eigen::VectorXd p;
  int iterations = 0;
  bool converged = false;
};

SimplexOutcome nelder_mead(const LeastSquaresProblem& problem, const Eigen::VectorXd& start) {
  const auto np = static_cast<std::size_t>(start.size());
  gsl_multimin_function fn{&gsl_simplex_cost, np, const_cast<LeastSquaresProblem*>(&problem)};
  gsl_vector* x = gsl_vector_alloc(np);
  gsl_vector* step = gsl_vector_alloc(np);
  for (std::size_t i = 0; i < np; ++i) {
    const double v = start(static_cast<Eigen::Index>(i));
    gsl_vector_set(x, i, v);
    gsl_vector_set(step, i, 0.1 * std::max(std::abs(v), 1e-3));
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, np);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  SimplexOutcome out;
  for (out.iterations = 1; out.iterations <= 20000; ++out.iterations) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-13) == GSL_SUCCESS) {
      out.converged = true;
      break;
    }
  }
  out.p = to_eigen(gsl_multimin_fminimizer_x(s));
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return out;
}

// (J^T J)^+ via a symmetric eigendecomposition, tolerant of flat directions.
Eigen::MatrixXd normal_inverse(const Eigen::MatrixXd& jac) {
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jtj);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double cut = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-14;
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv(i) = ev(i) > cut ? 1.0 / ev(i) : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<double> unit_sigma(std::span<const double> sigma, std::size_t n) {
  if (sigma.empty()) return std::vector<double>(n, 1.0);
  if (sigma.size() != n) throw DomainError("sigma length does not match the data");
  for (double s : sigma) {
    if (!(s > 0.0)) throw DomainError("sigma values must be positive");
  }
  return {sigma.begin(), sigma.end()};
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw DomainError("x and y lengths differ");
}

// Weighted straight line y = c0 + c1 x with covariance.
struct LineFit {
  double c0 = 0.0, c1 = 0.0;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  double chi2 = 0.0;
};

LineFit weighted_line(std::span<const double> x, std::span<const double> y,
                      std::span<const double> sigma, bool absolute) {
  const std::size_t n = x.size();
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = 1.0 / sigma[i];
    a(r, 1) = x[i] / sigma[i];
    b(r) = y[i] / sigma[i];
  }
  const Eigen::Matrix2d ata = a.transpose() * a;
  if (std::abs(ata.determinant()) < 1e-300) throw DomainError("line fit needs distinct x values");
  const Eigen::Vector2d c = ata.ldlt().solve(a.transpose() * b);
  LineFit f;
  f.c0 = c(0);
  f.c1 = c(1);
  f.chi2 = (b - a * c).squaredNorm();
  f.cov = ata.inverse();
  if (!absolute && n > 2) f.cov *= f.chi2 / static_cast<double>(n - 2);
  return f;
}

}  // namespace

double FitResult::value(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return params(static_cast<Eigen::Index>(i));
  throw DomainError("no fit parameter named " + std::string(name));
}

double FitResult::uncertainty(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) {
      const auto k = static_cast<Eigen::Index>(i);
      return std::sqrt(std::max(0.0, covariance(k, k)));
    }
  }
  throw DomainError("no fit parameter named " + std::string(name));
}

bool FitResult::has_flag(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

FitResult least_squares(std::vector<std::string> names, const Eigen::VectorXd& start,
                        const LeastSquaresProblem& problem, const FitOptions& options) {
  quiet_gsl();
  const auto np = static_cast<std::size_t>(start.size());
  const std::size_t n = problem.n_data;
  if (names.size() != np) throw DomainError("parameter names do not match the start vector");
  if (n < np) throw DomainError("fewer data points than parameters");

  FitResult out;
  out.names = std::move(names);
  out.method = "levenberg-marquardt";

  GslContext ctx{&problem, {}, {}, {}};
  gsl_multifit_nlinear_fdf fdf;
  fdf.f = &gsl_f;
  fdf.df = &gsl_df;
  fdf.fvv = nullptr;
  fdf.n = n;
  fdf.p = np;
  fdf.params = &ctx;
  gsl_multifit_nlinear_parameters params = gsl_multifit_nlinear_default_parameters();
  params.trs = gsl_multifit_nlinear_trs_lm;
  gsl_multifit_nlinear_workspace* w =
      gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &params, n, np);
  gsl_vector* x0 = gsl_vector_alloc(np);
  for (std::size_t i = 0; i < np; ++i) gsl_vector_set(x0, i, start(static_cast<Eigen::Index>(i)));

  int info = 0;
  int status = gsl_multifit_nlinear_init(x0, &fdf, w);
  if (status == GSL_SUCCESS) {
    status = gsl_multifit_nlinear_driver(static_cast<std::size_t>(options.max_iter), options.xtol,
                                         options.gtol, options.ftol, nullptr, nullptr, &info, w);
  }
  double rcond = 0.0;
  if (status == GSL_SUCCESS) gsl_multifit_nlinear_rcond(&rcond, w);
  Eigen::VectorXd best = status == GSL_SUCCESS || status == GSL_EMAXITER
                             ? to_eigen(gsl_multifit_nlinear_position(w))
                             : start;
  out.n_iter = static_cast<int>(gsl_multifit_nlinear_niter(w));
  out.converged = status == GSL_SUCCESS;
  gsl_vector_free(x0);
  gsl_multifit_nlinear_free(w);

  if (!out.converged || rcond < 1e-12) {
    const SimplexOutcome nm = nelder_mead(problem, best);
    if (sum_squares(problem, nm.p) <= sum_squares(problem, best) || !out.converged) {
      best = nm.p;
      out.method = "nelder-mead";
      out.n_iter += nm.iterations;
      out.converged = nm.converged;
    }
    if (rcond < 1e-12) out.flags.emplace_back("ill_conditioned");
    out.message = out.converged ? "simplex fallback" : "no convergence within the iteration cap";
  }

  out.params = best;
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  problem.residuals(best, r);
  out.residual_norm = r.norm();
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), best.size());
  problem.jacobian(best, jac);
  out.covariance = normal_inverse(jac);
  if (!options.absolute_sigma && n > np) {
    out.covariance *= r.squaredNorm() / static_cast<double>(n - np);
  }
  return out;
}

bool modulation_needed(double gamma, double omega_r, int delta_ell) {
  const double dl = static_cast<double>(delta_ell);
  return dl * dl * omega_r / (kTwoPi * gamma) > 0.1;
}

FitResult fit_stretched_exp(std::span<const double> tau, std::span<const double> contrast,
                            std::span<const double> sigma, bool with_modulation, double omega_r,
                            int delta_ell) {
  check_lengths(tau.size(), contrast.size());
  const std::size_t n = tau.size();
  if (n < 5) throw DomainError("stretched-exponential fit needs >= 5 points");
  const std::vector<double> s = unit_sigma(sigma, n);
  const double dl2 = static_cast<double>(delta_ell) * delta_ell;
  std::vector<double> mod(n, 1.0);
  if (with_modulation) {
    for (std::size_t i = 0; i < n; ++i) mod[i] = std::abs(std::cos(omega_r * dl2 * tau[i]));
  }

  // p = (C0, log gamma)
  LeastSquaresProblem prob;
  prob.n_data = n;
  prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(n));
    const double g = std::exp(p(1));
    for (std::size_t i = 0; i < n; ++i) {
      const double x = g * tau[i];
      r(static_cast<Eigen::Index>(i)) = (contrast[i] - p(0) * mod[i] * std::exp(-x * x * x)) / s[i];
    }
  };
  prob.jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& j) {
    j.resize(static_cast<Eigen::Index>(n), 2);
    const double g = std::exp(p(1));
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double x3 = std::pow(g * tau[i], 3);
      const double e = mod[i] * std::exp(-x3);
      j(k, 0) = -e / s[i];
      j(k, 1) = 3.0 * p(0) * e * x3 / s[i];
    }
  };

  // Coarse scan in log gamma with C0 solved linearly gives a safe start.
  const double tmax = *std::max_element(tau.begin(), tau.end());
  if (!(tmax > 0.0)) throw DomainError("tau values must include a positive delay");
  double best_cost = std::numeric_limits<double>::infinity();
  Eigen::Vector2d start(1.0, -std::log(tmax));
  for (int k = 0; k <= 400; ++k) {
    const double u = std::log(0.05 / tmax) + (std::log(200.0 / tmax) - std::log(0.05 / tmax)) * k / 400.0;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double b = mod[i] * std::exp(-std::pow(std::exp(u) * tau[i], 3)) / s[i];
      num += b * contrast[i] / s[i];
      den += b * b;
    }
    if (den <= 0.0) continue;
    const Eigen::Vector2d p(num / den, u);
    const double c = sum_squares(prob, p);
    if (c < best_cost) {
      best_cost = c;
      start = p;
    }
  }

  FitOptions opt;
  opt.absolute_sigma = !sigma.empty();
  FitResult raw = least_squares({"C0", "log_gamma"}, start, prob, opt);
  FitResult out = raw;
  out.names = {"C0", "gamma"};
  const double g = std::exp(raw.params(1));
  out.params(1) = g;
  Eigen::Matrix2d t = Eigen::Matrix2d::Identity();
  t(1, 1) = g;
  out.covariance = t * raw.covariance * t.transpose();
  const double tmin = *std::min_element(tau.begin(), tau.end());
  if (tmax - tmin < 1.0 / g) out.flags.emplace_back("short_span");
  return out;
}

FitResult fit_powerlaw(std::span<const double> x, std::span<const double> y,
                       std::span<const double> sigma_y) {
  check_lengths(x.size(), y.size());
  const std::size_t n = x.size();
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() < 3) {
    throw DomainError("power-law fit needs >= 3 distinct x values");
  }
  std::vector<double> lx(n), ly(n), ls(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("power-law fit needs positive data");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  if (!sigma_y.empty()) {
    const std::vector<double> s = unit_sigma(sigma_y, n);
    for (std::size_t i = 0; i < n; ++i) ls[i] = s[i] / y[i];
  }
  const LineFit line = weighted_line(lx, ly, ls, !sigma_y.empty());

  FitResult out;
  out.names = {"A", "p"};
  out.method = "weighted log-log regression";
  out.converged = true;
  const double a = std::exp(line.c0);
  out.params = Eigen::Vector2d(a, line.c1);
  Eigen::Matrix2d t = Eigen::Matrix2d::Identity();
  t(0, 0) = a;
  out.covariance = t * line.cov * t.transpose();
  out.residual_norm = std::sqrt(line.chi2);
  return out;
}

double lorentzian(double f, double center, double fwhm, double peak, double floor) {
  const double u = 2.0 * (f - center) / fwhm;
  return floor + peak / (1.0 + u * u);
}

FitResult fit_lorentzian(std::span<const double> f, std::span<const double> y,
                         std::span<const double> sigma) {
  check_lengths(f.size(), y.size());
  const std::size_t n = f.size();
  if (n < 6) throw DomainError("Lorentzian fit needs >= 6 points");
  const std::vector<double> s = unit_sigma(sigma, n);

  LeastSquaresProblem prob;
  prob.n_data = n;
  // p = (center, fwhm, peak, floor)
  prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      r(static_cast<Eigen::Index>(i)) = (y[i] - lorentzian(f[i], p(0), p(1), p(2), p(3))) / s[i];
    }
  };
  prob.jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& j) {
    j.resize(static_cast<Eigen::Index>(n), 4);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double u = 2.0 * (f[i] - p(0)) / p(1);
      const double q = 1.0 / (1.0 + u * u);
      const double dq_du = -2.0 * u * q * q;
      j(k, 0) = -p(2) * dq_du * (-2.0 / p(1)) / s[i];
      j(k, 1) = -p(2) * dq_du * (-u / p(1)) / s[i];
      j(k, 2) = -q / s[i];
      j(k, 3) = -1.0 / s[i];
    }
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return f[a] < f[b]; });
  const auto imax = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  const double ymin = *std::min_element(y.begin(), y.end());
  const double span = f[order.back()] - f[order.front()];
  // half-maximum width from the sorted samples
  const double half = 0.5 * (y[imax] + ymin);
  double lo = f[order.front()], hi = f[order.back()];
  for (std::size_t i : order) {
    if (f[i] < f[imax] && y[i] < half) lo = f[i];
    if (f[i] > f[imax] && y[i] < half) {
      hi = f[i];
      break;
    }
  }
  const double width0 = std::max(hi - lo, span / static_cast<double>(4 * n));
  Eigen::Vector4d start(f[imax], width0, y[imax] - ymin, ymin);

  FitOptions opt;
  opt.absolute_sigma = !sigma.empty();
  FitResult out = least_squares({"center", "fwhm", "peak", "floor"}, start, prob, opt);
  out.params(1) = std::abs(out.params(1));

  const bool bracketed = order.front() != imax && order.back() != imax &&
                         out.value("center") > f[order.front()] &&
                         out.value("center") < f[order.back()];
  const double peak = out.value("peak");
  const double peak_se = out.uncertainty("peak");
  const double scale = std::max(std::abs(out.value("floor")), 1e-300);
  if (!bracketed || !(peak > 2.0 * peak_se) || peak < 1e-9 * scale) {
    out.flags.emplace_back("ill_posed");
    out.message = "IllPosedWarning: resonance peak not bracketed or not resolved";
  }
  return out;
}

FitResult fit_variance_growth(std::span<const double> t, std::span<const double> var,
                              std::span<const double> sigma) {
  check_lengths(t.size(), var.size());
  if (t.size() < 3) throw DomainError("variance growth fit needs >= 3 times");
  const std::vector<double> s = unit_sigma(sigma, t.size());
  const LineFit line = weighted_line(t, var, s, !sigma.empty());
  FitResult out;
  out.names = {"sigma0_sq", "D"};
  out.method = "weighted linear regression";
  out.converged = true;
  out.params = Eigen::Vector2d(line.c0, 0.5 * line.c1);
  Eigen::Matrix2d tr = Eigen::Matrix2d::Identity();
  tr(1, 1) = 0.5;
  out.covariance = tr * line.cov * tr.transpose();
  out.residual_norm = std::sqrt(line.chi2);
  if (line.c0 < 0.0) out.flags.emplace_back("negative_intercept");
  return out;
}

FitResult fit_fringe_decay(std::span<const double> t, std::span<const double> amplitude,
                           DecayShape shape) {
  check_lengths(t.size(), amplitude.size());
  const std::size_t n = t.size();
  if (n < 3) throw DomainError("fringe decay fit needs >= 3 points");
  const double power = shape == DecayShape::exponential ? 1.0 : 2.0;
  // p = (amplitude, log T)
  LeastSquaresProblem prob;
  prob.n_data = n;
  prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(n));
    const double inv = std::exp(-p(1));
    for (std::size_t i = 0; i < n; ++i) {
      r(static_cast<Eigen::Index>(i)) = amplitude[i] - p(0) * std::exp(-std::pow(std::abs(t[i]) * inv, power));
    }
  };
  prob.jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& j) {
    j.resize(static_cast<Eigen::Index>(n), 2);
    const double inv = std::exp(-p(1));
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double x = std::pow(std::abs(t[i]) * inv, power);
      const double e = std::exp(-x);
      j(k, 0) = -e;
      j(k, 1) = -p(0) * e * power * x;
    }
  };
  const double tmax = *std::max_element(t.begin(), t.end());
  const double a0 = *std::max_element(amplitude.begin(), amplitude.end());
  if (!(tmax > 0.0) || !(a0 > 0.0)) throw DomainError("fringe decay fit needs positive data");
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d start(a0, std::log(tmax));
  for (int k = 0; k <= 200; ++k) {
    const Eigen::Vector2d p(a0, std::log(tmax) + std::log(1e-2) + std::log(1e4) * k / 200.0);
    const double c = sum_squares(prob, p);
    if (c < best) {
      best = c;
      start = p;
    }
  }
  FitResult raw = least_squares({"amplitude", "log_T"}, start, prob);
  FitResult out = raw;
  out.names = {"amplitude", "decay_time"};
  const double tt = std::exp(raw.params(1));
  out.params(1) = tt;
  Eigen::Matrix2d tr = Eigen::Matrix2d::Identity();
  tr(1, 1) = tt;
  out.covariance = tr * raw.covariance * tr.transpose();
  return out;
}

double sigma_from_fringe_decay(double decay_time, double omega_r) {
  if (!(decay_time > 0.0)) throw DomainError("decay time must be positive");
  if (!(omega_r > 0.0)) throw DomainError("omega_r must be positive");
  return 1.0 / (4.0 * omega_r * decay_time);
}

std::string format_uncertainty(double value, double uncertainty) {
  char buf[64];
  if (!(uncertainty > 0.0) || !std::isfinite(uncertainty)) {
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
  }
  int exponent = static_cast<int>(std::floor(std::log10(uncertainty)));
  const double lead = uncertainty / std::pow(10.0, exponent);
  // two digits when the leading digit is 1, as in 0.73(12)
  if (lead < 1.95) --exponent;
  const int decimals = std::max(0, -exponent);
  const double unit = std::pow(10.0, -decimals);
  const auto digits = static_cast<long long>(std::llround(uncertainty / unit));
  std::snprintf(buf, sizeof buf, "%.*f(%lld)", decimals, value, digits);
  return buf;
}

namespace {

std::string unit_of(std::string_view name, std::span<const ParameterUnit> units) {
  for (const auto& u : units)
    if (u.name == name) return u.unit;
  return "";
}

}  // namespace

void write_fit_csv(std::ostream& os, const FitResult& fit, std::span<const ParameterUnit> units) {
  os << "parameter,value,uncertainty,units\n";
  os.precision(12);
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    os << fit.names[i] << ',' << fit.params(static_cast<Eigen::Index>(i)) << ','
       << fit.uncertainty(fit.names[i]) << ',' << unit_of(fit.names[i], units) << '\n';
  }
}

std::string fit_report(const FitResult& fit, std::span<const ParameterUnit> units) {
  std::ostringstream os;
  os << "fit: " << fit.method << (fit.converged ? "" : " (not converged)") << ", "
     << fit.n_iter << " iterations, residual norm " << fit.residual_norm << '\n';
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const double v = fit.params(static_cast<Eigen::Index>(i));
    const double u = fit.uncertainty(fit.names[i]);
    os << "  " << fit.names[i] << " = " << format_uncertainty(v, u);
    const std::string unit = unit_of(fit.names[i], units);
    if (!unit.empty()) os << ' ' << unit;
    os << '\n';
  }
  for (const auto& f : fit.flags) os << "  flag: " << f << '\n';
  if (!fit.message.empty()) os << "  " << fit.message << '\n';
  return os.str();
}

}  // namespace rotor
