#include "rotor/noise.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <ostream>
#include <random>

#include "rotor/errors.hpp"

namespace rotor {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// |1 - a1 z^-1 - a2 z^-2|^2 at z = exp(i omega dt)
double transfer_denominator(const Resonator& r, double omega, double dt) {
  const cplx z1 = std::polar(1.0, -omega * dt);
  const cplx a = 1.0 - r.a1 * z1 - r.a2 * z1 * z1;
  return std::norm(a);
}

}  // namespace

void NoiseSpec::validate() const {
  if (!(fwhm_khz > 0.0)) throw DomainError("noise fwhm must be positive");
  if (!(center_khz >= 0.0)) throw DomainError("noise center frequency must be >= 0");
  if (!(dt > 0.0)) throw DomainError("noise dt must be positive");
  if (dt > max_dt() * (1.0 + 1e-12)) {
    throw DomainError("noise dt " + std::to_string(dt) + " ms does not resolve the band (max " +
                      std::to_string(max_dt()) + " ms)");
  }
}

Resonator resonator(const NoiseSpec& spec) {
  const double r = std::exp(-kPi * spec.fwhm_khz * spec.dt);
  const double theta = kTwoPi * spec.center_khz * spec.dt;
  return {2.0 * r * std::cos(theta), -r * r};
}

double drive_sigma(const NoiseSpec& spec) {
  const Resonator res = resonator(spec);
  auto sigma_for_psd = [&](double target, double omega) {
    if (target < 0.0) throw DomainError("PSD target must be >= 0");
    return std::sqrt(target * transfer_denominator(res, omega, spec.dt) / spec.dt);
  };
  return std::visit(
      [&](const auto& a) -> double {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, DriveSigma>) {
          if (a.sigma < 0.0) throw DomainError("drive sigma must be >= 0");
          return a.sigma;
        } else if constexpr (std::is_same_v<T, PeakPsd>) {
          return sigma_for_psd(a.value, khz_to_rad_per_ms(spec.center_khz));
        } else {
          if (a.diffusion < 0.0) throw DomainError("target D must be >= 0");
          if (a.diffusion == 0.0) return 0.0;
          if (a.kappa == 0.0) throw DomainError("kappa = 0 cannot produce a nonzero D");
          return sigma_for_psd(a.diffusion / (4.0 * a.kappa * a.kappa), 2.0 * a.omega_rot);
        }
      },
      spec.amplitude);
}

double analytic_psd(const NoiseSpec& spec, double omega) {
  const double s = drive_sigma(spec);
  return s * s * spec.dt / transfer_denominator(resonator(spec), omega, spec.dt);
}

double analytic_variance(const NoiseSpec& spec) {
  const Resonator r = resonator(spec);
  const double s = drive_sigma(spec);
  const double a1 = r.a1, a2 = r.a2;
  // Stationary AR(2) variance.
  return s * s * (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) * (1.0 - a2) - a1 * a1));
}

NoiseSpec calibrate(const NoiseSpec& spec) {
  NoiseSpec out = spec;
  out.amplitude = DriveSigma{drive_sigma(spec)};
  return out;
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

NoiseTrajectory generate(const NoiseSpec& spec, double duration, std::uint64_t stream) {
  spec.validate();
  if (!(duration >= 0.0)) throw DomainError("duration must be >= 0");
  NoiseTrajectory traj;
  traj.dt = spec.dt;
  traj.duration = duration;
  traj.spec = spec;
  if (duration < 10.0 / spec.fwhm_khz) {
    traj.warnings.emplace_back("InsufficientLengthWarning: duration shorter than 10/fwhm, PSD poorly resolved");
  }
  const auto n = static_cast<std::size_t>(std::floor(duration / spec.dt + 1e-9)) + 1;
  traj.samples.assign(n, cplx{});
  const double sigma = drive_sigma(spec);
  if (sigma == 0.0) return traj;

  const Resonator r = resonator(spec);
  std::mt19937_64 rng(substream_seed(spec.seed, stream));
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto burn_in = static_cast<std::size_t>(std::ceil(20.0 / (kPi * spec.fwhm_khz * spec.dt)));
  double v1 = 0.0, v2 = 0.0;
  for (std::size_t i = 0; i < burn_in; ++i) {
    const double v = r.a1 * v1 + r.a2 * v2 + sigma * normal(rng);
    v2 = v1;
    v1 = v;
  }
  const cplx phase = std::polar(1.0, spec.fixed_phase);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = r.a1 * v1 + r.a2 * v2 + sigma * normal(rng);
    v2 = v1;
    v1 = v;
    traj.samples[i] = phase * v;
  }
  return traj;
}

double Psd::at(double w) const {
  if (omega.empty() || w < omega.front() || w > omega.back()) {
    throw RangeError("frequency " + std::to_string(w) + " rad/ms outside PSD support");
  }
  const auto it = std::upper_bound(omega.begin(), omega.end(), w);
  if (it == omega.end()) return density.back();
  const auto hi = static_cast<std::size_t>(it - omega.begin());
  const std::size_t lo = hi - 1;
  const double f = (w - omega[lo]) / (omega[hi] - omega[lo]);
  return density[lo] + f * (density[hi] - density[lo]);
}

double Psd::integrated_power() const {
  double s = 0.0;
  for (double d : density) s += d;
  return s * resolution / kTwoPi;
}

Psd estimate_psd(std::span<const cplx> samples, double dt, std::size_t segment_length) {
  const std::size_t n = samples.size();
  std::size_t len = segment_length;
  if (len == 0) len = (2 * n) / 9;
  if (len < 8) throw InsufficientLengthError("too few samples for a Welch estimate");
  const std::size_t hop = len / 2;
  if (n < len) throw InsufficientLengthError("segment longer than the input");
  const std::size_t segments = (n - len) / hop + 1;
  if (segments < 8) {
    throw InsufficientLengthError("Welch estimate needs >= 8 segments, got " +
                                  std::to_string(segments));
  }

  std::vector<double> window(len);
  double wsum2 = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(len)));
    wsum2 += window[i] * window[i];
  }

  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * len));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    // Backward transform: X_k = sum_n x_n exp(+2 pi i k n / L), matching the
    // exp(+i omega tau) convention of S(omega).
    plan = fftw_plan_dft_1d(static_cast<int>(len), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  std::vector<double> acc(len, 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t off = s * hop;
    for (std::size_t i = 0; i < len; ++i) {
      const cplx v = samples[off + i] * window[i];
      buf[i][0] = v.real();
      buf[i][1] = v.imag();
    }
    fftw_execute(plan);
    for (std::size_t i = 0; i < len; ++i) acc[i] += buf[i][0] * buf[i][0] + buf[i][1] * buf[i][1];
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);

  Psd psd;
  psd.segments = segments;
  psd.resolution = kTwoPi / (static_cast<double>(len) * dt);
  psd.omega.resize(len);
  psd.density.resize(len);
  const double norm = dt / (wsum2 * static_cast<double>(segments));
  const auto half = static_cast<std::ptrdiff_t>(len / 2);
  for (std::size_t j = 0; j < len; ++j) {
    const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(j) - half;  // -L/2 .. L/2-1
    const auto bin = static_cast<std::size_t>((k + static_cast<std::ptrdiff_t>(len)) %
                                              static_cast<std::ptrdiff_t>(len));
    psd.omega[j] = psd.resolution * static_cast<double>(k);
    psd.density[j] = acc[bin] * norm;
  }
  return psd;
}

Psd estimate_psd(const NoiseTrajectory& traj, std::size_t segment_length) {
  return estimate_psd(traj.samples, traj.dt, segment_length);
}

double diffusion_from_psd(const Psd& psd, double omega_rot, double kappa) {
  return 4.0 * kappa * kappa * psd.at(2.0 * omega_rot);
}

void write_psd_csv(std::ostream& os, const Psd& psd) {
  os << "omega_rad_per_ms,S_eps\n";
  os.precision(12);
  for (std::size_t i = 0; i < psd.omega.size(); ++i) os << psd.omega[i] << ',' << psd.density[i] << '\n';
}

void write_trajectory_csv(std::ostream& os, const NoiseTrajectory& traj) {
  os << "t_ms,re_eps,im_eps\n";
  os.precision(12);
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    os << traj.time(i) << ',' << traj.samples[i].real() << ',' << traj.samples[i].imag() << '\n';
  }
}

}  // namespace rotor
