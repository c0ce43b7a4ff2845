#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ovs/errors.hpp"

namespace ovs {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Returns round(x) when x is within `tol` (relative) of a positive integer.
inline std::optional<std::size_t> integer_ratio(double x, double tol = 1e-9) {
  if (!std::isfinite(x) || x < 0.5) return std::nullopt;
  const double r = std::round(x);
  if (std::abs(x - r) > tol * std::max(1.0, r)) return std::nullopt;
  return static_cast<std::size_t>(r);
}

/// Uniform sampling grid. Sample times are always t0 + i*dt; no time
/// array is stored.
class TimeGrid {
 public:
  TimeGrid(double dt, std::size_t n, double t0 = 0.0) : dt_(dt), n_(n), t0_(t0) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("TimeGrid: dt must be positive and finite");
    if (n < 1) throw PreconditionError("TimeGrid: n must be at least 1");
    if (!std::isfinite(t0)) throw PreconditionError("TimeGrid: t0 must be finite");
  }

  double dt() const { return dt_; }
  std::size_t n() const { return n_; }
  double t0() const { return t0_; }
  double time(std::size_t i) const { return t0_ + static_cast<double>(i) * dt_; }
  double sample_rate() const { return 1.0 / dt_; }
  /// Time covered when each sample stands for one dt.
  double duration() const { return static_cast<double>(n_) * dt_; }

  /// Samples per period of `f`, if that is an integer.
  std::optional<std::size_t> samples_per_period(double f) const { return integer_ratio(1.0 / (f * dt_)); }

  bool operator==(const TimeGrid&) const = default;

 private:
  double dt_;
  std::size_t n_;
  double t0_;
};

/// Grids compare equal within a relative tolerance on dt and t0.
inline bool same_grid(const TimeGrid& a, const TimeGrid& b, double tol = 1e-12) {
  if (a.n() != b.n()) return false;
  if (std::abs(a.dt() - b.dt()) > tol * a.dt()) return false;
  return std::abs(a.t0() - b.t0()) <= tol * std::max({1.0, std::abs(a.t0()), a.dt()});
}

inline void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
  if (!same_grid(a, b)) throw GridMismatchError(std::string(what) + ": signals are on different grids");
}

class SampledSignal {
 public:
  SampledSignal(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.n()) throw PreconditionError("SampledSignal: value count does not match grid");
    for (double v : values_) {
      if (!std::isfinite(v)) throw PreconditionError("SampledSignal: non-finite value");
    }
  }

  const TimeGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double time(std::size_t i) const { return grid_.time(i); }

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

/// dc + sum_j a_j cos(2 pi j f t) + b_j sin(2 pi j f t), j = 1..l.
class HarmonicSeries {
 public:
  HarmonicSeries(double f_fund, double dc, std::vector<double> cos_coeffs, std::vector<double> sin_coeffs)
      : f_fund_(f_fund), dc_(dc), cos_(std::move(cos_coeffs)), sin_(std::move(sin_coeffs)) {
    if (!(f_fund_ > 0.0) || !std::isfinite(f_fund_)) throw PreconditionError("HarmonicSeries: f_fund must be positive");
    if (cos_.size() != sin_.size() || cos_.empty())
      throw PreconditionError("HarmonicSeries: cos/sin coefficient vectors must have equal length >= 1");
    if (!std::isfinite(dc_)) throw PreconditionError("HarmonicSeries: non-finite dc");
    for (std::size_t j = 0; j < cos_.size(); ++j) {
      if (!std::isfinite(cos_[j]) || !std::isfinite(sin_[j]))
        throw PreconditionError("HarmonicSeries: non-finite coefficient");
    }
  }

  double f_fund() const { return f_fund_; }
  double period() const { return 1.0 / f_fund_; }
  double dc() const { return dc_; }
  std::size_t harmonics() const { return cos_.size(); }
  const std::vector<double>& cos_coeffs() const { return cos_; }
  const std::vector<double>& sin_coeffs() const { return sin_; }

  double operator()(double t) const {
    // Reduce to one period first so t and t + T evaluate identically.
    double cycles = f_fund_ * t;
    cycles -= std::floor(cycles);
    return eval_at_phase(kTwoPi * cycles);
  }

  /// Evaluates at fundamental phase `theta` (radians).
  double eval_at_phase(double theta) const {
    double v = dc_;
    for (std::size_t j = 0; j < cos_.size(); ++j) {
      const double a = static_cast<double>(j + 1) * theta;
      v += cos_[j] * std::cos(a) + sin_[j] * std::sin(a);
    }
    return v;
  }

 private:
  double f_fund_;
  double dc_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

inline SampledSignal synth(const HarmonicSeries& series, const TimeGrid& grid) {
  std::vector<double> v(grid.n());
  for (std::size_t i = 0; i < grid.n(); ++i) v[i] = series(grid.time(i));
  return {grid, std::move(v)};
}

/// Samples an arbitrary callable f(t) on a grid.
template <typename F>
SampledSignal sample(const TimeGrid& grid, F&& f) {
  std::vector<double> v(grid.n());
  for (std::size_t i = 0; i < grid.n(); ++i) v[i] = f(grid.time(i));
  return {grid, std::move(v)};
}

struct HarmonicFit {
  HarmonicSeries series;
  double residual_rms;
  std::size_t periods;       // whole periods used
  std::size_t samples_used;  // leading samples covering those periods
};

/// Least-squares harmonic fit over the largest whole number of periods the
/// signal covers.
inline HarmonicFit fit_harmonics(const SampledSignal& signal, double f_fund, std::size_t l) {
  if (!(f_fund > 0.0)) throw PreconditionError("fit_harmonics: f_fund must be positive");
  if (l < 1) throw PreconditionError("fit_harmonics: need at least one harmonic");
  const TimeGrid& g = signal.grid();
  const double covered = g.duration() * f_fund;
  const auto periods = static_cast<std::size_t>(std::floor(covered + 1e-9));
  if (periods < 1) {
    std::ostringstream os;
    os << "fit_harmonics: signal covers " << covered << " periods, need at least one";
    throw SpanTooShortError(os.str());
  }
  const double t_end = g.t0() + static_cast<double>(periods) / f_fund;
  std::size_t m = 0;
  while (m < g.n() && g.time(m) < t_end - 1e-9 * g.dt()) ++m;

  const std::size_t unknowns = 2 * l + 1;
  if (m < unknowns || m / periods < unknowns) {
    std::ostringstream os;
    os << "fit_harmonics: " << m << " samples over " << periods << " period(s) cannot determine " << unknowns
       << " coefficients; lengthen the window or sample faster";
    throw SpanTooShortError(os.str());
  }

  Eigen::MatrixXd design(m, unknowns);
  Eigen::VectorXd rhs(m);
  for (std::size_t i = 0; i < m; ++i) {
    double cycles = f_fund * g.time(i);
    cycles -= std::floor(cycles);
    const double theta = kTwoPi * cycles;
    design(i, 0) = 1.0;
    for (std::size_t j = 1; j <= l; ++j) {
      design(i, 2 * j - 1) = std::cos(static_cast<double>(j) * theta);
      design(i, 2 * j) = std::sin(static_cast<double>(j) * theta);
    }
    rhs(i) = signal[i];
  }
  const Eigen::VectorXd x = design.colPivHouseholderQr().solve(rhs);
  const Eigen::VectorXd resid = design * x - rhs;

  std::vector<double> a(l), b(l);
  for (std::size_t j = 1; j <= l; ++j) {
    a[j - 1] = x(2 * j - 1);
    b[j - 1] = x(2 * j);
  }
  return {HarmonicSeries(f_fund, x(0), std::move(a), std::move(b)),
          std::sqrt(resid.squaredNorm() / static_cast<double>(m)), periods, m};
}

/// Output of a windowed integral. Samples before `valid_from` integrate
/// from the grid start only (the delayed branch has not filled yet) and do
/// not represent a full window.
struct WindowedSignal {
  SampledSignal signal;
  std::size_t valid_from;
};

/// Integral over the trailing `window` seconds at every sample, realized as
/// the difference of a trapezoidal running integral and its copy delayed
/// by window/dt samples.
inline WindowedSignal moving_integral(const SampledSignal& signal, double window) {
  const TimeGrid& g = signal.grid();
  const auto w = integer_ratio(window / g.dt());
  if (!w) {
    std::ostringstream os;
    os << "moving_integral: window " << window << " s is not an integer multiple of dt " << g.dt() << " s";
    throw PreconditionError(os.str());
  }
  if (*w > g.n() - 1) throw PreconditionError("moving_integral: window longer than signal span");

  const std::size_t n = g.n();
  const double half_dt = 0.5 * g.dt();
  std::vector<double> running(n);
  running[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) running[i] = running[i - 1] + half_dt * (signal[i - 1] + signal[i]);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i >= *w ? running[i] - running[i - *w] : running[i];
  return {SampledSignal(g, std::move(out)), *w};
}

/// Index of the first sample whose modulation phase 2*pi*f_m*t is nearest
/// to `phase`, for a grid with an integer number of samples per period.
inline std::size_t phase_offset_index(const TimeGrid& g, double f_m, double phase, std::size_t per_period) {
  double frac = phase / kTwoPi - f_m * g.t0();
  frac -= std::floor(frac);
  auto k0 = static_cast<std::size_t>(std::llround(frac * static_cast<double>(per_period)));
  return k0 % per_period;
}

/// Keeps one sample per modulation period: the one nearest `phase`.
inline SampledSignal downsample_at_phase(const SampledSignal& signal, double f_m, double phase) {
  const TimeGrid& g = signal.grid();
  if (!(f_m > 0.0)) throw PreconditionError("downsample_at_phase: f_m must be positive");
  const auto per = g.samples_per_period(f_m);
  if (!per) {
    std::ostringstream os;
    os << "downsample_at_phase: sample rate " << g.sample_rate() << " Hz is not an integer multiple of " << f_m
       << " Hz";
    throw PreconditionError(os.str());
  }
  const std::size_t k0 = phase_offset_index(g, f_m, phase, *per);
  if (k0 >= g.n()) throw PreconditionError("downsample_at_phase: signal shorter than one modulation period");

  std::vector<double> v;
  v.reserve(g.n() / *per + 1);
  for (std::size_t i = k0; i < g.n(); i += *per) v.push_back(signal[i]);
  const TimeGrid out(static_cast<double>(*per) * g.dt(), v.size(), g.time(k0));
  return {out, std::move(v)};
}

inline double rms_error(const SampledSignal& a, const SampledSignal& b) {
  require_same_grid(a.grid(), b.grid(), "rms_error");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

inline double rms(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return v.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace ovs
