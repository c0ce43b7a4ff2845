#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ovs/errors.hpp"
#include "ovs/quadrature.hpp"
#include "ovs/signals.hpp"

namespace ovs {

/// LED emission law I(beta) = A cos(k beta) + c, k per radian.
struct EmissionFit {
  double amplitude = 4.113;
  double falloff = 0.0789 * 180.0 / std::numbers::pi;
  double offset = 4.227;

  double operator()(double beta) const { return amplitude * std::cos(falloff * beta) + offset; }
  bool operator==(const EmissionFit&) const = default;
};

struct EmissionSample {
  double intensity;
  bool extrapolated;  // |k beta| > pi: outside the measured lobe
};

inline EmissionSample emission_intensity(const EmissionFit& em, double beta) {
  return {em(beta), std::abs(em.falloff * beta) > std::numbers::pi};
}

/// Optical switch geometry, in the frame of the rotating blade: the blade is
/// the sector between polar angles 0 (leading edge) and theta_gnd, and the
/// spot centre sits at radius R0 and polar angle theta.
struct SpotGeometry {
  double r0 = 0.5;  // spot radius, mm
  double d = 2.0;   // LED to blade distance, mm
  double R0 = 6.0;  // rotation centre to spot centre, mm
  double theta_gnd = std::numbers::pi / 6.0;
  EmissionFit emission{};

  /// Half-angle the spot subtends from the rotation centre.
  double theta_max() const { return std::asin(r0 / R0); }

  void validate() const {
    if (!(r0 > 0.0) || !(d > 0.0) || !(R0 > 0.0)) throw GeometryError("spot geometry: lengths must be positive");
    if (!(r0 < R0)) throw GeometryError("spot geometry: r0 must be smaller than R0");
    if (!(theta_gnd > 0.0) || !(theta_gnd < std::numbers::pi))
      throw GeometryError("spot geometry: theta_gnd must lie in (0, pi)");
    if (!(r0 < R0 * std::sin(0.5 * theta_gnd))) {
      std::ostringstream os;
      os << "spot geometry: r0 = " << r0 << " mm is not below R0*sin(theta_gnd/2) = " << R0 * std::sin(0.5 * theta_gnd)
         << " mm; the large-spot regime (blade never fully covers the spot) is unsupported";
      throw GeometryError(os.str());
    }
    if (!(theta_gnd + theta_max() < std::numbers::pi))
      throw GeometryError("spot geometry: blade sector plus spot extent must stay below pi");
  }

  bool operator==(const SpotGeometry&) const = default;
};

namespace detail {

inline double wrap_pi(double theta) {
  double w = std::fmod(theta + std::numbers::pi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w - std::numbers::pi;
}

inline double wrap_two_pi(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

/// Angular measure of the circle of radius rho about the spot centre that
/// the blade covers. Exact: the circle is cut at its intersections with the
/// two edge lines, and each arc between cuts is tested once.
inline double blocked_arc(const SpotGeometry& g, double theta, double rho) {
  const double cx = g.R0 * std::cos(theta), cy = g.R0 * std::sin(theta);
  auto in_blade = [&](double psi) {
    const double px = cx + rho * std::cos(psi), py = cy + rho * std::sin(psi);
    const double ang = std::atan2(py, px);
    return ang >= 0.0 && ang <= g.theta_gnd;
  };

  std::array<double, 6> cuts{};
  std::size_t n = 0;
  for (double edge : {0.0, g.theta_gnd}) {
    const double h = g.R0 * std::sin(theta - edge);  // signed distance of centre from the edge line
    if (std::abs(h) < rho) {
      const double s = std::asin(-h / rho);
      cuts[n++] = wrap_two_pi(edge + s);
      cuts[n++] = wrap_two_pi(edge + std::numbers::pi - s);
    }
  }
  if (n == 0) return in_blade(0.0) ? kTwoPi : 0.0;

  std::sort(cuts.begin(), cuts.begin() + static_cast<std::ptrdiff_t>(n));
  double blocked = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = cuts[i];
    const double b = i + 1 < n ? cuts[i + 1] : cuts[0] + kTwoPi;
    if (b - a <= 0.0) continue;
    if (in_blade(0.5 * (a + b))) blocked += b - a;
  }
  return blocked;
}

}  // namespace detail

/// Intensity-weighted fraction of the LED spot not covered by the blade, at
/// spot angle theta (radians, wrapped to [-pi, pi)). Weight at distance r
/// from the spot centre is I(atan(r / d)).
inline double transmitted_fraction(const SpotGeometry& g, double theta, double tol = 1e-12) {
  g.validate();
  theta = detail::wrap_pi(theta);
  const double tm = g.theta_max();
  if (theta <= -tm || theta >= g.theta_gnd + tm) return 1.0;
  if (theta >= tm && theta <= g.theta_gnd - tm) return 0.0;

  auto weight = [&](double rho) { return g.emission(std::atan(rho / g.d)) * rho; };
  auto blocked = [&](double rho) { return rho > 0.0 ? weight(rho) * detail::blocked_arc(g, theta, rho) : 0.0; };

  // Split the radial integral where the circle starts to meet an edge line;
  // the integrand has a square-root kink there.
  std::vector<double> knots{0.0, g.r0};
  for (double edge : {0.0, g.theta_gnd}) {
    const double h = std::abs(g.R0 * std::sin(theta - edge));
    if (h > 0.0 && h < g.r0) knots.push_back(h);
  }
  std::sort(knots.begin(), knots.end());

  const double total = kTwoPi * detail::adaptive_simpson(weight, 0.0, g.r0, tol);
  double covered = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    covered += detail::adaptive_simpson(blocked, knots[i], knots[i + 1], tol);
  return std::clamp(1.0 - covered / total, 0.0, 1.0);
}

/// Photodiode signal as the blade turns at f_rot: theta(t) = 2 pi f_rot t
/// wrapped to [-pi, pi).
inline SampledSignal reference_waveform(const SpotGeometry& g, const TimeGrid& grid, double f_rot) {
  g.validate();
  if (!(f_rot > 0.0)) throw PreconditionError("reference_waveform: f_rot must be positive");
  double start = f_rot * grid.t0();
  start -= std::floor(start);
  auto angle = [](double cycles) {
    cycles -= std::floor(cycles);
    return detail::wrap_pi(kTwoPi * cycles);
  };

  std::vector<double> v(grid.n());
  if (const auto per = grid.samples_per_period(f_rot)) {
    // Integer samples per revolution: compute one revolution and tile it.
    const std::size_t p = std::min(*per, grid.n());
    for (std::size_t i = 0; i < p; ++i)
      v[i] = transmitted_fraction(g, angle(start + static_cast<double>(i) / static_cast<double>(*per)));
    for (std::size_t i = p; i < grid.n(); ++i) v[i] = v[i - p];
  } else {
    for (std::size_t i = 0; i < grid.n(); ++i) v[i] = transmitted_fraction(g, angle(f_rot * grid.time(i)));
  }
  return {grid, std::move(v)};
}

/// I(theta) = B cos(u theta + phi) + c2, fitted to a transition edge.
struct TrapezoidFit {
  double B = 0.0;
  double u = 0.0;
  double phi = 0.0;
  double c2 = 0.0;
  double residual_rms = 0.0;
  std::size_t samples = 0;

  double operator()(double theta) const { return B * std::cos(u * theta + phi) + c2; }
};

/// Parameters published for the appendix transmitted-intensity curve (raw
/// intensity units, not normalized).
inline TrapezoidFit published_trapezoid_fit() { return {2.653, -4.8316, 4.4065, 4.1773}; }

namespace detail {

struct LinearCosFit {
  double p, q, c, ss;
};

inline LinearCosFit fit_fixed_frequency(const std::vector<double>& tau, const std::vector<double>& y, double u) {
  Eigen::MatrixXd a(tau.size(), 3);
  Eigen::VectorXd b(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) {
    a(i, 0) = std::cos(u * tau[i]);
    a(i, 1) = std::sin(u * tau[i]);
    a(i, 2) = 1.0;
    b(i) = y[i];
  }
  const Eigen::Vector3d x = a.colPivHouseholderQr().solve(b);
  return {x(0), x(1), x(2), (a * x - b).squaredNorm()};
}

}  // namespace detail

/// Least-squares fit of B cos(u theta + phi) + c2 to the first complete
/// transition between the two plateaus of a reference waveform. theta is
/// the rotation angle in [-pi, pi) at the start of the transition.
/// Canonical result: B >= 0, u > 0, phi in [0, 2 pi).
inline TrapezoidFit fit_trapezoid_cosine(const SampledSignal& signal, double f_rot) {
  if (!(f_rot > 0.0)) throw PreconditionError("fit_trapezoid_cosine: f_rot must be positive");
  const auto vals = signal.values();
  const auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
  const double lo = *lo_it, hi = *hi_it, h = hi - lo;
  if (!(h > 0.0)) throw FitDomainError("fit_trapezoid_cosine: constant signal has no transition");
  const double eps = 1e-9 * h;
  auto interior = [&](double v) { return v > lo + eps && v < hi - eps; };

  // First run of interior samples bounded by opposite plateaus.
  std::size_t first = 0, last = 0;
  bool found = false;
  for (std::size_t i = 1; i + 1 < vals.size() && !found;) {
    if (!interior(vals[i]) || interior(vals[i - 1])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < vals.size() && interior(vals[j + 1])) ++j;
    if (j + 1 < vals.size()) {
      const bool before_hi = vals[i - 1] >= hi - eps, after_hi = vals[j + 1] >= hi - eps;
      if (before_hi != after_hi) {
        first = i;
        last = j;
        found = true;
      }
    }
    i = j + 1;
  }
  if (!found) throw FitDomainError("fit_trapezoid_cosine: no complete transition between plateaus");
  const std::size_t m = last - first + 1;
  if (m < 5) {
    std::ostringstream os;
    os << "fit_trapezoid_cosine: transition resolved by only " << m << " samples; need at least 5";
    throw FitDomainError(os.str());
  }

  double start_cycles = f_rot * signal.time(first);
  start_cycles -= std::floor(start_cycles);
  const double theta_first = detail::wrap_pi(kTwoPi * start_cycles);
  std::vector<double> theta(m), y(m);
  for (std::size_t k = 0; k < m; ++k) {
    theta[k] = theta_first + kTwoPi * f_rot * (signal.time(first + k) - signal.time(first));
    y[k] = vals[first + k];
  }
  const double centre = 0.5 * (theta.front() + theta.back());
  std::vector<double> tau(m);
  for (std::size_t k = 0; k < m; ++k) tau[k] = theta[k] - centre;

  // Variable projection over u: scan, then golden section.
  const double width = (theta.back() - theta.front()) * static_cast<double>(m + 1) / static_cast<double>(m - 1);
  const double u0 = std::numbers::pi / width;
  auto cost = [&](double u) { return detail::fit_fixed_frequency(tau, y, u).ss; };
  constexpr int kScan = 400;
  double best_u = u0, best = cost(u0);
  std::vector<double> grid_u(kScan);
  for (int s = 0; s < kScan; ++s) {
    grid_u[s] = u0 * std::pow(16.0, static_cast<double>(s) / (kScan - 1) - 0.5);
    const double c = cost(grid_u[s]);
    if (c < best) {
      best = c;
      best_u = grid_u[s];
    }
  }
  double a = best_u / std::pow(16.0, 1.0 / (kScan - 1)), b = best_u * std::pow(16.0, 1.0 / (kScan - 1));
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = cost(x1), f2 = cost(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-15 * b; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = cost(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = cost(x2);
    }
  }
  double u = 0.5 * (a + b);
  auto lin = detail::fit_fixed_frequency(tau, y, u);
  double p = lin.p, q = lin.q, c = lin.c, ss = lin.ss;

  // Gauss-Newton polish on (p, q, c, u).
  for (int it = 0; it < 50; ++it) {
    Eigen::MatrixXd jac(m, 4);
    Eigen::VectorXd r(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double cs = std::cos(u * tau[k]), sn = std::sin(u * tau[k]);
      jac(k, 0) = cs;
      jac(k, 1) = sn;
      jac(k, 2) = 1.0;
      jac(k, 3) = tau[k] * (-p * sn + q * cs);
      r(k) = y[k] - (p * cs + q * sn + c);
    }
    const Eigen::Vector4d step = jac.colPivHouseholderQr().solve(r);
    double scale = 1.0;
    bool improved = false;
    for (int half = 0; half < 30; ++half, scale *= 0.5) {
      const double np = p + scale * step(0), nq = q + scale * step(1), nc = c + scale * step(2),
                   nu = u + scale * step(3);
      double nss = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double e = y[k] - (np * std::cos(nu * tau[k]) + nq * std::sin(nu * tau[k]) + nc);
        nss += e * e;
      }
      if (nss <= ss) {
        improved = nss < ss;
        p = np, q = nq, c = nc, u = nu, ss = nss;
        break;
      }
    }
    if (!improved || step.norm() < 1e-15) break;
  }

  // p cos(u tau) + q sin(u tau) = B cos(u tau + phi_local)
  TrapezoidFit fit;
  fit.B = std::hypot(p, q);
  fit.u = u;
  fit.phi = std::atan2(-q, p) - u * centre;
  fit.c2 = c;
  if (fit.u < 0.0) {
    fit.u = -fit.u;
    fit.phi = -fit.phi;
  }
  fit.phi = detail::wrap_two_pi(fit.phi);
  fit.residual_rms = std::sqrt(ss / static_cast<double>(m));
  fit.samples = m;
  return fit;
}

/// Mean spacing of downward crossings of lo + threshold*(hi - lo), with
/// linear interpolation between samples.
inline double detect_period(const SampledSignal& signal, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw PreconditionError("detect_period: threshold must lie in (0, 1)");
  const auto v = signal.values();
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double level = *lo_it + threshold * (*hi_it - *lo_it);
  std::vector<double> crossings;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i - 1] >= level && v[i] < level) {
      const double frac = (v[i - 1] - level) / (v[i - 1] - v[i]);
      crossings.push_back(signal.time(i - 1) + frac * signal.grid().dt());
    }
  }
  if (crossings.size() < 2) {
    std::ostringstream os;
    os << "detect_period: found " << crossings.size() << " downward crossing(s), need at least 2";
    throw DetectionError(os.str());
  }
  return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

enum class RefKind { square, sine };

inline std::string_view to_string(RefKind k) { return k == RefKind::square ? "square" : "sine"; }

/// Zero-DC demodulation reference at f = 1/period, delayed by `phase`
/// (radians of the fundamental): R(t) = R0(t - phase / (2 pi f)).
/// sine:   R0 = cos(2 pi f t)
/// square: R0 = sign(cos(2 pi f t)), odd harmonics through l.
inline HarmonicSeries synth_demod_reference(double period, RefKind kind, std::size_t l, double phase) {
  if (!(period > 0.0)) throw PreconditionError("synth_demod_reference: period must be positive");
  if (l < 1) throw PreconditionError("synth_demod_reference: need at least one harmonic");
  const std::size_t count = kind == RefKind::sine ? 1 : l;
  std::vector<double> a(count, 0.0), b(count, 0.0);
  for (std::size_t j = 1; j <= count; ++j) {
    double amp = 0.0;
    if (kind == RefKind::sine) {
      amp = 1.0;
    } else if (j % 2 == 1) {
      amp = 4.0 / (std::numbers::pi * static_cast<double>(j));
      if ((j / 2) % 2 == 1) amp = -amp;
    }
    const double jp = static_cast<double>(j) * phase;
    a[j - 1] = amp * std::cos(jp);
    b[j - 1] = amp * std::sin(jp);
  }
  return {1.0 / period, 0.0, std::move(a), std::move(b)};
}

}  // namespace ovs
