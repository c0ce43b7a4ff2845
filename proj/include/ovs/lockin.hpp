#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ovs/errors.hpp"
#include "ovs/signals.hpp"

namespace ovs {

enum class Channel { even, odd };

inline std::string_view to_string(Channel c) { return c == Channel::even ? "even" : "odd"; }

/// Reference split into its cosine part (in-phase channel) and sine part
/// (quadrature channel). Both carry zero DC.
struct DemodReference {
  HarmonicSeries even;
  HarmonicSeries odd;
  double f_m;

  const HarmonicSeries& channel(Channel c) const { return c == Channel::even ? even : odd; }
};

inline DemodReference split_even_odd(const HarmonicSeries& r) {
  const std::vector<double> zeros(r.harmonics(), 0.0);
  return {HarmonicSeries(r.f_fund(), 0.0, r.cos_coeffs(), zeros),
          HarmonicSeries(r.f_fund(), 0.0, zeros, r.sin_coeffs()), r.f_fund()};
}

inline SampledSignal modulate(const SampledSignal& s, const SampledSignal& m) {
  require_same_grid(s.grid(), m.grid(), "modulate");
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s[i] * m[i];
  return {s.grid(), std::move(v)};
}

struct DemodGain {
  double g_even = 0.0;
  double g_odd = 0.0;
  double floor = 1e-9;

  double channel(Channel c) const { return c == Channel::even ? g_even : g_odd; }
  bool usable(Channel c) const { return std::abs(channel(c)) > floor; }
};

namespace detail {

inline void require_shared_fundamental(const HarmonicSeries& m, const DemodReference& ref, const char* what) {
  const double tol = 1e-12 * m.f_fund();
  if (std::abs(m.f_fund() - ref.f_m) > tol || std::abs(ref.even.f_fund() - ref.f_m) > tol ||
      std::abs(ref.odd.f_fund() - ref.f_m) > tol)
    throw PreconditionError(std::string(what) + ": modulation and reference fundamentals differ");
}

inline void require_usable(const DemodGain& g, const char* what) {
  if (!g.usable(Channel::even) && !g.usable(Channel::odd)) {
    std::ostringstream os;
    os << what << ": both channel gains (" << g.g_even << ", " << g.g_odd << ") are below the floor " << g.floor;
    throw UnusableReferenceError(os.str());
  }
}

/// (2/T) * integral over one period of a(t) b(t), by the rectangle rule on
/// enough points to be exact for the product's bandwidth.
inline double period_projection(const HarmonicSeries& a, const HarmonicSeries& b) {
  const std::size_t n = std::max<std::size_t>(64, 4 * (a.harmonics() + b.harmonics()) + 4);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
    acc += a.eval_at_phase(theta) * b.eval_at_phase(theta);
  }
  return 2.0 * acc / static_cast<double>(n);
}

}  // namespace detail

/// Gain from the numeric period integral (2/T) * int M(t) R_channel(t) dt.
/// Exact under any common delay between modulation and reference.
inline DemodGain calibrate_gain(const HarmonicSeries& m, const DemodReference& ref, double floor = 1e-9) {
  detail::require_shared_fundamental(m, ref, "calibrate_gain");
  DemodGain g{detail::period_projection(m, ref.even), detail::period_projection(m, ref.odd), floor};
  detail::require_usable(g, "calibrate_gain");
  return g;
}

/// Gain as coefficient dot products over the common harmonics, checked
/// against the numeric calibration.
inline DemodGain demod_gain(const HarmonicSeries& m, const DemodReference& ref, double floor = 1e-9) {
  detail::require_shared_fundamental(m, ref, "demod_gain");
  DemodGain g{0.0, 0.0, floor};
  const std::size_t l = std::min(m.harmonics(), ref.even.harmonics());
  for (std::size_t j = 0; j < l; ++j) g.g_even += m.cos_coeffs()[j] * ref.even.cos_coeffs()[j];
  const std::size_t lo = std::min(m.harmonics(), ref.odd.harmonics());
  for (std::size_t j = 0; j < lo; ++j) g.g_odd += m.sin_coeffs()[j] * ref.odd.sin_coeffs()[j];

  const double ne = detail::period_projection(m, ref.even), no = detail::period_projection(m, ref.odd);
  if (std::abs(ne - g.g_even) > 1e-9 * (1.0 + std::abs(ne)) || std::abs(no - g.g_odd) > 1e-9 * (1.0 + std::abs(no)))
    throw std::logic_error("demod_gain: symbolic and numeric gains disagree");
  detail::require_usable(g, "demod_gain");
  return g;
}

/// Restored signal. Timestamps are the window ends; each value describes
/// the window centred `group_delay` earlier.
struct Demodulated {
  SampledSignal signal;
  std::size_t valid_from;
  double group_delay;
};

/// S(t) ~= (2/T) * int_{t-T}^{t} S_m R_channel dt / g_channel.
inline Demodulated demodulate(const SampledSignal& s_m, const DemodReference& ref, const DemodGain& gain,
                              Channel channel) {
  if (!gain.usable(channel)) {
    std::ostringstream os;
    os << "demodulate: " << to_string(channel) << " channel gain " << gain.channel(channel) << " is below the floor "
       << gain.floor;
    throw UnusableReferenceError(os.str());
  }
  const TimeGrid& g = s_m.grid();
  const auto per = g.samples_per_period(ref.f_m);
  if (!per) {
    std::ostringstream os;
    os << "demodulate: sample rate " << g.sample_rate() << " Hz is not an integer multiple of f_m = " << ref.f_m
       << " Hz";
    throw PreconditionError(os.str());
  }
  const double period = static_cast<double>(*per) * g.dt();
  const SampledSignal r = synth(ref.channel(channel), g);
  const WindowedSignal integ = moving_integral(modulate(s_m, r), period);
  const double scale = 2.0 / (period * gain.channel(channel));
  std::vector<double> v(g.n());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = scale * integ.signal[i];
  return {SampledSignal(g, std::move(v)), integ.valid_from, 0.5 * period};
}

struct HarmonicOutput {
  std::size_t index;
  double X;
  double Y;
  double magnitude;
  double phase;  // atan2(Y, X)
};

/// Mean of the valid part of a demodulated channel.
inline double recovered_level(const Demodulated& d) {
  const auto v = d.signal.values();
  double acc = 0.0;
  for (std::size_t i = d.valid_from; i < v.size(); ++i) acc += v[i];
  return acc / static_cast<double>(v.size() - d.valid_from);
}

/// X^i = m_x^i * S (in-phase recovery), Y^i = m_y^i * S (quadrature
/// recovery). A channel whose gain is below the floor borrows the other
/// channel's S.
inline HarmonicOutput harmonic_outputs(const SampledSignal& s_m, const HarmonicSeries& m, const DemodReference& ref,
                                       const DemodGain& gain, std::size_t i) {
  if (i < 1 || i > m.harmonics()) throw PreconditionError("harmonic_outputs: harmonic index out of range");
  detail::require_usable(gain, "harmonic_outputs");
  const bool even_ok = gain.usable(Channel::even), odd_ok = gain.usable(Channel::odd);
  const double s_even = even_ok ? recovered_level(demodulate(s_m, ref, gain, Channel::even)) : 0.0;
  const double s_odd = odd_ok ? recovered_level(demodulate(s_m, ref, gain, Channel::odd)) : s_even;
  const double x = m.cos_coeffs()[i - 1] * (even_ok ? s_even : s_odd);
  const double y = m.sin_coeffs()[i - 1] * s_odd;
  return {i, x, y, std::hypot(x, y), std::atan2(y, x)};
}

inline std::vector<HarmonicOutput> harmonic_table(const SampledSignal& s_m, const HarmonicSeries& m,
                                                  const DemodReference& ref, const DemodGain& gain) {
  std::vector<HarmonicOutput> out;
  for (std::size_t i = 1; i <= m.harmonics(); ++i) out.push_back(harmonic_outputs(s_m, m, ref, gain, i));
  return out;
}

}  // namespace ovs
