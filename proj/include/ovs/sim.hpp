#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string_view>
#include <vector>

#include "ovs/errors.hpp"
#include "ovs/lockin.hpp"
#include "ovs/modulation.hpp"
#include "ovs/reference.hpp"
#include "ovs/signals.hpp"

namespace ovs {

enum class NoiseKind { step, sine, none };

inline std::string_view to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::step: return "step";
    case NoiseKind::sine: return "sine";
    default: return "none";
  }
}

/// Additive disturbance. `rate_or_freq` is the mean switching rate for
/// step noise and the frequency for sine noise.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::step;
  double amplitude = 10.0;
  double rate_or_freq = 500.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw ConfigError("noise.amplitude must be >= 0");
    if (kind != NoiseKind::none && !(rate_or_freq > 0.0)) throw ConfigError("noise.rate_or_freq must be positive");
  }

  bool operator==(const NoiseSpec&) const = default;
};

namespace detail {

// Portable transforms of mt19937_64 output (the engine itself is fully
// specified; the std distributions are not).
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double exponential(std::mt19937_64& rng, double rate) { return -std::log1p(-unit_uniform(rng)) / rate; }

}  // namespace detail

inline SampledSignal gen_noise(const NoiseSpec& spec, const TimeGrid& grid) {
  spec.validate();
  std::vector<double> v(grid.n(), 0.0);
  switch (spec.kind) {
    case NoiseKind::none:
      break;
    case NoiseKind::sine:
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = spec.amplitude * std::sin(kTwoPi * spec.rate_or_freq * grid.time(i));
      break;
    case NoiseKind::step: {
      std::mt19937_64 rng(spec.seed);
      auto level = [&] { return spec.amplitude * (2.0 * detail::unit_uniform(rng) - 1.0); };
      double current = level();
      double next_switch = grid.t0() + detail::exponential(rng, spec.rate_or_freq);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = grid.time(i);
        while (t >= next_switch) {
          current = level();
          next_switch += detail::exponential(rng, spec.rate_or_freq);
        }
        v[i] = current;
      }
      break;
    }
  }
  return {grid, std::move(v)};
}

/// Indices i where a piecewise-constant signal changes level (value[i] !=
/// value[i-1]).
inline std::vector<std::size_t> level_changes(const SampledSignal& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] != s[i - 1]) out.push_back(i);
  return out;
}

struct SimConfig {
  double dt = 2e-6;
  double duration = 0.03;
  double f_m = 2500.0;
  double signal_freq = 50.0;
  double signal_amp = 1.0;
  RefKind ref_kind = RefKind::square;
  double ref_phase_delay = std::numbers::pi / 6.0;
  NoiseSpec noise{};
  double downsample_phase = 0.0;
  ModulationFit modulation{};
  std::size_t ref_harmonics = 7;

  std::size_t samples_per_period() const {
    const auto p = integer_ratio(1.0 / (f_m * dt));
    if (!p) throw PreconditionError("sim config: 1/(f_m*dt) must be a positive integer");
    return *p;
  }
  std::size_t sample_count() const {
    const auto n = integer_ratio(duration / dt);
    if (!n) throw PreconditionError("sim config: duration/dt must be a positive integer");
    return *n;
  }

  void validate() const {
    if (!(dt > 0.0) || !(duration > 0.0) || !(f_m > 0.0) || !(signal_freq > 0.0))
      throw ConfigError("sim config: dt, duration, f_m and signal_freq must be positive");
    if (!std::isfinite(signal_amp) || !std::isfinite(ref_phase_delay) || !std::isfinite(downsample_phase))
      throw ConfigError("sim config: non-finite parameter");
    if (ref_harmonics < 1) throw ConfigError("sim config: ref_harmonics must be >= 1");
    noise.validate();
    const std::size_t per = samples_per_period();
    if (sample_count() <= per) throw PreconditionError("sim config: duration must exceed one modulation period");
  }

  bool operator==(const SimConfig&) const = default;
};

struct SimMetrics {
  double rms_error_full = 0.0;           // all valid samples, spikes included
  double rms_error_downsampled = 0.0;    // valid retained samples outside spike windows
  double max_deviation_outside_spikes = 0.0;  // full rate
  double noise_to_signal_rms = 0.0;      // rms(N) / rms(S*M)
  double effective_bandwidth_hz = 0.0;   // f_m / 2
  double signal_amplitude = 0.0;
  double gain_even = 0.0;
  double gain_odd = 0.0;
  double raw_gain_ratio = 0.0;           // calibrated / phase-unaware gain
  double group_delay = 0.0;
  std::size_t valid_from = 0;            // first valid full-rate sample
  std::size_t downsample_offset = 0;     // full-rate index of retained sample 0
  std::vector<std::size_t> spike_windows;  // retained-sample indices whose window holds a step
};

struct SimResult {
  SampledSignal original;
  SampledSignal noise;
  SampledSignal modulated;
  SampledSignal modulated_noisy;
  SampledSignal restored_full;
  SampledSignal restored_downsampled;
  SampledSignal restored_raw;  // full reference, gain ignoring the reference delay
  SimMetrics metrics;
};

/// Full-rate samples i whose trailing window (i - w, i] contains one of the
/// level changes, as a mask.
inline std::vector<bool> spike_mask(std::size_t n, std::size_t window, const std::vector<std::size_t>& changes) {
  std::vector<bool> mask(n, false);
  for (std::size_t j : changes)
    for (std::size_t i = j; i < std::min(n, j + window); ++i) mask[i] = true;
  return mask;
}

inline SimResult run_simulation(const SimConfig& cfg) {
  cfg.validate();
  const std::size_t per = cfg.samples_per_period();
  const TimeGrid grid(cfg.dt, cfg.sample_count(), 0.0);
  const double period = static_cast<double>(per) * cfg.dt;
  const double w_sig = kTwoPi * cfg.signal_freq;

  SampledSignal s = sample(grid, [&](double t) { return cfg.signal_amp * std::sin(w_sig * t); });
  const HarmonicSeries m_series = modulation_series(cfg.modulation, cfg.f_m);
  const SampledSignal m = synth(m_series, grid);
  const SampledSignal noise = gen_noise(cfg.noise, grid);
  SampledSignal clean = modulate(s, m);
  std::vector<double> noisy(grid.n());
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] = clean[i] + noise[i];
  SampledSignal s_m(grid, std::move(noisy));

  const HarmonicSeries r = synth_demod_reference(period, cfg.ref_kind, cfg.ref_harmonics, cfg.ref_phase_delay);
  const DemodReference ref = split_even_odd(r);
  const DemodGain gain = calibrate_gain(m_series, ref);
  const Channel channel = gain.usable(Channel::even) ? Channel::even : Channel::odd;
  Demodulated restored = demodulate(s_m, ref, gain, channel);

  // Phase-unaware variant: whole delayed reference, gain computed as if
  // the reference were aligned with the modulation.
  const HarmonicSeries r_nominal = synth_demod_reference(period, cfg.ref_kind, cfg.ref_harmonics, 0.0);
  const double g_nominal = detail::period_projection(m_series, r_nominal);
  const double g_full = detail::period_projection(m_series, r);
  const DemodReference whole{r, r, cfg.f_m};
  const DemodGain raw_gain{g_nominal, g_nominal, 0.0};
  SampledSignal raw = demodulate(s_m, whole, raw_gain, Channel::even).signal;

  SampledSignal down = downsample_at_phase(restored.signal, cfg.f_m, cfg.downsample_phase);

  SimMetrics mx;
  mx.signal_amplitude = cfg.signal_amp;
  mx.effective_bandwidth_hz = 0.5 * cfg.f_m;
  mx.gain_even = gain.g_even;
  mx.gain_odd = gain.g_odd;
  mx.raw_gain_ratio = g_full / g_nominal;
  mx.group_delay = restored.group_delay;
  mx.valid_from = restored.valid_from;
  mx.downsample_offset = phase_offset_index(grid, cfg.f_m, cfg.downsample_phase, per);
  mx.noise_to_signal_rms = rms(clean.values()) > 0.0 ? rms(noise.values()) / rms(clean.values()) : 0.0;

  const std::vector<std::size_t> steps =
      cfg.noise.kind == NoiseKind::step ? level_changes(noise) : std::vector<std::size_t>{};
  const std::vector<bool> spiky = spike_mask(grid.n(), per, steps);
  auto expected = [&](double t) { return cfg.signal_amp * std::sin(w_sig * (t - restored.group_delay)); };

  double acc_full = 0.0, max_dev = 0.0;
  for (std::size_t i = restored.valid_from; i < grid.n(); ++i) {
    const double e = restored.signal[i] - expected(grid.time(i));
    acc_full += e * e;
    if (!spiky[i]) max_dev = std::max(max_dev, std::abs(e));
  }
  mx.rms_error_full = std::sqrt(acc_full / static_cast<double>(grid.n() - restored.valid_from));
  mx.max_deviation_outside_spikes = max_dev;

  double acc_down = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < down.size(); ++k) {
    const std::size_t i = mx.downsample_offset + k * per;
    if (spiky[i]) mx.spike_windows.push_back(k);
    if (i < restored.valid_from || spiky[i]) continue;
    const double e = down[k] - expected(grid.time(i));
    acc_down += e * e;
    ++used;
  }
  mx.rms_error_downsampled = used ? std::sqrt(acc_down / static_cast<double>(used)) : 0.0;

  return {std::move(s),
          noise,
          std::move(clean),
          std::move(s_m),
          std::move(restored.signal),
          std::move(down),
          std::move(raw),
          std::move(mx)};
}

}  // namespace ovs
