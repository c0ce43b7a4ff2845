#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ovs/signals.hpp"

namespace ovs {

/// Modulated light intensity versus electrode angle alpha:
///
///   f(alpha) = c + sum_{i=1..7} A_i cos(i*alpha + phase)
///
/// One shared phase for every harmonic. Defaults are the published
/// seven-term fit of the single 30-degree blade electrode.
struct ModulationFit {
  static constexpr std::size_t kHarmonics = 7;

  std::array<double, kHarmonics> amplitudes{0.366, 0.118, 0.032, 0.018, 5.4e-3, -6.2e-3, -4.3e-3};
  double phase = -2.4e-5;  // radians
  double offset = 0.471;

  bool operator==(const ModulationFit&) const = default;
};

inline double eval_modulation(const ModulationFit& fit, double alpha) {
  double v = fit.offset;
  for (std::size_t i = 0; i < ModulationFit::kHarmonics; ++i)
    v += fit.amplitudes[i] * std::cos(static_cast<double>(i + 1) * alpha + fit.phase);
  return v;
}

/// Time-domain modulation M(t) = f(2 pi f_m t). One electrode revolution is
/// one modulation period; multi-blade electrodes are modeled by scaling f_m.
inline HarmonicSeries modulation_series(const ModulationFit& fit, double f_m) {
  if (!(f_m > 0.0)) throw PreconditionError("modulation_series: f_m must be positive");
  std::vector<double> a(ModulationFit::kHarmonics), b(ModulationFit::kHarmonics);
  const double cp = std::cos(fit.phase), sp = std::sin(fit.phase);
  for (std::size_t i = 0; i < ModulationFit::kHarmonics; ++i) {
    a[i] = fit.amplitudes[i] * cp;
    b[i] = -fit.amplitudes[i] * sp;
  }
  return {f_m, fit.offset, std::move(a), std::move(b)};
}

/// Inverse of modulation_series for a series of at least seven harmonics.
/// The shared phase is taken from the fundamental, so A_1 comes out
/// non-negative; the remaining amplitudes are projections on that phase.
inline ModulationFit modulation_fit_from_series(const HarmonicSeries& s) {
  if (s.harmonics() < ModulationFit::kHarmonics)
    throw PreconditionError("modulation_fit_from_series: series has fewer than 7 harmonics");
  ModulationFit fit;
  fit.offset = s.dc();
  fit.phase = std::atan2(-s.sin_coeffs()[0], s.cos_coeffs()[0]);
  const double cp = std::cos(fit.phase), sp = std::sin(fit.phase);
  for (std::size_t i = 0; i < ModulationFit::kHarmonics; ++i)
    fit.amplitudes[i] = s.cos_coeffs()[i] * cp - s.sin_coeffs()[i] * sp;
  return fit;
}

}  // namespace ovs
