#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ovs/reference.hpp"

using namespace ovs;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

oracle::McEstimate monte_carlo(const SpotGeometry& g, double theta, std::size_t n, std::uint64_t seed) {
  return oracle::mc_transmitted_fraction(g.r0, g.d, g.R0, g.theta_gnd, g.emission.amplitude, g.emission.falloff,
                                         g.emission.offset, theta, n, seed);
}

// Falling half-cosine between plateaus 1 and 0, defined in rotation angle.
double synthetic_edge(const TrapezoidFit& f, double theta) {
  const double start = -f.phi / f.u, stop = (kPi - f.phi) / f.u;
  if (theta < start) return f(start);
  if (theta > stop) return f(stop);
  return f(theta);
}

}  // namespace

TEST(Emission, DefaultFit) {
  const EmissionFit em;
  EXPECT_NEAR(em.falloff, 4.5206, 1e-4);
  EXPECT_NEAR(emission_intensity(em, 0.0).intensity, 8.340, 1e-12);
  const double beta = kPi / 2 / em.falloff;
  EXPECT_NEAR(beta, 0.3475, 1e-4);
  EXPECT_NEAR(emission_intensity(em, beta).intensity, 4.227, 1e-12);
  EXPECT_EQ(emission_intensity(em, 0.21).intensity, emission_intensity(em, -0.21).intensity);
  EXPECT_FALSE(emission_intensity(em, 0.5).extrapolated);
  EXPECT_TRUE(emission_intensity(em, 0.8).extrapolated);
}

TEST(SpotGeometry, ThetaMax) {
  const SpotGeometry g;
  EXPECT_NEAR(g.theta_max(), 0.08343, 1e-5);
  EXPECT_NEAR(g.theta_max() / kDeg, 4.78, 0.01);
}

TEST(SpotGeometry, RejectsLargeSpotAndBadLengths) {
  SpotGeometry g;
  g.r0 = 2.0;  // R0 sin(15 deg) = 1.55 mm
  EXPECT_THROW(g.validate(), GeometryError);
  EXPECT_THROW(transmitted_fraction(g, 0.0), GeometryError);
  SpotGeometry h;
  h.d = 0.0;
  EXPECT_THROW(h.validate(), GeometryError);
  SpotGeometry k;
  k.r0 = 7.0;
  EXPECT_THROW(k.validate(), GeometryError);
}

TEST(TransmittedFraction, PiecewiseCases) {
  const SpotGeometry g;
  EXPECT_EQ(transmitted_fraction(g, -kPi / 2), 1.0);
  EXPECT_EQ(transmitted_fraction(g, 10 * kDeg), 0.0);
  EXPECT_NEAR(transmitted_fraction(g, 0.0), 0.5, 1e-9);
  EXPECT_NEAR(transmitted_fraction(g, g.theta_gnd), 0.5, 1e-9);
  EXPECT_EQ(transmitted_fraction(g, kPi - 1e-9), 1.0);
}

TEST(TransmittedFraction, ContinuousAtBoundaries) {
  const SpotGeometry g;
  const double tm = g.theta_max();
  const double e = 1e-9;
  EXPECT_NEAR(transmitted_fraction(g, -tm + e), 1.0, 1e-6);
  EXPECT_NEAR(transmitted_fraction(g, tm - e), 0.0, 1e-6);
  EXPECT_NEAR(transmitted_fraction(g, g.theta_gnd - tm + e), 0.0, 1e-6);
  EXPECT_NEAR(transmitted_fraction(g, g.theta_gnd + tm - e), 1.0, 1e-6);
}

TEST(TransmittedFraction, BoundedAndMonotoneThroughTransitions) {
  const SpotGeometry g;
  const double tm = g.theta_max();
  double prev = 1.0;
  for (int k = 0; k <= 400; ++k) {
    const double th = -tm + 2 * tm * k / 400.0;
    const double v = transmitted_fraction(g, th);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_LE(v, prev + 1e-12);
    prev = v;
  }
  prev = 0.0;
  for (int k = 0; k <= 400; ++k) {
    const double th = g.theta_gnd - tm + 2 * tm * k / 400.0;
    const double v = transmitted_fraction(g, th);
    EXPECT_GE(v, prev - 1e-12);
    prev = v;
  }
}

TEST(TransmittedFraction, TrailingEdgeMirrorsLeadingEdge) {
  const SpotGeometry g;
  for (int k = 0; k < 20; ++k) {
    const double delta = g.theta_max() * (k - 10) / 10.5;
    EXPECT_NEAR(transmitted_fraction(g, g.theta_gnd + delta), transmitted_fraction(g, -delta), 1e-9);
  }
}

TEST(TransmittedFraction, PeriodicInTheta) {
  const SpotGeometry g;
  for (double th : {-0.05, 0.0, 0.03, 0.5}) {
    EXPECT_NEAR(transmitted_fraction(g, th), transmitted_fraction(g, th + 2 * kPi), 1e-12);
  }
}

TEST(TransmittedFraction, AgreesWithMonteCarlo) {
  const SpotGeometry g;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> band(-g.theta_max(), g.theta_max());
  int within = 0;
  for (int k = 0; k < 20; ++k) {
    const double th = (k % 2 ? g.theta_gnd : 0.0) + band(rng);
    const auto mc = monte_carlo(g, th, 1'000'000, 1000 + k);
    const double q = transmitted_fraction(g, th);
    EXPECT_LT(std::abs(q - mc.value), 3.0 * mc.std_error + 1e-12) << "theta = " << th;
    if (std::abs(q - mc.value) < mc.std_error) ++within;
  }
  EXPECT_GE(within, 8);  // roughly 68% expected inside one sigma
}

TEST(ReferenceWaveform, TrapezoidStructure) {
  const SpotGeometry g;
  const double f = 2500.0;
  const std::size_t per = 3600;
  const TimeGrid grid(1.0 / (f * per), 2 * per, -0.5 / f);
  const SampledSignal w = reference_waveform(g, grid, f);
  for (std::size_t i = 0; i < per; ++i) EXPECT_EQ(w[i], w[i + per]);
  std::size_t dark = 0, bright = 0;
  for (std::size_t i = 0; i < per; ++i) {
    dark += w[i] == 0.0;
    bright += w[i] == 1.0;
  }
  const double duty = static_cast<double>(dark) / per;
  EXPECT_NEAR(duty, (g.theta_gnd - 2 * g.theta_max()) / (2 * kPi), 2.0 / per);
  EXPECT_NEAR(duty, 0.0568, 5e-4);
  EXPECT_NEAR(static_cast<double>(bright) / per, 1.0 - (g.theta_gnd + 2 * g.theta_max()) / (2 * kPi), 2.0 / per);
  EXPECT_EQ(w[0], 1.0);  // theta = -pi
}

TEST(ReferenceWaveform, RejectsBadFrequency) {
  EXPECT_THROW(reference_waveform(SpotGeometry{}, TimeGrid(1e-6, 10), 0.0), PreconditionError);
}

TEST(FitTrapezoid, RoundTripFromKnownFit) {
  const TrapezoidFit truth{0.5, 11.0, 0.8, 0.5};
  const double f = 1000.0;
  const std::size_t per = 7200;
  const TimeGrid grid(1.0 / (f * per), per, -0.5 / f);
  const SampledSignal s = sample(grid, [&](double t) {
    double cyc = f * t - std::floor(f * t);
    double th = 2 * kPi * cyc;
    if (th >= kPi) th -= 2 * kPi;
    return synthetic_edge(truth, th);
  });
  const TrapezoidFit fit = fit_trapezoid_cosine(s, f);
  EXPECT_NEAR(fit.B, truth.B, 1e-6);
  EXPECT_NEAR(fit.u, truth.u, 1e-6);
  EXPECT_NEAR(fit.phi, truth.phi, 1e-6);
  EXPECT_NEAR(fit.c2, truth.c2, 1e-6);
  EXPECT_LT(fit.residual_rms, 1e-9);
}

TEST(FitTrapezoid, DefaultTransitionResidualSmall) {
  const SpotGeometry g;
  const double f = 2500.0;
  const std::size_t per = 3600;
  const SampledSignal w = reference_waveform(g, TimeGrid(1.0 / (f * per), per, -0.5 / f), f);
  const TrapezoidFit fit = fit_trapezoid_cosine(w, f);
  EXPECT_LT(fit.residual_rms, 0.02);
  EXPECT_GT(fit.samples, 50u);
  // Half a cosine period spans roughly the 2*theta_max transition.
  EXPECT_NEAR(kPi / fit.u, 2 * g.theta_max(), 0.5 * g.theta_max());
}

TEST(FitTrapezoid, PublishedParameters) {
  const TrapezoidFit p = published_trapezoid_fit();
  EXPECT_NEAR(kPi / std::abs(p.u), 0.6502, 1e-4);
  EXPECT_NEAR(p.c2 - p.B, 1.5243, 1e-4);
  EXPECT_NEAR(p.c2 + p.B, 6.8303, 1e-4);
  // Same curve under (u, phi) -> (-u, -phi).
  const TrapezoidFit mirrored{p.B, -p.u, -p.phi, p.c2};
  for (double th : {-0.3, 0.0, 0.2}) EXPECT_NEAR(p(th), mirrored(th), 1e-12);
}

TEST(FitTrapezoid, NoTransition) {
  const SampledSignal flat(TimeGrid(1e-6, 100), std::vector<double>(100, 1.0));
  EXPECT_THROW(fit_trapezoid_cosine(flat, 2500.0), FitDomainError);
}

TEST(DetectPeriod, IdealSquareWave) {
  const TimeGrid g(2e-6, 2000);
  const SampledSignal sq = sample(g, [](double t) { return std::fmod(t + 1e-7, 4e-4) < 2e-4 ? 1.0 : 0.0; });
  EXPECT_NEAR(detect_period(sq, 0.5), 4e-4, 1e-15);
}

TEST(DetectPeriod, DefaultReferenceWaveform) {
  const SpotGeometry g;
  const SampledSignal w = reference_waveform(g, TimeGrid(2e-6, 15000), 2500.0);
  EXPECT_NEAR(detect_period(w, 0.5), 4e-4, 2e-6);
}

TEST(DetectPeriod, ConstantSignalFails) {
  const SampledSignal flat(TimeGrid(1e-6, 100), std::vector<double>(100, 0.3));
  EXPECT_THROW(detect_period(flat, 0.5), DetectionError);
}

TEST(SynthDemodReference, SineKind) {
  const HarmonicSeries r = synth_demod_reference(4e-4, RefKind::sine, 7, 0.0);
  ASSERT_EQ(r.harmonics(), 1u);
  EXPECT_EQ(r.cos_coeffs()[0], 1.0);
  EXPECT_EQ(r.sin_coeffs()[0], 0.0);
  EXPECT_EQ(r.dc(), 0.0);
  EXPECT_NEAR(r.f_fund(), 2500.0, 1e-9);
}

TEST(SynthDemodReference, SquareMatchesFourierProjection) {
  const HarmonicSeries r = synth_demod_reference(4e-4, RefKind::square, 7, 0.0);
  ASSERT_EQ(r.harmonics(), 7u);
  EXPECT_EQ(r.dc(), 0.0);
  for (int j = 1; j <= 7; ++j) {
    EXPECT_NEAR(r.cos_coeffs()[j - 1], oracle::cos_projection(oracle::unit_square, j), 1e-5) << j;
    EXPECT_NEAR(r.sin_coeffs()[j - 1], 0.0, 1e-15);
  }
  EXPECT_NEAR(r.cos_coeffs()[0], 4 / kPi, 1e-15);
  EXPECT_NEAR(r.cos_coeffs()[2], -4 / (3 * kPi), 1e-15);
}

TEST(SynthDemodReference, PhaseIsADelay) {
  const double f = 2500.0, phase = kPi / 6;
  for (RefKind kind : {RefKind::square, RefKind::sine}) {
    const HarmonicSeries r0 = synth_demod_reference(1 / f, kind, 7, 0.0);
    const HarmonicSeries r1 = synth_demod_reference(1 / f, kind, 7, phase);
    EXPECT_EQ(r1.dc(), 0.0);
    const double delay = phase / (2 * kPi * f);
    for (int k = 0; k < 50; ++k) {
      const double t = 1.7e-5 * k;
      EXPECT_NEAR(r1(t), r0(t - delay), 1e-12);
    }
  }
}
