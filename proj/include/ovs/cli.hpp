#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>
#include <type_traits>

#include "ovs/io.hpp"
#include "ovs/lockin.hpp"
#include "ovs/modulation.hpp"
#include "ovs/reference.hpp"
#include "ovs/report.hpp"
#include "ovs/sim.hpp"

namespace ovs::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Everything a subcommand may read. Sim fields keep their SimConfig names;
/// geometry angles are degrees in the file and radians here.
struct RunConfig {
  SimConfig sim{};
  SpotGeometry geometry{};
  double f_rot = 2500.0;
  std::size_t samples_per_period = 3600;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config field '" + where + "': expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

inline std::string path_of(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

template <typename T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + path_of(where, key) + "': wrong type");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw ConfigError("config field '" + path_of(where, key) + "': not finite");
  }
}

inline std::size_t read_count(const json& obj, const std::string& where, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ConfigError("config field '" + path_of(where, key) + "': expected a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace detail

inline RefKind parse_ref_kind(const std::string& s) {
  if (s == "square") return RefKind::square;
  if (s == "sine") return RefKind::sine;
  throw ConfigError("ref_kind: expected one of square|sine, got '" + s + "'");
}

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "step") return NoiseKind::step;
  if (s == "sine") return NoiseKind::sine;
  if (s == "none") return NoiseKind::none;
  throw ConfigError("noise.kind: expected one of step|sine|none, got '" + s + "'");
}

inline double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
inline double rad(double deg) { return deg * std::numbers::pi / 180.0; }

inline RunConfig config_from_json(const json& j) {
  using detail::read;
  detail::check_keys(j, "",
                     {"dt", "duration", "f_m", "signal_freq", "signal_amp", "ref_kind", "ref_phase_delay", "noise",
                      "downsample_phase", "modulation", "ref_harmonics", "geometry", "f_rot", "samples_per_period"});
  RunConfig c;
  SimConfig& s = c.sim;
  read(j, "", "dt", s.dt);
  read(j, "", "duration", s.duration);
  read(j, "", "f_m", s.f_m);
  read(j, "", "signal_freq", s.signal_freq);
  read(j, "", "signal_amp", s.signal_amp);
  if (j.contains("ref_kind")) {
    std::string k;
    read(j, "", "ref_kind", k);
    s.ref_kind = parse_ref_kind(k);
  }
  read(j, "", "ref_phase_delay", s.ref_phase_delay);
  read(j, "", "downsample_phase", s.downsample_phase);
  s.ref_harmonics = detail::read_count(j, "", "ref_harmonics", s.ref_harmonics);

  if (j.contains("noise")) {
    const json& n = j.at("noise");
    detail::check_keys(n, "noise", {"kind", "amplitude", "rate_or_freq", "seed"});
    if (n.contains("kind")) {
      std::string k;
      read(n, "noise", "kind", k);
      s.noise.kind = parse_noise_kind(k);
    }
    read(n, "noise", "amplitude", s.noise.amplitude);
    read(n, "noise", "rate_or_freq", s.noise.rate_or_freq);
    if (n.contains("seed")) {
      if (!n.at("seed").is_number_unsigned() && !(n.at("seed").is_number_integer() && n.at("seed").get<long long>() >= 0))
        throw ConfigError("config field 'noise.seed': expected an unsigned 64-bit integer");
      s.noise.seed = n.at("seed").get<std::uint64_t>();
    }
  }

  if (j.contains("modulation")) {
    const json& m = j.at("modulation");
    detail::check_keys(m, "modulation", {"amplitudes", "phase", "offset"});
    if (m.contains("amplitudes")) {
      std::vector<double> a;
      read(m, "modulation", "amplitudes", a);
      if (a.size() != ModulationFit::kHarmonics)
        throw ConfigError("config field 'modulation.amplitudes': expected exactly 7 values");
      std::copy(a.begin(), a.end(), s.modulation.amplitudes.begin());
    }
    read(m, "modulation", "phase", s.modulation.phase);
    read(m, "modulation", "offset", s.modulation.offset);
  }

  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    detail::check_keys(g, "geometry", {"r0", "d", "R0", "theta_gnd_deg", "emission"});
    read(g, "geometry", "r0", c.geometry.r0);
    read(g, "geometry", "d", c.geometry.d);
    read(g, "geometry", "R0", c.geometry.R0);
    if (g.contains("theta_gnd_deg")) {
      double d = 0.0;
      read(g, "geometry", "theta_gnd_deg", d);
      c.geometry.theta_gnd = rad(d);
    }
    if (g.contains("emission")) {
      const json& e = g.at("emission");
      detail::check_keys(e, "geometry.emission", {"A", "k", "c"});
      read(e, "geometry.emission", "A", c.geometry.emission.amplitude);
      read(e, "geometry.emission", "k", c.geometry.emission.falloff);
      read(e, "geometry.emission", "c", c.geometry.emission.offset);
    }
  }
  read(j, "", "f_rot", c.f_rot);
  c.samples_per_period = detail::read_count(j, "", "samples_per_period", c.samples_per_period);
  if (c.samples_per_period < 16) throw ConfigError("config field 'samples_per_period': must be at least 16");
  if (!(c.f_rot > 0.0)) throw ConfigError("config field 'f_rot': must be positive");
  s.validate();
  c.geometry.validate();
  return c;
}

inline json config_to_json(const RunConfig& c) {
  const SimConfig& s = c.sim;
  return {{"dt", s.dt},
          {"duration", s.duration},
          {"f_m", s.f_m},
          {"signal_freq", s.signal_freq},
          {"signal_amp", s.signal_amp},
          {"ref_kind", std::string(to_string(s.ref_kind))},
          {"ref_phase_delay", s.ref_phase_delay},
          {"noise",
           {{"kind", std::string(to_string(s.noise.kind))},
            {"amplitude", s.noise.amplitude},
            {"rate_or_freq", s.noise.rate_or_freq},
            {"seed", s.noise.seed}}},
          {"downsample_phase", s.downsample_phase},
          {"modulation",
           {{"amplitudes", s.modulation.amplitudes}, {"phase", s.modulation.phase}, {"offset", s.modulation.offset}}},
          {"ref_harmonics", s.ref_harmonics},
          {"geometry",
           {{"r0", c.geometry.r0},
            {"d", c.geometry.d},
            {"R0", c.geometry.R0},
            {"theta_gnd_deg", deg(c.geometry.theta_gnd)},
            {"emission",
             {{"A", c.geometry.emission.amplitude},
              {"k", c.geometry.emission.falloff},
              {"c", c.geometry.emission.offset}}}}},
          {"f_rot", c.f_rot},
          {"samples_per_period", c.samples_per_period}};
}

/// Parses a config file. A run manifest is accepted too; its "config"
/// member is used.
inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("subcommand") && j.contains("config") && j.contains("version"))
    return config_from_json(j.at("config"));
  return config_from_json(j);
}

struct RunManifest {
  std::string subcommand;
  RunConfig config;
  fs::path output_dir;
  std::string version = kVersion;
};

inline json to_json(const RunManifest& m) {
  return {{"subcommand", m.subcommand},
          {"config", config_to_json(m.config)},
          {"output_dir", m.output_dir.string()},
          {"version", m.version}};
}

struct CommandOutput {
  std::vector<fs::path> files;
};

namespace detail {

inline void prepare(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
}

inline fs::path write_manifest(const std::string& sub, const RunConfig& c, const fs::path& out) {
  const fs::path p = out / "manifest.json";
  write_json(p, to_json(RunManifest{sub, c, out}));
  return p;
}

}  // namespace detail

/// Modulation waveform over two periods (720 degrees of electrode angle),
/// its harmonic series, and the per-harmonic lock-in outputs for S = 1.
inline CommandOutput cmd_modwave(const RunConfig& c, const fs::path& out) {
  detail::prepare(out);
  CommandOutput res;
  const SimConfig& s = c.sim;
  const HarmonicSeries series = modulation_series(s.modulation, s.f_m);
  const std::size_t p = c.samples_per_period;
  const TimeGrid grid(1.0 / (s.f_m * static_cast<double>(p)), 2 * p + 1, 0.0);
  res.files.push_back(out / "modwave.csv");
  write_csv(res.files.back(), synth(series, grid));
  res.files.push_back(out / "modulation_series.json");
  write_json(res.files.back(), to_json(series));

  const TimeGrid one(grid.dt(), 2 * p, 0.0);
  const SampledSignal s_m = synth(series, one);
  const HarmonicSeries r = synth_demod_reference(1.0 / s.f_m, s.ref_kind, s.ref_harmonics, s.ref_phase_delay);
  const DemodReference ref = split_even_odd(r);
  res.files.push_back(out / "harmonics.csv");
  write_harmonic_csv(res.files.back(), harmonic_table(s_m, series, ref, calibrate_gain(series, ref)));
  res.files.push_back(detail::write_manifest("modwave", c, out));
  return res;
}

/// Photodiode reference over two revolutions, starting at theta = -pi.
inline CommandOutput cmd_refsignal(const RunConfig& c, const fs::path& out) {
  detail::prepare(out);
  CommandOutput res;
  const std::size_t p = c.samples_per_period;
  const TimeGrid grid(1.0 / (c.f_rot * static_cast<double>(p)), 2 * p, -0.5 / c.f_rot);
  const SampledSignal wave = reference_waveform(c.geometry, grid, c.f_rot);
  res.files.push_back(out / "reference.csv");
  write_csv(res.files.back(), wave);

  std::size_t dark = 0;
  for (std::size_t i = 0; i < p; ++i)
    if (wave[i] == 0.0) ++dark;
  const double tm = c.geometry.theta_max();
  json info = {{"f_rot", c.f_rot},
               {"period", detect_period(wave, 0.5)},
               {"theta_max", tm},
               {"theta_max_deg", deg(tm)},
               {"zero_plateau_duty", static_cast<double>(dark) / static_cast<double>(p)},
               {"zero_plateau_duty_geometric", (c.geometry.theta_gnd - 2.0 * tm) / kTwoPi},
               {"trapezoid_fit", to_json(fit_trapezoid_cosine(wave, c.f_rot))}};
  res.files.push_back(out / "reference_fit.json");
  write_json(res.files.back(), info);
  res.files.push_back(detail::write_manifest("refsignal", c, out));
  return res;
}

inline CommandOutput cmd_simulate(const RunConfig& c, const fs::path& out) {
  detail::prepare(out);
  const SimResult r = run_simulation(c.sim);
  CommandOutput res;
  res.files = report(r, out).files;
  res.files.push_back(out / "restored_downsampled.csv");
  write_csv(res.files.back(), r.restored_downsampled);
  res.files.push_back(out / "restored_raw.csv");
  write_csv(res.files.back(), r.restored_raw);
  res.files.push_back(detail::write_manifest("simulate", c, out));
  return res;
}

}  // namespace ovs::cli
