#pragma once

#include <filesystem>
#include <string>
#include <system_error>
#include <vector>

#include "ovs/io.hpp"
#include "ovs/sim.hpp"

namespace ovs {

inline json to_json(const SimMetrics& m) {
  return {{"rms_error_full", m.rms_error_full},
          {"rms_error_downsampled", m.rms_error_downsampled},
          {"relative_rms_error_downsampled",
           m.signal_amplitude != 0.0 ? m.rms_error_downsampled / std::abs(m.signal_amplitude) : 0.0},
          {"max_deviation_outside_spikes", m.max_deviation_outside_spikes},
          {"noise_to_signal_rms", m.noise_to_signal_rms},
          {"effective_bandwidth_hz", m.effective_bandwidth_hz},
          {"signal_amplitude", m.signal_amplitude},
          {"gain_even", m.gain_even},
          {"gain_odd", m.gain_odd},
          {"raw_gain_ratio", m.raw_gain_ratio},
          {"group_delay", m.group_delay},
          {"valid_from", m.valid_from},
          {"downsample_offset", m.downsample_offset},
          {"spike_windows", m.spike_windows}};
}

struct ReportSummary {
  std::vector<fs::path> files;
  json metrics;
};

/// Writes the signal stack in display order (noise, modulated, noisy
/// modulated, restored) plus metrics.json.
inline ReportSummary report(const SimResult& result, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  ReportSummary summary;
  auto emit = [&](const char* name, const SampledSignal& s) {
    const fs::path p = out_dir / name;
    write_csv(p, s);
    summary.files.push_back(p);
  };
  emit("noise.csv", result.noise);
  emit("modulated.csv", result.modulated);
  emit("noisy_modulated.csv", result.modulated_noisy);
  emit("restored.csv", result.restored_full);
  summary.metrics = to_json(result.metrics);
  const fs::path mp = out_dir / "metrics.json";
  write_json(mp, summary.metrics);
  summary.files.push_back(mp);
  return summary;
}

}  // namespace ovs
