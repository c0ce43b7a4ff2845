// Command-line front end: ovs {modwave|refsignal|simulate} [options]
//
// Exit codes: 0 success, 2 configuration error, 3 numeric/precondition
// error, 1 anything else (I/O).

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ovs/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Rotating-electrode optical voltage sensor: simulation and lock-in demodulation"};
  app.set_version_flag("--version", ovs::cli::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> noise;
  std::optional<std::string> ref;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration (or a previous manifest.json)");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Noise seed (overrides config)");
    sub->add_option("--noise", noise, "Noise kind: step|sine|none (overrides config)");
    sub->add_option("--ref", ref, "Reference kind: square|sine (overrides config)");
  };
  CLI::App* modwave = app.add_subcommand("modwave", "Modulation waveform over 720 degrees, its harmonic series");
  CLI::App* refsignal = app.add_subcommand("refsignal", "Optical-switch reference waveform and trapezoid fit");
  CLI::App* simulate = app.add_subcommand("simulate", "End-to-end modulation, noise, and lock-in recovery");
  for (CLI::App* sub : {modwave, refsignal, simulate}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ovs::cli::RunConfig cfg = config_path.empty() ? ovs::cli::RunConfig{} : ovs::cli::load_config(config_path);
    if (seed) cfg.sim.noise.seed = *seed;
    if (noise) cfg.sim.noise.kind = ovs::cli::parse_noise_kind(*noise);
    if (ref) cfg.sim.ref_kind = ovs::cli::parse_ref_kind(*ref);
    cfg.sim.validate();

    ovs::cli::CommandOutput res;
    if (modwave->parsed()) {
      res = ovs::cli::cmd_modwave(cfg, out_dir);
    } else if (refsignal->parsed()) {
      res = ovs::cli::cmd_refsignal(cfg, out_dir);
    } else {
      res = ovs::cli::cmd_simulate(cfg, out_dir);
    }
    for (const auto& f : res.files) std::cout << f.string() << '\n';
    return 0;
  } catch (const ovs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ovs::PreconditionError& e) {
    std::cerr << "precondition error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
