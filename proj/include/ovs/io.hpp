#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ovs/errors.hpp"
#include "ovs/lockin.hpp"
#include "ovs/reference.hpp"
#include "ovs/signals.hpp"

namespace ovs {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace detail {

inline std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace detail

/// `t,value` header, one row per sample, 17 significant digits.
inline void write_csv(const fs::path& path, const SampledSignal& s) {
  auto out = detail::open_out(path);
  out << "t,value\n";
  for (std::size_t i = 0; i < s.size(); ++i) out << detail::fmt17(s.time(i)) << ',' << detail::fmt17(s[i]) << '\n';
  detail::finish(out, path);
}

/// Reads a `t,value` file; the grid is rebuilt from the first two times.
inline SampledSignal read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "t,value") throw IoError(path.string() + ": missing 't,value' header");
  std::vector<double> t, v;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      t.push_back(std::stod(line.substr(0, comma)));
      v.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
  if (t.empty()) throw IoError(path.string() + ": no samples");
  const double dt = t.size() > 1 ? (t.back() - t.front()) / static_cast<double>(t.size() - 1) : 1.0;
  return {TimeGrid(dt, t.size(), t.front()), std::move(v)};
}

inline void write_harmonic_csv(const fs::path& path, const std::vector<HarmonicOutput>& rows) {
  auto out = detail::open_out(path);
  out << "i,X,Y,magnitude,phase\n";
  for (const auto& r : rows)
    out << r.index << ',' << detail::fmt17(r.X) << ',' << detail::fmt17(r.Y) << ',' << detail::fmt17(r.magnitude)
        << ',' << detail::fmt17(r.phase) << '\n';
  detail::finish(out, path);
}

inline void write_json(const fs::path& path, const json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  detail::finish(out, path);
}

inline json to_json(const HarmonicSeries& s) {
  return {{"f_fund", s.f_fund()}, {"dc", s.dc()}, {"cos_coeffs", s.cos_coeffs()}, {"sin_coeffs", s.sin_coeffs()}};
}

inline HarmonicSeries harmonic_series_from_json(const json& j) {
  return {j.at("f_fund").get<double>(), j.at("dc").get<double>(), j.at("cos_coeffs").get<std::vector<double>>(),
          j.at("sin_coeffs").get<std::vector<double>>()};
}

inline json to_json(const TrapezoidFit& f) {
  return {{"B", f.B}, {"u", f.u}, {"phi", f.phi}, {"c2", f.c2}, {"residual_rms", f.residual_rms},
          {"samples", f.samples}};
}

}  // namespace ovs
