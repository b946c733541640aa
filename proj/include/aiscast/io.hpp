#pragma once
// Line-delimited JSON records for windows and forecasts. Writing is
// hand-rolled with a fixed field order and shortest-round-trip float
// formatting so that output is canonical and byte-stable; reading uses a
// JSON parser and accepts any field order.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aiscast/ais.hpp"
#include "aiscast/fourhot.hpp"

namespace aiscast {

// Shortest decimal string that round-trips the exact double value.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

namespace detail {

inline void write_points(std::ostream& os, const std::vector<ContinuousObs>& pts) {
  os << '[';
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) os << ',';
    os << '[' << format_double(pts[i].lat) << ',' << format_double(pts[i].lon) << ','
       << format_double(pts[i].sog) << ',' << format_double(pts[i].cog) << ']';
  }
  os << ']';
}

inline std::vector<ContinuousObs> read_points(const nlohmann::json& j) {
  if (!j.is_array()) throw std::runtime_error("window record: points must be an array");
  std::vector<ContinuousObs> pts;
  pts.reserve(j.size());
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 4)
      throw std::runtime_error("window record: each point must be [lat, lon, sog, cog]");
    pts.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>(),
                   p[3].get<double>()});
  }
  return pts;
}

}  // namespace detail

inline void write_window(std::ostream& os, const Window& w) {
  os << "{\"mmsi\":" << w.mmsi << ",\"t0\":" << w.t0 << ",\"period_s\":" << w.period_s
     << ",\"points\":";
  detail::write_points(os, w.points);
  os << "}\n";
}

inline void write_windows(std::ostream& os, const std::vector<Window>& ws) {
  for (const auto& w : ws) write_window(os, w);
}

inline void write_windows_file(const std::string& path, const std::vector<Window>& ws) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_windows_file: cannot open " + path);
  write_windows(os, ws);
}

inline Window parse_window_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  for (const char* k : {"mmsi", "t0", "period_s", "points"})
    if (!j.contains(k)) throw std::runtime_error(std::string("window record: missing field ") + k);
  Window w;
  w.mmsi = j["mmsi"].get<std::int64_t>();
  w.t0 = j["t0"].get<std::int64_t>();
  w.period_s = j["period_s"].get<int>();
  w.points = detail::read_points(j["points"]);
  return w;
}

inline std::vector<Window> read_windows(std::istream& in) {
  std::vector<Window> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_window_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("read_windows: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<Window> read_windows_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_windows_file: cannot open " + path);
  return read_windows(in);
}

// A forecast record: one sampled continuation of a context window.
struct ForecastRecord {
  std::int64_t mmsi = 0;
  std::int64_t t0 = 0;  // epoch seconds of the first forecast point
  int period_s = 600;
  int sample = 0;        // sample index within the forecast set
  bool clamped = false;  // some fed-back point had to be clamped into the region
  std::vector<ContinuousObs> points;
};

inline void write_forecast(std::ostream& os, const ForecastRecord& f) {
  os << "{\"mmsi\":" << f.mmsi << ",\"t0\":" << f.t0 << ",\"period_s\":" << f.period_s
     << ",\"sample\":" << f.sample << ",\"clamped\":" << (f.clamped ? "true" : "false")
     << ",\"points\":";
  detail::write_points(os, f.points);
  os << "}\n";
}

inline void write_forecasts_file(const std::string& path, const std::vector<ForecastRecord>& fs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_forecasts_file: cannot open " + path);
  for (const auto& f : fs) write_forecast(os, f);
}

inline std::vector<ForecastRecord> read_forecasts(std::istream& in) {
  std::vector<ForecastRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      for (const char* k : {"mmsi", "t0", "period_s", "sample", "clamped", "points"})
        if (!j.contains(k))
          throw std::runtime_error(std::string("forecast record: missing field ") + k);
      ForecastRecord f;
      f.mmsi = j["mmsi"].get<std::int64_t>();
      f.t0 = j["t0"].get<std::int64_t>();
      f.period_s = j["period_s"].get<int>();
      f.sample = j["sample"].get<int>();
      f.clamped = j["clamped"].get<bool>();
      f.points = detail::read_points(j["points"]);
      out.push_back(std::move(f));
    } catch (const std::exception& e) {
      throw std::runtime_error("read_forecasts: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<ForecastRecord> read_forecasts_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_forecasts_file: cannot open " + path);
  return read_forecasts(in);
}

}  // namespace aiscast
