#pragma once
// AIS ingestion and cleaning: CSV parsing, message-level filters, track
// assembly, kinematic outlier removal, uniform-rate resampling, and window
// segmentation. Every stage is a pure function with explicit stats so the
// pipeline is auditable and replayable.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aiscast/fourhot.hpp"
#include "aiscast/geo.hpp"

namespace aiscast {

struct AisMessage {
  std::int64_t mmsi = 0;
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  double lat = 0.0;
  double lon = 0.0;
  double sog = 0.0;  // knots
  double cog = 0.0;  // degrees in [0, 360)
  std::optional<std::string> nav_status;
  std::optional<std::string> ship_type;
};

// A time-ascending run of messages from one vessel with no excessive gaps.
struct Track {
  std::int64_t mmsi = 0;
  std::vector<AisMessage> messages;
};

// A fixed-rate window ready for training/evaluation.
struct Window {
  std::int64_t mmsi = 0;
  std::int64_t t0 = 0;  // epoch seconds of the first point
  int period_s = 600;
  std::vector<ContinuousObs> points;
};

// CSV header names for the required and optional fields. Matching is
// case-insensitive after trimming.
struct ColumnMap {
  std::string timestamp = "timestamp";
  std::string mmsi = "mmsi";
  std::string lat = "lat";
  std::string lon = "lon";
  std::string sog = "sog";
  std::string cog = "cog";
  std::string nav_status = "nav_status";  // optional column
  std::string ship_type = "ship_type";    // optional column
};

struct PipelineConfig {
  double max_sog = 30.0;                      // remove messages at/above (knots)
  double speed_limit_kn = 40.0;               // empirical track-speed outlier cut
  std::int64_t max_gap_s = 2 * 3600;          // split tracks at longer silences
  std::size_t min_track_messages = 20;        // drop shorter tracks
  std::int64_t min_track_duration_s = 4 * 3600;
  int resample_period_s = 600;
  int window_length = 120;                    // max steps per window
  int min_window_steps = 19;                  // trailing windows shorter than this are dropped
  int window_stride = 0;                      // 0 = non-overlapping (stride == window_length)
  double min_median_sog = 0.5;                // moored fallback when nav_status is absent
  double coastline_min_km = 2.0;              // drop messages closer to shore than this

  void validate() const {
    auto req = [](bool ok, const char* msg) {
      if (!ok) throw std::invalid_argument(std::string("PipelineConfig: ") + msg);
    };
    req(max_sog > 0, "max_sog must be positive");
    req(speed_limit_kn > 0, "speed_limit_kn must be positive");
    req(max_gap_s > 0, "max_gap_s must be positive");
    req(min_track_messages >= 2, "min_track_messages must be >= 2");
    req(min_track_duration_s >= 0, "min_track_duration_s must be >= 0");
    req(resample_period_s > 0, "resample_period_s must be positive");
    req(window_length >= 2, "window_length must be >= 2");
    req(min_window_steps >= 2 && min_window_steps <= window_length,
        "min_window_steps must be in [2, window_length]");
    req(window_stride >= 0, "window_stride must be >= 0");
    req(coastline_min_km >= 0, "coastline_min_km must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Timestamp parsing: epoch seconds, ISO-8601 (T or space separator, optional
// 'Z' and fractional seconds), or day-first "DD/MM/YYYY HH:MM:SS".

namespace detail {

// Days since 1970-01-01 for a civil date (Gregorian, proleptic).
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline bool parse_int_strict(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (std::size_t j = i; j < s.size(); ++j)
    if (!std::isdigit(static_cast<unsigned char>(s[j]))) return false;
  try {
    out = std::stoll(s);
  } catch (...) {
    return false;
  }
  return true;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

// Returns epoch seconds, or nullopt when the string is not a recognized
// timestamp. Fractional seconds are truncated.
inline std::optional<std::int64_t> parse_timestamp(const std::string& raw) {
  const std::string s = detail::trim(raw);
  if (s.empty()) return std::nullopt;
  std::int64_t as_int = 0;
  if (detail::parse_int_strict(s, as_int)) return as_int;

  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  char sep = 0;
  if (s.find('/') != std::string::npos) {
    // DD/MM/YYYY HH:MM:SS
    if (std::sscanf(s.c_str(), "%d/%d/%d %d:%d:%lf", &d, &mo, &y, &h, &mi, &sec) != 6)
      return std::nullopt;
  } else {
    // YYYY-MM-DD[T ]HH:MM:SS[.frac][Z]
    if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &h, &mi, &sec) != 7)
      return std::nullopt;
    if (sep != 'T' && sep != ' ') return std::nullopt;
  }
  if (y < 1000 || mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || sec < 0.0 || sec >= 61.0)
    return std::nullopt;
  return detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 +
         static_cast<std::int64_t>(sec);
}

// ---------------------------------------------------------------------------
// CSV parsing. Minimal quoted-field handling ("" escapes a quote inside a
// quoted field). Rows with missing/unparseable required fields, or values
// violating the message invariants, are dropped and counted.

struct ParseStats {
  std::size_t rows_total = 0;
  std::size_t rows_dropped = 0;
};

struct ParseResult {
  std::vector<AisMessage> messages;
  ParseStats stats;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c == '\r' && i + 1 == line.size()) {
      // swallow trailing CR from CRLF files
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_double_strict(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(t, &pos);
    if (pos != t.size()) return false;
  } catch (...) {
    return false;
  }
  return std::isfinite(out);
}

}  // namespace detail

inline ParseResult parse_csv(std::istream& in, const ColumnMap& cols = {}) {
  ParseResult res;
  std::string line;
  if (!std::getline(in, line)) return res;
  const auto headers = detail::split_csv_line(line);
  auto find_col = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < headers.size(); ++i)
      if (detail::lower(detail::trim(headers[i])) == detail::lower(detail::trim(name)))
        return static_cast<int>(i);
    return -1;
  };
  const int c_ts = find_col(cols.timestamp);
  const int c_mmsi = find_col(cols.mmsi);
  const int c_lat = find_col(cols.lat);
  const int c_lon = find_col(cols.lon);
  const int c_sog = find_col(cols.sog);
  const int c_cog = find_col(cols.cog);
  const int c_nav = find_col(cols.nav_status);
  const int c_type = find_col(cols.ship_type);
  if (c_ts < 0 || c_mmsi < 0 || c_lat < 0 || c_lon < 0 || c_sog < 0 || c_cog < 0)
    throw std::runtime_error("parse_csv: header is missing a required column (need " +
                             cols.timestamp + ", " + cols.mmsi + ", " + cols.lat + ", " +
                             cols.lon + ", " + cols.sog + ", " + cols.cog + ")");

  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++res.stats.rows_total;
    const auto f = detail::split_csv_line(line);
    const int needed = std::max({c_ts, c_mmsi, c_lat, c_lon, c_sog, c_cog});
    if (static_cast<int>(f.size()) <= needed) {
      ++res.stats.rows_dropped;
      continue;
    }
    AisMessage m;
    const auto ts = parse_timestamp(f[c_ts]);
    bool ok = ts.has_value();
    if (ok) m.timestamp = *ts;
    ok = ok && detail::parse_int_strict(detail::trim(f[c_mmsi]), m.mmsi);
    ok = ok && detail::parse_double_strict(f[c_lat], m.lat);
    ok = ok && detail::parse_double_strict(f[c_lon], m.lon);
    ok = ok && detail::parse_double_strict(f[c_sog], m.sog);
    ok = ok && detail::parse_double_strict(f[c_cog], m.cog);
    // Field invariants; cog == 360 is the AIS "not available" marker.
    ok = ok && m.lat >= -90.0 && m.lat <= 90.0 && m.lon >= -180.0 && m.lon <= 180.0 &&
         m.sog >= 0.0 && m.cog >= 0.0 && m.cog < 360.0;
    if (!ok) {
      ++res.stats.rows_dropped;
      continue;
    }
    if (c_nav >= 0 && c_nav < static_cast<int>(f.size())) {
      const auto v = detail::trim(f[c_nav]);
      if (!v.empty()) m.nav_status = v;
    }
    if (c_type >= 0 && c_type < static_cast<int>(f.size())) {
      const auto v = detail::trim(f[c_type]);
      if (!v.empty()) m.ship_type = v;
    }
    res.messages.push_back(std::move(m));
  }
  return res;
}

inline ParseResult parse_csv_file(const std::string& path, const ColumnMap& cols = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_csv_file: cannot open " + path);
  return parse_csv(in, cols);
}

// ---------------------------------------------------------------------------
// Message-level cleaning.

struct CleanStats {
  std::size_t removed_sog = 0;
  std::size_t removed_outside_roi = 0;
  std::size_t removed_moored = 0;
};

struct CleanResult {
  std::vector<AisMessage> messages;
  CleanStats stats;
};

// True when a nav_status string marks a vessel as moored or at anchor
// (textual labels or the numeric status codes 1/5).
inline bool is_moored_status(const std::string& status) {
  const std::string s = detail::lower(detail::trim(status));
  return s == "moored" || s == "at anchor" || s == "1" || s == "5";
}

inline CleanResult clean_messages(const std::vector<AisMessage>& in, const PipelineConfig& cfg,
                                  const DiscretizationConfig& roi) {
  cfg.validate();
  roi.validate();
  CleanResult res;
  res.messages.reserve(in.size());
  for (const auto& m : in) {
    if (m.sog >= cfg.max_sog) {
      ++res.stats.removed_sog;
      continue;
    }
    if (m.lat < roi.lat_min || m.lat > roi.lat_max || m.lon < roi.lon_min ||
        m.lon > roi.lon_max) {
      ++res.stats.removed_outside_roi;
      continue;
    }
    if (m.nav_status && is_moored_status(*m.nav_status)) {
      ++res.stats.removed_moored;
      continue;
    }
    res.messages.push_back(m);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Optional coastline proximity filter. Polyline file format: one "lat lon"
// pair per line; blank lines or lines starting with '#' separate polylines.

struct Polyline {
  std::vector<std::pair<double, double>> pts;  // (lat, lon)
};

inline std::vector<Polyline> load_polylines(std::istream& in) {
  std::vector<Polyline> out;
  Polyline cur;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') {
      if (!cur.pts.empty()) out.push_back(std::move(cur));
      cur = {};
      continue;
    }
    std::istringstream ss(t);
    double lat = 0, lon = 0;
    if (!(ss >> lat >> lon)) throw std::runtime_error("load_polylines: bad line: " + line);
    cur.pts.emplace_back(lat, lon);
  }
  if (!cur.pts.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::vector<Polyline> load_polylines_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_polylines_file: cannot open " + path);
  return load_polylines(in);
}

// Distance from a point to the nearest polyline, in km. Segments are
// evaluated in a local equirectangular projection around the query point,
// which is accurate at the few-km scales this filter cares about.
inline double min_distance_km(double lat, double lon, const std::vector<Polyline>& lines) {
  constexpr double kKmPerNmi = 1.852;
  double best = std::numeric_limits<double>::infinity();
  const double coslat = std::cos(deg2rad(lat));
  for (const auto& pl : lines) {
    for (std::size_t i = 0; i < pl.pts.size(); ++i) {
      best = std::min(best, haversine_nmi(lat, lon, pl.pts[i].first, pl.pts[i].second));
      if (i + 1 < pl.pts.size()) {
        // Project the segment into nmi offsets from the query point.
        auto to_xy = [&](const std::pair<double, double>& p) {
          return std::pair<double, double>{(p.second - lon) * 60.0 * coslat,
                                           (p.first - lat) * 60.0};
        };
        const auto [ax, ay] = to_xy(pl.pts[i]);
        const auto [bx, by] = to_xy(pl.pts[i + 1]);
        const double dx = bx - ax, dy = by - ay;
        const double len2 = dx * dx + dy * dy;
        if (len2 > 0.0) {
          double t = -(ax * dx + ay * dy) / len2;
          t = std::clamp(t, 0.0, 1.0);
          const double px = ax + t * dx, py = ay + t * dy;
          best = std::min(best, std::sqrt(px * px + py * py));
        }
      }
    }
  }
  return best * kKmPerNmi;
}

struct CoastlineResult {
  std::vector<AisMessage> messages;
  std::size_t removed = 0;
};

inline CoastlineResult coastline_filter(const std::vector<AisMessage>& in,
                                        const std::vector<Polyline>& lines, double min_km) {
  CoastlineResult res;
  if (lines.empty()) {
    res.messages = in;
    return res;
  }
  res.messages.reserve(in.size());
  for (const auto& m : in) {
    if (min_distance_km(m.lat, m.lon, lines) < min_km) {
      ++res.removed;
    } else {
      res.messages.push_back(m);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Track assembly: group by vessel, sort by time (stable: file order breaks
// timestamp ties, first kept), split at long gaps.

inline std::vector<Track> assemble_tracks(const std::vector<AisMessage>& msgs,
                                          const PipelineConfig& cfg) {
  cfg.validate();
  std::map<std::int64_t, std::vector<AisMessage>> by_vessel;
  for (const auto& m : msgs) by_vessel[m.mmsi].push_back(m);
  std::vector<Track> out;
  for (auto& [mmsi, vec] : by_vessel) {
    std::stable_sort(vec.begin(), vec.end(),
                     [](const AisMessage& a, const AisMessage& b) { return a.timestamp < b.timestamp; });
    Track cur;
    cur.mmsi = mmsi;
    for (const auto& m : vec) {
      if (!cur.messages.empty()) {
        const std::int64_t prev = cur.messages.back().timestamp;
        if (m.timestamp == prev) continue;  // duplicate timestamp: keep first
        if (m.timestamp - prev > cfg.max_gap_s) {
          out.push_back(std::move(cur));
          cur = Track{mmsi, {}};
        }
      }
      cur.messages.push_back(m);
    }
    if (!cur.messages.empty()) out.push_back(std::move(cur));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Track-level filtering.

struct TrackFilterStats {
  std::size_t removed_speed_jumps = 0;  // messages cut by the empirical-speed rule
  std::size_t dropped_short = 0;        // tracks below min messages/duration
  std::size_t dropped_moored = 0;       // tracks caught by the median-SOG fallback
};

struct TrackFilterResult {
  std::vector<Track> tracks;
  TrackFilterStats stats;
};

// Empirical speed between consecutive messages, in knots.
inline double empirical_speed_kn(const AisMessage& a, const AisMessage& b) {
  const double dt_h = static_cast<double>(b.timestamp - a.timestamp) / 3600.0;
  if (dt_h <= 0.0) throw std::invalid_argument("empirical_speed_kn: non-increasing timestamps");
  return haversine_nmi(a.lat, a.lon, b.lat, b.lon) / dt_h;
}

inline TrackFilterResult filter_tracks(const std::vector<Track>& in, const PipelineConfig& cfg) {
  cfg.validate();
  TrackFilterResult res;
  for (const auto& tr : in) {
    // Remove messages implying impossible jumps relative to the last kept fix.
    Track kept;
    kept.mmsi = tr.mmsi;
    for (const auto& m : tr.messages) {
      if (!kept.messages.empty() &&
          empirical_speed_kn(kept.messages.back(), m) > cfg.speed_limit_kn) {
        ++res.stats.removed_speed_jumps;
        continue;
      }
      kept.messages.push_back(m);
    }
    // Moored fallback: only when no message carried a nav_status at all.
    const bool any_status = std::any_of(kept.messages.begin(), kept.messages.end(),
                                        [](const AisMessage& m) { return m.nav_status.has_value(); });
    if (!any_status && !kept.messages.empty()) {
      std::vector<double> sogs;
      sogs.reserve(kept.messages.size());
      for (const auto& m : kept.messages) sogs.push_back(m.sog);
      std::sort(sogs.begin(), sogs.end());
      const std::size_t n = sogs.size();
      const double median =
          n % 2 ? sogs[n / 2] : 0.5 * (sogs[n / 2 - 1] + sogs[n / 2]);
      if (median < cfg.min_median_sog) {
        ++res.stats.dropped_moored;
        continue;
      }
    }
    // Length and duration requirements, re-checked after removals.
    if (kept.messages.size() < cfg.min_track_messages ||
        kept.messages.back().timestamp - kept.messages.front().timestamp <
            cfg.min_track_duration_s) {
      ++res.stats.dropped_short;
      continue;
    }
    res.tracks.push_back(std::move(kept));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Resampling to a uniform grid anchored at the first timestamp. lat/lon/sog
// interpolate linearly; cog interpolates along the shorter circular arc.

// Circular interpolation between headings a and b (degrees), weight w in
// [0,1]; result wrapped to [0, 360).
inline double circular_lerp(double a, double b, double w) {
  double d = std::fmod(b - a, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  double r = std::fmod(a + w * d, 360.0);
  if (r < 0.0) r += 360.0;
  return r;
}

inline Track resample_track(const Track& tr, const PipelineConfig& cfg) {
  cfg.validate();
  if (tr.messages.empty()) return Track{tr.mmsi, {}};
  Track out;
  out.mmsi = tr.mmsi;
  const std::int64_t t0 = tr.messages.front().timestamp;
  const std::int64_t t_end = tr.messages.back().timestamp;
  std::size_t hi = 0;  // first message with timestamp >= t (monotone cursor)
  for (std::int64_t t = t0; t <= t_end; t += cfg.resample_period_s) {
    while (hi < tr.messages.size() && tr.messages[hi].timestamp < t) ++hi;
    const AisMessage& b = tr.messages[hi];
    AisMessage p;
    p.mmsi = tr.mmsi;
    p.timestamp = t;
    if (b.timestamp == t || hi == 0) {
      p.lat = b.lat;
      p.lon = b.lon;
      p.sog = b.sog;
      p.cog = b.cog;
    } else {
      const AisMessage& a = tr.messages[hi - 1];
      const double w = static_cast<double>(t - a.timestamp) /
                       static_cast<double>(b.timestamp - a.timestamp);
      p.lat = a.lat + w * (b.lat - a.lat);
      p.lon = a.lon + w * (b.lon - a.lon);
      p.sog = a.sog + w * (b.sog - a.sog);
      p.cog = circular_lerp(a.cog, b.cog, w);
    }
    out.messages.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Window segmentation. Non-overlapping by default; a positive stride smaller
// than window_length yields overlapping training windows. Trailing segments
// shorter than min_window_steps are dropped.

inline std::vector<Track> segment_windows(const Track& tr, const PipelineConfig& cfg) {
  cfg.validate();
  const int stride = cfg.window_stride > 0 ? cfg.window_stride : cfg.window_length;
  std::vector<Track> out;
  const std::size_t n = tr.messages.size();
  for (std::size_t start = 0; start + cfg.min_window_steps <= n;
       start += static_cast<std::size_t>(stride)) {
    const std::size_t len = std::min<std::size_t>(cfg.window_length, n - start);
    Track w;
    w.mmsi = tr.mmsi;
    w.messages.assign(tr.messages.begin() + start, tr.messages.begin() + start + len);
    out.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full pipeline.

struct PipelineStats {
  ParseStats parse;
  CleanStats clean;
  std::size_t coastline_removed = 0;
  std::size_t tracks_assembled = 0;
  TrackFilterStats track_filter;
  std::size_t tracks_kept = 0;
  std::size_t windows = 0;
};

struct PipelineResult {
  std::vector<Window> windows;
  PipelineStats stats;
};

inline PipelineResult run_pipeline(const std::vector<AisMessage>& messages,
                                   const PipelineConfig& cfg, const DiscretizationConfig& roi,
                                   const std::vector<Polyline>& coastline = {}) {
  PipelineResult res;
  auto cleaned = clean_messages(messages, cfg, roi);
  res.stats.clean = cleaned.stats;
  auto coast = coastline_filter(cleaned.messages, coastline, cfg.coastline_min_km);
  res.stats.coastline_removed = coast.removed;
  auto tracks = assemble_tracks(coast.messages, cfg);
  res.stats.tracks_assembled = tracks.size();
  auto filtered = filter_tracks(tracks, cfg);
  res.stats.track_filter = filtered.stats;
  res.stats.tracks_kept = filtered.tracks.size();
  for (const auto& tr : filtered.tracks) {
    const Track rs = resample_track(tr, cfg);
    for (const auto& seg : segment_windows(rs, cfg)) {
      Window w;
      w.mmsi = seg.mmsi;
      w.t0 = seg.messages.front().timestamp;
      w.period_s = cfg.resample_period_s;
      w.points.reserve(seg.messages.size());
      for (const auto& m : seg.messages) w.points.push_back({m.lat, m.lon, m.sog, m.cog});
      res.windows.push_back(std::move(w));
    }
  }
  // Canonical output order regardless of upstream arrangement.
  std::stable_sort(res.windows.begin(), res.windows.end(), [](const Window& a, const Window& b) {
    return a.mmsi != b.mmsi ? a.mmsi < b.mmsi : a.t0 < b.t0;
  });
  res.stats.windows = res.windows.size();
  return res;
}

}  // namespace aiscast
