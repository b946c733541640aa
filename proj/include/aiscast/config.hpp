#pragma once
// Plain-text configuration covering every tunable in the toolkit.
//
// Format: one `key = value` per line. Lines whose first non-blank character
// is `#` are comments; blank lines are ignored. Keys are dotted with the
// owning stage (csv., pipeline., disc., model., train., forecast., eval.,
// synth.). Parsing is strict — an unknown key or a malformed value is an
// error — and when the same key appears twice the later line wins, so a
// file can be layered on top of another. dump_config() emits a file that
// parses back to exactly the same settings.

#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiscast/ais.hpp"
#include "aiscast/eval.hpp"
#include "aiscast/fourhot.hpp"
#include "aiscast/io.hpp"
#include "aiscast/model.hpp"
#include "aiscast/synth.hpp"
#include "aiscast/training.hpp"

namespace aiscast {

// Every stage's settings in one place. Defaults are the struct defaults, so
// an empty file (or no file at all) selects the standard setup.
struct AppConfig {
  ColumnMap csv;
  PipelineConfig pipeline;
  DiscretizationConfig disc;
  ModelConfig model;
  TrainConfig train;
  RolloutConfig forecast;
  EvalConfig eval;
  SynthConfig synth;
};

namespace detail {

[[noreturn]] inline void cfg_fail(const char* key, const std::string& what) {
  throw std::runtime_error(std::string("key '") + key + "': " + what);
}

inline std::string cfg_string(const char*, const std::string& v) { return v; }
inline const std::string& cfg_id(const std::string& s) { return s; }

inline double cfg_double(const char* key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) cfg_fail(key, "trailing characters after number '" + v + "'");
    return x;
  } catch (const std::invalid_argument&) {
    cfg_fail(key, "expected a number, got '" + v + "'");
  } catch (const std::out_of_range&) {
    cfg_fail(key, "number out of range: '" + v + "'");
  }
}

inline std::int64_t cfg_i64(const char* key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::int64_t x = std::stoll(v, &pos);
    if (pos != v.size()) cfg_fail(key, "trailing characters after integer '" + v + "'");
    return x;
  } catch (const std::invalid_argument&) {
    cfg_fail(key, "expected an integer, got '" + v + "'");
  } catch (const std::out_of_range&) {
    cfg_fail(key, "integer out of range: '" + v + "'");
  }
}

inline int cfg_int(const char* key, const std::string& v) {
  const std::int64_t x = cfg_i64(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    cfg_fail(key, "integer out of range: '" + v + "'");
  return static_cast<int>(x);
}

inline std::uint64_t cfg_u64(const char* key, const std::string& v) {
  if (!v.empty() && v[0] == '-') cfg_fail(key, "expected a non-negative integer, got '" + v + "'");
  try {
    std::size_t pos = 0;
    const std::uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) cfg_fail(key, "trailing characters after integer '" + v + "'");
    return x;
  } catch (const std::invalid_argument&) {
    cfg_fail(key, "expected an integer, got '" + v + "'");
  } catch (const std::out_of_range&) {
    cfg_fail(key, "integer out of range: '" + v + "'");
  }
}

inline std::size_t cfg_size(const char* key, const std::string& v) {
  return static_cast<std::size_t>(cfg_u64(key, v));
}

inline bool cfg_bool(const char* key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  cfg_fail(key, "expected true/false/1/0, got '" + v + "'");
}

inline std::string cfg_print_bool(bool b) { return b ? "true" : "false"; }

inline std::vector<int> cfg_int_list(const char* key, const std::string& v) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = v.find(',', start);
    const std::string part =
        trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (part.empty()) cfg_fail(key, "empty element in list '" + v + "'");
    out.push_back(cfg_int(key, part));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) cfg_fail(key, "expected a comma-separated list of integers");
  return out;
}

inline std::string cfg_print_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

inline ReprMode cfg_repr(const char* key, const std::string& v) {
  try {
    return parse_repr_mode(v);
  } catch (const std::exception& e) {
    cfg_fail(key, e.what());
  }
}

inline LossMode cfg_loss(const char* key, const std::string& v) {
  try {
    return parse_loss_mode(v);
  } catch (const std::exception& e) {
    cfg_fail(key, e.what());
  }
}

inline DecodeMode cfg_decode(const char* key, const std::string& v) {
  try {
    return parse_decode_mode(v);
  } catch (const std::exception& e) {
    cfg_fail(key, e.what());
  }
}

}  // namespace detail

// One table row per key: how to read it into an AppConfig and how to print
// the current value back out. The table is the single source of truth for
// the key set, the dump order, and the value syntax.
struct ConfigEntry {
  const char* key;
  void (*set)(AppConfig&, const std::string&);
  std::string (*get)(const AppConfig&);
};

// PARSE is a (key, string) -> value converter; PRINT is value -> string.
// Both are substituted textually so plain overloaded functions work.
#define AISCAST_CFG_ENTRY(KEY, FIELD, PARSE, PRINT)                           \
  ConfigEntry {                                                               \
    KEY, [](AppConfig& c, const std::string& v) { c.FIELD = PARSE(KEY, v); }, \
        [](const AppConfig& c) -> std::string { return PRINT(c.FIELD); }      \
  }

inline const std::vector<ConfigEntry>& config_entries() {
  using namespace detail;
  static const std::vector<ConfigEntry> entries = {
      // Column headers expected in the input CSV (matched case-insensitively).
      AISCAST_CFG_ENTRY("csv.timestamp", csv.timestamp, cfg_string, cfg_id),
      AISCAST_CFG_ENTRY("csv.mmsi", csv.mmsi, cfg_string, cfg_id),
      AISCAST_CFG_ENTRY("csv.lat", csv.lat, cfg_string, cfg_id),
      AISCAST_CFG_ENTRY("csv.lon", csv.lon, cfg_string, cfg_id),
      AISCAST_CFG_ENTRY("csv.sog", csv.sog, cfg_string, cfg_id),
      AISCAST_CFG_ENTRY("csv.cog", csv.cog, cfg_string, cfg_id),
      AISCAST_CFG_ENTRY("csv.nav_status", csv.nav_status, cfg_string, cfg_id),
      AISCAST_CFG_ENTRY("csv.ship_type", csv.ship_type, cfg_string, cfg_id),

      // Track cleaning, resampling and windowing.
      AISCAST_CFG_ENTRY("pipeline.max_sog", pipeline.max_sog, cfg_double, format_double),
      AISCAST_CFG_ENTRY("pipeline.speed_limit_kn", pipeline.speed_limit_kn, cfg_double,
                        format_double),
      AISCAST_CFG_ENTRY("pipeline.max_gap_s", pipeline.max_gap_s, cfg_i64, std::to_string),
      AISCAST_CFG_ENTRY("pipeline.min_track_messages", pipeline.min_track_messages, cfg_size,
                        std::to_string),
      AISCAST_CFG_ENTRY("pipeline.min_track_duration_s", pipeline.min_track_duration_s, cfg_i64,
                        std::to_string),
      AISCAST_CFG_ENTRY("pipeline.resample_period_s", pipeline.resample_period_s, cfg_int,
                        std::to_string),
      AISCAST_CFG_ENTRY("pipeline.window_length", pipeline.window_length, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("pipeline.min_window_steps", pipeline.min_window_steps, cfg_int,
                        std::to_string),
      AISCAST_CFG_ENTRY("pipeline.window_stride", pipeline.window_stride, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("pipeline.min_median_sog", pipeline.min_median_sog, cfg_double,
                        format_double),
      AISCAST_CFG_ENTRY("pipeline.coastline_min_km", pipeline.coastline_min_km, cfg_double,
                        format_double),

      // Four-hot discretization grid.
      AISCAST_CFG_ENTRY("disc.lat_min", disc.lat_min, cfg_double, format_double),
      AISCAST_CFG_ENTRY("disc.lat_max", disc.lat_max, cfg_double, format_double),
      AISCAST_CFG_ENTRY("disc.lon_min", disc.lon_min, cfg_double, format_double),
      AISCAST_CFG_ENTRY("disc.lon_max", disc.lon_max, cfg_double, format_double),
      AISCAST_CFG_ENTRY("disc.lat_res", disc.lat_res, cfg_double, format_double),
      AISCAST_CFG_ENTRY("disc.lon_res", disc.lon_res, cfg_double, format_double),
      AISCAST_CFG_ENTRY("disc.sog_max", disc.sog_max, cfg_double, format_double),
      AISCAST_CFG_ENTRY("disc.sog_res", disc.sog_res, cfg_double, format_double),
      AISCAST_CFG_ENTRY("disc.cog_res", disc.cog_res, cfg_double, format_double),
      AISCAST_CFG_ENTRY("disc.lat_coarse", disc.lat_coarse, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("disc.lon_coarse", disc.lon_coarse, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("disc.sog_coarse", disc.sog_coarse, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("disc.cog_coarse", disc.cog_coarse, cfg_int, std::to_string),

      // Transformer architecture and objective.
      AISCAST_CFG_ENTRY("model.n_layers", model.n_layers, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("model.n_heads", model.n_heads, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("model.d_lat", model.d_lat, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("model.d_lon", model.d_lon, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("model.d_sog", model.d_sog, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("model.d_cog", model.d_cog, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("model.max_seqlen", model.max_seqlen, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("model.dropout", model.dropout, cfg_double, format_double),
      AISCAST_CFG_ENTRY("model.beta", model.beta, cfg_double, format_double),
      AISCAST_CFG_ENTRY("model.scale_global", model.scale_global, cfg_bool, cfg_print_bool),
      AISCAST_CFG_ENTRY("model.repr", model.repr, cfg_repr, to_string),
      AISCAST_CFG_ENTRY("model.loss", model.loss, cfg_loss, to_string),

      // Optimizer and schedule.
      AISCAST_CFG_ENTRY("train.lr_max", train.lr_max, cfg_double, format_double),
      AISCAST_CFG_ENTRY("train.lr_min", train.lr_min, cfg_double, format_double),
      AISCAST_CFG_ENTRY("train.cycle_length", train.cycle_length, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("train.beta1", train.beta1, cfg_double, format_double),
      AISCAST_CFG_ENTRY("train.beta2", train.beta2, cfg_double, format_double),
      AISCAST_CFG_ENTRY("train.eps", train.eps, cfg_double, format_double),
      AISCAST_CFG_ENTRY("train.weight_decay", train.weight_decay, cfg_double, format_double),
      AISCAST_CFG_ENTRY("train.grad_clip", train.grad_clip, cfg_double, format_double),
      AISCAST_CFG_ENTRY("train.batch_size", train.batch_size, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("train.epochs", train.epochs, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("train.seed", train.seed, cfg_u64, std::to_string),
      AISCAST_CFG_ENTRY("train.checkpoint_every", train.checkpoint_every, cfg_i64, std::to_string),

      // Autoregressive forecasting.
      AISCAST_CFG_ENTRY("forecast.horizon", forecast.horizon, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("forecast.n_samples", forecast.n_samples, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("forecast.mode", forecast.mode, cfg_decode, to_string),
      AISCAST_CFG_ENTRY("forecast.temperature", forecast.temperature, cfg_double, format_double),
      AISCAST_CFG_ENTRY("forecast.seed", forecast.seed, cfg_u64, std::to_string),

      // Held-out evaluation.
      AISCAST_CFG_ENTRY("eval.context_steps", eval.context_steps, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("eval.horizons", eval.horizons, cfg_int_list, cfg_print_int_list),
      AISCAST_CFG_ENTRY("eval.n_samples", eval.n_samples, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("eval.mode", eval.mode, cfg_decode, to_string),
      AISCAST_CFG_ENTRY("eval.temperature", eval.temperature, cfg_double, format_double),
      AISCAST_CFG_ENTRY("eval.seed", eval.seed, cfg_u64, std::to_string),
      AISCAST_CFG_ENTRY("eval.threshold_nmi", eval.threshold_nmi, cfg_double, format_double),

      // Synthetic branching-corridor generator.
      AISCAST_CFG_ENTRY("synth.n_train", synth.n_train, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("synth.n_test", synth.n_test, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("synth.seed", synth.seed, cfg_u64, std::to_string),
      AISCAST_CFG_ENTRY("synth.period_s", synth.period_s, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("synth.window_steps", synth.window_steps, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("synth.start_lat", synth.start_lat, cfg_double, format_double),
      AISCAST_CFG_ENTRY("synth.start_lon", synth.start_lon, cfg_double, format_double),
      AISCAST_CFG_ENTRY("synth.start_jitter_deg", synth.start_jitter_deg, cfg_double,
                        format_double),
      AISCAST_CFG_ENTRY("synth.heading_deg", synth.heading_deg, cfg_double, format_double),
      AISCAST_CFG_ENTRY("synth.turn_deg", synth.turn_deg, cfg_double, format_double),
      AISCAST_CFG_ENTRY("synth.branch_step", synth.branch_step, cfg_int, std::to_string),
      AISCAST_CFG_ENTRY("synth.speed_mean_kn", synth.speed_mean_kn, cfg_double, format_double),
      AISCAST_CFG_ENTRY("synth.speed_base_sd", synth.speed_base_sd, cfg_double, format_double),
      AISCAST_CFG_ENTRY("synth.speed_step_sd", synth.speed_step_sd, cfg_double, format_double),
      AISCAST_CFG_ENTRY("synth.heading_step_sd", synth.heading_step_sd, cfg_double, format_double),
  };
  return entries;
}

#undef AISCAST_CFG_ENTRY

// Applies a single key/value pair. Throws for unknown keys and bad values.
inline void set_config_value(AppConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : config_entries()) {
    if (key == e.key) {
      e.set(cfg, value);
      return;
    }
  }
  throw std::runtime_error("unknown key '" + key + "'");
}

// Reads `key = value` lines from a stream into cfg. Errors carry the
// 1-based line number.
inline void parse_config(std::istream& in, AppConfig& cfg) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected `key = value`");
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("line " + std::to_string(line_no) + ": missing key before '='");
    try {
      set_config_value(cfg, key, value);
    } catch (const std::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void load_config_file(const std::string& path, AppConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  try {
    parse_config(in, cfg);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

// Prints every key with its current value, grouped by stage. The output
// parses back to the same AppConfig.
inline std::string dump_config(const AppConfig& cfg) {
  struct Banner {
    const char* prefix;
    const char* text;
  };
  static const Banner banners[] = {
      {"csv.", "input CSV column headers"},
      {"pipeline.", "track cleaning, resampling and windowing"},
      {"disc.", "four-hot discretization grid"},
      {"model.", "transformer architecture and objective"},
      {"train.", "optimizer and schedule"},
      {"forecast.", "autoregressive forecasting"},
      {"eval.", "held-out evaluation"},
      {"synth.", "synthetic branching-corridor generator"},
  };
  std::string out;
  const char* current = "";
  for (const auto& e : config_entries()) {
    for (const auto& b : banners) {
      const std::string key = e.key;
      if (key.rfind(b.prefix, 0) == 0 && std::string(current) != b.prefix) {
        if (!out.empty()) out += '\n';
        out += std::string("# ") + b.text + '\n';
        current = b.prefix;
        break;
      }
    }
    out += e.key;
    out += " = ";
    out += e.get(cfg);
    out += '\n';
  }
  return out;
}

}  // namespace aiscast
