#pragma once
// Synthetic vessel traffic on a branching corridor. Every trajectory starts
// near a common origin and sails a fixed heading; at a branch point half the
// vessels (Bernoulli 0.5) turn right by a fixed angle. Noise enters through
// the start position, a per-vessel base speed, per-step speed jitter, and
// per-step heading jitter. The branch decision is taken strictly after the
// usual evaluation context ends, so a forecaster cannot infer it from the
// context — the future is genuinely bimodal.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aiscast/ais.hpp"
#include "aiscast/fourhot.hpp"
#include "aiscast/geo.hpp"
#include "aiscast/rng.hpp"

namespace aiscast {

struct SynthConfig {
  int n_train = 500;
  int n_test = 50;
  std::uint64_t seed = 7;
  int period_s = 600;
  int window_steps = 37;  // 19 context + 18 future at the default split
  double start_lat = 55.8, start_lon = 10.6;
  double start_jitter_deg = 0.02;   // stddev of the start position offset
  double heading_deg = 55.0;        // corridor heading (branch A keeps it)
  double turn_deg = 45.0;           // branch B turns right by this much
  int branch_step = 24;             // first step sailed on the new heading
  double speed_mean_kn = 12.0;      // per-vessel base speed
  double speed_base_sd = 0.5;
  double speed_step_sd = 0.3;       // per-step speed jitter
  double heading_step_sd = 1.0;     // per-step heading jitter, degrees

  void validate() const {
    auto req = [](bool ok, const char* msg) {
      if (!ok) throw std::invalid_argument(std::string("SynthConfig: ") + msg);
    };
    req(n_train >= 1 && n_test >= 0, "need at least one training trajectory");
    req(period_s > 0, "period must be positive");
    req(window_steps >= 2, "window_steps must be >= 2");
    req(branch_step >= 1 && branch_step < window_steps,
        "branch_step must fall inside the window");
    req(speed_mean_kn > 0.0, "speed must be positive");
    req(speed_base_sd >= 0.0 && speed_step_sd >= 0.0 && heading_step_sd >= 0.0 &&
            start_jitter_deg >= 0.0,
        "noise magnitudes must be >= 0");
  }
};

struct SynthDataset {
  std::vector<Window> train, test;
  // Whether each window took the turning branch, aligned with train/test.
  std::vector<bool> train_branch_b, test_branch_b;
};

namespace detail {

// Speeds are kept inside the representable range with margin; the clamp only
// matters for astronomically unlikely draws.
inline double clamp_speed(double v) { return std::min(29.49, std::max(1.0, v)); }

inline Window synth_trajectory(const SynthConfig& cfg, Rng& rng, std::int64_t mmsi,
                               std::int64_t t0, bool branch_b) {
  Window w;
  w.mmsi = mmsi;
  w.t0 = t0;
  w.period_s = cfg.period_s;
  w.points.reserve(cfg.window_steps);

  double lat = cfg.start_lat + rng.normal(0.0, cfg.start_jitter_deg);
  double lon = cfg.start_lon + rng.normal(0.0, cfg.start_jitter_deg);
  const double base_speed = clamp_speed(rng.normal(cfg.speed_mean_kn, cfg.speed_base_sd));
  for (int k = 0; k < cfg.window_steps; ++k) {
    const double sog = clamp_speed(base_speed + rng.normal(0.0, cfg.speed_step_sd));
    const double course = (branch_b && k >= cfg.branch_step) ? cfg.heading_deg + cfg.turn_deg
                                                             : cfg.heading_deg;
    const double cog = course + rng.normal(0.0, cfg.heading_step_sd);
    w.points.push_back(ContinuousObs{lat, lon, sog, cog});
    advance_position(lat, lon, sog * cfg.period_s / 3600.0, cog);
  }
  return w;
}

}  // namespace detail

// Generates the train and test splits. Each trajectory draws from its own
// generator seeded by (seed, split, index), so any single trajectory is
// reproducible in isolation. Throws if a generated point ever leaves the
// representable region (the default geometry keeps a wide margin).
inline SynthDataset generate_synthetic(const SynthConfig& cfg, const DiscretizationConfig& disc) {
  cfg.validate();
  disc.validate();
  SynthDataset ds;
  auto make_split = [&](int count, std::uint64_t split_tag, std::int64_t mmsi_base,
                        std::vector<Window>& out, std::vector<bool>& branches) {
    out.reserve(count);
    branches.reserve(count);
    for (int i = 0; i < count; ++i) {
      Rng rng(mix_seed(mix_seed(cfg.seed, split_tag), static_cast<std::uint64_t>(i)));
      const bool branch_b = rng.uniform() < 0.5;
      Window w = detail::synth_trajectory(cfg, rng, mmsi_base + i,
                                          1553000000 + static_cast<std::int64_t>(i) * 3600,
                                          branch_b);
      for (const auto& o : w.points) encode(o, disc);  // containment guarantee
      out.push_back(std::move(w));
      branches.push_back(branch_b);
    }
  };
  make_split(cfg.n_train, 1, 100000, ds.train, ds.train_branch_b);
  make_split(cfg.n_test, 2, 200000, ds.test, ds.test_branch_b);
  return ds;
}

// Noise-free centerlines of the two branches (index 0 follows the corridor,
// index 1 turns). Useful for classifying which mode a forecast sample took.
inline std::array<std::vector<ContinuousObs>, 2> branch_reference_tracks(const SynthConfig& cfg) {
  cfg.validate();
  std::array<std::vector<ContinuousObs>, 2> refs;
  for (int b = 0; b < 2; ++b) {
    double lat = cfg.start_lat, lon = cfg.start_lon;
    refs[b].reserve(cfg.window_steps);
    for (int k = 0; k < cfg.window_steps; ++k) {
      const double course =
          (b == 1 && k >= cfg.branch_step) ? cfg.heading_deg + cfg.turn_deg : cfg.heading_deg;
      refs[b].push_back(ContinuousObs{lat, lon, cfg.speed_mean_kn, course});
      advance_position(lat, lon, cfg.speed_mean_kn * cfg.period_s / 3600.0, course);
    }
  }
  return refs;
}

}  // namespace aiscast
