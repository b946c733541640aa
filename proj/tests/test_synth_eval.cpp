#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "aiscast/eval.hpp"
#include "aiscast/synth.hpp"

using namespace aiscast;
using Catch::Approx;

namespace {

bool same_window(const Window& a, const Window& b) {
  if (a.mmsi != b.mmsi || a.t0 != b.t0 || a.period_s != b.period_s ||
      a.points.size() != b.points.size())
    return false;
  for (std::size_t i = 0; i < a.points.size(); ++i)
    if (a.points[i].lat != b.points[i].lat || a.points[i].lon != b.points[i].lon ||
        a.points[i].sog != b.points[i].sog || a.points[i].cog != b.points[i].cog)
      return false;
  return true;
}

// A window whose continuation the tests control exactly.
Window still_window(std::int64_t mmsi, int n_points, int period_s = 600) {
  Window w;
  w.mmsi = mmsi;
  w.t0 = 1000;
  w.period_s = period_s;
  w.points.assign(n_points, ContinuousObs{56.0, 11.0, 10.0, 0.0});
  return w;
}

}  // namespace

TEST_CASE("synthetic corridors are deterministic and well-formed", "[synth]") {
  SynthConfig cfg;
  cfg.n_train = 40;
  cfg.n_test = 10;
  DiscretizationConfig disc;
  auto a = generate_synthetic(cfg, disc);
  auto b = generate_synthetic(cfg, disc);

  REQUIRE(a.train.size() == 40);
  REQUIRE(a.test.size() == 10);
  REQUIRE(a.train_branch_b.size() == 40);
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(same_window(a.train[i], b.train[i]));
  CHECK(a.train_branch_b == b.train_branch_b);
  CHECK(a.test_branch_b == b.test_branch_b);

  for (const auto& w : a.train) {
    CHECK(w.points.size() == 37);
    CHECK(w.period_s == 600);
    CHECK(w.mmsi >= 100000);
    CHECK(w.mmsi < 100000 + 40);
  }
  CHECK(a.test[0].mmsi == 200000);
  CHECK(a.train[5].t0 == 1553000000 + 5 * 3600);
  // Windows arrive sorted by identity.
  CHECK(std::is_sorted(a.train.begin(), a.train.end(),
                       [](const Window& x, const Window& y) { return x.mmsi < y.mmsi; }));

  // Different seeds change the data; train and test splits differ.
  SynthConfig cfg2 = cfg;
  cfg2.seed = 8;
  auto c = generate_synthetic(cfg2, disc);
  CHECK_FALSE(same_window(a.train[0], c.train[0]));
  CHECK_FALSE(same_window(a.train[0], a.test[0]));

  // Every generated point encodes (the generator already enforces this;
  // re-check a sample of windows independently).
  for (int i : {0, 7, 23, 39})
    for (const auto& o : a.train[i].points) CHECK_NOTHROW(encode(o, disc));

  SynthConfig bad;
  bad.branch_step = bad.window_steps;
  CHECK_THROWS_AS(generate_synthetic(bad, disc), std::invalid_argument);
}

TEST_CASE("the branch split is balanced and geometrically separated", "[synth]") {
  SynthConfig cfg;  // full default size
  DiscretizationConfig disc;
  auto ds = generate_synthetic(cfg, disc);
  int b_count = 0;
  for (bool b : ds.train_branch_b) b_count += b ? 1 : 0;
  CHECK(b_count > 200);
  CHECK(b_count < 300);

  const auto refs = branch_reference_tracks(cfg);
  REQUIRE(refs[0].size() == 37);
  REQUIRE(refs[1].size() == 37);
  // The centerlines agree exactly until the branch step...
  for (int k = 0; k < cfg.branch_step; ++k) {
    CHECK(refs[0][k].lat == refs[1][k].lat);
    CHECK(refs[0][k].lon == refs[1][k].lon);
  }
  // ...then the turning branch heads further east and less north.
  CHECK(refs[1].back().lat < refs[0].back().lat);
  CHECK(refs[1].back().lon > refs[0].back().lon);
  const double sep = haversine_nmi(refs[0].back(), refs[1].back());
  CHECK(sep > 10.0);

  // Real trajectories end near their own branch's centerline.
  for (int i = 0; i < 30; ++i) {
    const auto& w = ds.train[i];
    const int ref = ds.train_branch_b[i] ? 1 : 0;
    const double own = haversine_nmi(w.points.back(), refs[ref].back());
    const double other = haversine_nmi(w.points.back(), refs[1 - ref].back());
    CHECK(own < other);
  }
}

TEST_CASE("evaluation aggregates per-window errors into the error curve", "[eval]") {
  // Context 19 steps, horizons 24 and 30 steps at 600 s = 4 h and 5 h.
  EvalConfig cfg;
  cfg.context_steps = 19;
  cfg.horizons = {24, 30};
  cfg.n_samples = 1;
  cfg.threshold_nmi = 10.0;

  // Forecaster with exactly known errors: each window's prediction is
  // displaced north by an mmsi-dependent distance.
  const double deg_per_nmi = 1.0 / (deg2rad(1.0) * kEarthRadiusNmi);
  auto forecast = [&](const std::vector<ContinuousObs>& context, int horizon,
                      std::uint64_t) {
    ForecastSample s;
    const double base = context.front().sog;  // smuggled per-window error, nmi
    for (int j = 1; j <= horizon; ++j) {
      const double err = base + (j > 24 ? 6.0 : 0.0);  // 5h horizon is 6 nmi worse
      s.points.push_back(
          ContinuousObs{56.0 + err * deg_per_nmi, 11.0, 10.0, 0.0});
    }
    return std::vector<ForecastSample>{s};
  };

  // Three windows with 4-hour errors 6, 8, 10 nmi (encoded via sog).
  std::vector<Window> windows;
  for (int i = 0; i < 3; ++i) {
    Window w = still_window(100 + i, 19 + 30);
    for (auto& p : w.points) p.sog = 6.0 + 2.0 * i;
    windows.push_back(w);
  }

  const auto r = evaluate_windows(windows, cfg, forecast);
  CHECK(r.n_windows == 3);
  CHECK(r.n_skipped == 0);
  REQUIRE(r.horizon_hours.size() == 2);
  CHECK(r.horizon_hours[0] == Approx(4.0));
  CHECK(r.horizon_hours[1] == Approx(5.0));
  CHECK(r.mean_nmi[0] == Approx(8.0).margin(1e-9));
  CHECK(r.median_nmi[0] == Approx(8.0).margin(1e-9));
  CHECK(r.mean_nmi[1] == Approx(14.0).margin(1e-9));
  REQUIRE(r.sorted_errors[0].size() == 3);
  CHECK(r.sorted_errors[0][0] == Approx(6.0).margin(1e-9));
  CHECK(r.sorted_errors[0][2] == Approx(10.0).margin(1e-9));

  // Mean curve [8, 14] over [4 h, 5 h] crosses 10 nmi at 4h20m.
  CHECK(r.crossed);
  CHECK(r.crossing_hours == Approx(4.0 + 2.0 / 6.0).margin(1e-9));

  // The canonical interpolation example: [8, 12] over [4, 5] crossing 10.
  EvalReport canon;
  canon.horizon_hours = {4.0, 5.0};
  canon.mean_nmi = {8.0, 12.0};
  canon.threshold_nmi = 10.0;
  compute_crossing(canon);
  CHECK(canon.crossed);
  CHECK(canon.crossing_hours == Approx(4.5).margin(1e-12));

  // Already above the threshold at the first horizon: crossing is there.
  canon.mean_nmi = {12.0, 15.0};
  compute_crossing(canon);
  CHECK(canon.crossed);
  CHECK(canon.crossing_hours == 4.0);

  // Never crossing.
  canon.mean_nmi = {1.0, 2.0};
  compute_crossing(canon);
  CHECK_FALSE(canon.crossed);

  // Even window count: median averages the middle pair.
  windows.push_back(still_window(103, 19 + 30));
  for (auto& p : windows.back().points) p.sog = 20.0;
  const auto r2 = evaluate_windows(windows, cfg, forecast);
  CHECK(r2.median_nmi[0] == Approx(9.0).margin(1e-9));  // {6,8,10,20} -> 9

  // The curve CSV lists hours and mean error (exact string on exact values).
  EvalReport fixed;
  fixed.horizon_hours = {4.0, 5.0};
  fixed.mean_nmi = {8.0, 14.0};
  std::ostringstream csv;
  write_error_curve_csv(fixed, csv);
  CHECK(csv.str() == "horizon_hours,mean_error_nmi\n4,8\n5,14\n");
  std::ostringstream csv2;
  write_error_curve_csv(r, csv2);
  CHECK(csv2.str().rfind("horizon_hours,mean_error_nmi\n4,", 0) == 0);
}

TEST_CASE("evaluation skips short windows and validates inputs", "[eval]") {
  EvalConfig cfg;
  cfg.horizons = {6};
  cfg.n_samples = 1;
  auto forecast = [](const std::vector<ContinuousObs>& context, int horizon, std::uint64_t) {
    ForecastSample s;
    s.points.assign(horizon, context.back());
    return std::vector<ForecastSample>{s};
  };

  std::vector<Window> windows{still_window(1, 25), still_window(2, 24)};  // 2nd too short
  auto r = evaluate_windows(windows, cfg, forecast);
  CHECK(r.n_windows == 1);
  CHECK(r.n_skipped == 1);
  CHECK(r.mean_nmi[0] == 0.0);

  CHECK_THROWS_AS(evaluate_windows({still_window(1, 10)}, cfg, forecast), std::runtime_error);
  std::vector<Window> mixed{still_window(1, 25, 600), still_window(2, 25, 300)};
  CHECK_THROWS_AS(evaluate_windows(mixed, cfg, forecast), std::invalid_argument);

  EvalConfig bad = cfg;
  bad.horizons = {12, 6};
  CHECK_THROWS_AS(evaluate_windows(windows, bad, forecast), std::invalid_argument);
  bad.horizons = {};
  CHECK_THROWS_AS(evaluate_windows(windows, bad, forecast), std::invalid_argument);

  // Constant-velocity baseline: a genuinely motionless ship (sog 0) predicts
  // a motionless truth with zero error.
  Window moored = still_window(1, 25);
  for (auto& p : moored.points) p.sog = 0.0;
  auto cv = evaluate_constant_velocity({moored}, cfg);
  CHECK(cv.n_windows == 1);
  CHECK(cv.mean_nmi[0] == 0.0);
  // A ship that keeps sailing north at a steady 10 knots is predicted
  // almost perfectly too: truth generated by the same dead-reckoning step.
  Window sailing = still_window(2, 25);
  double lat = 56.0, lon = 11.0;
  for (auto& p : sailing.points) {
    p.lat = lat;
    p.lon = lon;
    advance_position(lat, lon, 10.0 * 600.0 / 3600.0, 0.0);
  }
  auto cv2 = evaluate_constant_velocity({sailing}, cfg);
  CHECK(cv2.mean_nmi[0] == Approx(0.0).margin(1e-9));
}

TEST_CASE("evaluation reports are independent of window order", "[eval][slow]") {
  DiscretizationConfig disc;
  disc.lat_res = 0.25;
  disc.lon_res = 0.27;
  disc.sog_res = 6.0;
  disc.cog_res = 45.0;
  disc.lat_coarse = 2;
  disc.lon_coarse = 5;
  disc.sog_coarse = 2;
  disc.cog_coarse = 4;
  const auto bins = bin_counts(disc);
  ModelConfig mcfg;
  mcfg.n_layers = 2;
  mcfg.n_heads = 2;
  mcfg.d_lat = 4;
  mcfg.d_lon = 4;
  mcfg.d_sog = 2;
  mcfg.d_cog = 2;
  mcfg.max_seqlen = 16;
  Rng init(77);
  auto params = ModelParams<float>::init(mcfg, bins, init);

  SynthConfig scfg;
  scfg.n_train = 0 + 6;
  scfg.n_test = 0;
  scfg.window_steps = 14;
  scfg.branch_step = 8;
  auto ds = generate_synthetic(scfg, disc);

  EvalConfig ecfg;
  ecfg.context_steps = 8;
  ecfg.horizons = {3, 6};
  ecfg.n_samples = 4;
  ecfg.seed = 41;

  auto r1 = evaluate_model(params, mcfg, disc, ds.train, ecfg);
  auto shuffled = ds.train;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[1], shuffled[4]);
  auto r2 = evaluate_model(params, mcfg, disc, shuffled, ecfg);

  CHECK(r1.n_windows == 6);
  CHECK(r1.sorted_errors == r2.sorted_errors);
  CHECK(r1.mean_nmi == r2.mean_nmi);
  CHECK(r1.median_nmi == r2.median_nmi);

  // And the whole pipeline is rerun-deterministic.
  auto r3 = evaluate_model(params, mcfg, disc, ds.train, ecfg);
  CHECK(r1.mean_nmi == r3.mean_nmi);
}
