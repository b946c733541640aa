#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "aiscast/forecast.hpp"
#include "aiscast/geo.hpp"
#include "aiscast/model.hpp"

using namespace aiscast;
using Catch::Approx;

namespace {

DiscretizationConfig small_disc() {
  DiscretizationConfig d;
  d.lat_res = 0.25;
  d.lon_res = 0.27;
  d.sog_res = 6.0;
  d.cog_res = 45.0;
  d.lat_coarse = 2;
  d.lon_coarse = 5;
  d.sog_coarse = 2;
  d.cog_coarse = 4;
  return d;
}

ModelConfig tiny_model_config() {
  ModelConfig m;
  m.n_layers = 2;
  m.n_heads = 2;
  m.d_lat = 4;
  m.d_lon = 4;
  m.d_sog = 2;
  m.d_cog = 2;
  m.max_seqlen = 12;
  return m;
}

std::vector<ContinuousObs> random_obs(int n, Rng& rng, const DiscretizationConfig& d) {
  std::vector<ContinuousObs> out(n);
  for (auto& o : out) {
    o.lat = rng.uniform(d.lat_min, d.lat_max - 1e-9);
    o.lon = rng.uniform(d.lon_min, d.lon_max - 1e-9);
    o.sog = rng.uniform(0.0, d.sog_max - 1e-9);
    o.cog = rng.uniform(0.0, 360.0 - 1e-9);
  }
  return out;
}

bool same_points(const std::vector<ContinuousObs>& a, const std::vector<ContinuousObs>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].lat != b[i].lat || a[i].lon != b[i].lon || a[i].sog != b[i].sog ||
        a[i].cog != b[i].cog)
      return false;
  return true;
}

}  // namespace

TEST_CASE("greedy decoding takes the argmax, ties to the lowest bin", "[forecast]") {
  QuadDistribution d;
  d.lat = {0.1, 0.2, 0.4, 0.3};
  d.lon = {0.4, 0.4, 0.2};  // tie
  d.sog = {1.0};
  d.cog = {0.25, 0.25, 0.25, 0.25};  // four-way tie
  const FourHot h = greedy_next(d);
  CHECK(h.lat == 2);
  CHECK(h.lon == 0);
  CHECK(h.sog == 0);
  CHECK(h.cog == 0);
}

TEST_CASE("sampling follows the distribution and sharpens with temperature", "[forecast]") {
  QuadDistribution d;
  d.lat = {0.1, 0.6, 0.3};
  d.lon = {0.25, 0.75};
  d.sog = {1.0};
  d.cog = {0.5, 0.5};

  // Temperature 1: frequencies converge to the probabilities.
  Rng rng(2024);
  const int N = 40000;
  std::map<int, int> counts;
  for (int i = 0; i < N; ++i) ++counts[sample_next(d, rng, 1.0).lat];
  CHECK(counts[0] / static_cast<double>(N) == Approx(0.1).margin(0.01));
  CHECK(counts[1] / static_cast<double>(N) == Approx(0.6).margin(0.01));
  CHECK(counts[2] / static_cast<double>(N) == Approx(0.3).margin(0.01));

  // Temperature 0.5 squares the mass: {0.25, 0.75} -> {1, 9}/10.
  counts.clear();
  for (int i = 0; i < N; ++i) ++counts[sample_next(d, rng, 0.5).lon];
  CHECK(counts[0] / static_cast<double>(N) == Approx(0.1).margin(0.01));
  CHECK(counts[1] / static_cast<double>(N) == Approx(0.9).margin(0.01));

  // Temperature 2 takes square roots and flattens the distribution.
  counts.clear();
  for (int i = 0; i < N; ++i) ++counts[sample_next(d, rng, 2.0).lon];
  const double flat1 = std::sqrt(0.75) / (std::sqrt(0.25) + std::sqrt(0.75));
  CHECK(counts[1] / static_cast<double>(N) == Approx(flat1).margin(0.01));

  // A vanishing temperature degenerates to argmax.
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng r(s);
    const FourHot h = sample_next(d, r, 1e-9);
    CHECK(h.lat == 1);
    CHECK(h.lon == 1);
  }

  Rng r(1);
  CHECK_THROWS_AS(sample_next(d, r, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_next(d, r, -1.0), std::invalid_argument);
  QuadDistribution z;
  z.lat = {0.0, 0.0};
  CHECK_THROWS_AS(sample_next(z, r, 1.0), std::invalid_argument);
}

TEST_CASE("rollouts are seeded, order-invariant, and stay in the region", "[forecast]") {
  const auto disc = small_disc();
  const auto bins = bin_counts(disc);
  const auto mcfg = tiny_model_config();
  Rng init(13);
  auto params = ModelParams<float>::init(mcfg, bins, init);
  Rng gen(14);
  const auto context = random_obs(5, gen, disc);

  RolloutConfig rc;
  rc.horizon = 6;
  rc.n_samples = 4;
  rc.seed = 71;
  auto a = rollout(params, mcfg, disc, context, rc);
  auto b = rollout(params, mcfg, disc, context, rc);
  REQUIRE(a.size() == 4);
  for (int s = 0; s < 4; ++s) {
    REQUIRE(a[s].points.size() == 6);
    CHECK(same_points(a[s].points, b[s].points));
    CHECK_FALSE(a[s].clamped);  // decoded midpoints are always in range
    for (const auto& o : a[s].points) CHECK_NOTHROW(encode(o, disc));
  }

  // Each sample depends only on (seed, sample index), not on n_samples.
  RolloutConfig rc2 = rc;
  rc2.n_samples = 2;
  auto c = rollout(params, mcfg, disc, context, rc2);
  CHECK(same_points(c[0].points, a[0].points));
  CHECK(same_points(c[1].points, a[1].points));

  // A different seed gives different trajectories.
  RolloutConfig rc3 = rc;
  rc3.seed = 72;
  auto d = rollout(params, mcfg, disc, context, rc3);
  bool any_diff = false;
  for (int s = 0; s < 4; ++s) any_diff = any_diff || !same_points(d[s].points, a[s].points);
  CHECK(any_diff);

  // Greedy rollouts ignore the seed and make every sample identical.
  RolloutConfig rg = rc;
  rg.mode = DecodeMode::greedy;
  rg.n_samples = 3;
  auto g1 = rollout(params, mcfg, disc, context, rg);
  rg.seed = 999;
  auto g2 = rollout(params, mcfg, disc, context, rg);
  CHECK(same_points(g1[0].points, g1[1].points));
  CHECK(same_points(g1[1].points, g1[2].points));
  CHECK(same_points(g1[0].points, g2[0].points));

  // Sequence-length budget: context + horizon - 1 must fit max_seqlen.
  RolloutConfig rmax = rc;
  rmax.n_samples = 1;
  rmax.horizon = mcfg.max_seqlen - static_cast<int>(context.size()) + 1;
  CHECK_NOTHROW(rollout(params, mcfg, disc, context, rmax));
  rmax.horizon += 1;
  CHECK_THROWS_AS(rollout(params, mcfg, disc, context, rmax), std::invalid_argument);

  CHECK_THROWS_AS(rollout(params, mcfg, disc, {}, rc), std::invalid_argument);
  auto bad = context;
  bad[2].lat = disc.lat_max + 1.0;  // not representable
  CHECK_THROWS(rollout(params, mcfg, disc, bad, rc));
}

TEST_CASE("regression models roll out deterministically and clamp feedback", "[forecast]") {
  const auto disc = small_disc();
  const auto bins = bin_counts(disc);
  ModelConfig mcfg = tiny_model_config();
  mcfg.repr = ReprMode::raw_continuous;
  mcfg.loss = LossMode::mse;
  Rng init(17);
  auto params = ModelParams<float>::init(mcfg, bins, init);
  Rng gen(18);
  const auto context = random_obs(4, gen, disc);

  RolloutConfig rc;
  rc.horizon = 5;
  rc.n_samples = 3;
  rc.seed = 5;
  auto a = rollout(params, mcfg, disc, context, rc);
  CHECK(same_points(a[0].points, a[1].points));
  CHECK(same_points(a[1].points, a[2].points));

  // Push the latitude output far out of range: the fed-back point must be
  // clamped (and flagged).
  params.reg_b.values()[0] = 10.0f;
  auto b = rollout(params, mcfg, disc, context, rc);
  CHECK(b[0].clamped);
  for (const auto& o : b[0].points) {
    CHECK(o.lat <= disc.lat_max);
    CHECK(o.lat >= disc.lat_min);
  }
}

TEST_CASE("great-circle distance matches an independent formula", "[forecast]") {
  // One degree of latitude on the sphere used for distances.
  CHECK(haversine_nmi(55.0, 10.0, 56.0, 10.0) == Approx(60.0408).margin(0.001));
  CHECK(haversine_nmi(56.0, 11.0, 56.0, 11.0) == 0.0);
  CHECK(haversine_nmi(55.3, 10.2, 57.9, 12.8) ==
        Approx(haversine_nmi(57.9, 12.8, 55.3, 10.2)).epsilon(1e-12));

  // Spherical law of cosines, written independently of the implementation.
  auto slc = [](double lat1, double lon1, double lat2, double lon2) {
    const double p1 = lat1 * kPi / 180.0, p2 = lat2 * kPi / 180.0;
    const double dl = (lon2 - lon1) * kPi / 180.0;
    double c = std::sin(p1) * std::sin(p2) + std::cos(p1) * std::cos(p2) * std::cos(dl);
    c = std::min(1.0, std::max(-1.0, c));
    return kEarthRadiusNmi * std::acos(c);
  };
  Rng rng(33);
  for (int i = 0; i < 200; ++i) {
    const double lat1 = rng.uniform(55.5, 58.0), lon1 = rng.uniform(10.3, 13.0);
    // Keep a minimum separation: the law of cosines loses precision for
    // nearly coincident points.
    const double lat2 = lat1 + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.05, 0.4);
    const double lon2 = lon1 + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.05, 0.4);
    CHECK(haversine_nmi(lat1, lon1, lat2, lon2) ==
          Approx(slc(lat1, lon1, lat2, lon2)).margin(1e-6));
  }
}

TEST_CASE("best-of-N selection minimizes the mean error over the horizon", "[forecast]") {
  // Truth sits still at (56, 11); samples are displaced in latitude only, so
  // errors are strictly increasing in the displacement.
  const ContinuousObs base{56.0, 11.0, 10.0, 0.0};
  std::vector<ContinuousObs> truth(3, base);
  auto displaced = [&](std::vector<double> dlat) {
    ForecastSample s;
    for (double d : dlat) s.points.push_back(ContinuousObs{56.0 + d, 11.0, 10.0, 0.0});
    return s;
  };
  const double step = 0.05;  // ~3 nmi per 0.05 degrees

  // Sample 1 matches the truth exactly; put it second to prove selection is
  // by score, not position.
  std::vector<ForecastSample> samples{displaced({step, step, step}), displaced({0, 0, 0})};
  auto res = best_of_n_error(samples, truth, {1, 3});
  CHECK(res.best_sample == 1);
  CHECK(res.mean_error_nmi == 0.0);
  REQUIRE(res.per_horizon_nmi.size() == 2);
  CHECK(res.per_horizon_nmi[0] == 0.0);
  CHECK(res.per_horizon_nmi[1] == 0.0);

  // Mean-based selection can prefer a sample that is worse at the first
  // horizon: (3u,u,u) has mean 5u/3, (u,2u,2u) has mean 5u/3 too; shrink the
  // first so it wins, then check the reported horizon-1 error is the
  // winner's own (larger) value.
  const double e1 = haversine_nmi(56.0 + step, 11.0, 56.0, 11.0);
  std::vector<ForecastSample> tradeoff{displaced({step, step, step}),
                                       displaced({2 * step, 0.2 * step, 0.2 * step})};
  auto res2 = best_of_n_error(tradeoff, truth, {1, 2, 3});
  CHECK(res2.best_sample == 1);  // mean 2.4u/3 < 3u/3
  CHECK(res2.per_horizon_nmi[0] == Approx(haversine_nmi(56.0 + 2 * step, 11.0, 56.0, 11.0)));
  CHECK(res2.per_horizon_nmi[0] > e1);

  // Ties go to the lowest sample index.
  std::vector<ForecastSample> tie{displaced({step, step, step}), displaced({step, step, step})};
  CHECK(best_of_n_error(tie, truth, {2}).best_sample == 0);

  CHECK_THROWS_AS(best_of_n_error({}, truth, {1}), std::invalid_argument);
  CHECK_THROWS_AS(best_of_n_error(samples, truth, {}), std::invalid_argument);
  CHECK_THROWS_AS(best_of_n_error(samples, truth, {0}), std::invalid_argument);
  CHECK_THROWS_AS(best_of_n_error(samples, truth, {4}), std::invalid_argument);
  std::vector<ForecastSample> shorty{displaced({step})};
  CHECK_THROWS_AS(best_of_n_error(shorty, truth, {3}), std::invalid_argument);
}

TEST_CASE("constant-velocity forecast advances along the held course", "[forecast]") {
  // 12 knots due north for six 600-second steps covers 12 nmi = 0.2 degrees
  // of latitude.
  std::vector<ContinuousObs> ctx{{55.9, 11.0, 5.0, 90.0}, {56.0, 11.0, 12.0, 0.0}};
  auto fc = constant_velocity_forecast(ctx, 6, 600.0);
  REQUIRE(fc.size() == 6);
  CHECK(fc.back().lat == Approx(56.2).margin(1e-9));
  CHECK(fc.back().lon == Approx(11.0).margin(1e-12));
  CHECK(fc.back().sog == 12.0);
  CHECK(fc.back().cog == 0.0);
  CHECK(fc.front().lat == Approx(56.0 + 0.2 / 6.0).margin(1e-9));

  // Due east: latitude fixed, longitude grows by d / (60 cos(lat)) per step.
  std::vector<ContinuousObs> east{{56.0, 11.0, 12.0, 90.0}};
  auto fe = constant_velocity_forecast(east, 3, 600.0);
  const double dlon = 2.0 / (60.0 * std::cos(56.0 * kPi / 180.0));
  CHECK(fe.back().lat == Approx(56.0).margin(1e-9));
  CHECK(fe.back().lon == Approx(11.0 + 3 * dlon).margin(1e-9));

  CHECK_THROWS_AS(constant_velocity_forecast({}, 3, 600.0), std::invalid_argument);
  CHECK_THROWS_AS(constant_velocity_forecast(east, 0, 600.0), std::invalid_argument);
  CHECK_THROWS_AS(constant_velocity_forecast(east, 3, 0.0), std::invalid_argument);
}

TEST_CASE("attention export writes a causal row-stochastic matrix", "[forecast]") {
  const auto disc = small_disc();
  const auto bins = bin_counts(disc);
  const auto mcfg = tiny_model_config();
  Rng init(3);
  auto params = ModelParams<float>::init(mcfg, bins, init);
  Rng gen(4);
  const auto obs = random_obs(5, gen, disc);

  AttentionTrace trace;
  transformer_forward(params, mcfg, disc, obs, &trace);
  std::ostringstream os;
  export_attention_csv(trace, 1, 0, os);

  std::istringstream in(os.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string f;
    std::vector<double> row;
    while (std::getline(fields, f, ',')) row.push_back(std::stod(f));
    REQUIRE(row.size() == 5);
    double sum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (static_cast<int>(j) > rows) CHECK(row[j] == 0.0);
      sum += row[j];
    }
    CHECK(sum == Approx(1.0).epsilon(1e-6));
    ++rows;
  }
  CHECK(rows == 5);
}
