#pragma once
// Autoregressive trajectory forecasting: roll the model forward step by step,
// drawing each attribute bin from its predicted distribution (or taking the
// argmax), decoding bins to midpoint values, and feeding the result back in.
// Includes the best-of-N error measure used for evaluation, a
// constant-velocity reference forecast, and attention-matrix export.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiscast/fourhot.hpp"
#include "aiscast/geo.hpp"
#include "aiscast/io.hpp"
#include "aiscast/model.hpp"
#include "aiscast/rng.hpp"

namespace aiscast {

enum class DecodeMode { sample, greedy };

inline const char* to_string(DecodeMode m) {
  switch (m) {
    case DecodeMode::sample: return "sample";
    case DecodeMode::greedy: return "greedy";
  }
  throw std::logic_error("unknown DecodeMode");
}

inline DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "sample") return DecodeMode::sample;
  if (s == "greedy") return DecodeMode::greedy;
  throw std::invalid_argument("unknown decode mode: " + s);
}

namespace detail {

// Draws one bin from a distribution sharpened by 1/temperature. Weights are
// max-normalized in log space so low temperatures cannot underflow; as
// temperature approaches 0 the draw converges to the argmax.
inline int sample_bin(const std::vector<double>& p, double temperature, Rng& rng) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("sample_bin: temperature must be positive");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : p) mx = std::max(mx, v);
  if (!(mx > 0.0)) throw std::invalid_argument("sample_bin: distribution has no mass");
  std::vector<double> w(p.size(), 0.0);
  const double lmx = std::log(mx);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) w[i] = std::exp((std::log(p[i]) - lmx) / temperature);
  return static_cast<int>(rng.categorical(w));
}

inline int argmax_bin(const std::vector<double>& p) {
  if (p.empty()) throw std::invalid_argument("argmax_bin: empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;  // ties resolve to the lowest index
  return static_cast<int>(best);
}

}  // namespace detail

// Draws the four attribute bins independently, in lat, lon, sog, cog order.
inline FourHot sample_next(const QuadDistribution& d, Rng& rng, double temperature = 1.0) {
  FourHot h;
  h.lat = detail::sample_bin(d.lat, temperature, rng);
  h.lon = detail::sample_bin(d.lon, temperature, rng);
  h.sog = detail::sample_bin(d.sog, temperature, rng);
  h.cog = detail::sample_bin(d.cog, temperature, rng);
  return h;
}

inline FourHot greedy_next(const QuadDistribution& d) {
  return FourHot{detail::argmax_bin(d.lat), detail::argmax_bin(d.lon),
                 detail::argmax_bin(d.sog), detail::argmax_bin(d.cog)};
}

struct ForecastSample {
  std::vector<ContinuousObs> points;  // predicted future steps, in order
  bool clamped = false;  // a fed-back prediction had to be pulled into range
};

struct RolloutConfig {
  int horizon = 18;       // steps to predict beyond the context
  int n_samples = 16;
  DecodeMode mode = DecodeMode::sample;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("RolloutConfig: horizon must be >= 1");
    if (n_samples < 1) throw std::invalid_argument("RolloutConfig: n_samples must be >= 1");
    if (!(temperature > 0.0))
      throw std::invalid_argument("RolloutConfig: temperature must be positive");
  }
};

// Rolls the model `rc.horizon` steps past the context, `rc.n_samples` times.
// Each sample uses its own generator seeded from mix_seed(rc.seed, index),
// so results do not depend on evaluation order. Greedy decoding makes all
// samples identical. Classification models feed back decoded bin midpoints
// (always inside the region); the regression variant feeds back its raw
// prediction clamped into range when necessary.
template <typename S>
std::vector<ForecastSample> rollout(ModelParams<S>& params, const ModelConfig& mcfg,
                                    const DiscretizationConfig& disc,
                                    const std::vector<ContinuousObs>& context,
                                    const RolloutConfig& rc) {
  rc.validate();
  if (context.empty()) throw std::invalid_argument("rollout: empty context");
  const int C = static_cast<int>(context.size());
  if (C + rc.horizon - 1 > mcfg.max_seqlen)
    throw std::invalid_argument(
        "rollout: context plus horizon exceeds the model's maximum sequence length");
  for (const auto& o : context) encode(o, disc);  // throws if not representable

  NoGrad guard;
  std::vector<ForecastSample> out(rc.n_samples);
  for (int s = 0; s < rc.n_samples; ++s) {
    Rng rng(mix_seed(rc.seed, static_cast<std::uint64_t>(s)));
    std::vector<ContinuousObs> seq = context;
    auto& fs = out[s];
    fs.points.reserve(rc.horizon);
    for (int step = 0; step < rc.horizon; ++step) {
      ContinuousObs next;
      if (mcfg.loss == LossMode::mse) {
        auto preds = transformer_forward_regression(params, mcfg, disc, seq);
        auto [fixed, moved] = clamp_to_roi(preds.back(), disc);
        next = fixed;
        fs.clamped = fs.clamped || moved;
      } else {
        auto dists = transformer_forward(params, mcfg, disc, seq);
        const QuadDistribution& d = dists.back();
        const FourHot h =
            rc.mode == DecodeMode::greedy ? greedy_next(d) : sample_next(d, rng, rc.temperature);
        next = decode(h, disc);
      }
      fs.points.push_back(next);
      seq.push_back(next);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation measure.

struct BestOfNResult {
  int best_sample = 0;
  double mean_error_nmi = 0.0;             // selection score of the winner
  std::vector<double> per_horizon_nmi;     // winner's error at each horizon
};

// Scores every sample by its mean haversine error over steps 1..max(horizons)
// against the true continuation, picks the minimum (ties to the lowest
// index), and reports that sample's error at each requested horizon.
// horizons are step counts (1-based); truth[j] is the (j+1)-th future step.
inline BestOfNResult best_of_n_error(const std::vector<ForecastSample>& samples,
                                     const std::vector<ContinuousObs>& truth,
                                     const std::vector<int>& horizons) {
  if (samples.empty()) throw std::invalid_argument("best_of_n_error: no samples");
  if (horizons.empty()) throw std::invalid_argument("best_of_n_error: no horizons");
  int hmax = 0;
  for (int h : horizons) {
    if (h < 1) throw std::invalid_argument("best_of_n_error: horizons are 1-based step counts");
    hmax = std::max(hmax, h);
  }
  if (static_cast<int>(truth.size()) < hmax)
    throw std::invalid_argument("best_of_n_error: true continuation shorter than max horizon");

  BestOfNResult res;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& pts = samples[s].points;
    if (static_cast<int>(pts.size()) < hmax)
      throw std::invalid_argument("best_of_n_error: sample shorter than max horizon");
    double sum = 0.0;
    for (int j = 0; j < hmax; ++j)
      sum += haversine_nmi(pts[j].lat, pts[j].lon, truth[j].lat, truth[j].lon);
    const double score = sum / hmax;
    if (score < best_score) {
      best_score = score;
      res.best_sample = static_cast<int>(s);
    }
  }
  res.mean_error_nmi = best_score;
  res.per_horizon_nmi.reserve(horizons.size());
  const auto& win = samples[res.best_sample].points;
  for (int h : horizons)
    res.per_horizon_nmi.push_back(
        haversine_nmi(win[h - 1].lat, win[h - 1].lon, truth[h - 1].lat, truth[h - 1].lon));
  return res;
}

// Dead-reckoning reference: hold the last observed speed and course and
// advance along the great-circle tangent for each step.
inline std::vector<ContinuousObs> constant_velocity_forecast(
    const std::vector<ContinuousObs>& context, int horizon, double period_s) {
  if (context.empty()) throw std::invalid_argument("constant_velocity_forecast: empty context");
  if (horizon < 1) throw std::invalid_argument("constant_velocity_forecast: horizon must be >= 1");
  if (!(period_s > 0.0))
    throw std::invalid_argument("constant_velocity_forecast: period must be positive");
  const ContinuousObs& last = context.back();
  const double step_nmi = last.sog * period_s / 3600.0;
  std::vector<ContinuousObs> out;
  out.reserve(horizon);
  double lat = last.lat, lon = last.lon;
  for (int i = 0; i < horizon; ++i) {
    advance_position(lat, lon, step_nmi, last.cog);
    out.push_back(ContinuousObs{lat, lon, last.sog, last.cog});
  }
  return out;
}

// Writes one attention matrix as CSV: row i holds the weights position i
// assigns to positions 0..K-1 (zero beyond i).
inline void export_attention_csv(const AttentionTrace& trace, int layer, int head,
                                 std::ostream& os) {
  const auto& w = trace.at(layer, head);
  const int K = trace.seq_len;
  if (static_cast<std::size_t>(K) * K != w.size())
    throw std::logic_error("export_attention_csv: trace size mismatch");
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      if (j) os << ',';
      os << format_double(w[static_cast<std::size_t>(i) * K + j]);
    }
    os << '\n';
  }
}

}  // namespace aiscast
