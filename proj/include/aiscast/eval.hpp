#pragma once
// Dataset-level evaluation: every window is split into a context and a true
// continuation, the forecaster produces N candidate futures per window, and
// the best-of-N error (see forecast.hpp) is aggregated across windows into
// per-horizon means and medians plus the point where the mean error curve
// crosses a threshold. Per-window seeds derive from the window identity, so
// results are independent of evaluation order.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiscast/ais.hpp"
#include "aiscast/forecast.hpp"
#include "aiscast/io.hpp"
#include "aiscast/model.hpp"

namespace aiscast {

struct EvalConfig {
  int context_steps = 19;
  std::vector<int> horizons{6, 12, 18};  // steps past the context
  int n_samples = 16;
  DecodeMode mode = DecodeMode::sample;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  double threshold_nmi = 10.0;  // mean-error level whose crossing time is reported

  int max_horizon() const {
    int h = 0;
    for (int v : horizons) h = std::max(h, v);
    return h;
  }

  void validate() const {
    auto req = [](bool ok, const char* msg) {
      if (!ok) throw std::invalid_argument(std::string("EvalConfig: ") + msg);
    };
    req(context_steps >= 1, "context_steps must be >= 1");
    req(!horizons.empty(), "need at least one horizon");
    for (int h : horizons) req(h >= 1, "horizons are 1-based step counts");
    req(std::is_sorted(horizons.begin(), horizons.end()), "horizons must be ascending");
    req(n_samples >= 1, "n_samples must be >= 1");
    req(temperature > 0.0, "temperature must be positive");
    req(threshold_nmi > 0.0, "threshold must be positive");
  }
};

struct EvalReport {
  std::vector<int> horizon_steps;
  std::vector<double> horizon_hours;
  std::vector<double> mean_nmi;
  std::vector<double> median_nmi;
  // Ascending per-window best-of-N errors for each horizon (the exact
  // aggregation input, useful for order-invariance checks).
  std::vector<std::vector<double>> sorted_errors;
  int n_windows = 0;
  int n_skipped = 0;  // windows too short for context + max horizon
  double threshold_nmi = 0.0;
  bool crossed = false;
  double crossing_hours = 0.0;  // defined when crossed
};

// Produces the candidate futures for one context. Receives the per-window
// seed so rollouts are window-deterministic.
using ForecastFn = std::function<std::vector<ForecastSample>(
    const std::vector<ContinuousObs>& context, int horizon, std::uint64_t seed)>;

namespace detail {

inline std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t window_seed(std::uint64_t base, const Window& w) {
  unsigned char buf[16];
  const auto m = static_cast<std::uint64_t>(w.mmsi);
  const auto t = static_cast<std::uint64_t>(w.t0);
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((m >> (8 * i)) & 0xff);
  for (int i = 0; i < 8; ++i) buf[8 + i] = static_cast<unsigned char>((t >> (8 * i)) & 0xff);
  return mix_seed(base, fnv1a64(buf, 16));
}

inline double sorted_mean(const std::vector<double>& sorted) {
  double s = 0.0;
  for (double v : sorted) s += v;
  return s / static_cast<double>(sorted.size());
}

inline double sorted_median(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  return n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace detail

// Walks the mean-error curve and reports where it first reaches the
// threshold, linearly interpolating between horizons. A curve already at or
// above the threshold at the first horizon crosses there.
inline void compute_crossing(EvalReport& r) {
  r.crossed = false;
  if (r.mean_nmi.empty()) return;
  if (r.mean_nmi[0] >= r.threshold_nmi) {
    r.crossed = true;
    r.crossing_hours = r.horizon_hours[0];
    return;
  }
  for (std::size_t i = 1; i < r.mean_nmi.size(); ++i) {
    if (r.mean_nmi[i] >= r.threshold_nmi) {
      const double t0 = r.horizon_hours[i - 1], t1 = r.horizon_hours[i];
      const double e0 = r.mean_nmi[i - 1], e1 = r.mean_nmi[i];
      r.crossed = true;
      r.crossing_hours = t0 + (r.threshold_nmi - e0) * (t1 - t0) / (e1 - e0);
      return;
    }
  }
}

// Evaluates a forecaster over a window set. Windows shorter than
// context + max(horizons) are counted as skipped. All evaluated windows must
// share one sampling period (it defines the horizon-to-hours conversion).
inline EvalReport evaluate_windows(const std::vector<Window>& windows, const EvalConfig& cfg,
                                   const ForecastFn& forecast) {
  cfg.validate();
  const int hmax = cfg.max_horizon();
  EvalReport r;
  r.horizon_steps = cfg.horizons;
  r.threshold_nmi = cfg.threshold_nmi;
  r.sorted_errors.assign(cfg.horizons.size(), {});

  int period = 0;
  for (const auto& w : windows) {
    if (static_cast<int>(w.points.size()) < cfg.context_steps + hmax) {
      ++r.n_skipped;
      continue;
    }
    if (period == 0)
      period = w.period_s;
    else if (w.period_s != period)
      throw std::invalid_argument("evaluate_windows: windows mix sampling periods");
    const std::vector<ContinuousObs> context(w.points.begin(),
                                             w.points.begin() + cfg.context_steps);
    const std::vector<ContinuousObs> truth(w.points.begin() + cfg.context_steps,
                                           w.points.begin() + cfg.context_steps + hmax);
    const auto samples = forecast(context, hmax, detail::window_seed(cfg.seed, w));
    const auto best = best_of_n_error(samples, truth, cfg.horizons);
    for (std::size_t h = 0; h < cfg.horizons.size(); ++h)
      r.sorted_errors[h].push_back(best.per_horizon_nmi[h]);
    ++r.n_windows;
  }
  if (r.n_windows == 0)
    throw std::runtime_error("evaluate_windows: no window is long enough to evaluate");

  for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
    auto& errs = r.sorted_errors[h];
    std::sort(errs.begin(), errs.end());
    r.horizon_hours.push_back(cfg.horizons[h] * period / 3600.0);
    r.mean_nmi.push_back(detail::sorted_mean(errs));
    r.median_nmi.push_back(detail::sorted_median(errs));
  }
  compute_crossing(r);
  return r;
}

// Convenience wrapper: evaluate a trained model via stochastic (or greedy)
// rollouts.
template <typename S>
EvalReport evaluate_model(ModelParams<S>& params, const ModelConfig& mcfg,
                          const DiscretizationConfig& disc, const std::vector<Window>& windows,
                          const EvalConfig& cfg) {
  return evaluate_windows(windows, cfg,
                          [&](const std::vector<ContinuousObs>& context, int horizon,
                              std::uint64_t seed) {
                            RolloutConfig rc;
                            rc.horizon = horizon;
                            rc.n_samples = cfg.n_samples;
                            rc.mode = cfg.mode;
                            rc.temperature = cfg.temperature;
                            rc.seed = seed;
                            return rollout(params, mcfg, disc, context, rc);
                          });
}

// Dead-reckoning baseline: one deterministic sample per window.
inline EvalReport evaluate_constant_velocity(const std::vector<Window>& windows,
                                             const EvalConfig& cfg) {
  int period = 600;
  for (const auto& w : windows)
    if (static_cast<int>(w.points.size()) >= cfg.context_steps + cfg.max_horizon()) {
      period = w.period_s;
      break;
    }
  return evaluate_windows(windows, cfg,
                          [period](const std::vector<ContinuousObs>& context, int horizon,
                                   std::uint64_t) {
                            ForecastSample s;
                            s.points = constant_velocity_forecast(context, horizon, period);
                            return std::vector<ForecastSample>{s};
                          });
}

// CSV with one row per horizon: hours and mean best-of-N error.
inline void write_error_curve_csv(const EvalReport& r, std::ostream& os) {
  os << "horizon_hours,mean_error_nmi\n";
  for (std::size_t i = 0; i < r.horizon_hours.size(); ++i)
    os << format_double(r.horizon_hours[i]) << ',' << format_double(r.mean_nmi[i]) << '\n';
}

}  // namespace aiscast
