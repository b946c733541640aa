#pragma once
// Training loop: AdamW with decoupled weight decay, cyclic cosine learning
// rate, global-norm gradient clipping, and same-length batch bucketing.
// Everything is seed-deterministic, and a run interrupted at step s can be
// resumed to reproduce the uninterrupted step trace exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiscast/ais.hpp"
#include "aiscast/geo.hpp"
#include "aiscast/model.hpp"
#include "aiscast/rng.hpp"
#include "aiscast/tensor.hpp"

namespace aiscast {

struct TrainConfig {
  double lr_max = 6e-4;
  double lr_min = 0.0;    // 0 selects lr_max / 10
  int cycle_length = 0;   // steps per cosine cycle; 0 selects one epoch
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip = 1.0;  // global gradient norm ceiling; 0 disables
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 42;
  std::int64_t checkpoint_every = 0;  // steps between snapshots; 0 = final only

  double lr_min_effective() const { return lr_min > 0.0 ? lr_min : lr_max / 10.0; }

  void validate() const {
    auto req = [](bool ok, const char* msg) {
      if (!ok) throw std::invalid_argument(std::string("TrainConfig: ") + msg);
    };
    req(lr_max > 0.0, "lr_max must be positive");
    req(lr_min >= 0.0 && lr_min <= lr_max, "lr_min must be in [0, lr_max]");
    req(cycle_length >= 0, "cycle_length must be >= 0");
    req(beta1 >= 0.0 && beta1 < 1.0, "beta1 must be in [0, 1)");
    req(beta2 >= 0.0 && beta2 < 1.0, "beta2 must be in [0, 1)");
    req(eps > 0.0, "eps must be positive");
    req(weight_decay >= 0.0, "weight_decay must be >= 0");
    req(grad_clip >= 0.0, "grad_clip must be >= 0");
    req(batch_size >= 1, "batch_size must be >= 1");
    req(epochs >= 1, "epochs must be >= 1");
    req(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  }
};

// Cyclic cosine schedule: restarts at lr_max at the top of every cycle and
// decays toward lr_min along a half cosine.
inline double cosine_cyclic_lr(std::int64_t step, const TrainConfig& cfg, int steps_per_epoch) {
  if (step < 0) throw std::invalid_argument("cosine_cyclic_lr: negative step");
  const int cycle = cfg.cycle_length > 0 ? cfg.cycle_length : steps_per_epoch;
  if (cycle < 1) throw std::invalid_argument("cosine_cyclic_lr: cycle length must be >= 1");
  const double lo = cfg.lr_min_effective();
  const double pos = static_cast<double>(step % cycle) / static_cast<double>(cycle);
  return lo + 0.5 * (cfg.lr_max - lo) * (1.0 + std::cos(kPi * pos));
}

// Decoupled weight decay applies only to weight matrices (parameter names
// ending in ".w"): embeddings, the positional table, norm gains, and every
// bias are excluded.
inline bool weight_decay_applies(const std::string& name) {
  return name.size() >= 2 && name.compare(name.size() - 2, 2, ".w") == 0;
}

template <typename S>
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor<S>*>> params, TrainConfig cfg)
      : params_(std::move(params)), cfg_(std::move(cfg)) {
    cfg_.validate();
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].second->numel(), S{0});
      v_[i].assign(params_[i].second->numel(), S{0});
    }
  }

  // Consumes the accumulated gradients: clips them by global norm, applies
  // one AdamW update with bias correction and decoupled weight decay, then
  // clears them. Throws (before touching any parameter) if a gradient is
  // non-finite.
  void step(double lr) {
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<S>& p = *params_[i].second;
      if (!p.has_grad()) continue;
      const auto& g = p.grad();
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double gj = static_cast<double>(g[j]);
        if (!std::isfinite(gj))
          throw std::runtime_error("AdamW: non-finite gradient in " + params_[i].first +
                                   " at index " + std::to_string(j));
        sq_sum += gj * gj;
      }
    }
    const double gnorm = std::sqrt(sq_sum);
    double gscale = 1.0;
    if (cfg_.grad_clip > 0.0 && gnorm > cfg_.grad_clip) gscale = cfg_.grad_clip / gnorm;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<S>& p = *params_[i].second;
      auto& vals = p.values();
      auto& m = m_[i];
      auto& v = v_[i];
      const bool decay = cfg_.weight_decay > 0.0 && weight_decay_applies(params_[i].first);
      const S* g = p.has_grad() ? p.grad().data() : nullptr;
      for (std::size_t j = 0; j < vals.size(); ++j) {
        const double gj = g ? static_cast<double>(g[j]) * gscale : 0.0;
        const double mj = cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * gj;
        const double vj = cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * gj * gj;
        m[j] = static_cast<S>(mj);
        v[j] = static_cast<S>(vj);
        double upd = lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps);
        if (decay) upd += lr * cfg_.weight_decay * static_cast<double>(vals[j]);
        vals[j] = static_cast<S>(static_cast<double>(vals[j]) - upd);
      }
      if (p.has_grad()) p.zero_grad();
    }
    last_grad_norm_ = gnorm;
  }

  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) {
    if (t < 0) throw std::invalid_argument("AdamW: negative step count");
    t_ = t;
  }
  double last_grad_norm() const { return last_grad_norm_; }

  const std::vector<std::pair<std::string, Tensor<S>*>>& params() const { return params_; }
  std::vector<std::vector<S>>& moment1() { return m_; }
  std::vector<std::vector<S>>& moment2() { return v_; }

 private:
  std::vector<std::pair<std::string, Tensor<S>*>> params_;
  TrainConfig cfg_;
  std::vector<std::vector<S>> m_, v_;
  std::int64_t t_ = 0;
  double last_grad_norm_ = 0.0;
};

// ---------------------------------------------------------------------------
// Batch planning: windows of equal length are bucketed together so a batch is
// always rectangular. The number of batches per epoch depends only on the
// length histogram, never on the shuffle.

inline int steps_per_epoch(const std::vector<Window>& windows, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("steps_per_epoch: batch_size must be >= 1");
  std::map<std::size_t, int> counts;
  for (const auto& w : windows) ++counts[w.points.size()];
  int steps = 0;
  for (const auto& [len, c] : counts) steps += (c + batch_size - 1) / batch_size;
  return steps;
}

// Shuffles window indices, then walks them in shuffled order collecting
// per-length buckets; a bucket is emitted as a batch when it fills. Leftover
// partial buckets are flushed in ascending length order.
inline std::vector<std::vector<int>> plan_batches(const std::vector<Window>& windows,
                                                  int batch_size, Rng& rng) {
  if (windows.empty()) throw std::invalid_argument("plan_batches: no windows");
  std::vector<int> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  std::map<std::size_t, std::vector<int>> buckets;
  for (int idx : order) {
    auto& b = buckets[windows[idx].points.size()];
    b.push_back(idx);
    if (static_cast<int>(b.size()) == batch_size) {
      batches.push_back(std::move(b));
      b.clear();
    }
  }
  for (auto& [len, b] : buckets)
    if (!b.empty()) batches.push_back(std::move(b));
  return batches;
}

// ---------------------------------------------------------------------------
// Training loop.

struct TrainResult {
  std::int64_t steps_done = 0;
  double final_total = 0.0;
  double final_fine_ce = 0.0;
  double final_coarse_ce = 0.0;
  std::array<double, 4> final_fine_per_head{};  // lat, lon, sog, cog
};

namespace detail {

inline EncodedBatch encode_window_batch(const std::vector<Window>& windows,
                                        const std::vector<int>& idx,
                                        const DiscretizationConfig& disc) {
  std::vector<std::vector<ContinuousObs>> seqs;
  seqs.reserve(idx.size());
  for (int i : idx) seqs.push_back(windows[i].points);
  return encode_batch(seqs, disc);
}

}  // namespace detail

// Runs (epochs * steps_per_epoch - start_step) optimization steps. Restarting
// from a snapshot taken at step s (same seed and configs, optimizer moments
// restored, start_step = s) continues the exact step sequence of the
// uninterrupted run: the shuffle is re-derived per epoch from
// mix_seed(seed, epoch) and already-consumed batches are skipped, and any
// dropout noise is re-derived per step. Emits one CSV trace line per step
// when `trace` is given; invokes `on_checkpoint` after every
// checkpoint_every-th step.
template <typename S>
TrainResult train_model(ModelParams<S>& params, AdamW<S>& opt, const ModelConfig& mcfg,
                        const DiscretizationConfig& disc, const TrainConfig& tcfg,
                        const std::vector<Window>& windows, std::int64_t start_step = 0,
                        std::ostream* trace = nullptr,
                        const std::function<void(std::int64_t)>& on_checkpoint = {}) {
  mcfg.validate();
  tcfg.validate();
  disc.validate();
  if (windows.empty()) throw std::invalid_argument("train_model: no training windows");
  for (const auto& w : windows) {
    if (w.points.size() < 2)
      throw std::invalid_argument("train_model: windows need at least 2 steps");
    if (static_cast<int>(w.points.size()) - 1 > mcfg.max_seqlen)
      throw std::invalid_argument("train_model: window length exceeds model max_seqlen + 1");
  }
  const int spe = steps_per_epoch(windows, tcfg.batch_size);
  const std::int64_t total_steps = static_cast<std::int64_t>(spe) * tcfg.epochs;
  if (start_step < 0 || start_step > total_steps)
    throw std::invalid_argument("train_model: start_step outside the training schedule");
  if (opt.step_count() != start_step)
    throw std::invalid_argument("train_model: optimizer step count does not match start_step");

  if (trace && start_step == 0) *trace << "step,lr,fine_ce,coarse_ce,total\n";

  TrainResult res;
  res.steps_done = start_step;
  std::int64_t step = start_step;
  for (int epoch = static_cast<int>(start_step / spe); epoch < tcfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(tcfg.seed, static_cast<std::uint64_t>(epoch)));
    const auto batches = plan_batches(windows, tcfg.batch_size, shuffle_rng);
    if (static_cast<int>(batches.size()) != spe)
      throw std::logic_error("train_model: batch plan size mismatch");
    for (std::size_t bi = static_cast<std::size_t>(step % spe); bi < batches.size(); ++bi) {
      const auto eb = detail::encode_window_batch(windows, batches[bi], disc);
      const double lr = cosine_cyclic_lr(step, tcfg, spe);
      Rng drop_rng(mix_seed(mix_seed(tcfg.seed, 0xd40b0u), static_cast<std::uint64_t>(step)));
      auto parts = build_loss(params, mcfg, disc, eb,
                              mcfg.dropout > 0.0 ? &drop_rng : nullptr);
      const double total = static_cast<double>(parts.total.value());
      if (!std::isfinite(total))
        throw std::runtime_error("train_model: non-finite loss at step " + std::to_string(step) +
                                 " (lr " + std::to_string(lr) + ", batch of " +
                                 std::to_string(eb.B) + "x" + std::to_string(eb.K) + ")");
      backward(parts.total);
      opt.step(lr);
      ++step;
      if (trace) {
        std::ostream& os = *trace;
        os << step << ',' << std::setprecision(10) << lr << ',' << parts.fine_ce << ','
           << parts.coarse_ce << ',' << total << '\n';
      }
      res.steps_done = step;
      res.final_total = total;
      res.final_fine_ce = parts.fine_ce;
      res.final_coarse_ce = parts.coarse_ce;
      res.final_fine_per_head = parts.fine_per_head;
      if (on_checkpoint && tcfg.checkpoint_every > 0 && step % tcfg.checkpoint_every == 0 &&
          step < total_steps)
        on_checkpoint(step);
    }
  }
  return res;
}

}  // namespace aiscast
