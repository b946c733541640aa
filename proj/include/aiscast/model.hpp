#pragma once
// Decoder-only causal transformer over discretized AIS observations.
// Input: per-attribute bin embeddings concatenated to a single vector per
// time step (or a linear projection of the scaled continuous attributes for
// the ablation variants). Output: one classification head per attribute
// (or a 4-unit regression head for the MSE variant). Position k predicts
// the observation at k+1.

#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiscast/fourhot.hpp"
#include "aiscast/rng.hpp"
#include "aiscast/tensor.hpp"

namespace aiscast {

// Input representation: four-hot bin embeddings, or a linear projection of
// the min-max-scaled continuous attributes. raw_continuous and dense_embed
// are computationally identical (both are a learned 4 -> d_embed linear map);
// the two names exist so experiment configs read naturally against the two
// ablation pairings they appear in.
enum class ReprMode { fourhot_embed, raw_continuous, dense_embed };

// Training objective: fine+coarse cross-entropy, fine-only cross-entropy, or
// mean L2 distance in scaled attribute space (regression head).
enum class LossMode { ce_multires, ce_fine_only, mse };

inline const char* to_string(ReprMode m) {
  switch (m) {
    case ReprMode::fourhot_embed: return "fourhot_embed";
    case ReprMode::raw_continuous: return "raw_continuous";
    case ReprMode::dense_embed: return "dense_embed";
  }
  throw std::logic_error("unknown ReprMode");
}

inline const char* to_string(LossMode m) {
  switch (m) {
    case LossMode::ce_multires: return "ce_multires";
    case LossMode::ce_fine_only: return "ce_fine_only";
    case LossMode::mse: return "mse";
  }
  throw std::logic_error("unknown LossMode");
}

inline ReprMode parse_repr_mode(const std::string& s) {
  if (s == "fourhot_embed") return ReprMode::fourhot_embed;
  if (s == "raw_continuous") return ReprMode::raw_continuous;
  if (s == "dense_embed") return ReprMode::dense_embed;
  throw std::invalid_argument("unknown representation mode: " + s);
}

inline LossMode parse_loss_mode(const std::string& s) {
  if (s == "ce_multires") return LossMode::ce_multires;
  if (s == "ce_fine_only") return LossMode::ce_fine_only;
  if (s == "mse") return LossMode::mse;
  throw std::invalid_argument("unknown loss mode: " + s);
}

struct ModelConfig {
  int n_layers = 8;
  int n_heads = 8;
  int d_lat = 256, d_lon = 256, d_sog = 128, d_cog = 128;
  int max_seqlen = 144;
  double dropout = 0.0;
  double beta = 1.0;          // weight of the coarse cross-entropy term
  bool scale_global = false;  // true: scores scaled by 1/sqrt(d_embed) instead of 1/sqrt(d_head)
  ReprMode repr = ReprMode::fourhot_embed;
  LossMode loss = LossMode::ce_multires;

  int d_embed() const { return d_lat + d_lon + d_sog + d_cog; }

  void validate() const {
    auto req = [](bool ok, const char* msg) {
      if (!ok) throw std::invalid_argument(std::string("ModelConfig: ") + msg);
    };
    req(n_layers >= 1, "n_layers must be >= 1");
    req(n_heads >= 1, "n_heads must be >= 1");
    req(d_lat > 0 && d_lon > 0 && d_sog > 0 && d_cog > 0, "embedding dims must be positive");
    req(d_embed() % n_heads == 0, "d_embed must be divisible by n_heads");
    req(max_seqlen >= 2, "max_seqlen must be >= 2");
    req(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
    req(beta >= 0.0, "beta must be >= 0");
  }
};

template <typename S>
struct LayerParams {
  Tensor<S> ln1_g, ln1_b;
  Tensor<S> qkv_w, qkv_b;    // [d_e, 3*d_e], [3*d_e]
  Tensor<S> attn_w, attn_b;  // [d_e, d_e], [d_e]
  Tensor<S> ln2_g, ln2_b;
  Tensor<S> fc_w, fc_b;      // [d_e, 4*d_e], [4*d_e]
  Tensor<S> proj_w, proj_b;  // [4*d_e, d_e], [d_e]
};

template <typename S>
struct ModelParams {
  // Four-hot mode: one embedding table per attribute.
  Tensor<S> emb_lat, emb_lon, emb_sog, emb_cog;
  // Continuous modes: linear map from the 4 scaled attributes.
  Tensor<S> input_w, input_b;  // [4, d_e], [d_e]
  Tensor<S> pos;               // [max_seqlen, d_e]
  std::vector<LayerParams<S>> layers;
  Tensor<S> lnf_g, lnf_b;
  // Classification heads (CE modes)...
  Tensor<S> head_lat_w, head_lat_b, head_lon_w, head_lon_b;
  Tensor<S> head_sog_w, head_sog_b, head_cog_w, head_cog_b;
  // ...or the regression head (MSE mode).
  Tensor<S> reg_w, reg_b;  // [d_e, 4], [4]

  // Initializes all parameters: weights and embeddings N(0, 0.02), biases 0,
  // norm gains 1. Draw order equals named() order, so one seed fixes the
  // full initialization.
  static ModelParams init(const ModelConfig& cfg, const BinCounts& bins, Rng& rng) {
    return allocate(cfg, bins, &rng);
  }

  // Same structure with all random-initialized tensors zeroed (norm gains
  // still 1); used when the values are about to be overwritten, e.g. by a
  // checkpoint loader.
  static ModelParams zeros(const ModelConfig& cfg, const BinCounts& bins) {
    return allocate(cfg, bins, nullptr);
  }

  // Stable name -> tensor listing; the order defines the checkpoint layout.
  std::vector<std::pair<std::string, Tensor<S>*>> named() {
    std::vector<std::pair<std::string, Tensor<S>*>> out;
    auto push = [&](const std::string& n, Tensor<S>& t) {
      if (t.defined()) out.emplace_back(n, &t);
    };
    push("emb.lat", emb_lat);
    push("emb.lon", emb_lon);
    push("emb.sog", emb_sog);
    push("emb.cog", emb_cog);
    push("input.w", input_w);
    push("input.b", input_b);
    push("pos", pos);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string pre = "layer" + std::to_string(i) + ".";
      auto& l = layers[i];
      push(pre + "ln1.g", l.ln1_g);
      push(pre + "ln1.b", l.ln1_b);
      push(pre + "qkv.w", l.qkv_w);
      push(pre + "qkv.b", l.qkv_b);
      push(pre + "attn.w", l.attn_w);
      push(pre + "attn.b", l.attn_b);
      push(pre + "ln2.g", l.ln2_g);
      push(pre + "ln2.b", l.ln2_b);
      push(pre + "fc.w", l.fc_w);
      push(pre + "fc.b", l.fc_b);
      push(pre + "proj.w", l.proj_w);
      push(pre + "proj.b", l.proj_b);
    }
    push("lnf.g", lnf_g);
    push("lnf.b", lnf_b);
    push("head.lat.w", head_lat_w);
    push("head.lat.b", head_lat_b);
    push("head.lon.w", head_lon_w);
    push("head.lon.b", head_lon_b);
    push("head.sog.w", head_sog_w);
    push("head.sog.b", head_sog_b);
    push("head.cog.w", head_cog_w);
    push("head.cog.b", head_cog_b);
    push("reg.w", reg_w);
    push("reg.b", reg_b);
    return out;
  }

  void zero_grads() {
    for (auto& [name, t] : named()) t->zero_grad();
  }

 private:
  static ModelParams allocate(const ModelConfig& cfg, const BinCounts& bins, Rng* rng) {
    cfg.validate();
    const int de = cfg.d_embed();
    const double sd = 0.02;
    auto weight = [&](Shape shape) {
      return rng ? Tensor<S>::randn(shape, *rng, sd) : Tensor<S>::zeros(shape);
    };
    ModelParams p;
    if (cfg.repr == ReprMode::fourhot_embed) {
      p.emb_lat = weight({bins.lat, cfg.d_lat});
      p.emb_lon = weight({bins.lon, cfg.d_lon});
      p.emb_sog = weight({bins.sog, cfg.d_sog});
      p.emb_cog = weight({bins.cog, cfg.d_cog});
    } else {
      p.input_w = weight({4, de});
      p.input_b = Tensor<S>::zeros({de});
    }
    p.pos = weight({cfg.max_seqlen, de});
    p.layers.resize(cfg.n_layers);
    for (auto& l : p.layers) {
      l.ln1_g = Tensor<S>::full({de}, S{1});
      l.ln1_b = Tensor<S>::zeros({de});
      l.qkv_w = weight({de, 3 * de});
      l.qkv_b = Tensor<S>::zeros({3 * de});
      l.attn_w = weight({de, de});
      l.attn_b = Tensor<S>::zeros({de});
      l.ln2_g = Tensor<S>::full({de}, S{1});
      l.ln2_b = Tensor<S>::zeros({de});
      l.fc_w = weight({de, 4 * de});
      l.fc_b = Tensor<S>::zeros({4 * de});
      l.proj_w = weight({4 * de, de});
      l.proj_b = Tensor<S>::zeros({de});
    }
    p.lnf_g = Tensor<S>::full({de}, S{1});
    p.lnf_b = Tensor<S>::zeros({de});
    if (cfg.loss == LossMode::mse) {
      p.reg_w = weight({de, 4});
      p.reg_b = Tensor<S>::zeros({4});
    } else {
      p.head_lat_w = weight({cfg.d_lat, bins.lat});
      p.head_lat_b = Tensor<S>::zeros({bins.lat});
      p.head_lon_w = weight({cfg.d_lon, bins.lon});
      p.head_lon_b = Tensor<S>::zeros({bins.lon});
      p.head_sog_w = weight({cfg.d_sog, bins.sog});
      p.head_sog_b = Tensor<S>::zeros({bins.sog});
      p.head_cog_w = weight({cfg.d_cog, bins.cog});
      p.head_cog_b = Tensor<S>::zeros({bins.cog});
    }
    for (auto& [name, t] : p.named()) t->set_requires_grad(true);
    return p;
  }
};

// Attention weights captured during a forward pass: for each layer and head a
// K x K row-stochastic lower-triangular matrix.
struct AttentionTrace {
  int n_layers = 0, n_heads = 0, seq_len = 0;
  std::vector<std::vector<double>> weights;  // indexed layer * n_heads + head

  const std::vector<double>& at(int layer, int head) const {
    if (layer < 0 || layer >= n_layers || head < 0 || head >= n_heads)
      throw std::out_of_range("AttentionTrace: layer/head out of range");
    return weights[static_cast<std::size_t>(layer) * n_heads + head];
  }
};

namespace detail {

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  return add(matmul(x, w), b);
}

}  // namespace detail

// Embeds a batch of four-hot sequences: [B*K] indices per attribute ->
// [B, K, d_embed] with per-attribute embeddings concatenated.
template <typename S>
Tensor<S> embed_fourhot(ModelParams<S>& p, const ModelConfig& cfg,
                        const std::vector<FourHot>& seq, int B, int K) {
  if (static_cast<std::size_t>(B) * K != seq.size())
    throw std::invalid_argument("embed_fourhot: B*K does not match sequence length");
  std::vector<int> il(seq.size()), io(seq.size()), is(seq.size()), ic(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    il[i] = seq[i].lat;
    io[i] = seq[i].lon;
    is[i] = seq[i].sog;
    ic[i] = seq[i].cog;
  }
  auto e = concat_lastdim<S>({embedding_gather(p.emb_lat, il), embedding_gather(p.emb_lon, io),
                              embedding_gather(p.emb_sog, is), embedding_gather(p.emb_cog, ic)});
  return reshape(e, {B, K, cfg.d_embed()});
}

// Embeds min-max-scaled continuous observations through the input linear map.
template <typename S>
Tensor<S> embed_continuous(ModelParams<S>& p, const ModelConfig& cfg,
                           const DiscretizationConfig& disc,
                           const std::vector<ContinuousObs>& seq, int B, int K) {
  if (static_cast<std::size_t>(B) * K != seq.size())
    throw std::invalid_argument("embed_continuous: B*K does not match sequence length");
  std::vector<S> vals(seq.size() * 4);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto u = scale_to_unit(seq[i], disc);
    for (int j = 0; j < 4; ++j) vals[i * 4 + j] = static_cast<S>(u[j]);
  }
  auto x = Tensor<S>::from_data({B * K, 4}, std::move(vals));
  return reshape(detail::linear(x, p.input_w, p.input_b), {B, K, cfg.d_embed()});
}

// Pre-norm causal self-attention block input->output, heads split by slicing.
// When `trace` is non-null (single-sequence forward), softmax weights for
// every head are copied out.
template <typename S>
Tensor<S> causal_self_attention(const Tensor<S>& x, LayerParams<S>& l, const ModelConfig& cfg,
                                int layer_index, AttentionTrace* trace, Rng* dropout_rng) {
  const int de = cfg.d_embed();
  const int dh = de / cfg.n_heads;
  const int K = x.shape()[x.rank() - 2];
  auto qkv = detail::linear(x, l.qkv_w, l.qkv_b);
  auto q = slice_lastdim(qkv, 0, de);
  auto k = slice_lastdim(qkv, de, de);
  auto v = slice_lastdim(qkv, 2 * de, de);
  const double inv_scale =
      1.0 / std::sqrt(static_cast<double>(cfg.scale_global ? de : dh));
  std::vector<Tensor<S>> heads;
  heads.reserve(cfg.n_heads);
  for (int h = 0; h < cfg.n_heads; ++h) {
    auto qh = slice_lastdim(q, h * dh, dh);
    auto kh = slice_lastdim(k, h * dh, dh);
    auto vh = slice_lastdim(v, h * dh, dh);
    auto att = causal_masked_softmax(scale(matmul(qh, transpose_last2(kh)), inv_scale));
    if (trace) {
      auto& w = trace->weights[static_cast<std::size_t>(layer_index) * cfg.n_heads + h];
      w.assign(att.data().begin(), att.data().end());
      trace->seq_len = K;
    }
    heads.push_back(matmul(att, vh));
  }
  auto out = detail::linear(concat_lastdim(heads), l.attn_w, l.attn_b);
  if (cfg.dropout > 0.0 && dropout_rng) out = dropout(out, cfg.dropout, *dropout_rng);
  return out;
}

// Full stack of pre-norm blocks plus final layer norm: [B, K, d_e] hidden
// states, position k summarizing steps 0..k.
template <typename S>
Tensor<S> transformer_hidden(const Tensor<S>& embedded, ModelParams<S>& p,
                             const ModelConfig& cfg, AttentionTrace* trace = nullptr,
                             Rng* dropout_rng = nullptr) {
  const int K = embedded.shape()[embedded.rank() - 2];
  if (K > cfg.max_seqlen)
    throw std::invalid_argument("transformer_hidden: sequence length " + std::to_string(K) +
                                " exceeds max_seqlen " + std::to_string(cfg.max_seqlen));
  if (trace) {
    if (embedded.rank() != 3 || embedded.shape()[0] != 1)
      throw std::invalid_argument("transformer_hidden: attention tracing needs a single sequence");
    trace->n_layers = cfg.n_layers;
    trace->n_heads = cfg.n_heads;
    trace->weights.assign(static_cast<std::size_t>(cfg.n_layers) * cfg.n_heads, {});
  }
  std::vector<int> steps(K);
  std::iota(steps.begin(), steps.end(), 0);
  auto x = add(embedded, embedding_gather(p.pos, steps));
  if (cfg.dropout > 0.0 && dropout_rng) x = dropout(x, cfg.dropout, *dropout_rng);
  for (int i = 0; i < cfg.n_layers; ++i) {
    auto& l = p.layers[i];
    x = add(x, causal_self_attention(layer_norm(x, l.ln1_g, l.ln1_b), l, cfg, i, trace,
                                     dropout_rng));
    auto m = detail::linear(gelu(detail::linear(layer_norm(x, l.ln2_g, l.ln2_b), l.fc_w, l.fc_b)),
                            l.proj_w, l.proj_b);
    if (cfg.dropout > 0.0 && dropout_rng) m = dropout(m, cfg.dropout, *dropout_rng);
    x = add(x, m);
  }
  return layer_norm(x, p.lnf_g, p.lnf_b);
}

// Per-attribute logits: the hidden vector is split into four blocks, one per
// attribute, each feeding its own linear head.
template <typename S>
struct HeadLogits {
  Tensor<S> lat, lon, sog, cog;
};

template <typename S>
HeadLogits<S> apply_heads(const Tensor<S>& hidden, ModelParams<S>& p, const ModelConfig& cfg) {
  if (cfg.loss == LossMode::mse)
    throw std::logic_error("apply_heads: regression model has no classification heads");
  HeadLogits<S> out;
  int off = 0;
  out.lat = detail::linear(slice_lastdim(hidden, off, cfg.d_lat), p.head_lat_w, p.head_lat_b);
  off += cfg.d_lat;
  out.lon = detail::linear(slice_lastdim(hidden, off, cfg.d_lon), p.head_lon_w, p.head_lon_b);
  off += cfg.d_lon;
  out.sog = detail::linear(slice_lastdim(hidden, off, cfg.d_sog), p.head_sog_w, p.head_sog_b);
  off += cfg.d_sog;
  out.cog = detail::linear(slice_lastdim(hidden, off, cfg.d_cog), p.head_cog_w, p.head_cog_b);
  return out;
}

template <typename S>
Tensor<S> apply_regression_head(const Tensor<S>& hidden, ModelParams<S>& p,
                                const ModelConfig& cfg) {
  if (cfg.loss != LossMode::mse)
    throw std::logic_error("apply_regression_head: model uses classification heads");
  return detail::linear(hidden, p.reg_w, p.reg_b);
}

// Predicted next-step distributions for each position of one sequence.
struct QuadDistribution {
  std::vector<double> lat, lon, sog, cog;
};

namespace detail {

template <typename S>
std::vector<double> softmax_rows_to_double(const Tensor<S>& logits, std::size_t row, int V) {
  const S* x = logits.data().data() + row * V;
  double mx = static_cast<double>(x[0]);
  for (int j = 1; j < V; ++j) mx = std::max(mx, static_cast<double>(x[j]));
  std::vector<double> p(V);
  double sum = 0.0;
  for (int j = 0; j < V; ++j) sum += (p[j] = std::exp(static_cast<double>(x[j]) - mx));
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace detail

// Embeds one observation sequence according to the configured representation.
template <typename S>
Tensor<S> embed_sequence(ModelParams<S>& p, const ModelConfig& cfg,
                         const DiscretizationConfig& disc,
                         const std::vector<ContinuousObs>& obs) {
  if (obs.empty()) throw std::invalid_argument("embed_sequence: empty sequence");
  const int K = static_cast<int>(obs.size());
  if (cfg.repr == ReprMode::fourhot_embed) {
    std::vector<FourHot> fh(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) fh[i] = encode(obs[i], disc);
    return embed_fourhot(p, cfg, fh, 1, K);
  }
  return embed_continuous(p, cfg, disc, obs, 1, K);
}

// Single-sequence forward returning the per-position next-step distributions
// (classification-head models). Runs without tape recording.
template <typename S>
std::vector<QuadDistribution> transformer_forward(ModelParams<S>& p, const ModelConfig& cfg,
                                                  const DiscretizationConfig& disc,
                                                  const std::vector<ContinuousObs>& obs,
                                                  AttentionTrace* trace = nullptr) {
  if (cfg.loss == LossMode::mse)
    throw std::logic_error("transformer_forward: regression model emits point estimates; "
                           "use transformer_forward_regression");
  NoGrad guard;
  const int K = static_cast<int>(obs.size());
  auto hidden = transformer_hidden(embed_sequence(p, cfg, disc, obs), p, cfg, trace, nullptr);
  auto heads = apply_heads(hidden, p, cfg);
  const auto bins = bin_counts(disc);
  std::vector<QuadDistribution> out(K);
  for (int t = 0; t < K; ++t) {
    out[t].lat = detail::softmax_rows_to_double(heads.lat, t, bins.lat);
    out[t].lon = detail::softmax_rows_to_double(heads.lon, t, bins.lon);
    out[t].sog = detail::softmax_rows_to_double(heads.sog, t, bins.sog);
    out[t].cog = detail::softmax_rows_to_double(heads.cog, t, bins.cog);
  }
  return out;
}

// Single-sequence forward for the regression variant: per-position predicted
// next observation (unscaled back to physical units).
template <typename S>
std::vector<ContinuousObs> transformer_forward_regression(ModelParams<S>& p,
                                                          const ModelConfig& cfg,
                                                          const DiscretizationConfig& disc,
                                                          const std::vector<ContinuousObs>& obs,
                                                          AttentionTrace* trace = nullptr) {
  if (cfg.loss != LossMode::mse)
    throw std::logic_error("transformer_forward_regression: model emits distributions");
  NoGrad guard;
  const int K = static_cast<int>(obs.size());
  auto hidden = transformer_hidden(embed_sequence(p, cfg, disc, obs), p, cfg, trace, nullptr);
  auto reg = apply_regression_head(hidden, p, cfg);
  std::vector<ContinuousObs> out(K);
  for (int t = 0; t < K; ++t) {
    std::array<double, 4> u{};
    for (int j = 0; j < 4; ++j) u[j] = static_cast<double>(reg.data()[t * 4 + j]);
    out[t] = unscale_from_unit(u, disc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training losses.

// A contiguous batch of same-length windows, pre-encoded.
struct EncodedBatch {
  int B = 0, K = 0;                // K = window length in steps
  std::vector<FourHot> fourhot;    // B*K (CE targets and four-hot inputs)
  std::vector<ContinuousObs> obs;  // B*K (continuous inputs / MSE targets)
};

// Encodes same-length observation sequences into one batch.
inline EncodedBatch encode_batch(const std::vector<std::vector<ContinuousObs>>& seqs,
                                 const DiscretizationConfig& disc) {
  if (seqs.empty()) throw std::invalid_argument("encode_batch: empty batch");
  EncodedBatch b;
  b.B = static_cast<int>(seqs.size());
  b.K = static_cast<int>(seqs[0].size());
  if (b.K < 2) throw std::invalid_argument("encode_batch: sequences need at least 2 steps");
  b.fourhot.reserve(static_cast<std::size_t>(b.B) * b.K);
  b.obs.reserve(static_cast<std::size_t>(b.B) * b.K);
  for (const auto& s : seqs) {
    if (static_cast<int>(s.size()) != b.K)
      throw std::invalid_argument("encode_batch: sequences differ in length");
    for (const auto& pt : s) {
      b.fourhot.push_back(encode(pt, disc));
      b.obs.push_back(pt);
    }
  }
  return b;
}

// Scalar loss graph plus the numeric pieces logged by the training loop.
template <typename S>
struct LossBreakdown {
  Tensor<S> total;
  double fine_ce = 0.0;    // sum of the four per-attribute fine CE terms
  double coarse_ce = 0.0;  // sum of the four coarse terms (0 unless ce_multires)
  std::array<double, 4> fine_per_head{};  // lat, lon, sog, cog
};

// Builds the next-step prediction loss over a batch: inputs are steps
// 0..K-2, targets steps 1..K-1.
template <typename S>
LossBreakdown<S> build_loss(ModelParams<S>& p, const ModelConfig& cfg,
                            const DiscretizationConfig& disc, const EncodedBatch& batch,
                            Rng* dropout_rng = nullptr) {
  cfg.validate();
  const int B = batch.B, K = batch.K, Ki = K - 1;
  // Inputs: drop the last step of each window.
  std::vector<FourHot> in_fh;
  std::vector<ContinuousObs> in_obs;
  in_fh.reserve(static_cast<std::size_t>(B) * Ki);
  in_obs.reserve(static_cast<std::size_t>(B) * Ki);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < Ki; ++t) {
      in_fh.push_back(batch.fourhot[static_cast<std::size_t>(b) * K + t]);
      in_obs.push_back(batch.obs[static_cast<std::size_t>(b) * K + t]);
    }
  Tensor<S> x = cfg.repr == ReprMode::fourhot_embed
                    ? embed_fourhot(p, cfg, in_fh, B, Ki)
                    : embed_continuous(p, cfg, disc, in_obs, B, Ki);
  auto hidden = transformer_hidden(x, p, cfg, nullptr, dropout_rng);

  LossBreakdown<S> out;
  if (cfg.loss == LossMode::mse) {
    // Mean over positions of the L2 norm of the scaled prediction error.
    std::vector<S> tgt(static_cast<std::size_t>(B) * Ki * 4);
    std::size_t w = 0;
    for (int b = 0; b < B; ++b)
      for (int t = 1; t < K; ++t) {
        const auto u = scale_to_unit(batch.obs[static_cast<std::size_t>(b) * K + t], disc);
        for (int j = 0; j < 4; ++j) tgt[w++] = static_cast<S>(u[j]);
      }
    auto pred = apply_regression_head(hidden, p, cfg);
    auto diff = sub(reshape(pred, {B * Ki, 4}), Tensor<S>::from_data({B * Ki, 4}, std::move(tgt)));
    out.total = mean_all(sqrt_elem(sum_lastdim(mul(diff, diff))));
    return out;
  }

  // Classification targets: fine and coarse bin indices of the next step.
  std::vector<int> t_lat, t_lon, t_sog, t_cog, c_lat, c_lon, c_sog, c_cog;
  const std::size_t n_rows = static_cast<std::size_t>(B) * Ki;
  for (auto* v : {&t_lat, &t_lon, &t_sog, &t_cog, &c_lat, &c_lon, &c_sog, &c_cog})
    v->reserve(n_rows);
  for (int b = 0; b < B; ++b)
    for (int t = 1; t < K; ++t) {
      const FourHot& h = batch.fourhot[static_cast<std::size_t>(b) * K + t];
      t_lat.push_back(h.lat);
      t_lon.push_back(h.lon);
      t_sog.push_back(h.sog);
      t_cog.push_back(h.cog);
      const FourHot c = coarsen_index(h, disc);
      c_lat.push_back(c.lat);
      c_lon.push_back(c.lon);
      c_sog.push_back(c.sog);
      c_cog.push_back(c.cog);
    }
  auto heads = apply_heads(hidden, p, cfg);
  auto f_lat = cross_entropy_from_logits(heads.lat, t_lat);
  auto f_lon = cross_entropy_from_logits(heads.lon, t_lon);
  auto f_sog = cross_entropy_from_logits(heads.sog, t_sog);
  auto f_cog = cross_entropy_from_logits(heads.cog, t_cog);
  out.fine_per_head = {static_cast<double>(f_lat.value()), static_cast<double>(f_lon.value()),
                       static_cast<double>(f_sog.value()), static_cast<double>(f_cog.value())};
  out.fine_ce = out.fine_per_head[0] + out.fine_per_head[1] + out.fine_per_head[2] +
                out.fine_per_head[3];
  auto fine = add(add(f_lat, f_lon), add(f_sog, f_cog));
  if (cfg.loss == LossMode::ce_fine_only || cfg.beta == 0.0) {
    out.total = fine;
    return out;
  }
  auto c1 = coarse_cross_entropy_from_logits(heads.lat, c_lat, disc.lat_coarse);
  auto c2 = coarse_cross_entropy_from_logits(heads.lon, c_lon, disc.lon_coarse);
  auto c3 = coarse_cross_entropy_from_logits(heads.sog, c_sog, disc.sog_coarse);
  auto c4 = coarse_cross_entropy_from_logits(heads.cog, c_cog, disc.cog_coarse);
  out.coarse_ce = static_cast<double>(c1.value()) + static_cast<double>(c2.value()) +
                  static_cast<double>(c3.value()) + static_cast<double>(c4.value());
  out.total = add(fine, scale(add(add(c1, c2), add(c3, c4)), cfg.beta));
  return out;
}

// Independent distribution-level loss (used to cross-check the fused graph):
// sum over attributes of -log p[target] plus beta times the coarse term
// computed by explicitly coarsening the distribution; mean over positions.
inline double multires_ce_loss(const std::vector<QuadDistribution>& dists,
                               const std::vector<FourHot>& targets,
                               const DiscretizationConfig& disc, double beta) {
  if (dists.size() != targets.size())
    throw std::invalid_argument("multires_ce_loss: size mismatch");
  if (dists.empty()) throw std::invalid_argument("multires_ce_loss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const FourHot& t = targets[i];
    const FourHot c = coarsen_index(t, disc);
    auto term = [&](const std::vector<double>& p, int fine, int coarse, int factor) {
      double v = -std::log(p[fine]);
      if (beta > 0.0) v += beta * -std::log(coarsen_distribution(p, factor)[coarse]);
      return v;
    };
    total += term(dists[i].lat, t.lat, c.lat, disc.lat_coarse);
    total += term(dists[i].lon, t.lon, c.lon, disc.lon_coarse);
    total += term(dists[i].sog, t.sog, c.sog, disc.sog_coarse);
    total += term(dists[i].cog, t.cog, c.cog, disc.cog_coarse);
  }
  return total / static_cast<double>(dists.size());
}

}  // namespace aiscast
