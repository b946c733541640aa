#pragma once
// Checkpoint file format (little-endian hosts):
//   [u64 LE header length] [JSON header] [float32 LE payload]
// The header records the model / discretization / training configuration,
// the global step, and a tensor manifest (name, shape, offset into the
// payload in float units): model parameters in their canonical order,
// optionally followed by the optimizer's first and second moments as
// "adam.m.<name>" / "adam.v.<name>". Keys in the JSON header are sorted and
// floating-point values use shortest round-trip form, so saving, loading,
// and saving again reproduces the file byte for byte.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aiscast/fourhot.hpp"
#include "aiscast/model.hpp"
#include "aiscast/training.hpp"

namespace aiscast {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline constexpr const char* kCheckpointVersion = "aiscast.ckpt.v1";

// --- config <-> JSON -------------------------------------------------------

inline nlohmann::json to_json(const DiscretizationConfig& d) {
  return {{"lat_min", d.lat_min},     {"lat_max", d.lat_max},   {"lon_min", d.lon_min},
          {"lon_max", d.lon_max},     {"lat_res", d.lat_res},   {"lon_res", d.lon_res},
          {"sog_max", d.sog_max},     {"sog_res", d.sog_res},   {"cog_res", d.cog_res},
          {"lat_coarse", d.lat_coarse}, {"lon_coarse", d.lon_coarse},
          {"sog_coarse", d.sog_coarse}, {"cog_coarse", d.cog_coarse}};
}

inline DiscretizationConfig disc_from_json(const nlohmann::json& j) {
  DiscretizationConfig d;
  d.lat_min = j.at("lat_min").get<double>();
  d.lat_max = j.at("lat_max").get<double>();
  d.lon_min = j.at("lon_min").get<double>();
  d.lon_max = j.at("lon_max").get<double>();
  d.lat_res = j.at("lat_res").get<double>();
  d.lon_res = j.at("lon_res").get<double>();
  d.sog_max = j.at("sog_max").get<double>();
  d.sog_res = j.at("sog_res").get<double>();
  d.cog_res = j.at("cog_res").get<double>();
  d.lat_coarse = j.at("lat_coarse").get<int>();
  d.lon_coarse = j.at("lon_coarse").get<int>();
  d.sog_coarse = j.at("sog_coarse").get<int>();
  d.cog_coarse = j.at("cog_coarse").get<int>();
  d.validate();
  return d;
}

inline nlohmann::json to_json(const ModelConfig& m) {
  return {{"n_layers", m.n_layers},   {"n_heads", m.n_heads},
          {"d_lat", m.d_lat},         {"d_lon", m.d_lon},
          {"d_sog", m.d_sog},         {"d_cog", m.d_cog},
          {"max_seqlen", m.max_seqlen}, {"dropout", m.dropout},
          {"beta", m.beta},           {"scale_global", m.scale_global},
          {"repr", to_string(m.repr)}, {"loss", to_string(m.loss)}};
}

inline ModelConfig model_from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.n_layers = j.at("n_layers").get<int>();
  m.n_heads = j.at("n_heads").get<int>();
  m.d_lat = j.at("d_lat").get<int>();
  m.d_lon = j.at("d_lon").get<int>();
  m.d_sog = j.at("d_sog").get<int>();
  m.d_cog = j.at("d_cog").get<int>();
  m.max_seqlen = j.at("max_seqlen").get<int>();
  m.dropout = j.at("dropout").get<double>();
  m.beta = j.at("beta").get<double>();
  m.scale_global = j.at("scale_global").get<bool>();
  m.repr = parse_repr_mode(j.at("repr").get<std::string>());
  m.loss = parse_loss_mode(j.at("loss").get<std::string>());
  m.validate();
  return m;
}

inline nlohmann::json to_json(const TrainConfig& t) {
  return {{"lr_max", t.lr_max},       {"lr_min", t.lr_min},
          {"cycle_length", t.cycle_length}, {"beta1", t.beta1},
          {"beta2", t.beta2},         {"eps", t.eps},
          {"weight_decay", t.weight_decay}, {"grad_clip", t.grad_clip},
          {"batch_size", t.batch_size}, {"epochs", t.epochs},
          {"seed", t.seed},           {"checkpoint_every", t.checkpoint_every}};
}

inline TrainConfig train_from_json(const nlohmann::json& j) {
  TrainConfig t;
  t.lr_max = j.at("lr_max").get<double>();
  t.lr_min = j.at("lr_min").get<double>();
  t.cycle_length = j.at("cycle_length").get<int>();
  t.beta1 = j.at("beta1").get<double>();
  t.beta2 = j.at("beta2").get<double>();
  t.eps = j.at("eps").get<double>();
  t.weight_decay = j.at("weight_decay").get<double>();
  t.grad_clip = j.at("grad_clip").get<double>();
  t.batch_size = j.at("batch_size").get<int>();
  t.epochs = j.at("epochs").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.checkpoint_every = j.at("checkpoint_every").get<std::int64_t>();
  t.validate();
  return t;
}

// --- save / load -----------------------------------------------------------

struct CheckpointMeta {
  ModelConfig model;
  DiscretizationConfig disc;
  TrainConfig train;
  std::int64_t step = 0;
};

struct LoadedCheckpoint {
  CheckpointMeta meta;
  ModelParams<float> params;
  bool has_adam = false;
  // Aligned with params.named() order.
  std::vector<std::vector<float>> adam_m, adam_v;
};

namespace detail {

inline void append_tensor_entry(nlohmann::json& manifest, const std::string& name,
                                const Shape& shape, std::uint64_t& offset) {
  std::uint64_t n = 1;
  for (int d : shape) n *= static_cast<std::uint64_t>(d);
  manifest.push_back({{"name", name}, {"shape", shape}, {"offset", offset}});
  offset += n;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, ModelParams<float>& params,
                            const CheckpointMeta& meta, AdamW<float>* opt = nullptr) {
  auto named = params.named();
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (auto& [name, t] : named) detail::append_tensor_entry(manifest, name, t->shape(), offset);
  if (opt) {
    const auto& opt_params = opt->params();
    if (opt_params.size() != named.size())
      throw std::invalid_argument("save_checkpoint: optimizer tracks a different parameter set");
    for (std::size_t i = 0; i < named.size(); ++i)
      if (opt_params[i].first != named[i].first || opt_params[i].second != named[i].second)
        throw std::invalid_argument("save_checkpoint: optimizer parameter order mismatch");
    for (auto& [name, t] : named)
      detail::append_tensor_entry(manifest, "adam.m." + name, t->shape(), offset);
    for (auto& [name, t] : named)
      detail::append_tensor_entry(manifest, "adam.v." + name, t->shape(), offset);
  }

  nlohmann::json header{{"version", kCheckpointVersion}, {"step", meta.step},
                        {"model", to_json(meta.model)},  {"disc", to_json(meta.disc)},
                        {"train", to_json(meta.train)},  {"tensors", manifest},
                        {"payload_floats", offset}};
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  const std::uint64_t hlen = hs.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((hlen >> (8 * i)) & 0xff);
  out.write(lenbuf, 8);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  auto write_floats = [&](const std::vector<float>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  };
  for (auto& [name, t] : named) write_floats(t->data());
  if (opt) {
    for (auto& m : opt->moment1()) write_floats(m);
    for (auto& v : opt->moment2()) write_floats(v);
  }
  out.flush();
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char lenbuf[8];
  if (!in.read(lenbuf, 8))
    throw std::runtime_error("load_checkpoint: " + path + " is too short for a header");
  std::uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i)
    hlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
  if (hlen == 0 || hlen > (1u << 26))
    throw std::runtime_error("load_checkpoint: implausible header length in " + path);
  std::string hs(hlen, '\0');
  if (!in.read(hs.data(), static_cast<std::streamsize>(hlen)))
    throw std::runtime_error("load_checkpoint: truncated header in " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_checkpoint: bad header in " + path + ": " + e.what());
  }
  if (header.at("version").get<std::string>() != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             header.at("version").get<std::string>() + " in " + path);

  LoadedCheckpoint lc;
  lc.meta.model = model_from_json(header.at("model"));
  lc.meta.disc = disc_from_json(header.at("disc"));
  lc.meta.train = train_from_json(header.at("train"));
  lc.meta.step = header.at("step").get<std::int64_t>();
  lc.params = ModelParams<float>::zeros(lc.meta.model, bin_counts(lc.meta.disc));

  auto named = lc.params.named();
  const auto& manifest = header.at("tensors");
  if (manifest.size() != named.size() && manifest.size() != 3 * named.size())
    throw std::runtime_error("load_checkpoint: tensor manifest size mismatch in " + path);
  lc.has_adam = manifest.size() == 3 * named.size();

  const std::uint64_t payload_floats = header.at("payload_floats").get<std::uint64_t>();
  std::vector<float> payload(payload_floats);
  if (!in.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(payload_floats * sizeof(float))))
    throw std::runtime_error("load_checkpoint: payload truncated in " + path);
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("load_checkpoint: trailing bytes after payload in " + path);

  std::uint64_t expect_offset = 0;
  auto check_entry = [&](const nlohmann::json& e, const std::string& want_name,
                         const Shape& want_shape) -> const float* {
    if (e.at("name").get<std::string>() != want_name)
      throw std::runtime_error("load_checkpoint: expected tensor " + want_name + ", found " +
                               e.at("name").get<std::string>() + " in " + path);
    const auto shape = e.at("shape").get<Shape>();
    if (shape != want_shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for " + want_name + " in " + path);
    const auto off = e.at("offset").get<std::uint64_t>();
    if (off != expect_offset)
      throw std::runtime_error("load_checkpoint: non-contiguous offset for " + want_name +
                               " in " + path);
    std::uint64_t n = 1;
    for (int d : shape) n *= static_cast<std::uint64_t>(d);
    if (off + n > payload_floats)
      throw std::runtime_error("load_checkpoint: tensor " + want_name +
                               " extends past payload in " + path);
    expect_offset = off + n;
    return payload.data() + off;
  };

  for (std::size_t i = 0; i < named.size(); ++i) {
    const float* src = check_entry(manifest.at(i), named[i].first, named[i].second->shape());
    std::copy(src, src + named[i].second->numel(), named[i].second->values().begin());
  }
  if (lc.has_adam) {
    lc.adam_m.resize(named.size());
    lc.adam_v.resize(named.size());
    for (std::size_t i = 0; i < named.size(); ++i) {
      const float* src = check_entry(manifest.at(named.size() + i), "adam.m." + named[i].first,
                                     named[i].second->shape());
      lc.adam_m[i].assign(src, src + named[i].second->numel());
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      const float* src = check_entry(manifest.at(2 * named.size() + i), "adam.v." + named[i].first,
                                     named[i].second->shape());
      lc.adam_v[i].assign(src, src + named[i].second->numel());
    }
  }
  if (expect_offset != payload_floats)
    throw std::runtime_error("load_checkpoint: payload larger than manifest in " + path);
  return lc;
}

// Restores optimizer moments and step count from a loaded checkpoint.
inline void restore_optimizer(AdamW<float>& opt, const LoadedCheckpoint& lc) {
  if (!lc.has_adam)
    throw std::invalid_argument("restore_optimizer: checkpoint has no optimizer state");
  auto& m = opt.moment1();
  auto& v = opt.moment2();
  if (m.size() != lc.adam_m.size())
    throw std::invalid_argument("restore_optimizer: parameter count mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].size() != lc.adam_m[i].size() || v[i].size() != lc.adam_v[i].size())
      throw std::invalid_argument("restore_optimizer: moment size mismatch");
    m[i] = lc.adam_m[i];
    v[i] = lc.adam_v[i];
  }
  opt.set_step_count(lc.meta.step);
}

}  // namespace aiscast
