#pragma once
// Four-hot codec: discretizes a continuous AIS observation
// (lat, lon, sog, cog) into four categorical bin indices and back.
// Also provides the coarse-resolution grouping used by the
// multi-resolution training loss.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aiscast {

// Continuous observation. lat/lon in degrees, sog in knots, cog in [0,360).
struct ContinuousObs {
  double lat = 0.0;
  double lon = 0.0;
  double sog = 0.0;
  double cog = 0.0;
};

// Bin indices for one observation, one per attribute.
struct FourHot {
  int lat = 0;
  int lon = 0;
  int sog = 0;
  int cog = 0;
};

struct BinCounts {
  int lat = 0;
  int lon = 0;
  int sog = 0;
  int cog = 0;
  int total() const { return lat + lon + sog + cog; }
};

// Region of interest, per-attribute resolutions, and the fine->coarse
// grouping factors for the auxiliary loss.
struct DiscretizationConfig {
  double lat_min = 55.5, lat_max = 58.0;
  double lon_min = 10.3, lon_max = 13.0;
  double lat_res = 0.01;   // degrees per bin
  double lon_res = 0.01;   // degrees per bin
  double sog_max = 30.0;   // knots; SOG bins cover [0, sog_max)
  double sog_res = 1.0;    // knots per bin
  double cog_res = 5.0;    // degrees per bin; COG bins cover [0, 360)
  int lat_coarse = 10, lon_coarse = 10, sog_coarse = 5, cog_coarse = 6;

  void validate() const {
    auto req = [](bool ok, const char* msg) {
      if (!ok) throw std::invalid_argument(std::string("DiscretizationConfig: ") + msg);
    };
    req(lat_max > lat_min, "lat_max must exceed lat_min");
    req(lon_max > lon_min, "lon_max must exceed lon_min");
    req(lat_res > 0 && lon_res > 0 && sog_res > 0 && cog_res > 0, "resolutions must be positive");
    req(sog_max > 0, "sog_max must be positive");
    req(lat_coarse >= 1 && lon_coarse >= 1 && sog_coarse >= 1 && cog_coarse >= 1,
        "coarse factors must be >= 1");
  }
};

namespace detail {

// Number of bins covering [lo, hi) at resolution res; the last bin may be
// partial. Rounded so that an exact multiple does not gain a spurious bin
// from representation error.
inline int bin_count(double lo, double hi, double res) {
  const double span = (hi - lo) / res;
  const int n = static_cast<int>(std::ceil(span - 1e-9));
  if (n < 1) throw std::invalid_argument("bin_count: span smaller than one bin");
  return n;
}

// Maps value to a bin index over [lo, ...) at resolution res.
// A relative epsilon is added before flooring so values intended to lie
// exactly on a boundary (but perturbed by representation error) land in the
// upper bin. Values equal to the top edge map to the last bin.
inline int bin_index(double value, double lo, double res, int n_bins, const char* attr) {
  const double q0 = (value - lo) / res;
  const double q = q0 + std::max(1.0, std::abs(q0)) * 0x1.0p-40;
  double f = std::floor(q);
  if (f < 0.0) {
    if (q0 > -1e-6) return 0;  // below lo only by noise
    throw std::out_of_range(std::string("encode: ") + attr + " below range");
  }
  if (f >= n_bins) {
    if (q0 <= n_bins + 1e-6) return n_bins - 1;  // top edge -> last bin
    throw std::out_of_range(std::string("encode: ") + attr + " above range");
  }
  return static_cast<int>(f);
}

}  // namespace detail

inline BinCounts bin_counts(const DiscretizationConfig& c) {
  c.validate();
  BinCounts n;
  n.lat = detail::bin_count(c.lat_min, c.lat_max, c.lat_res);
  n.lon = detail::bin_count(c.lon_min, c.lon_max, c.lon_res);
  n.sog = detail::bin_count(0.0, c.sog_max, c.sog_res);
  n.cog = detail::bin_count(0.0, 360.0, c.cog_res);
  return n;
}

// Coarse bin counts: fine bins grouped by the per-attribute factor, ceiling
// division so a trailing partial group still forms a bin.
inline BinCounts coarse_bin_counts(const DiscretizationConfig& c) {
  const BinCounts f = bin_counts(c);
  auto cdiv = [](int n, int k) { return (n + k - 1) / k; };
  return BinCounts{cdiv(f.lat, c.lat_coarse), cdiv(f.lon, c.lon_coarse),
                   cdiv(f.sog, c.sog_coarse), cdiv(f.cog, c.cog_coarse)};
}

// Encodes an observation into four bin indices.
// lat/lon outside the region (beyond a noise epsilon) throw; SOG at or above
// sog_max clamps to the last bin; COG is wrapped into [0,360) first.
inline FourHot encode(const ContinuousObs& x, const DiscretizationConfig& c) {
  const BinCounts n = bin_counts(c);
  FourHot h;
  h.lat = detail::bin_index(x.lat, c.lat_min, c.lat_res, n.lat, "lat");
  h.lon = detail::bin_index(x.lon, c.lon_min, c.lon_res, n.lon, "lon");
  if (!(x.sog >= 0.0)) throw std::out_of_range("encode: sog negative or NaN");
  if (x.sog >= c.sog_max) {
    h.sog = n.sog - 1;  // fast movers saturate into the top speed bin
  } else {
    h.sog = detail::bin_index(x.sog, 0.0, c.sog_res, n.sog, "sog");
  }
  double cog = std::fmod(x.cog, 360.0);
  if (cog < 0.0) cog += 360.0;
  h.cog = detail::bin_index(cog, 0.0, c.cog_res, n.cog, "cog");
  return h;
}

// Decodes bin indices to the bin midpoints.
inline ContinuousObs decode(const FourHot& h, const DiscretizationConfig& c) {
  const BinCounts n = bin_counts(c);
  auto check = [](int idx, int count, const char* attr) {
    if (idx < 0 || idx >= count)
      throw std::out_of_range(std::string("decode: ") + attr + " index out of range");
  };
  check(h.lat, n.lat, "lat");
  check(h.lon, n.lon, "lon");
  check(h.sog, n.sog, "sog");
  check(h.cog, n.cog, "cog");
  ContinuousObs x;
  x.lat = c.lat_min + (h.lat + 0.5) * c.lat_res;
  x.lon = c.lon_min + (h.lon + 0.5) * c.lon_res;
  x.sog = (h.sog + 0.5) * c.sog_res;
  x.cog = (h.cog + 0.5) * c.cog_res;
  return x;
}

// Maps fine indices to coarse group indices (integer division by factor).
inline FourHot coarsen_index(const FourHot& h, const DiscretizationConfig& c) {
  const BinCounts n = bin_counts(c);
  if (h.lat < 0 || h.lat >= n.lat || h.lon < 0 || h.lon >= n.lon || h.sog < 0 ||
      h.sog >= n.sog || h.cog < 0 || h.cog >= n.cog)
    throw std::out_of_range("coarsen_index: fine index out of range");
  return FourHot{h.lat / c.lat_coarse, h.lon / c.lon_coarse, h.sog / c.sog_coarse,
                 h.cog / c.cog_coarse};
}

// Sums a fine probability vector into coarse groups of `factor` consecutive
// bins (last group may be partial). Members are accumulated in ascending
// index order; total mass is preserved by construction.
template <typename S>
std::vector<S> coarsen_distribution(const std::vector<S>& p, int factor) {
  if (factor < 1) throw std::invalid_argument("coarsen_distribution: factor must be >= 1");
  if (p.empty()) throw std::invalid_argument("coarsen_distribution: empty distribution");
  const std::size_t groups = (p.size() + static_cast<std::size_t>(factor) - 1) / factor;
  std::vector<S> out(groups, S{0});
  for (std::size_t i = 0; i < p.size(); ++i) out[i / factor] += p[i];
  return out;
}

// Clamps an observation into the region of interest (and SOG into
// [0, sog_max), COG wrapped). Returns the clamped value and whether any
// component actually moved.
inline std::pair<ContinuousObs, bool> clamp_to_roi(const ContinuousObs& x,
                                                   const DiscretizationConfig& c) {
  ContinuousObs y = x;
  bool clamped = false;
  auto clampv = [&](double v, double lo, double hi) {
    if (v < lo) { clamped = true; return lo; }
    if (v > hi) { clamped = true; return hi; }
    return v;
  };
  y.lat = clampv(x.lat, c.lat_min, c.lat_max);
  y.lon = clampv(x.lon, c.lon_min, c.lon_max);
  if (!(y.sog >= 0.0)) { y.sog = 0.0; clamped = true; }
  if (y.sog >= c.sog_max) { y.sog = std::nextafter(c.sog_max, 0.0); clamped = true; }
  double cog = std::fmod(y.cog, 360.0);
  if (cog < 0.0) cog += 360.0;
  if (cog != y.cog) clamped = true;
  y.cog = cog;
  return {y, clamped};
}

// Min-max scales an observation into [0,1]^4 (used by the continuous-input
// model variants). Inverse below.
inline std::array<double, 4> scale_to_unit(const ContinuousObs& x,
                                           const DiscretizationConfig& c) {
  return {(x.lat - c.lat_min) / (c.lat_max - c.lat_min),
          (x.lon - c.lon_min) / (c.lon_max - c.lon_min),
          x.sog / c.sog_max,
          x.cog / 360.0};
}

inline ContinuousObs unscale_from_unit(const std::array<double, 4>& u,
                                       const DiscretizationConfig& c) {
  ContinuousObs x;
  x.lat = c.lat_min + u[0] * (c.lat_max - c.lat_min);
  x.lon = c.lon_min + u[1] * (c.lon_max - c.lon_min);
  x.sog = u[2] * c.sog_max;
  x.cog = u[3] * 360.0;
  return x;
}

}  // namespace aiscast
