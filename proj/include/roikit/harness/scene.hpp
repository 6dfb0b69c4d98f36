#ifndef ROIKIT_HARNESS_SCENE_HPP
#define ROIKIT_HARNESS_SCENE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "roikit/caroi_pool.hpp"
#include "roikit/error.hpp"
#include "roikit/geometry.hpp"
#include "roikit/harness/random.hpp"
#include "roikit/tensor.hpp"

namespace roikit {

enum class PatternKind { Ramp, Checker, Blob };

inline constexpr std::string_view to_string(PatternKind k) noexcept {
  switch (k) {
    case PatternKind::Ramp: return "ramp";
    case PatternKind::Checker: return "checker";
    case PatternKind::Blob: return "blob";
  }
  return "unknown";
}

/// Everything needed to re-render a planted pattern's cells.
struct PlantedPattern {
  std::size_t id = 0;
  Roi roi;        ///< image coordinates (cells times stride)
  CellRect rect;  ///< feature-map cells
  PatternKind kind = PatternKind::Ramp;
  std::uint64_t pattern_seed = 0;
};

struct SceneConfig {
  std::size_t channels = 1;
  std::size_t height = 160;
  std::size_t width = 160;
  std::size_t stride = 1;
  std::size_t n_patterns = 8;
  std::size_t min_size = 2;   ///< smallest planted side, cells
  std::size_t max_size = 48;  ///< largest planted side, cells
  std::size_t max_attempts = 500;
};

struct SyntheticScene {
  Tensor3<Real> feature_map;
  std::vector<PlantedPattern> patterns;
  std::uint64_t seed = 0;
  std::size_t stride = 1;
};

namespace detail {

inline Real to_stored(Real v) { return static_cast<Real>(static_cast<float>(v)); }

}  // namespace detail

/**
 * Renders a pattern of h x w cells. The pattern is a function of normalised
 * cell-centre coordinates, parameterised by `pattern_seed`; channel c rotates
 * the orientation by c * pi / 3. Values are rounded to float32 so scenes
 * survive the binary tensor format unchanged.
 */
inline Tensor3<Real> render_pattern(PatternKind kind, std::uint64_t pattern_seed, std::size_t channels, std::size_t h,
                                    std::size_t w) {
  std::mt19937_64 rng(pattern_seed);
  std::uniform_real_distribution<Real> unit(0, 1);
  const Real angle = 2 * std::numbers::pi * unit(rng);
  const Real cu = 0.3 + 0.4 * unit(rng), cv = 0.3 + 0.4 * unit(rng);
  const Real lo = 0.2 + 0.1 * unit(rng), hi = 0.9 + 0.1 * unit(rng);
  Tensor3<Real> out(channels, h, w);
  for (std::size_t c = 0; c < channels; ++c) {
    const Real a = angle + static_cast<Real>(c) * std::numbers::pi / 3;
    const Real ca = std::cos(a), sa = std::sin(a);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const Real u = (static_cast<Real>(x) + 0.5) / static_cast<Real>(w);
        const Real v = (static_cast<Real>(y) + 0.5) / static_cast<Real>(h);
        Real t = 0;  // in [0, 1]
        switch (kind) {
          case PatternKind::Ramp:
            t = 0.5 + ((u - 0.5) * ca + (v - 0.5) * sa) / std::numbers::sqrt2;
            break;
          case PatternKind::Checker: {
            // Two cells per axis in a frame rotated by multiples of 90 degrees.
            const Real ru = c % 2 == 0 ? u : v, rv = c % 2 == 0 ? v : u;
            t = (static_cast<int>(ru * 2) + static_cast<int>(rv * 2)) % 2 == 0 ? 1.0 : 0.0;
            break;
          }
          case PatternKind::Blob: {
            const Real du = (u - cu) * ca + (v - cv) * sa, dv = -(u - cu) * sa + (v - cv) * ca;
            t = std::exp(-(du * du / 0.08 + dv * dv / 0.03));
            break;
          }
        }
        out(c, y, x) = detail::to_stored(lo + (hi - lo) * t);
      }
    }
  }
  return out;
}

inline Tensor3<Real> render_pattern(const PlantedPattern& p, std::size_t channels) {
  return render_pattern(p.kind, p.pattern_seed, channels, p.rect.height(), p.rect.width());
}

/**
 * Plants non-overlapping patterns on a low-amplitude noise background. Sides
 * are drawn log-uniformly from [min_size, max_size], independently per axis,
 * so proposals of every pooling case appear.
 */
inline SyntheticScene gen_scene(std::uint64_t seed, const SceneConfig& cfg) {
  if (cfg.min_size < 1 || cfg.max_size < cfg.min_size)
    throw std::invalid_argument("gen_scene: need 1 <= min_size <= max_size");
  if (cfg.max_size + 2 > cfg.height || cfg.max_size + 2 > cfg.width)
    throw std::invalid_argument("gen_scene: scale range exceeds the map bounds");
  if (cfg.stride < 1) throw std::invalid_argument("gen_scene: stride must be >= 1");

  SyntheticScene scene{Tensor3<Real>(cfg.channels, cfg.height, cfg.width), {}, seed, cfg.stride};
  std::mt19937_64 rng(mix_seed(seed, 0));
  std::uniform_real_distribution<Real> noise(0, 0.1);
  for (Real& v : scene.feature_map.data()) v = detail::to_stored(noise(rng));

  std::uniform_real_distribution<Real> log_size(std::log(static_cast<Real>(cfg.min_size)),
                                                std::log(static_cast<Real>(cfg.max_size) + 1));
  auto draw_side = [&] {
    const auto s = static_cast<std::size_t>(std::floor(std::exp(log_size(rng))));
    return std::clamp(s, cfg.min_size, cfg.max_size);
  };
  std::uniform_int_distribution<int> kind_dist(0, 2);

  std::vector<CellRect> taken;
  for (std::size_t id = 0; id < cfg.n_patterns; ++id) {
    const std::size_t h = draw_side(), w = draw_side();
    std::uniform_int_distribution<std::size_t> ys(1, cfg.height - h - 1), xs(1, cfg.width - w - 1);
    bool placed = false;
    for (std::size_t attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      const CellRect r{ys(rng), 0, xs(rng), 0};
      const CellRect rect{r.y0, r.y0 + h, r.x0, r.x0 + w};
      // One background cell of clearance around every pattern.
      const bool clash = std::any_of(taken.begin(), taken.end(), [&](const CellRect& o) {
        return rect.y0 < o.y1 + 1 && o.y0 < rect.y1 + 1 && rect.x0 < o.x1 + 1 && o.x0 < rect.x1 + 1;
      });
      if (clash) continue;
      placed = true;
      taken.push_back(rect);
      const Real s = static_cast<Real>(cfg.stride);
      PlantedPattern p{id,
                       Roi{Box{static_cast<Real>(rect.x0) * s, static_cast<Real>(rect.y0) * s,
                               static_cast<Real>(rect.x1) * s, static_cast<Real>(rect.y1) * s},
                           0},
                       rect,
                       static_cast<PatternKind>(kind_dist(rng)),
                       mix_seed(seed, id + 1)};
      const Tensor3<Real> cells = render_pattern(p, cfg.channels);
      for (std::size_t c = 0; c < cfg.channels; ++c)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) scene.feature_map(c, rect.y0 + y, rect.x0 + x) = cells(c, y, x);
      scene.patterns.push_back(p);
    }
    if (!placed)
      throw GenerationFailedError("could not place pattern " + std::to_string(id) + " (" + std::to_string(h) + "x" +
                                  std::to_string(w) + ") after " + std::to_string(cfg.max_attempts) + " attempts");
  }
  return scene;
}

/// Half-pixel-centred bilinear resampling with edge clamping.
inline Tensor3<Real> bilinear_resize(const Tensor3<Real>& src, std::size_t out_h, std::size_t out_w) {
  Tensor3<Real> out(src.channels(), out_h, out_w);
  auto coord = [](std::size_t j, std::size_t in, std::size_t outn) {
    const Real s = (static_cast<Real>(j) + 0.5) * static_cast<Real>(in) / static_cast<Real>(outn) - 0.5;
    return std::clamp(s, Real{0}, static_cast<Real>(in - 1));
  };
  for (std::size_t c = 0; c < src.channels(); ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const Real sy = coord(y, src.height(), out_h);
      const std::size_t y0 = static_cast<std::size_t>(sy), y1 = std::min(y0 + 1, src.height() - 1);
      const Real fy = sy - static_cast<Real>(y0);
      for (std::size_t x = 0; x < out_w; ++x) {
        const Real sx = coord(x, src.width(), out_w);
        const std::size_t x0 = static_cast<std::size_t>(sx), x1 = std::min(x0 + 1, src.width() - 1);
        const Real fx = sx - static_cast<Real>(x0);
        const Real top = src(c, y0, x0) * (1 - fx) + src(c, y0, x1) * fx;
        const Real bottom = src(c, y1, x0) * (1 - fx) + src(c, y1, x1) * fx;
        out(c, y, x) = top * (1 - fy) + bottom * fy;
      }
    }
  }
  return out;
}

/// Zero-mean normalised cross-correlation per channel, averaged over channels.
inline Real structure_score(const Tensor3<Real>& pooled, const Tensor3<Real>& reference) {
  if (pooled.shape() != reference.shape())
    throw std::invalid_argument("structure_score: shapes " + to_string(pooled.shape()) + " and " +
                                to_string(reference.shape()) + " differ");
  Real total = 0;
  for (std::size_t c = 0; c < pooled.channels(); ++c) {
    const auto a = pooled.plane(c), b = reference.plane(c);
    const Real n = static_cast<Real>(a.size());
    Real ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= n;
    mb /= n;
    Real sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    // Relative floor: variance lost to rounding counts as constant.
    const Real tiny = 1e-24 * n;
    if (saa <= tiny * (ma * ma + 1) || sbb <= tiny * (mb * mb + 1))
      throw UndefinedScoreError("structure_score: channel " + std::to_string(c) + " has zero variance");
    total += std::clamp(sab / std::sqrt(saa * sbb), Real{-1}, Real{1});
  }
  return total / static_cast<Real>(pooled.channels());
}

template <typename T>
Real structure_score(const PooledFeature<T>& pooled, const Tensor3<Real>& reference) {
  return structure_score(pooled.tensor, reference);
}

}  // namespace roikit

#endif  // ROIKIT_HARNESS_SCENE_HPP
