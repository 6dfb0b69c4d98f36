#ifndef ROIKIT_CAROI_POOL_HPP
#define ROIKIT_CAROI_POOL_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "roikit/error.hpp"
#include "roikit/geometry.hpp"
#include "roikit/tensor.hpp"

namespace roikit {

/// Half-open rectangle of feature-map cells, rows [y0, y1) and columns [x0, x1).
struct CellRect {
  std::size_t y0 = 0;
  std::size_t y1 = 0;
  std::size_t x0 = 0;
  std::size_t x1 = 0;

  std::size_t height() const noexcept { return y1 - y0; }
  std::size_t width() const noexcept { return x1 - x0; }
  bool contains(std::size_t y, std::size_t x) const noexcept { return y >= y0 && y < y1 && x >= x0 && x < x1; }

  friend bool operator==(const CellRect&, const CellRect&) = default;
};

enum class CaseTag { Shrink, Enlarge, MixedHEnlarge, MixedWEnlarge };

inline constexpr std::string_view to_string(CaseTag tag) noexcept {
  switch (tag) {
    case CaseTag::Shrink: return "shrink";
    case CaseTag::Enlarge: return "enlarge";
    case CaseTag::MixedHEnlarge: return "mixed_h_enlarge";
    case CaseTag::MixedWEnlarge: return "mixed_w_enlarge";
  }
  return "unknown";
}

struct CaseDispatch {
  CaseTag tag = CaseTag::Shrink;
  int factor_h = 1;
  int factor_w = 1;

  friend bool operator==(const CaseDispatch&, const CaseDispatch&) = default;
};

/**
 * Provenance of one pooling forward pass.
 *
 * `argmax[(c * P + py) * P + px]` is the row-major index, within the enlarged
 * proposal grid of (factor_h * rect.height()) x (factor_w * rect.width())
 * cells, of the value selected for output cell (py, px) of channel c.
 */
struct PoolRecord {
  CellRect rect;
  CaseTag tag = CaseTag::Shrink;
  int factor_h = 1;
  int factor_w = 1;
  std::size_t channels = 0;
  std::size_t pooled_size = 0;
  std::vector<std::size_t> argmax;

  std::size_t enlarged_height() const noexcept { return static_cast<std::size_t>(factor_h) * rect.height(); }
  std::size_t enlarged_width() const noexcept { return static_cast<std::size_t>(factor_w) * rect.width(); }
};

template <typename T = Real>
struct PooledFeature {
  Tensor3<T> tensor;
  PoolRecord record;
};

/// Snaps an image-space box onto the feature-map grid: floor for the start,
/// ceil for the end, clamped to the map.
inline CellRect grid_rect(const Roi& roi, std::size_t stride, std::size_t fm_height, std::size_t fm_width) {
  if (stride < 1) throw std::invalid_argument("grid_rect: stride must be >= 1");
  if (!roi.box.well_formed()) throw std::invalid_argument("grid_rect: malformed roi");
  const Real s = static_cast<Real>(stride);
  auto snap = [](Real v, std::size_t limit) {
    if (v <= 0) return std::size_t{0};
    const Real lim = static_cast<Real>(limit);
    return v >= lim ? limit : static_cast<std::size_t>(v);
  };
  const Real fx0 = std::floor(roi.box.x1 / s), fx1 = std::ceil(roi.box.x2 / s);
  const Real fy0 = std::floor(roi.box.y1 / s), fy1 = std::ceil(roi.box.y2 / s);
  CellRect r{snap(fy0, fm_height), snap(fy1, fm_height), snap(fx0, fm_width), snap(fx1, fm_width)};
  if (r.y1 <= r.y0 || r.x1 <= r.x0)
    throw EmptyRoiError("roi (" + std::to_string(roi.box.x1) + "," + std::to_string(roi.box.y1) + "," +
                        std::to_string(roi.box.x2) + "," + std::to_string(roi.box.y2) +
                        ") does not overlap the feature map");
  return r;
}

inline CaseDispatch dispatch_case(std::size_t height, std::size_t width, std::size_t pooled_size) {
  if (height < 1 || width < 1 || pooled_size < 1) throw std::invalid_argument("dispatch_case: dims must be >= 1");
  auto factor = [pooled_size](std::size_t d) {
    return d >= pooled_size ? 1 : static_cast<int>((pooled_size + d - 1) / d);
  };
  const bool enlarge_h = height < pooled_size;
  const bool enlarge_w = width < pooled_size;
  CaseTag tag = CaseTag::Shrink;
  if (enlarge_h && enlarge_w)
    tag = CaseTag::Enlarge;
  else if (enlarge_h)
    tag = CaseTag::MixedHEnlarge;
  else if (enlarge_w)
    tag = CaseTag::MixedWEnlarge;
  return {tag, factor(height), factor(width)};
}

namespace detail {

/// Sub-window [floor(j*d/P), ceil((j+1)*d/P)) along an axis of length d.
inline std::size_t window_begin(std::size_t j, std::size_t d, std::size_t p) noexcept { return (j * d) / p; }
inline std::size_t window_end(std::size_t j, std::size_t d, std::size_t p) noexcept {
  return std::min(d, ((j + 1) * d + p - 1) / p);
}

/// Max-pools a C x h x w grid to C x P x P. Ties go to the lowest row-major index.
template <typename T>
Tensor3<T> max_pool(const Tensor3<T>& grid, std::size_t pooled_size, std::vector<std::size_t>& argmax) {
  const std::size_t h = grid.height(), w = grid.width(), p = pooled_size;
  Tensor3<T> out(grid.channels(), p, p);
  argmax.assign(grid.channels() * p * p, 0);
  for (std::size_t c = 0; c < grid.channels(); ++c) {
    for (std::size_t py = 0; py < p; ++py) {
      const std::size_t ys = window_begin(py, h, p), ye = window_end(py, h, p);
      for (std::size_t px = 0; px < p; ++px) {
        const std::size_t xs = window_begin(px, w, p), xe = window_end(px, w, p);
        std::size_t best = ys * w + xs;
        T best_value = grid(c, ys, xs);
        for (std::size_t y = ys; y < ye; ++y) {
          for (std::size_t x = xs; x < xe; ++x) {
            if (grid(c, y, x) > best_value) {
              best_value = grid(c, y, x);
              best = y * w + x;
            }
          }
        }
        out(c, py, px) = best_value;
        argmax[(c * p + py) * p + px] = best;
      }
    }
  }
  return out;
}

template <typename T>
Tensor3<T> crop(const Tensor3<T>& fm, const CellRect& r) {
  Tensor3<T> out(fm.channels(), r.height(), r.width());
  for (std::size_t c = 0; c < fm.channels(); ++c)
    for (std::size_t y = 0; y < r.height(); ++y)
      for (std::size_t x = 0; x < r.width(); ++x) out(c, y, x) = fm(c, r.y0 + y, r.x0 + x);
  return out;
}

inline void check_pool_args(std::size_t pooled_size, std::size_t stride) {
  if (pooled_size < 1) throw std::invalid_argument("pooled size must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
}

}  // namespace detail

/// Baseline RoI max pooling. Proposals smaller than P end up with repeated
/// cells, since every sub-window is non-empty by construction.
template <typename T>
PooledFeature<T> roi_pool_forward(const Tensor3<T>& fm, const Roi& roi, std::size_t pooled_size,
                                  std::size_t stride) {
  detail::check_pool_args(pooled_size, stride);
  const CellRect rect = grid_rect(roi, stride, fm.height(), fm.width());
  PoolRecord record{rect, dispatch_case(rect.height(), rect.width(), pooled_size).tag, 1, 1, fm.channels(),
                    pooled_size, {}};
  Tensor3<T> pooled = detail::max_pool(detail::crop(fm, rect), pooled_size, record.argmax);
  return {std::move(pooled), std::move(record)};
}

/// Context-aware RoI pooling: proposals smaller than P along an axis are first
/// enlarged by bilinear deconvolution, then max-pooled to P x P.
template <typename T>
PooledFeature<T> caroi_pool_forward(const Tensor3<T>& fm, const Roi& roi, std::size_t pooled_size,
                                    std::size_t stride) {
  detail::check_pool_args(pooled_size, stride);
  const CellRect rect = grid_rect(roi, stride, fm.height(), fm.width());
  const CaseDispatch d = dispatch_case(rect.height(), rect.width(), pooled_size);
  if (d.tag == CaseTag::Shrink) return roi_pool_forward(fm, roi, pooled_size, stride);

  PoolRecord record{rect, d.tag, d.factor_h, d.factor_w, fm.channels(), pooled_size, {}};
  const Tensor3<T> enlarged = deconv2d(detail::crop(fm, rect), make_bilinear_kernel(d.factor_h, d.factor_w));
  Tensor3<T> pooled = detail::max_pool(enlarged, pooled_size, record.argmax);
  return {std::move(pooled), std::move(record)};
}

/**
 * Routes pooled-output gradients back onto the feature map.
 *
 * Each upstream value lands on its recorded argmax in the enlarged grid; the
 * enlarged gradient is pulled back through the deconvolution adjoint and
 * accumulated into the proposal's cells. Contributions from all proposals and
 * positions are summed in record order.
 */
template <typename T>
Tensor3<T> caroi_pool_backward(std::span<const Tensor3<T>> out_grads, std::span<const PoolRecord> records,
                               const Shape3& fm_shape) {
  if (out_grads.size() != records.size())
    throw std::invalid_argument("caroi_pool_backward: " + std::to_string(out_grads.size()) + " gradients for " +
                                std::to_string(records.size()) + " records");
  Tensor3<T> fm_grad(fm_shape);
  for (std::size_t k = 0; k < records.size(); ++k) {
    const PoolRecord& rec = records[k];
    const Tensor3<T>& g = out_grads[k];
    const std::size_t p = rec.pooled_size;
    if (g.shape() != Shape3{rec.channels, p, p} || rec.channels != fm_shape.channels ||
        rec.argmax.size() != rec.channels * p * p || rec.rect.y1 > fm_shape.height || rec.rect.x1 > fm_shape.width ||
        rec.factor_h < 1 || rec.factor_w < 1)
      throw std::invalid_argument("caroi_pool_backward: record " + std::to_string(k) +
                                  " does not match its gradient or the feature map");

    Tensor3<T> enlarged_grad(rec.channels, rec.enlarged_height(), rec.enlarged_width());
    const std::size_t enlarged_cells = rec.enlarged_height() * rec.enlarged_width();
    for (std::size_t c = 0; c < rec.channels; ++c) {
      for (std::size_t j = 0; j < p * p; ++j) {
        const std::size_t i_star = rec.argmax[c * p * p + j];
        if (i_star >= enlarged_cells)
          throw std::invalid_argument("caroi_pool_backward: argmax outside the enlarged proposal");
        enlarged_grad.data()[c * enlarged_cells + i_star] += g.data()[c * p * p + j];
      }
    }
    const Tensor3<T> cell_grad = deconv2d_input_grad(enlarged_grad, make_bilinear_kernel(rec.factor_h, rec.factor_w),
                                                     Shape3{rec.channels, rec.rect.height(), rec.rect.width()});
    for (std::size_t c = 0; c < rec.channels; ++c)
      for (std::size_t y = 0; y < rec.rect.height(); ++y)
        for (std::size_t x = 0; x < rec.rect.width(); ++x)
          fm_grad(c, rec.rect.y0 + y, rec.rect.x0 + x) += cell_grad(c, y, x);
  }
  return fm_grad;
}

template <typename T>
Tensor3<T> caroi_pool_backward(const std::vector<Tensor3<T>>& out_grads, const std::vector<PoolRecord>& records,
                               const Shape3& fm_shape) {
  return caroi_pool_backward(std::span<const Tensor3<T>>(out_grads), std::span<const PoolRecord>(records), fm_shape);
}

}  // namespace roikit

#endif  // ROIKIT_CAROI_POOL_HPP
