#ifndef ROIKIT_POSTPROCESS_HPP
#define ROIKIT_POSTPROCESS_HPP

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "roikit/geometry.hpp"

namespace roikit {

struct Detection {
  int class_id = 0;
  Real score = 0;
  Box box;

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline constexpr Real kDefaultNmsIou = 0.5;
inline constexpr Real kDefaultRho = 0.9;

namespace detail {

/// Indices ordered by descending score; equal scores keep input order.
inline std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

struct Cluster {
  std::size_t keeper;
  std::vector<std::size_t> suppressed;
};

/// Greedy per-class suppression. Clusters come out in descending keeper score.
inline std::vector<Cluster> greedy_clusters(std::span<const Detection> dets, Real iou_threshold) {
  if (!(iou_threshold >= 0 && iou_threshold <= 1))
    throw std::invalid_argument("iou threshold must lie in [0, 1], got " + std::to_string(iou_threshold));
  const auto order = score_order(dets);
  std::vector<bool> removed(dets.size(), false);
  std::vector<Cluster> clusters;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t k = order[oi];
    if (removed[k]) continue;
    Cluster cl{k, {}};
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (removed[j] || dets[j].class_id != dets[k].class_id) continue;
      if (iou(dets[k].box, dets[j].box) > iou_threshold) {
        removed[j] = true;
        cl.suppressed.push_back(j);
      }
    }
    clusters.push_back(std::move(cl));
  }
  return clusters;
}

}  // namespace detail

/// Standard greedy NMS, per class. Output is sorted by descending score.
inline std::vector<Detection> nms(std::span<const Detection> dets, Real iou_threshold = kDefaultNmsIou) {
  std::vector<Detection> out;
  for (const auto& cl : detail::greedy_clusters(dets, iou_threshold)) out.push_back(dets[cl.keeper]);
  return out;
}

/**
 * NMS that replaces each kept box by the mean of the high-confidence members
 * of its suppression cluster.
 *
 * Members are the keeper plus every box it suppressed whose score is at least
 * rho times the keeper's score. Coordinates are the unweighted per-coordinate
 * mean over the members; the score stays the keeper's.
 */
inline std::vector<Detection> soft_nms_avg(std::span<const Detection> dets, Real iou_threshold = kDefaultNmsIou,
                                           Real rho = kDefaultRho) {
  if (!(rho > 0 && rho <= 1)) throw std::invalid_argument("rho must lie in (0, 1], got " + std::to_string(rho));
  std::vector<Detection> out;
  for (const auto& cl : detail::greedy_clusters(dets, iou_threshold)) {
    const Detection& keeper = dets[cl.keeper];
    std::vector<const Box*> members{&keeper.box};
    for (std::size_t j : cl.suppressed)
      if (dets[j].score >= rho * keeper.score) members.push_back(&dets[j].box);

    auto mean_of = [&](Real Box::*coord) {
      Real sum = 0, lo = members.front()->*coord, hi = lo;
      for (const Box* b : members) {
        sum += b->*coord;
        lo = std::min(lo, b->*coord);
        hi = std::max(hi, b->*coord);
      }
      // Rounding in the sum can push the mean one ulp past the members.
      return std::clamp(sum / static_cast<Real>(members.size()), lo, hi);
    };
    Detection d = keeper;
    d.box = {mean_of(&Box::x1), mean_of(&Box::y1), mean_of(&Box::x2), mean_of(&Box::y2)};
    out.push_back(d);
  }
  return out;
}

}  // namespace roikit

#endif  // ROIKIT_POSTPROCESS_HPP
