#ifndef ROIKIT_BRANCH_ROUTER_HPP
#define ROIKIT_BRANCH_ROUTER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "roikit/geometry.hpp"
#include "roikit/postprocess.hpp"

namespace roikit {

/// Median and spread of object scales (box heights, pixels).
struct ScaleStats {
  Real median = 0;
  Real spread = 0;
  std::size_t n_samples = 0;

  friend bool operator==(const ScaleStats&, const ScaleStats&) = default;
};

struct BranchAssignment {
  std::size_t proposal = 0;
  std::size_t branch = 0;

  friend bool operator==(const BranchAssignment&, const BranchAssignment&) = default;
};

/// Scale used for routing: box height in image pixels.
inline Real proposal_scale(const Box& box) noexcept { return box.height(); }

/// Linear-interpolation quantile (position q * (n - 1)) of an ascending sample.
inline Real quantile_sorted(std::span<const Real> sorted, Real q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const Real pos = std::clamp(q, Real{0}, Real{1}) * static_cast<Real>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const Real frac = pos - static_cast<Real>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Median plus half the interquartile range as the Gaussian spread.
inline ScaleStats fit_scale_stats(std::span<const Real> object_scales) {
  if (object_scales.empty()) throw std::invalid_argument("fit_scale_stats: no scales given");
  std::vector<Real> sorted(object_scales.begin(), object_scales.end());
  for (Real s : sorted)
    if (!(s > 0) || !std::isfinite(s))
      throw std::invalid_argument("fit_scale_stats: scales must be positive and finite, got " + std::to_string(s));
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const Real median = n % 2 == 1 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2;
  const Real spread = (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)) / 2;
  return {median, spread, n};
}

/// Inference-time thresholds for n branches: quantiles at ranks b / n.
/// For two branches this is the median.
inline std::vector<Real> quantile_thresholds(std::span<const Real> object_scales, std::size_t n_branches) {
  if (n_branches < 1) throw std::invalid_argument("need at least one branch");
  if (object_scales.empty()) throw std::invalid_argument("quantile_thresholds: no scales given");
  std::vector<Real> sorted(object_scales.begin(), object_scales.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Real> out;
  for (std::size_t b = 1; b < n_branches; ++b) {
    const Real t = n_branches == 2 ? fit_scale_stats(sorted).median
                                   : quantile_sorted(sorted, static_cast<Real>(b) / static_cast<Real>(n_branches));
    if (!out.empty() && !(t > out.back()))
      throw std::invalid_argument("quantile_thresholds: scale sample too degenerate for " +
                                  std::to_string(n_branches) + " branches");
    out.push_back(t);
  }
  return out;
}

/// Draws a training-time threshold from Normal(base, spread^2), clamped to
/// base +/- 3 spread and kept strictly positive.
template <typename Rng>
Real sample_threshold(Real base, Real spread, Rng& rng) {
  if (spread < 0 || !std::isfinite(spread)) throw std::invalid_argument("sample_threshold: spread must be >= 0");
  if (spread == 0) return base;
  std::normal_distribution<Real> gauss(base, spread);
  Real t = std::clamp(gauss(rng), base - 3 * spread, base + 3 * spread);
  return std::max(t, std::numeric_limits<Real>::min());
}

template <typename Rng>
Real sample_threshold(const ScaleStats& stats, Rng& rng) {
  return sample_threshold(stats.median, stats.spread, rng);
}

inline Real sample_threshold(const ScaleStats& stats, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_threshold(stats, rng);
}

/// Jitters every base threshold independently with the same spread. The
/// result is sorted; coincident draws are separated by one ulp.
template <typename Rng>
std::vector<Real> sample_thresholds(std::span<const Real> base, Real spread, Rng& rng) {
  std::vector<Real> out;
  out.reserve(base.size());
  for (Real b : base) out.push_back(sample_threshold(b, spread, rng));
  std::sort(out.begin(), out.end());
  for (std::size_t i = 1; i < out.size(); ++i)
    if (!(out[i] > out[i - 1])) out[i] = std::nextafter(out[i - 1], std::numeric_limits<Real>::infinity());
  return out;
}

inline void check_thresholds(std::span<const Real> thresholds) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!std::isfinite(thresholds[i])) throw std::invalid_argument("thresholds must be finite");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw std::invalid_argument("thresholds must be strictly increasing");
  }
}

/// Branch index for one scale: the number of thresholds <= scale, so a scale
/// equal to a threshold goes to the higher branch.
inline std::size_t branch_for_scale(Real scale, std::span<const Real> thresholds) noexcept {
  return static_cast<std::size_t>(std::upper_bound(thresholds.begin(), thresholds.end(), scale) - thresholds.begin());
}

inline std::vector<BranchAssignment> route(std::span<const Box> proposals, std::span<const Real> thresholds) {
  check_thresholds(thresholds);
  std::vector<BranchAssignment> out;
  out.reserve(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i)
    out.push_back({i, branch_for_scale(proposal_scale(proposals[i]), thresholds)});
  return out;
}

inline std::vector<BranchAssignment> route(std::span<const Roi> proposals, std::span<const Real> thresholds) {
  std::vector<Box> boxes;
  boxes.reserve(proposals.size());
  for (const Roi& r : proposals) boxes.push_back(r.box);
  return route(std::span<const Box>(boxes), thresholds);
}

/// Concatenates per-branch outputs in branch order. Suppression happens later.
inline std::vector<Detection> fuse(std::span<const std::vector<Detection>> per_branch) {
  std::vector<Detection> out;
  std::size_t total = 0;
  for (const auto& b : per_branch) total += b.size();
  out.reserve(total);
  for (const auto& b : per_branch) out.insert(out.end(), b.begin(), b.end());
  return out;
}

// Branch scorers stand in for the per-branch classification heads. A scorer is
// any callable `Detection(std::size_t branch, std::size_t n_branches, const Detection&)`.

/// Replays the incoming detection unchanged.
struct PassThroughScorer {
  Detection operator()(std::size_t /*branch*/, std::size_t /*n_branches*/, const Detection& d) const { return d; }
};

/**
 * Deterministic synthetic head: a branch is most confident on boxes whose
 * height lies in its own scale band and discounts boxes far from it.
 * score' = score * exp(-0.5 * (log(h / centre_b) / width)^2).
 */
struct ScaleAffinityScorer {
  std::vector<Real> branch_centres;  // one per branch, pixels
  Real log_width = 1.0;

  Detection operator()(std::size_t branch, std::size_t /*n_branches*/, const Detection& d) const {
    Detection out = d;
    if (branch >= branch_centres.size()) return out;
    const Real z = std::log(d.box.height() / branch_centres[branch]) / log_width;
    out.score = d.score * std::exp(-0.5 * z * z);
    return out;
  }
};

/// Route by height, score each detection with its branch head, fuse.
template <typename Scorer>
std::vector<Detection> run_branches(std::span<const Detection> dets, std::span<const Real> thresholds,
                                    const Scorer& scorer) {
  std::vector<Box> boxes;
  boxes.reserve(dets.size());
  for (const Detection& d : dets) boxes.push_back(d.box);
  const auto assignment = route(std::span<const Box>(boxes), thresholds);
  const std::size_t n_branches = thresholds.size() + 1;
  std::vector<std::vector<Detection>> per_branch(n_branches);
  for (const BranchAssignment& a : assignment)
    per_branch[a.branch].push_back(scorer(a.branch, n_branches, dets[a.proposal]));
  return fuse(std::span<const std::vector<Detection>>(per_branch));
}

}  // namespace roikit

#endif  // ROIKIT_BRANCH_ROUTER_HPP
