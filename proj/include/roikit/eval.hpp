#ifndef ROIKIT_EVAL_HPP
#define ROIKIT_EVAL_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "roikit/geometry.hpp"
#include "roikit/postprocess.hpp"

namespace roikit {

inline constexpr Real kIgnoreBelowHeight = 15;
inline constexpr Real kSmallBelowHeight = 39;
inline constexpr Real kMediumUpToHeight = 66;
inline constexpr Real kDefaultEvalIou = 0.7;

enum class ScaleBin { Ignored, Small, Medium, Large };

inline constexpr std::string_view to_string(ScaleBin b) noexcept {
  switch (b) {
    case ScaleBin::Ignored: return "ignored";
    case ScaleBin::Small: return "small";
    case ScaleBin::Medium: return "medium";
    case ScaleBin::Large: return "large";
  }
  return "unknown";
}

/// Small: [15, 39), Medium: [39, 66], Large: > 66, Ignored: < 15.
inline ScaleBin scale_bin(Real height) {
  if (!(height > 0)) throw std::invalid_argument("scale_bin: height must be positive, got " + std::to_string(height));
  if (height < kIgnoreBelowHeight) return ScaleBin::Ignored;
  if (height < kSmallBelowHeight) return ScaleBin::Small;
  if (height <= kMediumUpToHeight) return ScaleBin::Medium;
  return ScaleBin::Large;
}

struct GroundTruth {
  int class_id = 0;
  Box box;
  bool ignore = false;

  /// Don't-care boxes: flagged explicitly or shorter than 15 pixels.
  bool is_ignored() const noexcept { return ignore || box.height() < kIgnoreBelowHeight; }
};

inline GroundTruth make_ground_truth(int class_id, const Box& box, bool ignore = false) {
  return {class_id, box, ignore || box.height() < kIgnoreBelowHeight};
}

enum class MatchLabel { TruePositive, FalsePositive };

struct RankedMatch {
  std::size_t detection = 0;  ///< index into the input detections
  MatchLabel label = MatchLabel::FalsePositive;
  std::optional<std::size_t> ground_truth;  ///< matched GT for true positives
};

struct MatchResult {
  /// Detections in descending score order, with don't-care hits removed.
  std::vector<RankedMatch> ranked;
  std::vector<std::size_t> dropped;
  std::size_t n_matched = 0;
  std::size_t n_positive = 0;  ///< non-ignored ground truths

  std::vector<MatchLabel> labels() const {
    std::vector<MatchLabel> out;
    out.reserve(ranked.size());
    for (const auto& r : ranked) out.push_back(r.label);
    return out;
  }
};

/**
 * One-to-one matching of detections to same-class ground truth.
 *
 * Detections are visited in descending score order (ties by input order). A
 * detection takes its best-IoU unmatched non-ignored GT when that IoU reaches
 * the threshold. Failing that, an augmenting path may re-seat earlier true
 * positives onto other qualifying GTs to free one up, so the true-positive
 * count of every score prefix is as large as any one-to-one matching allows.
 * Without such conflicts the two rules coincide. A detection left unmatched
 * that overlaps a don't-care GT at the threshold is dropped; the rest are
 * false positives.
 */
inline MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                    Real iou_threshold = kDefaultEvalIou) {
  if (!(iou_threshold > 0 && iou_threshold <= 1))
    throw std::invalid_argument("match iou threshold must lie in (0, 1], got " + std::to_string(iou_threshold));
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  // Qualifying edges per detection, best IoU first.
  std::vector<std::vector<std::size_t>> edges(dets.size());
  std::vector<bool> hits_ignored(dets.size(), false);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    std::vector<std::pair<Real, std::size_t>> cand;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].class_id != dets[d].class_id) continue;
      const Real o = iou(dets[d].box, gts[g].box);
      if (o < iou_threshold) continue;
      if (gts[g].is_ignored())
        hits_ignored[d] = true;
      else
        cand.emplace_back(o, g);
    }
    std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& c : cand) edges[d].push_back(c.second);
  }

  std::vector<std::size_t> owner(gts.size(), kNone);
  std::vector<std::size_t> assigned(dets.size(), kNone);
  std::vector<bool> visited(gts.size());

  auto augment = [&](auto&& self, std::size_t d) -> bool {
    for (std::size_t g : edges[d]) {
      if (visited[g]) continue;
      visited[g] = true;
      if (owner[g] == kNone || self(self, owner[g])) {
        owner[g] = d;
        assigned[d] = g;
        return true;
      }
    }
    return false;
  };

  MatchResult result;
  for (const auto& g : gts)
    if (!g.is_ignored()) ++result.n_positive;

  for (std::size_t d : detail::score_order(dets)) {
    bool matched = false;
    for (std::size_t g : edges[d]) {
      if (owner[g] == kNone) {
        owner[g] = d;
        assigned[d] = g;
        matched = true;
        break;
      }
    }
    if (!matched && !edges[d].empty()) {
      std::fill(visited.begin(), visited.end(), false);
      matched = augment(augment, d);
    }
    if (matched) {
      ++result.n_matched;
      result.ranked.push_back({d, MatchLabel::TruePositive, std::nullopt});
    } else if (hits_ignored[d]) {
      result.dropped.push_back(d);
    } else {
      result.ranked.push_back({d, MatchLabel::FalsePositive, std::nullopt});
    }
  }
  // Augmentation can move earlier detections between GTs; read the final seats.
  for (auto& r : result.ranked)
    if (r.label == MatchLabel::TruePositive) r.ground_truth = assigned[r.detection];
  return result;
}

enum class ApMode { AllPoint, ElevenPoint };

namespace detail {

/// Nonnegative fraction that marks itself invalid on overflow.
struct Ratio {
  std::uint64_t num = 0, den = 1;
  bool valid = true;

  void add(std::uint64_t n, std::uint64_t d) {
    if (!valid) return;
    const std::uint64_t g = std::gcd(den, d);
    std::uint64_t a = 0, b = 0, l = 0;
    valid = !__builtin_mul_overflow(num, d / g, &a) && !__builtin_mul_overflow(n, den / g, &b) &&
            !__builtin_mul_overflow(den, d / g, &l) && !__builtin_add_overflow(a, b, &num);
    den = l;
    reduce();
  }

  void scale_down(std::uint64_t k) {
    if (valid) valid = !__builtin_mul_overflow(den, k, &den);
    reduce();
  }

  void reduce() {
    if (!valid) return;
    const std::uint64_t g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  bool fits_double() const { return valid && num < (std::uint64_t{1} << 53) && den < (std::uint64_t{1} << 53); }
};

}  // namespace detail

/**
 * Area under the precision envelope for labels ranked by descending score.
 * Every true positive advances recall by 1 / n_positive.
 */
inline Real average_precision(std::span<const MatchLabel> labels, std::size_t n_positive,
                              ApMode mode = ApMode::AllPoint) {
  std::size_t n_tp = 0;
  for (auto l : labels) n_tp += l == MatchLabel::TruePositive;
  if (n_tp > n_positive)
    throw std::invalid_argument("average_precision: " + std::to_string(n_tp) + " true positives but only " +
                                std::to_string(n_positive) + " positives");
  if (n_positive == 0 || labels.empty()) return 0;

  std::vector<Real> precision(labels.size()), recall(labels.size());
  std::vector<std::uint64_t> tps(labels.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    tp += labels[i] == MatchLabel::TruePositive;
    precision[i] = static_cast<Real>(tp) / static_cast<Real>(i + 1);
    tps[i] = tp;
    recall[i] = static_cast<Real>(tp) / static_cast<Real>(n_positive);
  }
  for (std::size_t i = labels.size() - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);

  if (mode == ApMode::ElevenPoint) {
    Real sum = 0;
    for (int k = 0; k <= 10; ++k) {
      const Real r = k / Real{10};
      const auto it = std::lower_bound(recall.begin(), recall.end(), r - 1e-12);
      if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
    }
    return sum / 11;
  }

  // Envelope values are ratios tp_j / (j + 1). Summing them as integer
  // fractions gives the correctly rounded area; long double is the fallback
  // once the fraction outgrows 53 bits.
  std::vector<std::size_t> best(labels.size());
  best.back() = labels.size() - 1;
  for (std::size_t i = labels.size() - 1; i-- > 0;) {
    const std::size_t j = best[i + 1];
    best[i] = tps[i] * (j + 1) >= tps[j] * (i + 1) ? i : j;
  }
  detail::Ratio exact{0, 1};
  long double approx = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != MatchLabel::TruePositive) continue;
    const std::size_t j = best[i];
    approx += static_cast<long double>(tps[j]) / static_cast<long double>(j + 1);
    exact.add(tps[j], j + 1);
  }
  exact.scale_down(n_positive);
  if (exact.fits_double()) return static_cast<Real>(exact.num) / static_cast<Real>(exact.den);
  return static_cast<Real>(approx / static_cast<long double>(n_positive));
}

// ---------------------------------------------------------------------------
// Dataset-level evaluation with scale bins.

struct ImageDetection {
  std::string image;
  Detection det;
};

struct ImageGroundTruth {
  std::string image;
  GroundTruth gt;
};

struct BinResult {
  int class_id = 0;
  std::optional<ScaleBin> bin;  ///< nullopt: all scales together
  Real ap = 0;
  std::size_t n_positive = 0;
  std::size_t n_tp = 0;
  std::size_t n_fp = 0;
};

/**
 * Per-class AP overall and per scale bin. Matching runs once per (image,
 * class). A true positive counts in the bin of the GT it matched; false
 * positives count against every bin of their class.
 */
inline std::vector<BinResult> evaluate(std::span<const ImageDetection> dets, std::span<const ImageGroundTruth> gts,
                                       Real iou_threshold = kDefaultEvalIou, ApMode mode = ApMode::AllPoint) {
  using Key = std::pair<std::string, int>;
  std::map<Key, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  std::map<int, std::array<std::size_t, 4>> positives;  // indexed by ScaleBin
  for (std::size_t i = 0; i < dets.size(); ++i) groups[{dets[i].image, dets[i].det.class_id}].first.push_back(i);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto& g = gts[i];
    groups[{g.image, g.gt.class_id}].second.push_back(i);
    auto& counts = positives[g.gt.class_id];
    if (!g.gt.is_ignored()) ++counts[static_cast<std::size_t>(scale_bin(g.gt.box.height()))];
  }

  struct Entry {
    Real score;
    std::size_t order;  // global detection index, breaks score ties
    MatchLabel label;
    std::optional<ScaleBin> gt_bin;
  };
  std::map<int, std::vector<Entry>> per_class;
  for (const auto& [key, members] : groups) {
    std::vector<Detection> gd;
    std::vector<GroundTruth> gg;
    for (std::size_t i : members.first) gd.push_back(dets[i].det);
    for (std::size_t i : members.second) gg.push_back(gts[i].gt);
    const MatchResult m = match_detections(gd, gg, iou_threshold);
    auto& list = per_class[key.second];
    for (const auto& r : m.ranked) {
      std::optional<ScaleBin> bin;
      if (r.ground_truth) bin = scale_bin(gg[*r.ground_truth].box.height());
      list.push_back({gd[r.detection].score, members.first[r.detection], r.label, bin});
    }
  }

  std::vector<BinResult> out;
  auto classes = positives;
  for (const auto& [cls, _] : per_class) classes.try_emplace(cls);
  for (const auto& [cls, counts] : classes) {
    auto entries = per_class[cls];
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return std::tie(b.score, a.order) < std::tie(a.score, b.order);
    });
    const std::array<std::optional<ScaleBin>, 4> bins{std::nullopt, ScaleBin::Small, ScaleBin::Medium,
                                                      ScaleBin::Large};
    for (const auto& bin : bins) {
      BinResult res{cls, bin, 0, 0, 0, 0};
      std::vector<MatchLabel> labels;
      for (const Entry& e : entries) {
        if (e.label == MatchLabel::FalsePositive) {
          labels.push_back(e.label);
          ++res.n_fp;
        } else if (!bin || e.gt_bin == bin) {
          labels.push_back(e.label);
          ++res.n_tp;
        }
      }
      res.n_positive = bin ? counts[static_cast<std::size_t>(*bin)]
                           : counts[1] + counts[2] + counts[3];
      res.ap = average_precision(labels, res.n_positive, mode);
      out.push_back(res);
    }
  }
  return out;
}

}  // namespace roikit

#endif  // ROIKIT_EVAL_HPP
