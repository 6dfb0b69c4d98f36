#ifndef ROIKIT_HARNESS_COMPARE_HPP
#define ROIKIT_HARNESS_COMPARE_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "roikit/caroi_pool.hpp"
#include "roikit/harness/csv_io.hpp"
#include "roikit/harness/random.hpp"
#include "roikit/harness/scene.hpp"

namespace roikit {

/// Size class of a planted pattern relative to the pooled size.
enum class SizeClass { Enlarge, Mixed, Shrink };

inline constexpr std::string_view to_string(SizeClass s) noexcept {
  switch (s) {
    case SizeClass::Enlarge: return "enlarge";
    case SizeClass::Mixed: return "mixed";
    case SizeClass::Shrink: return "shrink";
  }
  return "unknown";
}

inline SizeClass size_class(CaseTag tag) noexcept {
  switch (tag) {
    case CaseTag::Shrink: return SizeClass::Shrink;
    case CaseTag::Enlarge: return SizeClass::Enlarge;
    default: return SizeClass::Mixed;
  }
}

struct CompareConfig {
  std::uint64_t seed = 0;
  std::size_t n_scenes = 100;
  std::size_t pooled_size = 6;
  SceneConfig scene;
};

struct CompareRow {
  std::size_t scene = 0;
  std::size_t pattern = 0;
  PatternKind kind = PatternKind::Ramp;
  std::size_t height = 0;
  std::size_t width = 0;
  CaseTag tag = CaseTag::Shrink;
  std::optional<Real> roi_score;  ///< nullopt when the score is undefined
  std::optional<Real> caroi_score;
};

struct CompareSummary {
  SizeClass size = SizeClass::Shrink;
  std::size_t count = 0;  ///< rows where both scores are defined
  Real mean_roi = 0;
  Real mean_caroi = 0;
};

struct CompareReport {
  std::vector<CompareRow> rows;

  /// Mean scores over rows whose pattern is smaller than P on some axis (or not).
  std::pair<Real, Real> means(bool below_pooled_size, std::size_t* count = nullptr) const {
    Real sr = 0, sc = 0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if ((r.tag != CaseTag::Shrink) != below_pooled_size || !r.roi_score || !r.caroi_score) continue;
      sr += *r.roi_score;
      sc += *r.caroi_score;
      ++n;
    }
    if (count) *count = n;
    if (n == 0) return {0, 0};
    return {sr / static_cast<Real>(n), sc / static_cast<Real>(n)};
  }

  std::vector<CompareSummary> summary() const {
    std::map<SizeClass, CompareSummary> acc;
    for (const auto& r : rows) {
      auto& s = acc[size_class(r.tag)];
      s.size = size_class(r.tag);
      if (!r.roi_score || !r.caroi_score) continue;
      ++s.count;
      s.mean_roi += *r.roi_score;
      s.mean_caroi += *r.caroi_score;
    }
    std::vector<CompareSummary> out;
    for (auto& [_, s] : acc) {
      if (s.count > 0) {
        s.mean_roi /= static_cast<Real>(s.count);
        s.mean_caroi /= static_cast<Real>(s.count);
      }
      out.push_back(s);
    }
    return out;
  }
};

namespace detail {

inline std::optional<Real> try_score(const Tensor3<Real>& pooled, const Tensor3<Real>& reference) {
  try {
    return structure_score(pooled, reference);
  } catch (const UndefinedScoreError&) {
    return std::nullopt;
  }
}

}  // namespace detail

/**
 * Pools every planted pattern with both operators and scores each result
 * against the pattern resampled bilinearly to P x P.
 */
inline CompareReport compare_pooling(const CompareConfig& cfg) {
  CompareReport report;
  const std::size_t p = cfg.pooled_size;
  for (std::size_t s = 0; s < cfg.n_scenes; ++s) {
    const SyntheticScene scene = gen_scene(mix_seed(cfg.seed, s), cfg.scene);
    for (const auto& pat : scene.patterns) {
      const auto base = roi_pool_forward(scene.feature_map, pat.roi, p, scene.stride);
      const auto ctx = caroi_pool_forward(scene.feature_map, pat.roi, p, scene.stride);
      const Tensor3<Real> reference = bilinear_resize(detail::crop(scene.feature_map, pat.rect), p, p);
      report.rows.push_back({s, pat.id, pat.kind, pat.rect.height(), pat.rect.width(), ctx.record.tag,
                             detail::try_score(base.tensor, reference), detail::try_score(ctx.tensor, reference)});
    }
  }
  return report;
}

namespace io {

inline void write_compare_rows(std::ostream& os, const CompareReport& report) {
  os << "scene,pattern,kind,height,width,case,roi_score,caroi_score\n";
  auto opt = [](const std::optional<Real>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : report.rows)
    os << r.scene << ',' << r.pattern << ',' << to_string(r.kind) << ',' << r.height << ',' << r.width << ','
       << to_string(r.tag) << ',' << opt(r.roi_score) << ',' << opt(r.caroi_score) << '\n';
}

inline void write_compare_summary(std::ostream& os, const CompareReport& report) {
  os << "size_class,count,mean_roi_score,mean_caroi_score,difference\n";
  for (const auto& s : report.summary())
    os << to_string(s.size) << ',' << s.count << ',' << format_real(s.mean_roi) << ',' << format_real(s.mean_caroi)
       << ',' << format_real(s.mean_caroi - s.mean_roi) << '\n';
}

}  // namespace io

}  // namespace roikit

#endif  // ROIKIT_HARNESS_COMPARE_HPP
