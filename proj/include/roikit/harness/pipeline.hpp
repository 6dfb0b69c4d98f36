#ifndef ROIKIT_HARNESS_PIPELINE_HPP
#define ROIKIT_HARNESS_PIPELINE_HPP

#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "roikit/branch_router.hpp"
#include "roikit/error.hpp"
#include "roikit/postprocess.hpp"

namespace roikit {

enum class SuppressionMode { Soft, Hard };

struct PipelineConfig {
  std::vector<Real> thresholds;  ///< n_branches - 1 values, strictly increasing
  SuppressionMode suppression = SuppressionMode::Soft;
  Real iou_threshold = kDefaultNmsIou;
  Real rho = kDefaultRho;
};

/// route -> per-branch scoring -> fuse -> (soft-)NMS.
template <typename Scorer = PassThroughScorer>
std::vector<Detection> run_pipeline(std::span<const Detection> dets, const PipelineConfig& cfg,
                                    const Scorer& scorer = {}) {
  const auto fused = run_branches(dets, cfg.thresholds, scorer);
  return cfg.suppression == SuppressionMode::Soft ? soft_nms_avg(fused, cfg.iou_threshold, cfg.rho)
                                                  : nms(fused, cfg.iou_threshold);
}

/// Inference thresholds from fitted stats: the median splits two branches.
inline std::vector<Real> thresholds_from_stats(const ScaleStats& stats, std::size_t n_branches) {
  if (n_branches < 1) throw std::invalid_argument("need at least one branch");
  if (n_branches == 1) return {};
  if (n_branches == 2) return {stats.median};
  throw std::invalid_argument("scale stats only define a two-branch split; pass --thresholds for " +
                              std::to_string(n_branches) + " branches");
}

namespace io {

inline void write_scale_stats(std::ostream& os, const ScaleStats& s) {
  nlohmann::json j{{"median", s.median}, {"spread", s.spread}, {"n_samples", s.n_samples}};
  os << j.dump(2) << '\n';
}

inline ScaleStats read_scale_stats(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
    ScaleStats s{j.at("median").get<Real>(), j.at("spread").get<Real>(), j.at("n_samples").get<std::size_t>()};
    if (!(s.median > 0) || s.spread < 0 || s.n_samples < 1) throw ParseError("scale stats out of range", 0);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scale stats: ") + e.what(), 0);
  }
}

}  // namespace io

}  // namespace roikit

#endif  // ROIKIT_HARNESS_PIPELINE_HPP
