#ifndef ROIKIT_HARNESS_GRADCHECK_HPP
#define ROIKIT_HARNESS_GRADCHECK_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "roikit/caroi_pool.hpp"
#include "roikit/harness/csv_io.hpp"
#include "roikit/harness/random.hpp"

namespace roikit {

inline constexpr std::array<CaseTag, 4> kAllCaseTags{CaseTag::Shrink, CaseTag::Enlarge, CaseTag::MixedHEnlarge,
                                                     CaseTag::MixedWEnlarge};

using BackwardFn =
    std::function<Tensor3<Real>(const std::vector<Tensor3<Real>>&, const std::vector<PoolRecord>&, const Shape3&)>;

inline BackwardFn default_backward() {
  return [](const std::vector<Tensor3<Real>>& g, const std::vector<PoolRecord>& r, const Shape3& s) {
    return caroi_pool_backward(g, r, s);
  };
}

struct GradCheckConfig {
  std::uint64_t seed = 0;
  std::size_t n_configs = 240;  ///< spread round-robin over `cases`
  std::vector<CaseTag> cases{kAllCaseTags.begin(), kAllCaseTags.end()};
  std::vector<std::size_t> pooled_sizes{2, 3, 6};
  Real step = 1e-3;
  Real tolerance = 1e-4;
};

struct CaseReport {
  CaseTag tag = CaseTag::Shrink;
  std::size_t configs = 0;
  std::size_t cells_checked = 0;
  std::size_t cells_skipped = 0;  ///< perturbation flipped an argmax
  Real max_rel_error = 0;
};

struct GradCheckReport {
  std::vector<CaseReport> cases;
  Real tolerance = 1e-4;

  bool case_passed(const CaseReport& c) const { return c.cells_checked > 0 && c.max_rel_error <= tolerance; }

  bool passed() const {
    return !cases.empty() && std::all_of(cases.begin(), cases.end(), [&](const CaseReport& c) { return case_passed(c); });
  }

  std::size_t total_configs() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += c.configs;
    return n;
  }

  int exit_code() const { return passed() ? 0 : 1; }
};

/// |a - n| / max(|a|, |n|), with the denominator floored at 1e-6 so exact zeros compare absolutely.
inline Real relative_error(Real analytic, Real numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), Real{1e-6}});
}

namespace detail {

struct GradCase {
  Tensor3<Real> fm;
  std::vector<Roi> rois;
  std::size_t pooled_size;
  std::size_t stride;
};

/// Rect dims that land in `tag` for pooled size p (p >= 2 unless Shrink).
inline std::pair<std::size_t, std::size_t> dims_for(CaseTag tag, std::size_t p, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> small(1, p - 1), large(p, p + 3);
  switch (tag) {
    case CaseTag::Shrink: return {large(rng), large(rng)};
    case CaseTag::Enlarge: return {small(rng), small(rng)};
    case CaseTag::MixedHEnlarge: return {small(rng), large(rng)};
    case CaseTag::MixedWEnlarge: return {large(rng), small(rng)};
  }
  return {p, p};
}

inline GradCase make_grad_case(CaseTag tag, const std::vector<std::size_t>& pooled_sizes, std::mt19937_64& rng) {
  std::vector<std::size_t> usable;
  for (std::size_t p : pooled_sizes)
    if (tag == CaseTag::Shrink || p >= 2) usable.push_back(p);
  if (usable.empty()) throw std::invalid_argument("gradcheck: no pooled size can produce case " + std::string(to_string(tag)));
  const std::size_t p = usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng)];
  const std::size_t stride = std::array<std::size_t, 3>{1, 2, 4}[std::uniform_int_distribution<int>(0, 2)(rng)];
  const std::size_t n_rois = std::uniform_int_distribution<std::size_t>(1, 3)(rng);

  std::vector<std::pair<std::size_t, std::size_t>> dims;
  std::size_t fh = 1, fw = 1;
  for (std::size_t k = 0; k < n_rois; ++k) {
    dims.push_back(dims_for(tag, p, rng));
    fh = std::max(fh, dims.back().first);
    fw = std::max(fw, dims.back().second);
  }
  std::uniform_int_distribution<std::size_t> margin(0, 3), channels(1, 2);
  std::uniform_real_distribution<Real> value(-1, 1), frac(0, 1);
  GradCase gc{Tensor3<Real>(channels(rng), fh + margin(rng), fw + margin(rng)), {}, p, stride};
  for (Real& v : gc.fm.data()) v = value(rng);

  const Real s = static_cast<Real>(stride);
  for (const auto& [h, w] : dims) {
    const std::size_t y0 = std::uniform_int_distribution<std::size_t>(0, gc.fm.height() - h)(rng);
    const std::size_t x0 = std::uniform_int_distribution<std::size_t>(0, gc.fm.width() - w)(rng);
    // Sub-cell offsets that still snap onto [y0, y0 + h) x [x0, x0 + w).
    const Real shrink = stride > 1 ? 0.45 * s : 0;
    gc.rois.push_back(Roi{Box{static_cast<Real>(x0) * s + shrink * frac(rng), static_cast<Real>(y0) * s + shrink * frac(rng),
                              static_cast<Real>(x0 + w) * s - shrink * frac(rng),
                              static_cast<Real>(y0 + h) * s - shrink * frac(rng)},
                          0});
  }
  return gc;
}

}  // namespace detail

/**
 * Compares the analytic pooling gradient with central finite differences,
 * one feature-map cell at a time. The loss is sum_k <g_k, y_k> with random
 * upstream gradients g_k. Cells whose +/- step changes any recorded argmax
 * sit next to a tie and are skipped: the loss is not differentiable there.
 */
inline GradCheckReport run_gradcheck(const GradCheckConfig& cfg, const BackwardFn& backward = default_backward()) {
  if (cfg.cases.empty()) throw std::invalid_argument("gradcheck: no cases requested");
  GradCheckReport report{{}, cfg.tolerance};
  for (CaseTag t : cfg.cases) report.cases.push_back({t, 0, 0, 0, 0});

  for (std::size_t n = 0; n < cfg.n_configs; ++n) {
    const std::size_t case_index = n % cfg.cases.size();
    CaseReport& cr = report.cases[case_index];
    std::mt19937_64 rng(mix_seed(cfg.seed, n));
    detail::GradCase gc = detail::make_grad_case(cfg.cases[case_index], cfg.pooled_sizes, rng);
    ++cr.configs;

    auto forward = [&](const Tensor3<Real>& fm) {
      std::vector<PooledFeature<Real>> out;
      for (const Roi& r : gc.rois) out.push_back(caroi_pool_forward(fm, r, gc.pooled_size, gc.stride));
      return out;
    };
    const auto base = forward(gc.fm);
    std::vector<Tensor3<Real>> upstream;
    std::vector<PoolRecord> records;
    std::uniform_real_distribution<Real> value(-1, 1);
    for (const auto& pf : base) {
      if (pf.record.tag != cr.tag) throw std::logic_error("gradcheck: generated proposal has the wrong case");
      Tensor3<Real> g(pf.tensor.shape());
      for (Real& v : g.data()) v = value(rng);
      upstream.push_back(std::move(g));
      records.push_back(pf.record);
    }
    const Tensor3<Real> analytic = backward(upstream, records, gc.fm.shape());

    auto loss_and_same_argmax = [&](const Tensor3<Real>& fm, bool& same) {
      const auto out = forward(fm);
      Real loss = 0;
      for (std::size_t k = 0; k < out.size(); ++k) {
        loss += dot(upstream[k], out[k].tensor);
        same = same && out[k].record.argmax == records[k].argmax;
      }
      return loss;
    };

    Tensor3<Real> probe = gc.fm;
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const Real orig = probe.data()[i];
      bool same = true;
      probe.data()[i] = orig + cfg.step;
      const Real up = loss_and_same_argmax(probe, same);
      probe.data()[i] = orig - cfg.step;
      const Real down = loss_and_same_argmax(probe, same);
      probe.data()[i] = orig;
      if (!same) {
        ++cr.cells_skipped;
        continue;
      }
      const Real numeric = (up - down) / (2 * cfg.step);
      cr.max_rel_error = std::max(cr.max_rel_error, relative_error(analytic.data()[i], numeric));
      ++cr.cells_checked;
    }
  }
  return report;
}

namespace io {

inline void write_gradcheck_report(std::ostream& os, const GradCheckReport& report) {
  os << "case,configs,cells_checked,cells_skipped,max_rel_error,status\n";
  for (const auto& c : report.cases)
    os << to_string(c.tag) << ',' << c.configs << ',' << c.cells_checked << ',' << c.cells_skipped << ','
       << format_real(c.max_rel_error) << ',' << (report.case_passed(c) ? "pass" : "fail") << '\n';
}

}  // namespace io

}  // namespace roikit

#endif  // ROIKIT_HARNESS_GRADCHECK_HPP
