// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "roikit/roikit.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace {

using namespace roikit;

struct Outcome {
  bool pass = true;
  std::string detail;
};

Tensor3<Real> random_map(Shape3 s, std::mt19937_64& rng, bool quantised = false) {
  std::uniform_real_distribution<Real> d(-1, 1);
  std::uniform_int_distribution<int> q(0, 3);
  Tensor3<Real> t(s);
  for (Real& v : t.data()) v = quantised ? q(rng) : d(rng);
  return t;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome gradient_fidelity() {
  GradCheckConfig cfg;
  cfg.seed = 1;
  cfg.n_configs = 240;
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = run_gradcheck(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Real worst = 0;
  std::size_t tags_checked = 0;
  for (const auto& c : report.cases) {
    worst = std::max(worst, c.max_rel_error);
    tags_checked += c.cells_checked > 0;
  }
  Outcome o;
  o.pass = report.total_configs() >= 200 && tags_checked == 4 && report.passed() && secs < 60;
  o.detail = fmt("%.0f configs, %.0f/4 cases checked, max rel error %.3g, %.2f s", static_cast<double>(report.total_configs()),
                 static_cast<double>(tags_checked), worst, secs);
  return o;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2);
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t H = 1; H <= 8; ++H)
    for (std::size_t W = 1; W <= 8; ++W)
      for (bool quantised : {false, true}) {
        const auto fm = random_map({1, H, W}, rng, quantised);
        for (std::size_t p : {2u, 3u, 6u})
          for (std::size_t y0 = 0; y0 < H; ++y0)
            for (std::size_t y1 = y0 + 1; y1 <= H; ++y1)
              for (std::size_t x0 = 0; x0 < W; ++x0)
                for (std::size_t x1 = x0 + 1; x1 <= W; ++x1) {
                  const Roi roi{Box{static_cast<Real>(x0), static_cast<Real>(y0), static_cast<Real>(x1), static_cast<Real>(y1)}, 0};
                  const auto ca = caroi_pool_forward(fm, roi, p, 1);
                  const auto ro = roi_pool_forward(fm, roi, p, 1);
                  const auto oca = oracle::caroi_pool(fm, y0, x0, y1 - y0, x1 - x0, p);
                  const auto oro = oracle::roi_pool(fm, y0, x0, y1 - y0, x1 - x0, p);
                  mismatches += !(ca.tensor == oca.out && ca.record.argmax == oca.argmax);
                  mismatches += !(ro.tensor == oro.out && ro.record.argmax == oro.argmax);
                  cases += 2;
                }
      }
  return {mismatches == 0, fmt("%.0f pooled proposals, %.0f mismatches", static_cast<double>(cases), static_cast<double>(mismatches))};
}

Outcome shrink_equivalence() {
  std::mt19937_64 rng(3);
  std::size_t differ = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const std::size_t p = std::uniform_int_distribution<std::size_t>(1, 7)(rng);
    const std::size_t h = std::uniform_int_distribution<std::size_t>(p, p + 10)(rng);
    const std::size_t w = std::uniform_int_distribution<std::size_t>(p, p + 10)(rng);
    const std::size_t stride = std::size_t{1} << std::uniform_int_distribution<int>(0, 4)(rng);
    const std::size_t my = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    const std::size_t mx = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    const auto fm = random_map({std::uniform_int_distribution<std::size_t>(1, 3)(rng), h + my, w + mx}, rng, i % 2 == 0);
    const Real s = static_cast<Real>(stride);
    const Roi roi{Box{static_cast<Real>(mx) * s, static_cast<Real>(my) * s, static_cast<Real>(mx + w) * s, static_cast<Real>(my + h) * s}, 0};
    const auto a = caroi_pool_forward(fm, roi, p, stride);
    const auto b = roi_pool_forward(fm, roi, p, stride);
    differ += !(a.record.tag == CaseTag::Shrink && a.tensor == b.tensor && a.record.argmax == b.record.argmax);
  }
  return {differ == 0, fmt("%.0f random cases, %.0f differ", n, static_cast<double>(differ))};
}

Outcome structure_preservation() {
  CompareConfig cfg;
  cfg.seed = 4;
  cfg.n_scenes = 100;
  const auto report = compare_pooling(cfg);
  std::size_t n_small = 0, n_large = 0, unequal = 0;
  const auto [roi_small, caroi_small] = report.means(true, &n_small);
  report.means(false, &n_large);
  for (const auto& r : report.rows)
    if (r.tag == CaseTag::Shrink && r.roi_score != r.caroi_score) ++unequal;
  const Real gain = caroi_small - roi_small;
  return {gain >= 0.10 && unequal == 0 && n_small > 0,
          fmt("small patterns: CARoI %.4f vs RoI %.4f, gain %+.4f (need >= +0.10); ", caroi_small, roi_small, gain) +
              fmt("%.0f small / %.0f large patterns, %.0f large unequal", static_cast<double>(n_small),
                  static_cast<double>(n_large), static_cast<double>(unequal))};
}

Outcome adjoint_identity() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> factor(1, 6), extent(1, 8), chans(1, 3);
  Real worst = 0;
  for (int i = 0; i < 100; ++i) {
    const int fh = factor(rng), fw = factor(rng);
    const Shape3 s{static_cast<std::size_t>(chans(rng)), static_cast<std::size_t>(extent(rng)), static_cast<std::size_t>(extent(rng))};
    const auto k = make_bilinear_kernel(fh, fw);
    const auto u = random_map(s, rng);
    const auto g = random_map({s.channels, s.height * static_cast<std::size_t>(fh), s.width * static_cast<std::size_t>(fw)}, rng);
    const Real lhs = dot(deconv2d(u, k), g), rhs = dot(u, deconv2d_input_grad(g, k, s));
    worst = std::max(worst, std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), Real{1e-12}}));
  }
  return {worst <= 1e-6, fmt("100 configs, max relative error %.3g", worst)};
}

/// Independent greedy clustering: member lists per kept box, in output order.
std::vector<std::vector<Detection>> reference_clusters(const std::vector<Detection>& dets, Real thr) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> gone(dets.size(), false);
  std::vector<std::vector<Detection>> out;
  for (std::size_t a = 0; a < order.size(); ++a) {
    const std::size_t k = order[a];
    if (gone[k]) continue;
    std::vector<Detection> cl{dets[k]};
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const std::size_t j = order[b];
      if (gone[j] || dets[j].class_id != dets[k].class_id) continue;
      const Box &p = dets[k].box, &q = dets[j].box;
      const Real iw = std::min(p.x2, q.x2) - std::max(p.x1, q.x1), ih = std::min(p.y2, q.y2) - std::max(p.y1, q.y1);
      const Real inter = iw > 0 && ih > 0 ? iw * ih : 0;
      if (inter / (p.area() + q.area() - inter) > thr) {
        gone[j] = true;
        cl.push_back(dets[j]);
      }
    }
    out.push_back(cl);
  }
  return out;
}

Outcome soft_nms_contracts() {
  std::mt19937_64 rng(6);
  std::size_t count_fail = 0, envelope_fail = 0, rho_fail = 0;
  const Real thr = 0.5, rho = 0.8;
  for (int i = 0; i < 1000; ++i) {
    const auto dets = testgen::random_detections(rng, 15);
    const auto hard = nms(dets, thr);
    const auto soft = soft_nms_avg(dets, thr, rho);
    bool same = hard.size() == soft.size();
    for (std::size_t k = 0; same && k < hard.size(); ++k) same = hard[k].score == soft[k].score;
    count_fail += !same;
  }
  for (int i = 0; i < 1000; ++i) {
    const auto dets = testgen::random_detections(rng, 15);
    const auto soft = soft_nms_avg(dets, thr, rho);
    const auto clusters = reference_clusters(dets, thr);
    bool ok = soft.size() == clusters.size();
    for (std::size_t k = 0; ok && k < soft.size(); ++k) {
      std::vector<Box> members;
      for (const auto& d : clusters[k])
        if (d.score >= rho * clusters[k][0].score) members.push_back(d.box);
      for (Real Box::*c : {&Box::x1, &Box::y1, &Box::x2, &Box::y2}) {
        Real lo = members[0].*c, hi = lo;
        for (const Box& b : members) {
          lo = std::min(lo, b.*c);
          hi = std::max(hi, b.*c);
        }
        ok = ok && soft[k].box.*c >= lo && soft[k].box.*c <= hi;
      }
    }
    envelope_fail += !ok;
  }
  for (int i = 0; i < 1000; ++i) {
    auto dets = testgen::random_detections(rng, 15);
    std::vector<Real> scores(dets.size());
    for (std::size_t k = 0; k < dets.size(); ++k) scores[k] = static_cast<Real>(k + 1) / 16;
    std::shuffle(scores.begin(), scores.end(), rng);
    for (std::size_t k = 0; k < dets.size(); ++k) dets[k].score = scores[k];
    rho_fail += soft_nms_avg(dets, thr, 1.0) != nms(dets, thr);
  }
  return {count_fail + envelope_fail + rho_fail == 0,
          fmt("3 x 1000 sets; failures: count/score %.0f, envelope %.0f, rho=1 %.0f", static_cast<double>(count_fail),
              static_cast<double>(envelope_fail), static_cast<double>(rho_fail))};
}

Outcome evaluation_oracle() {
  std::mt19937_64 rng(7);
  std::size_t mismatches = 0, with_tp = 0;
  for (int i = 0; i < 500; ++i) {
    const auto gts = testgen::random_ground_truth(rng, 4);
    const auto dets = testgen::detections_near(gts, rng, std::uniform_int_distribution<std::size_t>(0, 6)(rng));
    const auto m = match_detections(dets, gts, kDefaultEvalIou);
    const auto o = oracle::exhaustive_match(dets, gts, kDefaultEvalIou);
    std::vector<bool> got;
    for (auto l : m.labels()) got.push_back(l == MatchLabel::TruePositive);
    const Real ap = average_precision(m.labels(), m.n_positive);
    mismatches += !(got == o.labels && m.n_positive == o.n_positive && std::abs(ap - o.ap) <= 1e-12);
    with_tp += m.n_matched > 0;
  }
  const std::vector<MatchLabel> trace{MatchLabel::TruePositive, MatchLabel::FalsePositive, MatchLabel::TruePositive};
  const Real hand = average_precision(trace, 2);
  return {mismatches == 0 && hand == 5.0 / 6.0,
          fmt("500 instances (%.0f with matches), %.0f mismatches; [TP,FP,TP]/2 = %.17g", static_cast<double>(with_tp),
              static_cast<double>(mismatches), hand)};
}

Outcome routing_statistics() {
  std::mt19937_64 rng(8);
  std::lognormal_distribution<Real> heights(std::log(40.0), 0.5);
  std::vector<Real> sample(2000);
  for (Real& h : sample) h = heights(rng);
  const ScaleStats st = fit_scale_stats(sample);
  std::vector<Box> near;
  for (int k = -4; k <= 4; ++k) {
    const Real h = st.median + st.spread * k / 4.0;
    near.push_back(Box{0, 0, 10, h});
  }
  const int n = 10'000;
  std::vector<std::size_t> high(near.size(), 0);
  for (int i = 0; i < n; ++i) {
    const std::vector<Real> thr{sample_threshold(st, rng)};
    for (const auto& a : route(near, thr)) high[a.proposal] += a.branch == 1;
  }
  double min_share = 1;
  for (std::size_t h : high) min_share = std::min({min_share, h / double(n), 1 - h / double(n)});
  return {st.spread > 0 && min_share >= 0.10,
          fmt("median %.2f, spread %.2f; smallest per-branch share over 9 near-median heights %.3f", st.median, st.spread, min_share)};
}

Outcome scale_bins() {
  const bool ok = scale_bin(20) == ScaleBin::Small && scale_bin(50) == ScaleBin::Medium &&
                  scale_bin(70) == ScaleBin::Large && scale_bin(14) == ScaleBin::Ignored;
  return {ok, "20 small, 50 medium, 70 large, 14 ignored"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"oracle equivalence", oracle_equivalence},
      {"shrink-path equivalence", shrink_equivalence},
      {"structure preservation", structure_preservation},
      {"deconv adjoint identity", adjoint_identity},
      {"soft-NMS contracts", soft_nms_contracts},
      {"evaluation oracle", evaluation_oracle},
      {"routing statistics", routing_statistics},
      {"scale bins", scale_bins},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
