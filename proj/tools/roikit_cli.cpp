// roikit command-line harness: synthetic data, pooling comparison, gradient
// checking, detection post-processing and evaluation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roikit/roikit.hpp"

namespace fs = std::filesystem;

namespace {

struct SharedOptions {
  std::uint64_t seed = 0;
  std::size_t pooled_size = 6;
  std::optional<double> iou;
  double rho = roikit::kDefaultRho;
  std::size_t branches = 2;
  std::vector<double> thresholds;
  std::string out;
};

/// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw std::runtime_error("cannot open " + path + " for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return is;
}

fs::path require_out_dir(const SharedOptions& shared, const char* command) {
  if (shared.out.empty()) throw CLI::ValidationError(std::string(command) + " needs --out <directory>");
  fs::create_directories(shared.out);
  return shared.out;
}

roikit::CaseTag parse_case(const std::string& s) {
  for (auto t : roikit::kAllCaseTags)
    if (roikit::to_string(t) == s) return t;
  throw CLI::ValidationError("unknown case '" + s + "'");
}

// --- gen --------------------------------------------------------------------

struct SceneOptions {
  roikit::SceneConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--height", cfg.height, "Feature map height in cells")->capture_default_str();
    cmd->add_option("--width", cfg.width, "Feature map width in cells")->capture_default_str();
    cmd->add_option("--channels", cfg.channels, "Feature map channels")->capture_default_str();
    cmd->add_option("--stride", cfg.stride, "Image pixels per feature-map cell")->capture_default_str();
    cmd->add_option("--patterns", cfg.n_patterns, "Patterns planted per scene")->capture_default_str();
    cmd->add_option("--min-size", cfg.min_size, "Smallest pattern side in cells")->capture_default_str();
    cmd->add_option("--max-size", cfg.max_size, "Largest pattern side in cells")->capture_default_str();
  }
};

int cmd_gen(const SharedOptions& shared, const SceneOptions& scene_opts) {
  const fs::path dir = require_out_dir(shared, "gen");
  const roikit::SyntheticScene scene = roikit::gen_scene(shared.seed, scene_opts.cfg);
  roikit::io::write_tensor_file(dir / "feature_map.spt", scene.feature_map);

  std::vector<roikit::io::Proposal> props;
  std::ofstream patterns(dir / "patterns.csv", std::ios::binary);
  patterns << "pattern,kind,x1,y1,x2,y2,pattern_seed\n";
  for (const auto& p : scene.patterns) {
    props.push_back({p.roi, 1.0});
    patterns << p.id << ',' << roikit::to_string(p.kind) << ',' << roikit::io::format_real(p.roi.box.x1) << ','
             << roikit::io::format_real(p.roi.box.y1) << ',' << roikit::io::format_real(p.roi.box.x2) << ','
             << roikit::io::format_real(p.roi.box.y2) << ',' << p.pattern_seed << '\n';
  }
  std::ofstream proposals(dir / "proposals.csv", std::ios::binary);
  roikit::io::write_proposals(proposals, props);
  return 0;
}

// --- pool -------------------------------------------------------------------

struct PoolOptions {
  std::vector<std::string> feature_maps;
  std::string proposals;
  std::string mode = "caroi";
  std::size_t stride = 1;
};

int cmd_pool(const SharedOptions& shared, const PoolOptions& opts) {
  const fs::path dir = require_out_dir(shared, "pool");
  std::vector<roikit::Tensor3<roikit::Real>> maps;
  for (const auto& f : opts.feature_maps) maps.push_back(roikit::io::read_tensor_file(f));
  auto in = open_input(opts.proposals);
  const auto props = roikit::io::read_proposals(in);

  std::ofstream index(dir / "index.csv", std::ios::binary);
  index << "index,batch,x1,y1,x2,y2,case,factor_h,factor_w,file\n";
  for (std::size_t i = 0; i < props.size(); ++i) {
    const auto& roi = props[i].roi;
    if (roi.batch_index >= maps.size())
      throw std::runtime_error("proposal " + std::to_string(i) + " refers to batch " +
                               std::to_string(roi.batch_index) + " but only " + std::to_string(maps.size()) +
                               " feature map(s) were given");
    const auto& fm = maps[roi.batch_index];
    const auto pooled = opts.mode == "roi" ? roikit::roi_pool_forward(fm, roi, shared.pooled_size, opts.stride)
                                           : roikit::caroi_pool_forward(fm, roi, shared.pooled_size, opts.stride);
    const std::string file = "pooled_" + std::to_string(i) + ".spt";
    roikit::io::write_tensor_file(dir / file, pooled.tensor);
    index << i << ',' << roi.batch_index << ',' << roikit::io::format_real(roi.box.x1) << ','
          << roikit::io::format_real(roi.box.y1) << ',' << roikit::io::format_real(roi.box.x2) << ','
          << roikit::io::format_real(roi.box.y2) << ',' << roikit::to_string(pooled.record.tag) << ','
          << pooled.record.factor_h << ',' << pooled.record.factor_w << ',' << file << '\n';
  }
  return 0;
}

// --- gradcheck --------------------------------------------------------------

struct GradcheckOptions {
  std::size_t configs = 240;
  std::vector<std::string> cases;
  bool corrupt_backward = false;
  bool pooled_size_given = false;
};

int cmd_gradcheck(const SharedOptions& shared, const GradcheckOptions& opts) {
  roikit::GradCheckConfig cfg;
  cfg.seed = shared.seed;
  cfg.n_configs = opts.configs;
  if (!opts.cases.empty()) {
    cfg.cases.clear();
    for (const auto& c : opts.cases) cfg.cases.push_back(parse_case(c));
  }
  if (opts.pooled_size_given) cfg.pooled_sizes = {shared.pooled_size};

  roikit::BackwardFn backward = roikit::default_backward();
  if (opts.corrupt_backward) {
    // Negative control: halves every gradient, so the check must fail.
    backward = [](const auto& g, const auto& r, const auto& s) {
      auto grad = roikit::caroi_pool_backward(g, r, s);
      for (auto& v : grad.data()) v *= 0.5;
      return grad;
    };
  }
  const auto report = roikit::run_gradcheck(cfg, backward);
  Output out(shared.out);
  roikit::io::write_gradcheck_report(out.stream(), report);
  if (!report.passed()) std::cerr << "gradcheck: FAILED (tolerance " << report.tolerance << ")\n";
  return report.exit_code();
}

// --- compare ----------------------------------------------------------------

struct CompareOptions {
  std::size_t scenes = 100;
  std::string summary;
};

int cmd_compare(const SharedOptions& shared, const CompareOptions& opts, const SceneOptions& scene_opts) {
  roikit::CompareConfig cfg;
  cfg.seed = shared.seed;
  cfg.n_scenes = opts.scenes;
  cfg.pooled_size = shared.pooled_size;
  cfg.scene = scene_opts.cfg;
  const auto report = roikit::compare_pooling(cfg);
  Output rows(shared.out);
  roikit::io::write_compare_rows(rows.stream(), report);
  if (!opts.summary.empty()) {
    Output summary(opts.summary);
    roikit::io::write_compare_summary(summary.stream(), report);
  }
  return 0;
}

// --- pipeline ---------------------------------------------------------------

struct PipelineOptions {
  std::string detections;
  std::string stats;
  std::string suppression = "soft";
  std::string scorer = "identity";
};

int cmd_pipeline(const SharedOptions& shared, const PipelineOptions& opts) {
  auto in = open_input(opts.detections);
  const auto dets = roikit::io::read_detections(in);

  roikit::PipelineConfig cfg;
  cfg.iou_threshold = shared.iou.value_or(roikit::kDefaultNmsIou);
  cfg.rho = shared.rho;
  cfg.suppression = opts.suppression == "hard" ? roikit::SuppressionMode::Hard : roikit::SuppressionMode::Soft;
  std::optional<roikit::ScaleStats> stats;
  if (!opts.stats.empty()) {
    auto sin = open_input(opts.stats);
    stats = roikit::io::read_scale_stats(sin);
  }
  if (!shared.thresholds.empty()) {
    if (shared.thresholds.size() + 1 != shared.branches)
      throw CLI::ValidationError("--thresholds needs exactly --branches - 1 values");
    cfg.thresholds = shared.thresholds;
  } else if (stats) {
    cfg.thresholds = roikit::thresholds_from_stats(*stats, shared.branches);
  } else if (shared.branches != 1) {
    throw CLI::ValidationError("pipeline needs --stats or --thresholds when --branches > 1");
  }
  roikit::check_thresholds(cfg.thresholds);

  std::vector<roikit::Detection> result;
  if (opts.scorer == "affinity") {
    // Branch centres: midpoints between neighbouring thresholds, extended
    // geometrically past the outer ones.
    roikit::ScaleAffinityScorer scorer;
    const auto& t = cfg.thresholds;
    for (std::size_t b = 0; b <= t.size(); ++b) {
      if (t.empty())
        scorer.branch_centres.push_back(stats ? stats->median : 1.0);
      else if (b == 0)
        scorer.branch_centres.push_back(t.front() / 2);
      else if (b == t.size())
        scorer.branch_centres.push_back(t.back() * 2);
      else
        scorer.branch_centres.push_back((t[b - 1] + t[b]) / 2);
    }
    result = roikit::run_pipeline(dets, cfg, scorer);
  } else {
    result = roikit::run_pipeline(dets, cfg);
  }
  Output out(shared.out);
  roikit::io::write_detections(out.stream(), result);
  return 0;
}

// --- eval / stats -----------------------------------------------------------

struct EvalOptions {
  std::string ground_truth;
  std::string detections;
  std::string ap_mode = "all";
};

int cmd_eval(const SharedOptions& shared, const EvalOptions& opts) {
  auto gin = open_input(opts.ground_truth);
  const auto gts = roikit::io::read_ground_truth(gin);
  auto din = open_input(opts.detections);
  const auto dets = roikit::io::read_image_detections(din);
  const auto mode = opts.ap_mode == "voc11" ? roikit::ApMode::ElevenPoint : roikit::ApMode::AllPoint;
  const auto results = roikit::evaluate(dets, gts, shared.iou.value_or(roikit::kDefaultEvalIou), mode);
  Output out(shared.out);
  roikit::io::write_eval_results(out.stream(), results);
  return 0;
}

int cmd_stats(const SharedOptions& shared, const std::string& ground_truth) {
  auto gin = open_input(ground_truth);
  std::vector<roikit::Real> heights;
  for (const auto& g : roikit::io::read_ground_truth(gin))
    if (!g.gt.is_ignored()) heights.push_back(roikit::proposal_scale(g.gt.box));
  Output out(shared.out);
  roikit::io::write_scale_stats(out.stream(), roikit::fit_scale_stats(heights));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection operators: CARoI pooling, branch routing, soft-NMS, evaluation"};
  app.set_config("--config", "", "Read options from a key=value file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  SharedOptions shared;
  app.add_option("--seed", shared.seed, "Seed for every random draw")->capture_default_str();
  auto* pooled_opt =
      app.add_option("--pooled-size", shared.pooled_size, "Pooled output side P")->capture_default_str()->check(
          CLI::PositiveNumber);
  app.add_option("--iou", shared.iou, "IoU threshold (default 0.5 for suppression, 0.7 for evaluation)")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--rho", shared.rho, "Soft-NMS member score ratio")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app.add_option("--branches", shared.branches, "Number of decision branches")->capture_default_str()->check(
      CLI::PositiveNumber);
  app.add_option("--thresholds", shared.thresholds, "Branch thresholds in pixels, comma separated")->delimiter(',');
  app.add_option("--out", shared.out, "Output file (or directory for gen/pool)");

  SceneOptions gen_scene_opts, compare_scene_opts;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic scene");
  gen_scene_opts.attach(gen);

  PoolOptions pool_opts;
  auto* pool = app.add_subcommand("pool", "Pool proposals from a feature map");
  pool->add_option("--feature-map", pool_opts.feature_maps, "Tensor file; repeat for batch index 1, 2, ...")
      ->required();
  pool->add_option("--proposals", pool_opts.proposals, "Proposals CSV")->required();
  pool->add_option("--mode", pool_opts.mode, "caroi or roi")->check(CLI::IsMember({"caroi", "roi"}))->capture_default_str();
  pool->add_option("--stride", pool_opts.stride, "Image pixels per feature-map cell")->capture_default_str();

  GradcheckOptions gc_opts;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the pooling backward pass");
  gradcheck->add_option("--configs", gc_opts.configs, "Random configurations")->capture_default_str();
  gradcheck->add_option("--cases", gc_opts.cases, "Restrict to these cases (shrink, enlarge, mixed_h_enlarge, mixed_w_enlarge)")
      ->delimiter(',');
  gradcheck->add_flag("--corrupt-backward", gc_opts.corrupt_backward, "Negative control: scale gradients by 0.5")
      ->group("");

  CompareOptions cmp_opts;
  auto* compare = app.add_subcommand("compare", "Structure preservation of RoI vs CARoI pooling");
  compare->add_option("--scenes", cmp_opts.scenes, "Number of scenes")->capture_default_str();
  compare->add_option("--summary", cmp_opts.summary, "Write per-size-class means to this file");
  compare_scene_opts.attach(compare);

  PipelineOptions pipe_opts;
  auto* pipeline = app.add_subcommand("pipeline", "Route, score, fuse and suppress detections");
  pipeline->add_option("--detections", pipe_opts.detections, "Detections CSV")->required();
  pipeline->add_option("--stats", pipe_opts.stats, "Scale stats JSON");
  pipeline->add_option("--nms", pipe_opts.suppression, "soft or hard")->check(CLI::IsMember({"soft", "hard"}))->capture_default_str();
  pipeline->add_option("--scorer", pipe_opts.scorer, "identity or affinity")
      ->check(CLI::IsMember({"identity", "affinity"}))
      ->capture_default_str();

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Per-class and per-scale-bin AP");
  eval->add_option("--gt", eval_opts.ground_truth, "Ground-truth CSV")->required();
  eval->add_option("--detections", eval_opts.detections, "Detections CSV with image column")->required();
  eval->add_option("--ap-mode", eval_opts.ap_mode, "all or voc11")->check(CLI::IsMember({"all", "voc11"}))->capture_default_str();

  std::string stats_gt;
  auto* stats = app.add_subcommand("stats", "Fit scale statistics from ground-truth heights");
  stats->add_option("--gt", stats_gt, "Ground-truth CSV")->required();

  CLI11_PARSE(app, argc, argv);
  gc_opts.pooled_size_given = pooled_opt->count() > 0;

  try {
    if (*gen) return cmd_gen(shared, gen_scene_opts);
    if (*pool) return cmd_pool(shared, pool_opts);
    if (*gradcheck) return cmd_gradcheck(shared, gc_opts);
    if (*compare) return cmd_compare(shared, cmp_opts, compare_scene_opts);
    if (*pipeline) return cmd_pipeline(shared, pipe_opts);
    if (*eval) return cmd_eval(shared, eval_opts);
    if (*stats) return cmd_stats(shared, stats_gt);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
