#pragma once

#include "acmap/config.hpp"
#include "acmap/material.hpp"
#include "acmap/pointcloud.hpp"
#include "acmap/projection.hpp"
#include "acmap/segmentation.hpp"
#include "acmap/synthetic.hpp"
#include "acmap/types.hpp"
#include "acmap/voxelmap.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace acmap {

struct StageTimings {
  double project_ms = 0;
  double fill_ms = 0;
  double unary_ms = 0;
  double crf_ms = 0;
  double backproject_ms = 0;
  double materials_ms = 0;
  double to_world_ms = 0;
  double insert_ms = 0;

  double total_ms() const {
    return project_ms + fill_ms + unary_ms + crf_ms + backproject_ms + materials_ms +
           to_world_ms + insert_ms;
  }
};

/// One frame as handed to the pipeline: sensor-frame points plus where its
/// labels come from.
struct FrameJob {
  PointCloudFrame frame;
  std::vector<SemanticLabel> gt_labels;  // synthetic sources
  std::string label_map_path;            // external source
  std::string name;                      // for error messages
};

class FrameSource {
public:
  virtual ~FrameSource() = default;
  virtual size_t count() const = 0;
  virtual FrameJob get(size_t index) = 0;
};

/// Frames rendered on the fly from a scene, sensor and trajectory.
class SyntheticFrameSource : public FrameSource {
public:
  SyntheticFrameSource(synth::SceneSpec scene, synth::SensorSpec sensor,
                       Trajectory trajectory, uint64_t seed)
      : scene_(std::move(scene)), sensor_(std::move(sensor)),
        trajectory_(std::move(trajectory)), seed_(seed) {}

  size_t count() const override { return trajectory_.size(); }

  FrameJob get(size_t index) override {
    const auto& entry = trajectory_.entries()[index];
    auto [frame, labels] =
        synth::render_frame(scene_, sensor_, entry.pose, frame_seed(seed_, index),
                            entry.timestamp);
    FrameJob job;
    job.frame = std::move(frame);
    job.gt_labels = std::move(labels);
    job.name = "synthetic frame " + std::to_string(index);
    return job;
  }

  static uint64_t frame_seed(uint64_t seed, size_t index) {
    return seed ^ (uint64_t(index) * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
  }

  const Trajectory& trajectory() const { return trajectory_; }

private:
  synth::SceneSpec scene_;
  synth::SensorSpec sensor_;
  Trajectory trajectory_;
  uint64_t seed_;
};

/// Frames read from a directory of .ply/.pcd files, processed in timestamp
/// order. Poses come from the trajectory file (exact timestamps) or, when no
/// trajectory is given, from embedded header comments.
class DirectoryFrameSource : public FrameSource {
public:
  DirectoryFrameSource(const std::string& dir, const std::string& trajectory_path,
                       const PipelineConfig& cfg)
      : cfg_(cfg) {
    if (!std::filesystem::is_directory(dir))
      throw ValidationError("frame directory '" + dir + "' does not exist");
    if (!trajectory_path.empty()) trajectory_ = load_trajectory(trajectory_path);
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const std::string ext = e.path().extension().string();
      if (ext == ".ply" || ext == ".pcd") paths_.push_back(e.path().string());
    }
    std::sort(paths_.begin(), paths_.end());
    // order by timestamp, not by name; frames are re-read on demand so a
    // long recording does not have to fit in memory
    std::vector<std::pair<double, std::string>> stamped;
    stamped.reserve(paths_.size());
    for (const auto& p : paths_) stamped.emplace_back(parse_frame(p).timestamp, p);
    std::stable_sort(stamped.begin(), stamped.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (size_t i = 0; i < paths_.size(); ++i) paths_[i] = stamped[i].second;
  }

  size_t count() const override { return paths_.size(); }

  FrameJob get(size_t index) override {
    FrameJob job;
    job.frame = parse_frame(paths_[index]);
    job.name = paths_[index];
    if (trajectory_) {
      job.frame.pose = trajectory_->require(job.frame.timestamp);
    }
    const std::filesystem::path p(paths_[index]);
    if (cfg_.label_source == LabelSource::External) {
      if (!cfg_.labels_dir.empty()) {
        for (const char* ext : {".pgm", ".png"}) {
          auto cand = std::filesystem::path(cfg_.labels_dir) / (p.stem().string() + ext);
          if (std::filesystem::exists(cand)) {
            job.label_map_path = cand.string();
            break;
          }
        }
        if (job.label_map_path.empty())
          throw ValidationError("no label map for frame '" + p.stem().string() +
                                "' in '" + cfg_.labels_dir + "'");
      }
    } else {
      auto sidecar = p;
      sidecar.replace_extension(".labels");
      if (!std::filesystem::exists(sidecar))
        throw ValidationError("no ground-truth sidecar '" + sidecar.string() + "'");
      job.gt_labels = synth::load_labels(sidecar.string());
      if (job.gt_labels.size() != job.frame.points.size())
        throw ValidationError("sidecar '" + sidecar.string() +
                              "' does not match frame point count");
    }
    return job;
  }

private:
  PipelineConfig cfg_;
  std::vector<std::string> paths_;
  std::vector<PointCloudFrame> frames_;
  std::optional<Trajectory> trajectory_;
};

namespace pipeline_detail {

struct PreparedFrame {
  std::vector<LabeledPoint> points;  // world frame
  Vec3 origin;
  StageTimings timings;
  size_t index = 0;
};

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

/// The per-frame pure stage chain: project, fill, labels, unary, optional
/// CRF, backproject, materials, world transform.
inline PreparedFrame prepare_frame(FrameJob job, const PipelineConfig& cfg,
                                   const MatchingTable& matching,
                                   const LabelRemap* remap, size_t index) {
  PreparedFrame out;
  out.index = index;
  auto t0 = std::chrono::steady_clock::now();

  ReconstructedImage img = project_frame(job.frame, cfg.camera);
  out.timings.project_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  img = fill_holes(img, cfg.holefill_kernel, cfg.holefill_max_iters);
  out.timings.fill_ms = ms_since(t0);

  if (!cfg.dump_dir.empty()) {
    std::filesystem::create_directories(cfg.dump_dir);
    char stem[64];
    std::snprintf(stem, sizeof(stem), "/frame_%06zu", index);
    const std::string base = cfg.dump_dir + stem;
    dump_reconstructed(img, base + ".png", base + "_depth.pgm", base + ".corr");
  }

  t0 = std::chrono::steady_clock::now();
  LabelField unary;
  if (cfg.label_source == LabelSource::External) {
    if (job.label_map_path.empty())
      throw ValidationError(job.name + ": external label source needs a label map");
    LabelField hard = load_label_map(job.label_map_path, img.width(), img.height(), remap);
    unary = unary_from_labels(hard, cfg.crf.confidence);
  } else {
    std::vector<SemanticLabel> pt_labels = job.gt_labels;
    if (pt_labels.size() != job.frame.points.size())
      throw ValidationError(job.name + ": ground-truth label count mismatch");
    if (cfg.label_source == LabelSource::SyntheticNoise)
      pt_labels = synth::corrupt_labels(pt_labels, cfg.label_noise_p,
                                        SyntheticFrameSource::frame_seed(cfg.seed, index) ^
                                            0xc2b2ae3d27d4eb4full);
    // rasterize per-point truth through the projection correspondence
    Image<uint8_t> ids(img.width(), img.height(), uint8_t(SemanticLabel::Unknown));
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        const uint32_t pi = img.point_index.at(x, y);
        if (pi != kNoPoint) ids.at(x, y) = uint8_t(pt_labels[pi]);
      }
    unary = unary_from_labels(one_hot(ids), cfg.crf.confidence);
  }
  out.timings.unary_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  LabelField refined;
  if (cfg.crf_enabled)
    refined = densecrf_refine(unary, img.color, cfg.crf, cfg.single_thread ? 1 : 0);
  else
    refined = std::move(unary);
  out.timings.crf_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  std::vector<SemanticLabel> labels = backproject_labels(img, refined, job.frame);
  out.timings.backproject_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  std::vector<uint8_t> materials(labels.size());
  for (size_t i = 0; i < labels.size(); ++i)
    materials[i] = lookup_material(labels[i], matching);
  out.timings.materials_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  PointCloudFrame world = to_world(job.frame);
  out.origin = job.frame.pose.t;
  out.points.resize(world.points.size());
  for (size_t i = 0; i < world.points.size(); ++i)
    out.points[i] = LabeledPoint{world.points[i].p, world.points[i].color, materials[i]};
  out.timings.to_world_ms = ms_since(t0);
  return out;
}

}  // namespace pipeline_detail

struct BuildReport {
  size_t frames = 0;
  size_t points = 0;
  std::vector<StageTimings> timings;  // one per frame

  struct Percentiles {
    double median = 0;
    double p95 = 0;
  };

  static Percentiles percentiles(std::vector<double> v) {
    if (v.empty()) return {};
    std::sort(v.begin(), v.end());
    auto at = [&](double q) {
      const size_t i = size_t(q * double(v.size() - 1) + 0.5);
      return v[std::min(i, v.size() - 1)];
    };
    return {at(0.5), at(0.95)};
  }

  std::string summary() const {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    auto row = [&](const char* name, auto member) {
      std::vector<double> v;
      for (const auto& t : timings) v.push_back(t.*member);
      auto p = percentiles(v);
      out << "  " << name << ": median " << p.median << " ms, p95 " << p.p95 << " ms\n";
    };
    out << "frames: " << frames << ", points: " << points << "\n";
    if (timings.empty()) return out.str();
    out << "per-frame stage times:\n";
    row("project    ", &StageTimings::project_ms);
    row("fill_holes ", &StageTimings::fill_ms);
    row("unary      ", &StageTimings::unary_ms);
    row("crf        ", &StageTimings::crf_ms);
    row("backproject", &StageTimings::backproject_ms);
    row("materials  ", &StageTimings::materials_ms);
    row("to_world   ", &StageTimings::to_world_ms);
    row("insert     ", &StageTimings::insert_ms);
    std::vector<double> totals;
    for (const auto& t : timings) totals.push_back(t.total_ms());
    auto p = percentiles(totals);
    out << "  total      : median " << p.median << " ms, p95 " << p.p95 << " ms\n";
    return out.str();
  }
};

/// Runs the full pipeline over a frame source into a fresh grid. Frames are
/// prepared (projection through world transform) with one frame of
/// lookahead while the previous frame inserts; insertion itself is the
/// serial tail. Single-thread mode produces identical output.
inline BuildReport build_map(const PipelineConfig& cfg, FrameSource& source,
                             OccupancyGrid& grid) {
  cfg.validate();
  MaterialDb db = load_material_database(cfg.materials_path);
  MatchingTable matching = load_matching_table(cfg.matching_path, db);
  std::optional<LabelRemap> remap;
  if (!cfg.label_remap_path.empty()) remap = load_label_remap(cfg.label_remap_path);

  BuildReport report;
  const size_t n = source.count();
  if (n == 0) return report;

  using pipeline_detail::PreparedFrame;
  auto prep = [&](size_t i) {
    return pipeline_detail::prepare_frame(source.get(i), cfg, matching,
                                          remap ? &*remap : nullptr, i);
  };

  std::future<PreparedFrame> next;
  if (!cfg.single_thread && n > 1) next = std::async(std::launch::async, prep, size_t(0));

  for (size_t i = 0; i < n; ++i) {
    PreparedFrame pf;
    if (cfg.single_thread || n == 1) {
      pf = prep(i);
    } else {
      pf = next.get();
      if (i + 1 < n) next = std::async(std::launch::async, prep, i + 1);
    }
    auto t0 = std::chrono::steady_clock::now();
    grid.insert_labeled_frame(pf.points, pf.origin);
    pf.timings.insert_ms = pipeline_detail::ms_since(t0);
    report.points += pf.points.size();
    report.timings.push_back(pf.timings);
    ++report.frames;
  }
  return report;
}

}  // namespace acmap
