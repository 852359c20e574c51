#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vsls/detect.hpp"
#include "vsls/image.hpp"
#include "vsls/query.hpp"
#include "vsls/search.hpp"
#include "vsls/wire.hpp"

namespace vsls {

struct ObjectTrack {
  std::string label;
  // Inclusive, sorted, non-overlapping.
  std::vector<std::pair<FrameIndex, FrameIndex>> intervals;
  // Box keypoints, sorted by frame; interpolated linearly, held at the ends.
  std::vector<std::pair<FrameIndex, BBox>> bbox_keys;
  double conf = 0.9;
  double jitter = 0.0;
  // Appearance placed to confuse relation-blind search.
  bool distractor = false;

  bool covers(FrameIndex frame) const;
  BBox bbox_at(FrameIndex frame) const;
  bool operator==(const ObjectTrack&) const = default;
};

struct ScenarioQuery {
  std::string id;
  QuerySpec spec;
  std::vector<FrameIndex> gt_keyframes;
  bool operator==(const ScenarioQuery&) const = default;
};

struct Scenario {
  FrameIndex n_frames = 0;
  double fps = 1.0;
  std::uint64_t seed = 0;
  std::vector<ObjectTrack> tracks;
  std::vector<ScenarioQuery> queries;

  double duration_seconds() const { return static_cast<double>(n_frames) / fps; }
  // Normalized labels of the tracks visible in `frame`.
  std::set<std::string> labels_at(FrameIndex frame) const;
  bool operator==(const Scenario&) const = default;
};

enum class TemplateKind { spatial, attribute, time, causal, mixed, adversarial_empty };

std::string_view to_string(TemplateKind kind);
// Throws InvalidScenario for unknown names.
TemplateKind parse_template_kind(std::string_view name);

struct ScenarioTemplate {
  TemplateKind kind = TemplateKind::spatial;
  FrameIndex n_frames = 500;
  double fps = 1.0;
  int min_event_length = 12;
  int max_event_length = 16;
  int distractors = 3;
  // Frames between the first and second object of a time event.
  int time_lag = 3;
  double key_conf = 0.9;
  double cue_conf = 0.85;
  double jitter = 0.05;
  // Minimum number of empty frames between placed blocks.
  int min_gap = 20;
};

// Deterministic in (template, seed). Throws InfeasibleTemplate when the blocks
// do not fit or the exhaustive reference does not rank a ground-truth frame first.
Scenario generate_scenario(const ScenarioTemplate& tmpl, std::uint64_t seed);

// Confidence of a track at a frame; keyed jitter, clamped to (0, 1].
double track_confidence(const Scenario& scenario, const ObjectTrack& track, FrameIndex frame);

std::vector<Detection> oracle_detect(const Scenario& scenario, std::span<const FrameIndex> frames,
                                     std::span<const std::string> vocabulary);

class ScenarioBackend : public DetectorBackend {
 public:
  explicit ScenarioBackend(std::shared_ptr<const Scenario> scenario);

  std::vector<Detection> detect(std::span<const FrameRef> frames,
                                std::span<const std::string> vocabulary) override;
  bool supports_concurrent_detect() const override { return true; }

  std::size_t calls() const { return calls_.load(); }
  const Scenario& scenario() const { return *scenario_; }

 private:
  std::shared_ptr<const Scenario> scenario_;
  std::atomic<std::size_t> calls_{0};
};

// Gray level used for a label's rectangles; distinct per label within a scenario.
double label_gray_level(const Scenario& scenario, std::string_view label);
GrayImage render_frame(const Scenario& scenario, FrameIndex frame, int width, int height);

// Serves rendered rasters of a scenario, for driving a wire backend without media files.
class RenderedFrameSource : public FrameSource {
 public:
  RenderedFrameSource(std::shared_ptr<const Scenario> scenario, int width, int height);
  std::optional<std::string> path(FrameIndex) const override { return std::nullopt; }
  std::optional<GrayImage> raster(FrameIndex frame) const override;

 private:
  std::shared_ptr<const Scenario> scenario_;
  int width_;
  int height_;
};

struct BruteForceResult {
  std::vector<double> scores;  // per frame
  std::vector<ScoredFrame> top_k;
};

inline constexpr FrameIndex kBruteForceFrameLimit = 5000;

// Detects every frame and scores it with full knowledge of the video; no
// sampling, no diffusion. Throws TooLarge above kBruteForceFrameLimit frames.
BruteForceResult brute_force_search(const Scenario& scenario, const QuerySpec& query,
                                    const SearchConfig& cfg, int K);

nlohmann::json scenario_to_json(const Scenario& scenario);
// Throws InvalidScenario.
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario_file(const std::filesystem::path& path);
void save_scenario_file(const std::filesystem::path& path, const Scenario& scenario);

}  // namespace vsls
