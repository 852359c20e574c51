#pragma once

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsls/detect.hpp"
#include "vsls/image.hpp"

namespace vsls {

// Fraction of ground-truth timestamps with a prediction within `delta` (inclusive).
// Throws EmptyGroundTruth; an empty prediction set scores 0.
double temporal_coverage(std::span<const double> predicted, std::span<const double> ground_truth,
                         double delta);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean SSIM over all fully contained windows. Throws DimensionMismatch, TooSmall.
double ssim(const GrayImage& a, const GrayImage& b, const SsimParams& params = {});
double ssim(const RgbImage& a, const RgbImage& b, const SsimParams& params = {});

struct FrameRecord {
  FrameIndex frame = 0;
  double timestamp = 0.0;
  std::set<std::string> labels;
  std::optional<GrayImage> image;
};

using SimilarityFn = std::function<double(const FrameRecord&, const FrameRecord&)>;

// Mean over predicted frames of the best similarity to any ground-truth frame.
// Throws EmptySet.
double set_precision(std::span<const FrameRecord> predicted, std::span<const FrameRecord> ground_truth,
                     const SimilarityFn& phi);
// Mean over ground-truth frames of the best similarity to any predicted frame.
double set_recall(std::span<const FrameRecord> predicted, std::span<const FrameRecord> ground_truth,
                  const SimilarityFn& phi);

// |A and B| / |A or B|; 1 when both are empty.
double label_jaccard_similarity(const std::set<std::string>& a, const std::set<std::string>& b);
double label_jaccard_similarity(const FrameRecord& a, const FrameRecord& b);
// SSIM of the attached rasters, floored at 0 so it can serve as a similarity.
double ssim_similarity(const FrameRecord& a, const FrameRecord& b);

struct EvalReport {
  double temporal_coverage = 0.0;
  double delta_seconds = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::string phi;
  int n_pred = 0;
  int n_gt = 0;
};

// Coverage on timestamps plus precision/recall under `phi`. Empty predictions
// give zero precision and recall rather than an error.
EvalReport evaluate(std::span<const FrameRecord> predicted, std::span<const FrameRecord> ground_truth,
                    double delta_seconds, const std::string& phi_name, const SimilarityFn& phi);

nlohmann::json report_to_json(const EvalReport& report);

struct Annotation {
  std::string query_id;
  std::vector<FrameIndex> gt_frames;
  std::vector<double> gt_timestamps;
};

// JSON list of {query_id, gt_frames, gt_timestamps}. Throws InvalidConfig.
std::vector<Annotation> annotations_from_json(const nlohmann::json& doc);
nlohmann::json annotations_to_json(std::span<const Annotation> annotations);

}  // namespace vsls
