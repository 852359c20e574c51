#include "vsls/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vsls/error.hpp"

namespace vsls {
namespace {

// Valid-mode separable filtering with a normalized 1-D kernel.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                 const std::vector<double>& kernel) {
  const int n = static_cast<int>(kernel.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += kernel[i] * src[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += kernel[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double temporal_coverage(std::span<const double> predicted, std::span<const double> ground_truth,
                         double delta) {
  if (ground_truth.empty()) throw Error(ErrorCode::EmptyGroundTruth, "ground-truth set is empty");
  if (!(delta >= 0.0)) throw Error(ErrorCode::InvalidConfig, "delta must be >= 0");
  if (predicted.empty()) return 0.0;
  std::size_t covered = 0;
  for (const double g : ground_truth) {
    double best = std::numeric_limits<double>::infinity();
    for (const double p : predicted) best = std::min(best, std::abs(g - p));
    if (best <= delta) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(ground_truth.size());
}

double ssim(const GrayImage& a, const GrayImage& b, const SsimParams& params) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::DimensionMismatch, "ssim needs images of equal size");
  }
  if (a.width < params.window || a.height < params.window) {
    throw Error(ErrorCode::TooSmall, "ssim needs images of at least " + std::to_string(params.window) +
                                         "x" + std::to_string(params.window));
  }
  std::vector<double> kernel(static_cast<std::size_t>(params.window));
  const double c = 0.5 * (params.window - 1);
  double sum = 0.0;
  for (int i = 0; i < params.window; ++i) {
    kernel[i] = std::exp(-((i - c) * (i - c)) / (2.0 * params.sigma * params.sigma));
    sum += kernel[i];
  }
  for (double& k : kernel) k /= sum;

  const int w = a.width;
  const int h = a.height;
  const std::size_t n = a.pixels.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a.pixels[i] * a.pixels[i];
    bb[i] = b.pixels[i] * b.pixels[i];
    ab[i] = a.pixels[i] * b.pixels[i];
  }
  const auto mu_a = filter_valid(a.pixels, w, h, kernel);
  const auto mu_b = filter_valid(b.pixels, w, h, kernel);
  const auto e_aa = filter_valid(aa, w, h, kernel);
  const auto e_bb = filter_valid(bb, w, h, kernel);
  const auto e_ab = filter_valid(ab, w, h, kernel);

  const double range = std::max(a.dynamic_range, b.dynamic_range);
  const double c1 = (params.k1 * range) * (params.k1 * range);
  const double c2 = (params.k2 * range) * (params.k2 * range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double ssim(const RgbImage& a, const RgbImage& b, const SsimParams& params) {
  return ssim(to_gray(a), to_gray(b), params);
}

double set_precision(std::span<const FrameRecord> predicted, std::span<const FrameRecord> ground_truth,
                     const SimilarityFn& phi) {
  if (predicted.empty() || ground_truth.empty()) {
    throw Error(ErrorCode::EmptySet, "precision needs non-empty predicted and ground-truth sets");
  }
  double total = 0.0;
  for (const auto& p : predicted) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& g : ground_truth) best = std::max(best, phi(p, g));
    total += best;
  }
  return total / static_cast<double>(predicted.size());
}

double set_recall(std::span<const FrameRecord> predicted, std::span<const FrameRecord> ground_truth,
                  const SimilarityFn& phi) {
  if (predicted.empty() || ground_truth.empty()) {
    throw Error(ErrorCode::EmptySet, "recall needs non-empty predicted and ground-truth sets");
  }
  double total = 0.0;
  for (const auto& g : ground_truth) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : predicted) best = std::max(best, phi(p, g));
    total += best;
  }
  return total / static_cast<double>(ground_truth.size());
}

double label_jaccard_similarity(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& label : a) common += b.count(label);
  const std::size_t total = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(total);
}

double label_jaccard_similarity(const FrameRecord& a, const FrameRecord& b) {
  return label_jaccard_similarity(a.labels, b.labels);
}

double ssim_similarity(const FrameRecord& a, const FrameRecord& b) {
  if (!a.image || !b.image) throw Error(ErrorCode::InvalidConfig, "ssim similarity needs frame images");
  return std::max(0.0, ssim(*a.image, *b.image));
}

EvalReport evaluate(std::span<const FrameRecord> predicted, std::span<const FrameRecord> ground_truth,
                    double delta_seconds, const std::string& phi_name, const SimilarityFn& phi) {
  std::vector<double> pt, gt;
  for (const auto& r : predicted) pt.push_back(r.timestamp);
  for (const auto& r : ground_truth) gt.push_back(r.timestamp);
  EvalReport report;
  report.temporal_coverage = temporal_coverage(pt, gt, delta_seconds);
  report.delta_seconds = delta_seconds;
  report.phi = phi_name;
  report.n_pred = static_cast<int>(predicted.size());
  report.n_gt = static_cast<int>(ground_truth.size());
  if (!predicted.empty()) {
    report.precision = set_precision(predicted, ground_truth, phi);
    report.recall = set_recall(predicted, ground_truth, phi);
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json doc{{"temporal_coverage", report.temporal_coverage},
                     {"delta_seconds", report.delta_seconds},
                     {"precision", report.precision},
                     {"recall", report.recall},
                     {"phi", report.phi},
                     {"n_pred", report.n_pred},
                     {"n_gt", report.n_gt}};
  if (report.phi == "ssim") {
    const SsimParams p;
    doc["ssim_params"] = {{"window", p.window}, {"sigma", p.sigma}, {"k1", p.k1}, {"k2", p.k2}};
  }
  return doc;
}

std::vector<Annotation> annotations_from_json(const nlohmann::json& doc) {
  std::vector<Annotation> out;
  try {
    if (!doc.is_array()) throw Error(ErrorCode::InvalidConfig, "annotations must be a JSON list");
    for (const auto& item : doc) {
      Annotation a;
      a.query_id = item.at("query_id").get<std::string>();
      a.gt_frames = item.value("gt_frames", std::vector<FrameIndex>{});
      a.gt_timestamps = item.value("gt_timestamps", std::vector<double>{});
      for (const double t : a.gt_timestamps) {
        if (!std::isfinite(t) || t < 0.0) throw Error(ErrorCode::InvalidConfig, "gt timestamps must be finite and >= 0");
      }
      out.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed annotations: ") + e.what());
  }
  return out;
}

nlohmann::json annotations_to_json(std::span<const Annotation> annotations) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& a : annotations) {
    doc.push_back({{"query_id", a.query_id}, {"gt_frames", a.gt_frames}, {"gt_timestamps", a.gt_timestamps}});
  }
  return doc;
}

}  // namespace vsls
