#include <algorithm>

#include "vsls/search.hpp"

namespace vsls {
namespace {

bool has_label(std::span<const Detection> dets, const std::string& normalized) {
  return std::any_of(dets.begin(), dets.end(),
                     [&](const Detection& d) { return normalize_label(d.label) == normalized; });
}

// Ascending frames in which `normalized` was detected.
std::vector<FrameIndex> frames_with(const DetectionsByFrame& dets_by_frame,
                                    const std::string& normalized) {
  std::vector<FrameIndex> out;
  for (const auto& [frame, dets] : dets_by_frame) {
    if (has_label(dets, normalized)) out.push_back(frame);
  }
  return out;
}

// Any element of the sorted range within [lo, hi]?
bool any_in(const std::vector<FrameIndex>& sorted, FrameIndex lo, FrameIndex hi) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), lo);
  return it != sorted.end() && *it <= hi;
}

}  // namespace

double base_score(std::span<const Detection> detections, const QuerySpec& query) {
  double best = 0.0;
  for (const auto& det : detections) {
    if (const WeightedObject* obj = query.find(det.label)) {
      best = std::max(best, det.confidence * obj->weight);
    }
  }
  return best;
}

bool check_spatial(const RelationTriplet& rel, std::span<const Detection> frame_dets) {
  return has_label(frame_dets, normalize_label(rel.subject)) &&
         has_label(frame_dets, normalize_label(rel.object));
}

bool check_attribute(const RelationTriplet& rel, std::span<const Detection> frame_dets, double tau) {
  const std::string subject = normalize_label(rel.subject);
  const std::string object = normalize_label(rel.object);
  for (std::size_t i = 0; i < frame_dets.size(); ++i) {
    if (normalize_label(frame_dets[i].label) != subject) continue;
    for (std::size_t j = 0; j < frame_dets.size(); ++j) {
      if (i == j || normalize_label(frame_dets[j].label) != object) continue;
      if (min_area_overlap(frame_dets[i].bbox, frame_dets[j].bbox) > tau) return true;
    }
  }
  return false;
}

FramePairs check_time_pairs(const RelationTriplet& rel, const DetectionsByFrame& dets_by_frame,
                            int delta_t) {
  const std::string subject = normalize_label(rel.subject);
  const std::string object = normalize_label(rel.object);
  const bool repeat = subject == object;
  const auto firsts = frames_with(dets_by_frame, subject);
  const auto seconds = repeat ? firsts : frames_with(dets_by_frame, object);
  FramePairs pairs;
  for (const FrameIndex ti : firsts) {
    for (auto it = std::lower_bound(seconds.begin(), seconds.end(), ti);
         it != seconds.end() && *it - ti < delta_t; ++it) {
      if (repeat && *it == ti) continue;
      pairs.emplace(ti, *it);
    }
  }
  return pairs;
}

FramePairs check_causal_pairs(const RelationTriplet& rel, const DetectionsByFrame& dets_by_frame) {
  const auto causes = frames_with(dets_by_frame, normalize_label(rel.subject));
  const auto effects = frames_with(dets_by_frame, normalize_label(rel.object));
  FramePairs pairs;
  for (const FrameIndex ti : causes) {
    for (auto it = std::upper_bound(effects.begin(), effects.end(), ti); it != effects.end(); ++it) {
      pairs.emplace(ti, *it);
    }
  }
  return pairs;
}

std::set<FrameIndex> relation_participants(const RelationTriplet& rel,
                                           const DetectionsByFrame& dets_by_frame, int delta_t) {
  const std::string subject = normalize_label(rel.subject);
  const std::string object = normalize_label(rel.object);
  const auto firsts = frames_with(dets_by_frame, subject);
  const auto seconds = subject == object ? firsts : frames_with(dets_by_frame, object);
  std::set<FrameIndex> out;
  if (firsts.empty() || seconds.empty()) return out;

  if (rel.type == RelationType::causal) {
    for (const FrameIndex f : firsts) {
      if (f < seconds.back()) out.insert(f);
    }
    for (const FrameIndex f : seconds) {
      if (f > firsts.front()) out.insert(f);
    }
    return out;
  }
  if (rel.type != RelationType::time) return out;

  const FrameIndex reach = static_cast<FrameIndex>(delta_t) - 1;
  if (reach < 0) return out;
  if (subject == object) {
    for (const FrameIndex f : firsts) {
      if (any_in(firsts, f - reach, f - 1) || any_in(firsts, f + 1, f + reach)) out.insert(f);
    }
    return out;
  }
  for (const FrameIndex f : firsts) {
    if (any_in(seconds, f, f + reach)) out.insert(f);
  }
  for (const FrameIndex f : seconds) {
    if (any_in(firsts, f - reach, f)) out.insert(f);
  }
  return out;
}

}  // namespace vsls
