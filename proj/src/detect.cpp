#include "vsls/detect.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <unordered_set>

#include "vsls/error.hpp"
#include "vsls/query.hpp"

namespace vsls {

BBox BBox::from_xywh(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }

bool BBox::valid() const {
  return std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) && std::isfinite(y1) &&
         x0 >= 0.0 && y0 >= 0.0 && x1 <= 1.0 && y1 <= 1.0 && x0 < x1 && y0 < y1;
}

double intersection_area(const BBox& a, const BBox& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

double min_area_overlap(const BBox& a, const BBox& b) {
  const double smaller = std::min(a.area(), b.area());
  if (smaller <= 0.0) return 0.0;
  return intersection_area(a, b) / smaller;
}

FrameGrid build_grid(std::span<const FrameIndex> frame_indices, int k, int tile_width,
                     int tile_height, std::optional<FrameIndex> n_frames) {
  if (k < 1) throw Error(ErrorCode::InvalidGrid, "grid size k must be >= 1");
  const auto expected = static_cast<std::size_t>(k) * static_cast<std::size_t>(k);
  if (frame_indices.size() != expected) {
    throw Error(ErrorCode::SizeMismatch, "grid of k=" + std::to_string(k) + " needs " +
                                             std::to_string(expected) + " frames, got " +
                                             std::to_string(frame_indices.size()));
  }
  std::unordered_set<FrameIndex> seen;
  for (const FrameIndex f : frame_indices) {
    if (f < 0 || (n_frames && f >= *n_frames)) {
      throw Error(ErrorCode::InvalidGrid, "frame index out of range: " + std::to_string(f));
    }
    if (!seen.insert(f).second) {
      throw Error(ErrorCode::InvalidGrid, "duplicate frame index in grid: " + std::to_string(f));
    }
  }
  return FrameGrid{k, {frame_indices.begin(), frame_indices.end()}, tile_width, tile_height};
}

BBox to_grid_coordinates(const FrameGrid& grid, std::size_t tile, const BBox& frame_box) {
  const double k = grid.k;
  const double col = static_cast<double>(tile % grid.k);
  const double row = static_cast<double>(tile / grid.k);
  return {(col + frame_box.x0) / k, (row + frame_box.y0) / k, (col + frame_box.x1) / k,
          (row + frame_box.y1) / k};
}

DetectionsByFrame demux_detections(const FrameGrid& grid, std::span<const Detection> grid_detections) {
  DetectionsByFrame out;
  const double k = grid.k;
  for (const Detection& det : grid_detections) {
    const BBox& b = det.bbox;
    if (!(b.x0 < b.x1 && b.y0 < b.y1) || b.area() <= 0.0) continue;

    const int col = std::clamp(static_cast<int>(std::floor(b.center_x() * k)), 0, grid.k - 1);
    const int row = std::clamp(static_cast<int>(std::floor(b.center_y() * k)), 0, grid.k - 1);
    const BBox tile{col / k, row / k, (col + 1) / k, (row + 1) / k};
    const BBox clipped{std::max(b.x0, tile.x0), std::max(b.y0, tile.y0), std::min(b.x1, tile.x1),
                       std::min(b.y1, tile.y1)};
    if (!(clipped.x0 < clipped.x1 && clipped.y0 < clipped.y1)) continue;
    if (clipped.area() < 0.25 * b.area()) continue;

    const auto rescale = [&](double v, double origin) { return std::clamp((v - origin) * k, 0.0, 1.0); };
    const BBox local{rescale(clipped.x0, tile.x0), rescale(clipped.y0, tile.y0),
                     rescale(clipped.x1, tile.x0), rescale(clipped.y1, tile.y0)};
    if (!local.valid()) continue;

    const FrameIndex frame = grid.at(row, col);
    out[frame].push_back(Detection{frame, det.label, det.confidence, local});
  }
  return out;
}

std::uint64_t vocabulary_hash(std::span<const std::string> vocabulary) {
  std::set<std::string> labels;
  for (const auto& label : vocabulary) labels.insert(normalize_label(label));
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& label : labels) {
    for (const char c : label) mix(static_cast<unsigned char>(c));
    mix(0x1f);
  }
  return h;
}

std::optional<std::vector<Detection>> DetectionCache::lookup(FrameIndex frame,
                                                             std::uint64_t vocab_hash) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(Key{frame, vocab_hash});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void DetectionCache::store(FrameIndex frame, std::uint64_t vocab_hash,
                           std::vector<Detection> detections) {
  std::unique_lock lock(mutex_);
  entries_[Key{frame, vocab_hash}] = std::move(detections);
}

std::size_t DetectionCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void DetectionCache::clear() {
  std::unique_lock lock(mutex_);
  entries_.clear();
}

DetectionsByFrame cached_detect(DetectorBackend& backend, DetectionCache& cache,
                                const std::string& video, std::span<const FrameIndex> frames,
                                std::span<const std::string> vocabulary) {
  if (vocabulary.empty()) throw Error(ErrorCode::InvalidConfig, "detection vocabulary is empty");
  const std::uint64_t vocab = vocabulary_hash(vocabulary);

  DetectionsByFrame out;
  std::vector<FrameRef> misses;
  for (const FrameIndex f : frames) {
    if (out.contains(f)) continue;
    if (auto hit = cache.lookup(f, vocab)) {
      out.emplace(f, std::move(*hit));
      continue;
    }
    out.emplace(f, std::vector<Detection>{});
    misses.push_back(FrameRef{video, f});
  }
  if (misses.empty()) return out;

  std::unordered_set<std::string> allowed;
  for (const auto& label : vocabulary) allowed.insert(normalize_label(label));

  DetectionsByFrame fresh;
  for (const auto& ref : misses) fresh[ref.index];
  for (Detection& det : backend.detect(misses, vocabulary)) {
    const auto slot = fresh.find(det.frame_index);
    if (slot == fresh.end()) {
      throw Error(ErrorCode::ProtocolError,
                  "backend returned a detection for unrequested frame " +
                      std::to_string(det.frame_index));
    }
    if (!allowed.contains(normalize_label(det.label))) {
      throw Error(ErrorCode::ProtocolError,
                  "backend returned label outside the vocabulary: '" + det.label + "'");
    }
    slot->second.push_back(std::move(det));
  }
  for (auto& [frame, dets] : fresh) {
    cache.store(frame, vocab, dets);
    out[frame] = std::move(dets);
  }
  return out;
}

}  // namespace vsls
