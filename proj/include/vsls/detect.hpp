#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace vsls {

using FrameIndex = std::int64_t;

// Corner-form box normalized to the containing image: 0 <= x0 < x1 <= 1, same for y.
struct BBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  bool operator==(const BBox&) const = default;

  // (x, y) is the top-left corner.
  static BBox from_xywh(double x, double y, double w, double h);
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
  bool valid() const;
};

double intersection_area(const BBox& a, const BBox& b);

// Intersection area over the smaller of the two box areas.
double min_area_overlap(const BBox& a, const BBox& b);

struct Detection {
  FrameIndex frame_index = 0;
  std::string label;
  double confidence = 0.0;
  BBox bbox;

  bool operator==(const Detection&) const = default;
};

using DetectionsByFrame = std::map<FrameIndex, std::vector<Detection>>;

// k x k mosaic of sampled frames; tile (r, c) holds frame_indices[r * k + c].
struct FrameGrid {
  int k = 1;
  std::vector<FrameIndex> frame_indices;
  int tile_width = 0;
  int tile_height = 0;

  FrameIndex at(int row, int col) const { return frame_indices.at(row * k + col); }
  std::size_t tile_count() const { return frame_indices.size(); }
};

// Throws SizeMismatch when the index count is not k*k, InvalidGrid for
// duplicates, out-of-range indices (when n_frames is given) or k < 1.
FrameGrid build_grid(std::span<const FrameIndex> frame_indices, int k, int tile_width = 0,
                     int tile_height = 0, std::optional<FrameIndex> n_frames = std::nullopt);

// Maps a per-frame box into full-grid coordinates for the given tile.
BBox to_grid_coordinates(const FrameGrid& grid, std::size_t tile, const BBox& frame_box);

// Assigns each grid-space detection to the tile containing its box center,
// clips it to that tile and rescales to per-frame coordinates. Detections that
// keep less than a quarter of their area after clipping are dropped.
DetectionsByFrame demux_detections(const FrameGrid& grid, std::span<const Detection> grid_detections);

// Identifies a frame to a backend; decoding is the backend's business.
struct FrameRef {
  std::string video;
  FrameIndex index = 0;
};

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;

  // Must only return detections for the requested frames and vocabulary labels,
  // and be deterministic for identical inputs.
  virtual std::vector<Detection> detect(std::span<const FrameRef> frames,
                                        std::span<const std::string> vocabulary) = 0;

  // False when callers must serialize detect() calls.
  virtual bool supports_concurrent_detect() const { return false; }
};

// Order- and case-insensitive FNV-1a hash of a vocabulary.
std::uint64_t vocabulary_hash(std::span<const std::string> vocabulary);

// Per-session detection cache keyed by (frame, vocabulary hash). Concurrent
// readers, exclusive writers.
class DetectionCache {
 public:
  std::optional<std::vector<Detection>> lookup(FrameIndex frame, std::uint64_t vocab_hash) const;
  void store(FrameIndex frame, std::uint64_t vocab_hash, std::vector<Detection> detections);
  std::size_t size() const;
  void clear();

 private:
  struct Key {
    FrameIndex frame;
    std::uint64_t vocab;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return std::hash<std::uint64_t>{}(static_cast<std::uint64_t>(k.frame) * 0x9E3779B97F4A7C15ULL ^
                                        k.vocab);
    }
  };

  mutable std::shared_mutex mutex_;
  std::unordered_map<Key, std::vector<Detection>, KeyHash> entries_;
};

// Serves cached frames directly and sends all misses to the backend in one call.
// Every requested frame appears in the result, possibly with no detections.
DetectionsByFrame cached_detect(DetectorBackend& backend, DetectionCache& cache,
                                const std::string& video, std::span<const FrameIndex> frames,
                                std::span<const std::string> vocabulary);

}  // namespace vsls
