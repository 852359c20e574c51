#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsls/detect.hpp"
#include "vsls/image.hpp"

namespace vsls {

// Newline-delimited JSON detector protocol.
//
// Request:
//   {"id": str, "vocabulary": [str],
//    "frames": [{"index": int, "image_b64": str} | {"index": int, "path": str}],
//    "grid_k": int | null}
// Response:
//   {"id": str, "detections": [{"frame_index": int, "label": str,
//    "confidence": float, "bbox": [x0, y0, x1, y1]}], "error": str | null}
//
// In grid mode the request carries a single composite frame with index -1 and
// the returned boxes are in composite coordinates.

struct WireFrame {
  FrameIndex index = 0;
  std::optional<std::string> path;
  std::optional<std::string> image_b64;
};

struct WireRequest {
  std::string id;
  std::vector<std::string> vocabulary;
  std::vector<WireFrame> frames;
  std::optional<int> grid_k;
};

struct WireResponse {
  std::string id;
  std::vector<Detection> detections;
  std::optional<std::string> error;
};

inline constexpr FrameIndex kCompositeFrameIndex = -1;

// Serialized without a trailing newline.
std::string encode_request(const WireRequest& request);
WireRequest decode_request(const std::string& line);
std::string encode_response(const WireResponse& response);
// Throws ProtocolError on malformed JSON, missing fields or invalid boxes.
WireResponse decode_response(const std::string& line);

// Bidirectional line transport.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(const std::string& line) = 0;
  // Throws BackendUnavailable when the peer has gone away.
  virtual std::string receive_line() = 0;
};

// Runs `command` through /bin/sh with stdin/stdout connected to the channel.
std::unique_ptr<LineChannel> open_pipe_channel(const std::string& command);
std::unique_ptr<LineChannel> open_tcp_channel(const std::string& host, int port);

// Supplies frame payloads for the wire. A source provides paths, rasters or both.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<std::string> path(FrameIndex frame) const = 0;
  virtual std::optional<GrayImage> raster(FrameIndex frame) const = 0;
};

// Frames pre-extracted into a directory as printf-style numbered PNG files.
class DirectoryFrameSource : public FrameSource {
 public:
  explicit DirectoryFrameSource(std::filesystem::path dir, std::string pattern = "%06d.png");
  std::optional<std::string> path(FrameIndex frame) const override;
  std::optional<GrayImage> raster(FrameIndex frame) const override;
  // Number of consecutive frame files starting at index 0.
  FrameIndex count_frames() const;

 private:
  std::filesystem::path dir_;
  std::string pattern_;
};

struct WireBackendOptions {
  // Composite k*k sampled frames into one image when the batch size is a
  // perfect square; other batches fall back to per-frame entries.
  bool use_grid = false;
};

class WireBackend : public DetectorBackend {
 public:
  WireBackend(std::unique_ptr<LineChannel> channel, std::shared_ptr<const FrameSource> frames,
              WireBackendOptions options = {});

  std::vector<Detection> detect(std::span<const FrameRef> frames,
                                std::span<const std::string> vocabulary) override;
  bool supports_concurrent_detect() const override { return false; }

  std::size_t requests_sent() const { return next_id_; }

 private:
  WireFrame encode_frame(FrameIndex index) const;

  std::unique_ptr<LineChannel> channel_;
  std::shared_ptr<const FrameSource> frames_;
  WireBackendOptions options_;
  std::mutex mutex_;
  std::size_t next_id_ = 0;
};

}  // namespace vsls
