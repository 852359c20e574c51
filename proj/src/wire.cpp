#include "vsls/wire.hpp"

#include <netdb.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "vsls/error.hpp"

namespace vsls {
namespace {

using nlohmann::json;

json bbox_to_json(const BBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

// Buffered line reader/writer over a pair of file descriptors.
class FdLineChannel : public LineChannel {
 public:
  FdLineChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

  ~FdLineChannel() override { close_fds(); }

  void send_line(const std::string& line) override {
    std::string data = line;
    data.push_back('\n');
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = ::write(write_fd_, data.data() + sent, data.size() - sent);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::BackendUnavailable,
                    std::string("write to detector failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string receive_line() override {
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        throw Error(ErrorCode::BackendUnavailable, "detector closed the connection");
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  void close_fds() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

class PipeChannel : public FdLineChannel {
 public:
  PipeChannel(int read_fd, int write_fd, pid_t child) : FdLineChannel(read_fd, write_fd), child_(child) {}

  ~PipeChannel() override {
    close_fds();
    int status = 0;
    ::waitpid(child_, &status, 0);
  }

 private:
  pid_t child_;
};

}  // namespace

std::string encode_request(const WireRequest& request) {
  json doc;
  doc["id"] = request.id;
  doc["vocabulary"] = request.vocabulary;
  doc["frames"] = json::array();
  for (const auto& frame : request.frames) {
    json entry{{"index", frame.index}};
    if (frame.image_b64) entry["image_b64"] = *frame.image_b64;
    if (frame.path) entry["path"] = *frame.path;
    doc["frames"].push_back(std::move(entry));
  }
  doc["grid_k"] = request.grid_k ? json(*request.grid_k) : json(nullptr);
  return doc.dump();
}

WireRequest decode_request(const std::string& line) {
  try {
    const json doc = json::parse(line);
    WireRequest request;
    request.id = doc.at("id").get<std::string>();
    request.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
    for (const auto& entry : doc.at("frames")) {
      WireFrame frame;
      frame.index = entry.at("index").get<FrameIndex>();
      if (entry.contains("path")) frame.path = entry.at("path").get<std::string>();
      if (entry.contains("image_b64")) frame.image_b64 = entry.at("image_b64").get<std::string>();
      request.frames.push_back(std::move(frame));
    }
    if (doc.contains("grid_k") && !doc.at("grid_k").is_null()) request.grid_k = doc.at("grid_k").get<int>();
    return request;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("malformed request: ") + e.what());
  }
}

std::string encode_response(const WireResponse& response) {
  json doc;
  doc["id"] = response.id;
  doc["detections"] = json::array();
  for (const auto& det : response.detections) {
    doc["detections"].push_back({{"frame_index", det.frame_index},
                                 {"label", det.label},
                                 {"confidence", det.confidence},
                                 {"bbox", bbox_to_json(det.bbox)}});
  }
  doc["error"] = response.error ? json(*response.error) : json(nullptr);
  return doc.dump();
}

WireResponse decode_response(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ProtocolError, std::string("unparseable response: ") + e.what());
  }
  try {
    WireResponse response;
    response.id = doc.at("id").get<std::string>();
    if (doc.contains("error") && !doc.at("error").is_null()) {
      response.error = doc.at("error").get<std::string>();
    }
    if (doc.contains("detections") && !doc.at("detections").is_null()) {
      for (const auto& item : doc.at("detections")) {
        Detection det;
        det.frame_index = item.at("frame_index").get<FrameIndex>();
        det.label = item.at("label").get<std::string>();
        det.confidence = item.at("confidence").get<double>();
        const auto box = item.at("bbox").get<std::vector<double>>();
        if (box.size() != 4) throw Error(ErrorCode::ProtocolError, "bbox must have 4 numbers");
        det.bbox = BBox{box[0], box[1], box[2], box[3]};
        if (!det.bbox.valid()) throw Error(ErrorCode::ProtocolError, "bbox violates corner ordering");
        if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
          throw Error(ErrorCode::ProtocolError, "confidence outside [0, 1]");
        }
        response.detections.push_back(std::move(det));
      }
    }
    return response;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("malformed response: ") + e.what());
  }
}

std::unique_ptr<LineChannel> open_pipe_channel(const std::string& command) {
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw Error(ErrorCode::BackendUnavailable, "pipe() failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw Error(ErrorCode::BackendUnavailable, "pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    throw Error(ErrorCode::BackendUnavailable, "fork() failed");
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<PipeChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> open_tcp_channel(const std::string& host, int port) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &found) != 0) {
    throw Error(ErrorCode::BackendUnavailable, "cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) {
    throw Error(ErrorCode::BackendUnavailable, "cannot connect to " + host + ":" + service);
  }
  return std::make_unique<FdLineChannel>(fd, fd);
}

DirectoryFrameSource::DirectoryFrameSource(std::filesystem::path dir, std::string pattern)
    : dir_(std::move(dir)), pattern_(std::move(pattern)) {}

std::optional<std::string> DirectoryFrameSource::path(FrameIndex frame) const {
  char name[512];
  std::snprintf(name, sizeof(name), pattern_.c_str(), static_cast<int>(frame));
  return (dir_ / name).string();
}

std::optional<GrayImage> DirectoryFrameSource::raster(FrameIndex frame) const {
  const auto p = path(frame);
  if (!p || !std::filesystem::exists(*p)) return std::nullopt;
  return read_png(*p);
}

FrameIndex DirectoryFrameSource::count_frames() const {
  FrameIndex n = 0;
  while (std::filesystem::exists(*path(n))) ++n;
  return n;
}

WireBackend::WireBackend(std::unique_ptr<LineChannel> channel,
                         std::shared_ptr<const FrameSource> frames, WireBackendOptions options)
    : channel_(std::move(channel)), frames_(std::move(frames)), options_(options) {}

WireFrame WireBackend::encode_frame(FrameIndex index) const {
  WireFrame frame;
  frame.index = index;
  if (frames_) {
    if (auto p = frames_->path(index)) {
      frame.path = std::move(p);
      return frame;
    }
    if (auto img = frames_->raster(index)) {
      frame.image_b64 = base64_encode(encode_png(*img));
      return frame;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "no payload available for frame " + std::to_string(index));
}

std::vector<Detection> WireBackend::detect(std::span<const FrameRef> frames,
                                           std::span<const std::string> vocabulary) {
  std::lock_guard lock(mutex_);
  WireRequest request;
  request.id = "req-" + std::to_string(next_id_++);
  request.vocabulary.assign(vocabulary.begin(), vocabulary.end());

  std::optional<FrameGrid> grid;
  const auto k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(frames.size()))));
  if (options_.use_grid && frames_ && k > 1 && static_cast<std::size_t>(k * k) == frames.size()) {
    std::vector<GrayImage> tiles;
    std::vector<FrameIndex> indices;
    for (const auto& ref : frames) {
      auto img = frames_->raster(ref.index);
      if (!img) break;
      if (!tiles.empty() && (img->width != tiles[0].width || img->height != tiles[0].height)) break;
      tiles.push_back(std::move(*img));
      indices.push_back(ref.index);
    }
    if (tiles.size() == frames.size()) {
      grid = build_grid(indices, k, tiles[0].width, tiles[0].height);
      GrayImage composite(k * grid->tile_width, k * grid->tile_height, 0.0, tiles[0].dynamic_range);
      for (std::size_t t = 0; t < tiles.size(); ++t) {
        blit(composite, tiles[t], static_cast<int>(t % k) * grid->tile_width,
             static_cast<int>(t / k) * grid->tile_height);
      }
      request.frames.push_back({kCompositeFrameIndex, std::nullopt, base64_encode(encode_png(composite))});
      request.grid_k = k;
    }
  }
  if (!grid) {
    for (const auto& ref : frames) request.frames.push_back(encode_frame(ref.index));
  }

  channel_->send_line(encode_request(request));
  WireResponse response = decode_response(channel_->receive_line());
  if (response.id != request.id) {
    throw Error(ErrorCode::ProtocolError,
                "response id '" + response.id + "' does not match request '" + request.id + "'");
  }
  if (response.error) throw Error(ErrorCode::ProtocolError, "detector error: " + *response.error);

  if (!grid) return std::move(response.detections);
  std::vector<Detection> out;
  for (auto& [frame, dets] : demux_detections(*grid, response.detections)) {
    for (auto& det : dets) out.push_back(std::move(det));
  }
  return out;
}

}  // namespace vsls
