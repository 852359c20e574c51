#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "vsls/detect.hpp"
#include "vsls/search.hpp"
#include "vsls/wire.hpp"

namespace vsls {

// Parsed `--backend` value.
struct BackendSpec {
  enum class Kind { pipe, tcp, scenario } kind = Kind::scenario;
  std::string command;  // pipe
  std::string host;     // tcp
  int port = 0;         // tcp
  std::string path;     // scenario
};

// Accepts pipe:CMD, tcp:HOST:PORT and scenario:PATH. Throws InvalidConfig.
BackendSpec parse_backend_spec(const std::string& text);

// Connects a wire backend; throws BackendUnavailable.
std::unique_ptr<DetectorBackend> open_wire_backend(const BackendSpec& spec,
                                                   std::shared_ptr<const FrameSource> frames,
                                                   bool use_grid);

// Entry point of the command-line tool. Returns the process exit code:
// 0 success, 2 input error, 3 IO error, 4 backend error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vsls
