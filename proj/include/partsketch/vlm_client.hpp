#pragma once

// Client for an external embedding service: POST {endpoint}/embed with
// multipart fields "image" (PNG) and "prompt"; the reply body is the
// flat-binary tensor format.

#include <chrono>
#include <functional>
#include <stdexcept>
#include <string>

#include "partsketch/raster.hpp"
#include "partsketch/text_embedding.hpp"

namespace partsketch {

class VlmError : public std::runtime_error {
 public:
  VlmError(const std::string& what, int attempts) : std::runtime_error(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

struct EmbedRequest {
  std::string endpoint;  // scheme://host:port
  std::string png;
  std::string prompt;
  std::chrono::milliseconds timeout{5000};
};

struct EmbedReply {
  bool delivered = false;  // false on connection failure or timeout
  int status = 0;
  std::string body;
  std::string error;
};

using EmbedTransport = std::function<EmbedReply(const EmbedRequest&)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

EmbedTransport http_transport();

struct VlmClientOptions {
  int retries = 3;  // after the first attempt
  std::chrono::milliseconds base_delay{200};
  std::chrono::milliseconds timeout{5000};
  EmbedTransport transport;  // empty: http_transport()
  Sleeper sleep;             // empty: std::this_thread::sleep_for
};

// Retries undelivered requests and 5xx replies with delays base, 2 base,
// 4 base. Other failures are reported at once. A payload whose width differs
// from `width` is rejected with DimensionError.
TextEmbedding fetch_external_embedding(const SketchRaster& img, const std::string& prompt,
                                       const std::string& endpoint, std::size_t width,
                                       const VlmClientOptions& options = {});

}  // namespace partsketch
