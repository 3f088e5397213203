#include "partsketch/vlm_client.hpp"

#include <thread>

#include "httplib.h"
#include "partsketch/flat_binary.hpp"

namespace partsketch {

EmbedTransport http_transport() {
  return [](const EmbedRequest& req) {
    EmbedReply reply;
    httplib::Client client(req.endpoint);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(req.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(req.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::MultipartFormDataItems items{{"image", req.png, "sketch.png", "image/png"},
                                          {"prompt", req.prompt, "", "text/plain; charset=utf-8"}};
    auto res = client.Post("/embed", items);
    if (!res) {
      reply.error = httplib::to_string(res.error());
      return reply;
    }
    reply.delivered = true;
    reply.status = res->status;
    reply.body = res->body;
    return reply;
  };
}

TextEmbedding fetch_external_embedding(const SketchRaster& img, const std::string& prompt,
                                       const std::string& endpoint, std::size_t width,
                                       const VlmClientOptions& options) {
  if (prompt.empty()) throw std::invalid_argument("external embedding: prompt must be non-empty");
  const EmbedTransport transport = options.transport ? options.transport : http_transport();
  const Sleeper sleep = options.sleep ? options.sleep : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

  EmbedRequest req{endpoint, encode_png(img), prompt, options.timeout};
  std::string last_error;
  auto delay = options.base_delay;
  const int attempts = 1 + std::max(0, options.retries);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      sleep(delay);
      delay *= 2;
    }
    EmbedReply reply = transport(req);
    if (!reply.delivered) {
      last_error = reply.error.empty() ? "no response" : reply.error;
      continue;
    }
    if (reply.status >= 500) {
      last_error = "HTTP " + std::to_string(reply.status);
      continue;
    }
    if (reply.status != 200)
      throw VlmError("external embedding: HTTP " + std::to_string(reply.status), attempt);
    Tensor2 tokens;
    try {
      tokens = read_flat(reply.body);
    } catch (const FormatError& e) {
      throw VlmError(std::string("external embedding: malformed payload: ") + e.what(), attempt);
    }
    if (tokens.rows() == 0) throw VlmError("external embedding: empty token matrix", attempt);
    if (tokens.cols() != width)
      throw DimensionError("external embedding width " + std::to_string(tokens.cols()) + " but model expects " +
                           std::to_string(width));
    TextEmbedding e;
    e.tokens = std::move(tokens);
    e.provenance = Provenance::ExternalService;
    e.prompt = prompt;
    return e;
  }
  throw VlmError("external embedding: " + last_error + " after " + std::to_string(attempts) + " attempts", attempts);
}

}  // namespace partsketch
