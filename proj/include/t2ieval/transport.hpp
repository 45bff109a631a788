#pragma once

#include "t2ieval/errors.hpp"

#include <atomic>
#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace t2ieval {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Connection-level failure (refused, reset, timed out). Retryable.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error("TransportError", what) {}
};

/// Minimal POST-only HTTP seam so the gateway can be driven by a fake in tests.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                            const Headers& headers, std::chrono::duration<double> timeout) = 0;
};

/// Split "scheme://host[:port][/prefix]" into origin and path prefix.
struct UrlParts {
  std::string origin;  ///< scheme://host[:port]
  std::string prefix;  ///< "" or "/v1"
};
UrlParts split_url(const std::string& url);

/// cpp-httplib backed transport. Counts every request it puts on the wire.
class HttpTransport final : public Transport {
 public:
  HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                    const Headers& headers, std::chrono::duration<double> timeout) override;

  std::size_t requests_sent() const noexcept { return requests_sent_.load(); }

 private:
  std::atomic<std::size_t> requests_sent_{0};
};

}  // namespace t2ieval
