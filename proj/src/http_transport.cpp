#include "t2ieval/transport.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace t2ieval {

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

HttpResponse HttpTransport::post(const std::string& base_url, const std::string& path, const std::string& body,
                                 const Headers& headers, std::chrono::duration<double> timeout) {
  const UrlParts url = split_url(base_url);
  httplib::Client client(url.origin);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  client.set_connection_timeout(micros);
  client.set_read_timeout(micros);
  client.set_write_timeout(micros);

  httplib::Headers http_headers;
  for (const auto& [name, value] : headers) http_headers.emplace(name, value);

  ++requests_sent_;
  auto result = client.Post(url.prefix + path, http_headers, body, "application/json");
  if (!result) {
    throw TransportError("POST " + base_url + path + " failed: " + httplib::to_string(result.error()));
  }
  return {result->status, result->body};
}

}  // namespace t2ieval
