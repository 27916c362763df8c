#pragma once

// Live HTTP transport. Kept out of gateway.hpp so mock-only users do not pull
// in the HTTP library. https endpoints need CPPHTTPLIB_OPENSSL_SUPPORT and
// OpenSSL at link time.

#include <cstdlib>
#include <memory>
#include <string>

#include "httplib.h"
#include "mentra/gateway.hpp"

namespace mentra::gateway {

class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string base_url, std::string api_key)
      : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (text::starts_with_ci(base_url_, "https://"))
      throw Error(Errc::ConfigError, "https endpoint requested but the build has no TLS support");
#endif
  }

  TransportReply post(std::string_view path, const std::string& body, std::chrono::milliseconds timeout) override {
    httplib::Client cli(base_url_);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = cli.Post(std::string(path), headers, body, "application/json");
    if (!res) {
      return {res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout
                  ? TransportReply::Kind::Timeout
                  : TransportReply::Kind::ConnectionError,
              0, {}};
    }
    return {TransportReply::Kind::Ok, res->status, res->body};
  }

 private:
  std::string base_url_;
  std::string api_key_;
};

/// Builds a live client from config; the credential comes from the
/// environment variable named in the settings.
inline ChatClient make_live_client(const GatewaySettings& s) {
  s.check();
  const char* key = std::getenv(s.api_key_env.c_str());
  if (!key || !*key) throw Error(Errc::AuthError, "environment variable " + s.api_key_env + " is not set");
  return ChatClient(std::make_shared<HttpTransport>(s.base_url, key), s.policy());
}

}  // namespace mentra::gateway
