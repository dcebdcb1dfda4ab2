// Copyright 2026 The objwal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "objwal/object_store.hpp"

namespace httplib {
class Client;
}

namespace objwal {

/// AWS Signature Version 4 for the "s3" service.
struct SigV4Request {
  std::string method;
  std::string host;
  std::string path;  // already percent-encoded, leading slash
  std::map<std::string, std::string> query;  // decoded names and values
  std::map<std::string, std::string> headers;  // lower-case names; all are signed
  std::string payload_sha256;  // hex
  std::string amz_date;        // YYYYMMDDTHHMMSSZ
};

std::string sha256_hex(ByteView data);
std::string hmac_sha256_hex(const std::string& key, const std::string& data);
/// RFC 3986 encoding as S3 expects; '/' kept when `keep_slash`.
std::string uri_encode(const std::string& s, bool keep_slash);
std::string canonical_request(const SigV4Request& r);
/// Value of the Authorization header.
std::string sigv4_authorization(const SigV4Request& r, const std::string& access_key, const std::string& secret_key,
                                const std::string& region);

struct S3Config {
  // http(s)://host[:port]
  std::string endpoint;
  std::string region = "us-east-1";
  std::string access_key;
  std::string secret_key;
  std::string session_token;
  // Bucket in the path (/bucket/key) rather than in the host name.
  bool path_style = true;
  // Directory buckets with append; otherwise flushes become puts.
  bool supports_append = true;
  int timeout_seconds = 30;

  /// OBJWAL_S3_ENDPOINT, OBJWAL_S3_REGION (or AWS_REGION), AWS_ACCESS_KEY_ID,
  /// AWS_SECRET_ACCESS_KEY, AWS_SESSION_TOKEN, OBJWAL_S3_VIRTUAL_HOST.
  /// Throws ConfigError when the endpoint or credentials are missing.
  static S3Config from_env();
};

/// S3-compatible backend. Appends are conditional writes: a put with
/// If-None-Match: * creates the object, later parts carry
/// x-amz-write-offset-bytes.
class S3ObjectStore final : public ObjectStore {
 public:
  explicit S3ObjectStore(S3Config config);
  ~S3ObjectStore() override;

  std::uint64_t append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) override;
  Bytes get(const ObjectKey& key, std::optional<ByteRange> range = std::nullopt) override;
  void put(const ObjectKey& key, ByteView data) override;
  void remove(const ObjectKey& key) override;
  std::optional<ObjectInfo> head(const ObjectKey& key) override;
  std::vector<std::string> list(const std::string& bucket, const std::string& prefix) override;
  bool supports_append() const override { return config_.supports_append; }

  const S3Config& config() const { return config_; }

 private:
  struct Response {
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers;  // lower-case names
  };

  Response send(const std::string& method, const std::string& bucket, const std::string& key,
                const std::map<std::string, std::string>& query, std::map<std::string, std::string> headers,
                ByteView body);
  std::unique_ptr<httplib::Client> acquire(const std::string& bucket);
  void release(const std::string& bucket, std::unique_ptr<httplib::Client> c);
  [[noreturn]] void raise(const Response& r, const std::string& what);

  S3Config config_;
  std::string host_;           // Host header value (default ports dropped)
  std::string endpoint_host_;  // host[:port] as configured
  std::mutex pool_mu_;
  // Idle connections per bucket (one shared entry in path style).
  std::map<std::string, std::vector<std::unique_ptr<httplib::Client>>> pool_;
};

/// Extracts the text of every <tag>...</tag> in `xml` (entities decoded).
std::vector<std::string> xml_values(const std::string& xml, const std::string& tag);

}  // namespace objwal
