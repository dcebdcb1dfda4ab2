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

#include "objwal/s3_store.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <cstdlib>
#include <ctime>
#include <httplib.h>

#include "objwal/types.hpp"

namespace objwal {

namespace {

std::string to_hex(const unsigned char* p, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    out[2 * i] = kDigits[p[i] >> 4];
    out[2 * i + 1] = kDigits[p[i] & 15];
  }
  return out;
}

std::string hmac_raw(const std::string& key, const std::string& data) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), reinterpret_cast<const unsigned char*>(data.data()),
       data.size(), out, &len);
  return std::string(reinterpret_cast<char*>(out), len);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::string amz_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

}  // namespace

std::string sha256_hex(ByteView data) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md);
  return to_hex(md, sizeof md);
}

std::string hmac_sha256_hex(const std::string& key, const std::string& data) {
  const std::string raw = hmac_raw(key, data);
  return to_hex(reinterpret_cast<const unsigned char*>(raw.data()), raw.size());
}

std::string uri_encode(const std::string& s, bool keep_slash) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || (keep_slash && c == '/')) {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kDigits[c >> 4];
      out += kDigits[c & 15];
    }
  }
  return out;
}

std::string canonical_request(const SigV4Request& r) {
  std::string q;
  for (const auto& [k, v] : r.query) {
    if (!q.empty()) q += '&';
    q += uri_encode(k, false) + "=" + uri_encode(v, false);
  }
  std::string headers, signed_names;
  for (const auto& [k, v] : r.headers) {
    headers += k + ":" + trim(v) + "\n";
    if (!signed_names.empty()) signed_names += ';';
    signed_names += k;
  }
  return r.method + "\n" + r.path + "\n" + q + "\n" + headers + "\n" + signed_names + "\n" + r.payload_sha256;
}

std::string sigv4_authorization(const SigV4Request& r, const std::string& access_key, const std::string& secret_key,
                                const std::string& region) {
  const std::string date = r.amz_date.substr(0, 8);
  const std::string scope = date + "/" + region + "/s3/aws4_request";
  const std::string creq = canonical_request(r);
  const std::string to_sign = "AWS4-HMAC-SHA256\n" + r.amz_date + "\n" + scope + "\n" +
                              sha256_hex(ByteView(reinterpret_cast<const std::byte*>(creq.data()), creq.size()));
  std::string k = hmac_raw("AWS4" + secret_key, date);
  k = hmac_raw(k, region);
  k = hmac_raw(k, "s3");
  k = hmac_raw(k, "aws4_request");
  std::string signed_names;
  for (const auto& [name, v] : r.headers) {
    if (!signed_names.empty()) signed_names += ';';
    signed_names += name;
  }
  return "AWS4-HMAC-SHA256 Credential=" + access_key + "/" + scope + ", SignedHeaders=" + signed_names +
         ", Signature=" + hmac_sha256_hex(k, to_sign);
}

std::vector<std::string> xml_values(const std::string& xml, const std::string& tag) {
  std::vector<std::string> out;
  const std::string open = "<" + tag + ">", close = "</" + tag + ">";
  std::size_t pos = 0;
  while ((pos = xml.find(open, pos)) != std::string::npos) {
    pos += open.size();
    const auto end = xml.find(close, pos);
    if (end == std::string::npos) break;
    std::string raw = xml.substr(pos, end - pos), v;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        v += raw[i];
        continue;
      }
      static const std::pair<const char*, char> kEntities[] = {
          {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}};
      bool matched = false;
      for (const auto& [name, ch] : kEntities) {
        if (raw.compare(i, std::strlen(name), name) == 0) {
          v += ch;
          i += std::strlen(name) - 1;
          matched = true;
          break;
        }
      }
      if (!matched) v += '&';
    }
    out.push_back(std::move(v));
    pos = end + close.size();
  }
  return out;
}

S3Config S3Config::from_env() {
  S3Config c;
  c.endpoint = env("OBJWAL_S3_ENDPOINT");
  c.region = env("OBJWAL_S3_REGION");
  if (c.region.empty()) c.region = env("AWS_REGION");
  if (c.region.empty()) c.region = "us-east-1";
  c.access_key = env("AWS_ACCESS_KEY_ID");
  c.secret_key = env("AWS_SECRET_ACCESS_KEY");
  c.session_token = env("AWS_SESSION_TOKEN");
  c.path_style = env("OBJWAL_S3_VIRTUAL_HOST").empty();
  if (c.endpoint.empty()) throw ConfigError("OBJWAL_S3_ENDPOINT is not set");
  if (c.access_key.empty() || c.secret_key.empty())
    throw ConfigError("AWS_ACCESS_KEY_ID and AWS_SECRET_ACCESS_KEY are required for the s3 backend");
  return c;
}

S3ObjectStore::S3ObjectStore(S3Config config) : config_(std::move(config)) {
  const auto scheme = config_.endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("s3 endpoint needs a scheme: " + config_.endpoint);
  host_ = config_.endpoint.substr(scheme + 3);
  if (auto slash = host_.find('/'); slash != std::string::npos) host_.resize(slash);
  endpoint_host_ = host_;
  // Default ports are not part of the Host header.
  if (host_.ends_with(":80") || host_.ends_with(":443")) host_.resize(host_.rfind(':'));
}

S3ObjectStore::~S3ObjectStore() = default;

std::unique_ptr<httplib::Client> S3ObjectStore::acquire(const std::string& bucket) {
  {
    std::lock_guard lock(pool_mu_);
    auto& idle = pool_[bucket];
    if (!idle.empty()) {
      auto c = std::move(idle.back());
      idle.pop_back();
      return c;
    }
  }
  const std::string scheme = config_.endpoint.substr(0, config_.endpoint.find("://") + 3);
  auto c = std::make_unique<httplib::Client>(bucket.empty() ? scheme + endpoint_host_
                                                            : scheme + bucket + "." + endpoint_host_);
  c->set_keep_alive(true);
  c->set_connection_timeout(config_.timeout_seconds, 0);
  c->set_read_timeout(config_.timeout_seconds, 0);
  c->set_write_timeout(config_.timeout_seconds, 0);
  return c;
}

void S3ObjectStore::release(const std::string& bucket, std::unique_ptr<httplib::Client> c) {
  std::lock_guard lock(pool_mu_);
  pool_[bucket].push_back(std::move(c));
}

S3ObjectStore::Response S3ObjectStore::send(const std::string& method, const std::string& bucket,
                                            const std::string& key, const std::map<std::string, std::string>& query,
                                            std::map<std::string, std::string> headers, ByteView body) {
  SigV4Request sig;
  sig.method = method;
  sig.host = config_.path_style ? host_ : bucket + "." + host_;
  sig.path = config_.path_style ? "/" + uri_encode(bucket, false) : "";
  if (!key.empty() || !config_.path_style) sig.path += "/" + uri_encode(key, true);
  sig.query = query;
  sig.amz_date = amz_now();
  sig.payload_sha256 = sha256_hex(body);
  headers["host"] = sig.host;
  headers["x-amz-date"] = sig.amz_date;
  headers["x-amz-content-sha256"] = sig.payload_sha256;
  if (!config_.session_token.empty()) headers["x-amz-security-token"] = config_.session_token;
  sig.headers = headers;
  headers["authorization"] = sigv4_authorization(sig, config_.access_key, config_.secret_key, config_.region);

  std::string target = sig.path;
  if (!query.empty()) {
    target += '?';
    bool first = true;
    for (const auto& [k, v] : query) {
      if (!first) target += '&';
      first = false;
      target += uri_encode(k, false) + "=" + uri_encode(v, false);
    }
  }
  httplib::Request req;
  req.method = method;
  req.path = target;
  for (const auto& [k, v] : headers) req.headers.emplace(k, v);
  if (method == "PUT" || method == "POST") {
    req.body.assign(reinterpret_cast<const char*>(body.data()), body.size());
    req.headers.emplace("Content-Type", "application/octet-stream");
  }

  // Virtual-host requests connect to the bucket's own host name.
  const std::string conn_host = config_.path_style ? std::string() : bucket;
  auto client = acquire(conn_host);
  httplib::Response res;
  httplib::Error err = httplib::Error::Success;
  const bool ok = client->send(req, res, err);
  if (!ok) throw StoreError(StoreErrc::kUnavailable, "s3 " + method + " " + key + ": " + httplib::to_string(err));
  release(conn_host, std::move(client));
  Response out;
  out.status = res.status;
  out.body = std::move(res.body);
  for (const auto& [k, v] : res.headers) out.headers[lower(k)] = v;
  return out;
}

void S3ObjectStore::raise(const Response& r, const std::string& what) {
  const auto codes = xml_values(r.body, "Code");
  const std::string code = codes.empty() ? "" : codes.front();
  const std::string msg = what + ": HTTP " + std::to_string(r.status) + (code.empty() ? "" : " " + code);
  if (r.status == 404) throw StoreError(StoreErrc::kNotFound, msg);
  if (r.status == 416) throw StoreError(StoreErrc::kRangeInvalid, msg);
  if (code.find("TooMany") != std::string::npos) throw StoreError(StoreErrc::kPartLimitExceeded, msg);
  if (code == "EntityTooLarge") throw StoreError(StoreErrc::kPartTooLarge, msg);
  if (r.status >= 500 || r.status == 429 || code == "SlowDown") throw StoreError(StoreErrc::kUnavailable, msg);
  throw StoreError(StoreErrc::kUnavailable, msg);
}

std::uint64_t S3ObjectStore::append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) {
  counters_.record(OpKind::kAppend, payload.size());
  std::map<std::string, std::string> headers;
  if (expected_offset == 0) {
    headers["if-none-match"] = "*";
  } else {
    headers["x-amz-write-offset-bytes"] = std::to_string(expected_offset);
  }
  const Response r = send("PUT", key.bucket, key.key, {}, headers, payload);
  if (r.status / 100 == 2) return expected_offset + payload.size();
  const auto codes = xml_values(r.body, "Code");
  const std::string code = codes.empty() ? "" : codes.front();
  const bool offset_error = r.status == 412 || r.status == 409 || code == "InvalidWriteOffset" ||
                            (r.status == 404 && expected_offset > 0);
  if (offset_error) {
    const auto info = head(key);
    throw StoreError(StoreErrc::kOffsetMismatch, "append to " + key.key + " at stale offset",
                     info ? info->length : 0);
  }
  raise(r, "append " + key.key);
}

Bytes S3ObjectStore::get(const ObjectKey& key, std::optional<ByteRange> range) {
  std::map<std::string, std::string> headers;
  if (range) {
    if (range->end <= range->begin) {
      counters_.record(OpKind::kGet);
      return {};
    }
    headers["range"] = "bytes=" + std::to_string(range->begin) + "-" + std::to_string(range->end - 1);
  }
  const Response r = send("GET", key.bucket, key.key, {}, headers, {});
  counters_.record(OpKind::kGet, 0, r.body.size());
  if (r.status / 100 != 2) raise(r, "get " + key.key);
  const auto* p = reinterpret_cast<const std::byte*>(r.body.data());
  return Bytes(p, p + r.body.size());
}

void S3ObjectStore::put(const ObjectKey& key, ByteView data) {
  counters_.record(OpKind::kPut, data.size());
  const Response r = send("PUT", key.bucket, key.key, {}, {}, data);
  if (r.status / 100 != 2) raise(r, "put " + key.key);
}

void S3ObjectStore::remove(const ObjectKey& key) {
  counters_.record(OpKind::kDelete);
  const Response r = send("DELETE", key.bucket, key.key, {}, {}, {});
  if (r.status / 100 != 2 && r.status != 404) raise(r, "delete " + key.key);
}

std::optional<ObjectInfo> S3ObjectStore::head(const ObjectKey& key) {
  counters_.record(OpKind::kHead);
  const Response r = send("HEAD", key.bucket, key.key, {}, {}, {});
  if (r.status == 404) return std::nullopt;
  if (r.status / 100 != 2) raise(r, "head " + key.key);
  ObjectInfo info;
  if (auto it = r.headers.find("content-length"); it != r.headers.end()) info.length = std::stoull(it->second);
  info.parts = 1;
  if (auto it = r.headers.find("x-amz-mp-parts-count"); it != r.headers.end())
    info.parts = static_cast<std::uint32_t>(std::stoul(it->second));
  return info;
}

std::vector<std::string> S3ObjectStore::list(const std::string& bucket, const std::string& prefix) {
  std::vector<std::string> out;
  std::string token;
  for (;;) {
    counters_.record(OpKind::kList);
    std::map<std::string, std::string> query{{"list-type", "2"}, {"prefix", prefix}};
    if (!token.empty()) query["continuation-token"] = token;
    const Response r = send("GET", bucket, "", query, {}, {});
    if (r.status / 100 != 2) raise(r, "list " + bucket);
    for (auto& k : xml_values(r.body, "Key")) out.push_back(std::move(k));
    const auto truncated = xml_values(r.body, "IsTruncated");
    const auto next = xml_values(r.body, "NextContinuationToken");
    if (truncated.empty() || truncated.front() != "true" || next.empty()) break;
    token = next.front();
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace objwal
