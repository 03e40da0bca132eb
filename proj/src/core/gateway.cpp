#include "frameloom/gateway.hpp"

#include <httplib.h>

#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <thread>

#include "frameloom/error.hpp"
#include "frameloom/log.hpp"
#include "frameloom/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace frameloom {

const char* backend_kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::Live: return "live";
    case BackendKind::Replay: return "replay";
    case BackendKind::Mock: return "mock";
  }
  return "live";
}

BackendKind parse_backend_kind(std::string_view s) {
  auto v = ascii_lower(trim(s));
  if (v == "live") return BackendKind::Live;
  if (v == "replay") return BackendKind::Replay;
  if (v == "mock") return BackendKind::Mock;
  throw Error(ErrorCode::InvalidArgument,
              "unknown backend '" + std::string(s) + "' (expected live|replay|mock)");
}

const char* prompt_kind_name(PromptKind k) {
  return k == PromptKind::Annotation ? "annotation" : "explanation";
}

Query Query::make(std::string model_id, std::string prompt, std::string image_bytes) {
  Query q;
  q.model_id = std::move(model_id);
  q.prompt = std::move(prompt);
  q.image_digest = sha256_hex(image_bytes);
  q.image_bytes = std::move(image_bytes);
  return q;
}

std::string cache_key(const Query& q) {
  std::string framed = "frameloom-cache-v1\n";
  for (const std::string* field : {&q.model_id, &q.prompt, &q.image_digest}) {
    framed += std::to_string(field->size());
    framed += ':';
    framed += *field;
    framed += '\n';
  }
  return sha256_hex(framed);
}

// ---- replay cache ----------------------------------------------------------

ReplayCache::ReplayCache(fs::path root) : root_(std::move(root)) {}

fs::path ReplayCache::path_for(std::string_view key) const {
  std::string k(key);
  return root_ / k.substr(0, 2) / (k + ".json");
}

std::mutex& ReplayCache::stripe(std::string_view key) const {
  return stripes_[std::hash<std::string_view>{}(key) % std::size(stripes_)];
}

namespace {

CacheEntry entry_from_json(const json& j) {
  CacheEntry e;
  e.key = j.at("key").get<std::string>();
  const auto& q = j.at("query");
  e.model_id = q.at("model_id").get<std::string>();
  e.prompt = q.at("prompt").get<std::string>();
  e.image_digest = q.at("image_digest").get<std::string>();
  const auto& r = j.at("response");
  e.text = r.at("text").get<std::string>();
  e.latency_ms = r.value("latency_ms", int64_t{0});
  e.retrieved_at = r.value("retrieved_at", std::string{});
  e.recorded_at = j.value("recorded_at", std::string{});
  return e;
}

}  // namespace

std::optional<CacheEntry> ReplayCache::lookup(std::string_view key) const {
  auto path = path_for(key);
  std::lock_guard lock(stripe(key));
  if (!fs::exists(path)) return std::nullopt;
  try {
    return entry_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Integrity, "corrupt cache entry " + path.string() + ": " + e.what());
  }
}

void ReplayCache::store(const Query& q, const RawResponse& r) {
  const std::string key = cache_key(q);
  auto path = path_for(key);
  std::lock_guard lock(stripe(key));
  if (fs::exists(path)) {
    auto existing = entry_from_json(json::parse(read_file(path)));
    if (existing.text != r.text) {
      throw Error(ErrorCode::Integrity,
                  "cache key " + key + " already holds a different response");
    }
  }
  json j{{"key", key},
         {"query", {{"model_id", q.model_id}, {"prompt", q.prompt}, {"image_digest", q.image_digest}}},
         {"response",
          {{"text", r.text}, {"latency_ms", r.latency_ms}, {"retrieved_at", r.retrieved_at}}},
         {"recorded_at", utc_now_iso()}};
  fs::create_directories(path.parent_path());
  write_file_atomic(path, j.dump(2) + "\n");
}

void GatewayConfig::apply_environment() {
  if (const char* v = std::getenv("FRAMELOOM_API_BASE"); v && *v) api_base = v;
  if (const char* v = std::getenv("FRAMELOOM_API_KEY"); v && *v) api_key = v;
  if (const char* v = std::getenv("FRAMELOOM_MODEL"); v && *v) model_id = v;
}

json build_chat_request(const GatewayConfig& cfg, const Query& q) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", q.prompt}});
  content.push_back(
      {{"type", "image_url"},
       {"image_url", {{"url", "data:image/png;base64," + base64_encode(q.image_bytes)}}}});
  json body{{"model", q.model_id},
            {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
  if (cfg.temperature) body["temperature"] = *cfg.temperature;
  if (cfg.max_tokens) body["max_tokens"] = *cfg.max_tokens;
  return body;
}

std::string extract_chat_text(const json& response) {
  const auto& choices = response.at("choices");
  if (!choices.is_array() || choices.empty()) {
    throw Error(ErrorCode::Http, "response has no choices");
  }
  const auto& content = choices.at(0).at("message").at("content");
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") out += part.value("text", "");
    }
    return out;
  }
  throw Error(ErrorCode::Http, "response message has no text content");
}

// ---- backends --------------------------------------------------------------

namespace {

class InflightGate {
 public:
  explicit InflightGate(int limit) : limit_(limit < 1 ? 1 : limit) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return inflight_ < limit_; });
    ++inflight_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      --inflight_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int inflight_ = 0;
};

struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

Endpoint split_base(const std::string& base) {
  auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "API base must start with http:// or https://: " + base);
  }
  auto path_start = base.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = base.substr(0, path_start);
  e.path_prefix = path_start == std::string::npos ? "" : base.substr(path_start);
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

class LiveBackend final : public Backend {
 public:
  LiveBackend(GatewayConfig cfg, std::shared_ptr<ReplayCache> cache)
      : cfg_(std::move(cfg)), cache_(std::move(cache)), gate_(cfg_.max_inflight) {
    if (cfg_.api_base.empty()) {
      throw Error(ErrorCode::MissingCredentials, "FRAMELOOM_API_BASE is not set");
    }
    if (cfg_.api_key.empty()) {
      throw Error(ErrorCode::MissingCredentials, "FRAMELOOM_API_KEY is not set");
    }
    endpoint_ = split_base(cfg_.api_base);
  }

  BackendKind kind() const override { return BackendKind::Live; }

  RawResponse query(const Query& q, const QueryContext&) override {
    if (cache_) {
      if (auto hit = cache_->lookup(cache_key(q))) {
        return RawResponse{hit->text, hit->latency_ms, BackendKind::Replay, hit->retrieved_at};
      }
    }
    RawResponse r = send_with_retries(q);
    if (cache_) cache_->store(q, r);
    return r;
  }

 private:
  RawResponse send_with_retries(const Query& q) {
    const std::string body = build_chat_request(cfg_, q).dump();
    auto backoff = cfg_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      bool last = attempt >= cfg_.max_attempts;
      auto start = std::chrono::steady_clock::now();
      httplib::Result res = post(body);
      auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);

      if (!res) {
        bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                         (res.error() == httplib::Error::Read && elapsed >= cfg_.timeout * 9 / 10);
        log_warn("live request attempt " + std::to_string(attempt) +
                 " failed: " + httplib::to_string(res.error()));
        if (last) {
          if (timed_out) {
            throw Error(ErrorCode::Timeout, "request timed out after " +
                                                std::to_string(cfg_.timeout.count()) + " ms");
          }
          throw Error(ErrorCode::Http, "transport error: " + httplib::to_string(res.error()));
        }
      } else if (res->status == 200) {
        json parsed;
        try {
          parsed = json::parse(res->body);
        } catch (const json::exception&) {
          throw HttpError(200, "malformed JSON body: " + res->body.substr(0, 200));
        }
        return RawResponse{extract_chat_text(parsed), elapsed.count(), BackendKind::Live,
                           utc_now_iso()};
      } else {
        bool retryable = res->status == 429 || res->status >= 500;
        if (!retryable) throw HttpError(res->status, res->body.substr(0, 500));
        log_warn("live request attempt " + std::to_string(attempt) + " got HTTP " +
                 std::to_string(res->status));
        if (last) {
          if (res->status == 429) {
            throw Error(ErrorCode::RateLimited, "rate limited after " +
                                                    std::to_string(attempt) + " attempts");
          }
          throw HttpError(res->status, res->body.substr(0, 500));
        }
      }
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }

  httplib::Result post(const std::string& body) {
    httplib::Client client(endpoint_.scheme_host_port);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    client.set_bearer_token_auth(cfg_.api_key);
    gate_.acquire();
    auto res = client.Post(endpoint_.path_prefix + "/chat/completions", body, "application/json");
    gate_.release();
    return res;
  }

  GatewayConfig cfg_;
  std::shared_ptr<ReplayCache> cache_;
  InflightGate gate_;
  Endpoint endpoint_;
};

class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(std::shared_ptr<ReplayCache> cache) : cache_(std::move(cache)) {}

  BackendKind kind() const override { return BackendKind::Replay; }

  RawResponse query(const Query& q, const QueryContext&) override {
    auto key = cache_key(q);
    auto hit = cache_->lookup(key);
    if (!hit) throw Error(ErrorCode::CacheMiss, "replay cache has no entry for key " + key);
    return RawResponse{hit->text, hit->latency_ms, BackendKind::Replay, hit->retrieved_at};
  }

 private:
  std::shared_ptr<ReplayCache> cache_;
};

class MockBackend final : public Backend {
 public:
  explicit MockBackend(json script) : script_(std::move(script)) {}

  BackendKind kind() const override { return BackendKind::Mock; }

  RawResponse query(const Query&, const QueryContext& ctx) override {
    const char* field = prompt_kind_name(ctx.kind);
    for (const json* entry : candidates(ctx)) {
      if (entry && entry->contains(field)) {
        return RawResponse{entry->at(field).get<std::string>(), 0, BackendKind::Mock,
                           utc_now_iso()};
      }
    }
    throw Error(ErrorCode::NotFound, "mock script has no " + std::string(field) + " for unit '" +
                                         ctx.unit_id + "', code '" + ctx.code_id + "'");
  }

 private:
  std::vector<const json*> candidates(const QueryContext& ctx) const {
    std::vector<const json*> out;
    auto find = [](const json& obj, const std::string& k) -> const json* {
      if (!obj.is_object()) return nullptr;
      auto it = obj.find(k);
      return it == obj.end() ? nullptr : &*it;
    };
    if (auto responses = script_.find("responses"); responses != script_.end()) {
      for (const std::string& u : {ctx.unit_id, std::string("*")}) {
        if (const json* by_unit = find(*responses, u)) {
          for (const std::string& c : {ctx.code_id, std::string("*")}) {
            out.push_back(find(*by_unit, c));
          }
        }
      }
    }
    out.push_back(find(script_, "default"));
    return out;
  }

  json script_;
};

}  // namespace

BackendHandle make_live_backend(const GatewayConfig& cfg, std::shared_ptr<ReplayCache> cache) {
  return std::make_shared<LiveBackend>(cfg, std::move(cache));
}

BackendHandle make_replay_backend(std::shared_ptr<ReplayCache> cache) {
  return std::make_shared<ReplayBackend>(std::move(cache));
}

BackendHandle make_mock_backend(json script) {
  return std::make_shared<MockBackend>(std::move(script));
}

}  // namespace frameloom
