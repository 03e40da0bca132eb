#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace frameloom {

inline constexpr const char* kDefaultModel = "llava-v1.6-mistral-7b-hf";

enum class BackendKind { Live, Replay, Mock };
const char* backend_kind_name(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

enum class PromptKind { Annotation, Explanation };
const char* prompt_kind_name(PromptKind k);

struct Query {
  std::string model_id;
  std::string prompt;
  std::string image_digest;
  std::string image_bytes;  // PNG bytes, never persisted

  // Fills image_digest from image_bytes.
  static Query make(std::string model_id, std::string prompt, std::string image_bytes);
};

// Which (unit, code, prompt) a query belongs to. Only the mock backend
// reads it; it never enters the cache key.
struct QueryContext {
  std::string unit_id;
  std::string code_id;
  PromptKind kind = PromptKind::Annotation;
};

struct RawResponse {
  std::string text;
  int64_t latency_ms = 0;
  BackendKind backend = BackendKind::Live;
  std::string retrieved_at;
};

// sha256 over the length-prefixed (model_id, prompt, image_digest) triple.
std::string cache_key(const Query& q);

struct CacheEntry {
  std::string key;
  std::string model_id;
  std::string prompt;
  std::string image_digest;
  std::string text;
  int64_t latency_ms = 0;
  std::string retrieved_at;
  std::string recorded_at;
};

// <root>/<first two hex chars of key>/<key>.json
class ReplayCache {
 public:
  explicit ReplayCache(std::filesystem::path root);

  std::filesystem::path path_for(std::string_view key) const;
  std::optional<CacheEntry> lookup(std::string_view key) const;

  // Idempotent for identical text; throws Error(Integrity) when the key
  // already holds a different response.
  void store(const Query& q, const RawResponse& r);

  const std::filesystem::path& root() const { return root_; }

 private:
  std::mutex& stripe(std::string_view key) const;

  std::filesystem::path root_;
  mutable std::mutex stripes_[32];
};

struct GatewayConfig {
  std::string api_base;  // e.g. http://127.0.0.1:8000/v1
  std::string api_key;
  std::string model_id = kDefaultModel;
  std::chrono::milliseconds timeout{120'000};
  int max_inflight = 4;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::optional<double> temperature;
  std::optional<int> max_tokens;

  // Overrides api_base/api_key/model_id from FRAMELOOM_API_BASE,
  // FRAMELOOM_API_KEY and FRAMELOOM_MODEL when set.
  void apply_environment();
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendKind kind() const = 0;
  virtual RawResponse query(const Query& q, const QueryContext& ctx) = 0;
};

using BackendHandle = std::shared_ptr<Backend>;

// Live: OpenAI-compatible chat completions with the image as a base64 data
// URL. Answers already in the cache are served from it; new answers are
// recorded into it.
BackendHandle make_live_backend(const GatewayConfig& cfg, std::shared_ptr<ReplayCache> cache);

// Replay: cache only. Throws Error(CacheMiss) naming the key.
BackendHandle make_replay_backend(std::shared_ptr<ReplayCache> cache);

// Mock: scripted answers.
//   {"default": {"annotation": "...", "explanation": "..."},
//    "responses": {"<unit_id>": {"<code_id>": {"annotation": "...",
//                                              "explanation": "..."}}}}
// "*" matches any unit or code.
BackendHandle make_mock_backend(nlohmann::json script);

// Request body sent by the live backend (exposed for tests).
nlohmann::json build_chat_request(const GatewayConfig& cfg, const Query& q);

// Assistant text of a chat-completions response, verbatim.
std::string extract_chat_text(const nlohmann::json& response);

}  // namespace frameloom
