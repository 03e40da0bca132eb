#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "frameloom/evaluation.hpp"
#include "frameloom/project.hpp"

namespace httplib {
class Server;
}

namespace fltest {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

fs::path fixtures_dir();
fs::path codebook_path();
std::string ffmpeg_path();

// OpenAI-compatible chat-completions endpoint on 127.0.0.1.
class StubLlm {
 public:
  using Answer = std::function<std::string(const std::string& prompt)>;

  explicit StubLlm(Answer answer = nullptr);
  ~StubLlm();

  std::string base_url() const;  // http://127.0.0.1:<port>/v1

  // Statuses returned (with an error body) by the next requests, in order.
  void fail_next(std::initializer_list<int> statuses);
  void set_delay(std::chrono::milliseconds d) { delay_ms_ = d.count(); }

  int requests() const { return requests_; }
  int max_concurrent() const { return max_concurrent_; }
  std::string last_authorization() const;
  nlohmann::json last_body() const;

 private:
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = 0;
  Answer answer_;
  std::atomic<int> requests_{0};
  std::atomic<int> inflight_{0};
  std::atomic<int> max_concurrent_{0};
  std::atomic<long> delay_ms_{0};
  mutable std::mutex mu_;
  std::deque<int> failures_;
  std::string last_auth_;
  nlohmann::json last_body_;
};

// One full replay run over the two short fixture videos: init, extract,
// replay annotate, human coding through the HTTP API, reconciliation,
// evaluation against ground truth.
struct E2EOutput {
  std::string annotations_view;  // annotations.jsonl minus created_at
  std::string report_csv;
  frameloom::AnnotateSummary summary;
  frameloom::AgreementReport report;
  size_t n_units = 0;
  size_t n_codes = 0;
};

E2EOutput run_e2e(const fs::path& dir);

// annotations.jsonl with the created_at member dropped from every line.
std::string comparison_view(const fs::path& annotations);

// Minimal JSON client for the coding server.
struct ApiResponse {
  int status = 0;
  nlohmann::json body;
};
ApiResponse api_get(int port, const std::string& path, const std::string& token);
ApiResponse api_post(int port, const std::string& path, const std::string& token,
                     const nlohmann::json& body);

}  // namespace fltest
