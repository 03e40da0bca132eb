#include "support.hpp"

#include <httplib.h>

#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "frameloom/server.hpp"
#include "frameloom/util.hpp"

using nlohmann::json;

namespace fltest {

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "frameloom-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path fixtures_dir() { return FRAMELOOM_TEST_FIXTURES; }

fs::path codebook_path() { return FRAMELOOM_TEST_CODEBOOK; }

std::string ffmpeg_path() {
  if (const char* v = std::getenv("FRAMELOOM_FFMPEG"); v && *v) return v;
  return FRAMELOOM_TEST_FFMPEG;
}

StubLlm::StubLlm(Answer answer) : http_(std::make_unique<httplib::Server>()), answer_(std::move(answer)) {
  if (!answer_) answer_ = [](const std::string&) { return std::string("Yes"); };
  http_->Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    int now = ++inflight_;
    int prev = max_concurrent_.load();
    while (now > prev && !max_concurrent_.compare_exchange_weak(prev, now)) {
    }
    if (long d = delay_ms_.load(); d > 0) std::this_thread::sleep_for(std::chrono::milliseconds(d));
    json body = json::parse(req.body);
    int fail_status = 0;
    {
      std::lock_guard lock(mu_);
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = body;
      if (!failures_.empty()) {
        fail_status = failures_.front();
        failures_.pop_front();
      }
    }
    if (fail_status) {
      res.status = fail_status;
      res.set_content(R"({"error":{"message":"stub failure"}})", "application/json");
    } else {
      std::string prompt = body["messages"][0]["content"][0]["text"];
      json reply{{"id", "stub"},
                 {"object", "chat.completion"},
                 {"choices", json::array({{{"index", 0},
                                           {"message", {{"role", "assistant"}, {"content", answer_(prompt)}}},
                                           {"finish_reason", "stop"}}})}};
      res.set_content(reply.dump(), "application/json");
    }
    --inflight_;
  });
  port_ = http_->bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

StubLlm::~StubLlm() {
  http_->stop();
  thread_.join();
}

std::string StubLlm::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

void StubLlm::fail_next(std::initializer_list<int> statuses) {
  std::lock_guard lock(mu_);
  failures_.insert(failures_.end(), statuses.begin(), statuses.end());
}

std::string StubLlm::last_authorization() const {
  std::lock_guard lock(mu_);
  return last_auth_;
}

json StubLlm::last_body() const {
  std::lock_guard lock(mu_);
  return last_body_;
}

std::string comparison_view(const fs::path& annotations) {
  std::istringstream in(frameloom::read_file(annotations));
  std::string line, out;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    j.erase("created_at");
    out += j.dump() + "\n";
  }
  return out;
}

namespace {

ApiResponse to_api(const httplib::Result& r) {
  if (!r) throw std::runtime_error("request failed: " + httplib::to_string(r.error()));
  ApiResponse out;
  out.status = r->status;
  out.body = r->body.empty() ? json() : json::parse(r->body, nullptr, false);
  return out;
}

}  // namespace

ApiResponse api_get(int port, const std::string& path, const std::string& token) {
  httplib::Client c("127.0.0.1", port);
  httplib::Headers h;
  if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
  return to_api(c.Get(path, h));
}

ApiResponse api_post(int port, const std::string& path, const std::string& token, const json& body) {
  httplib::Client c("127.0.0.1", port);
  httplib::Headers h;
  if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
  return to_api(c.Post(path, h, body.dump(), "application/json"));
}

E2EOutput run_e2e(const fs::path& dir) {
  using namespace frameloom;
  Project::init(dir, codebook_path(), {"alice:token-alice", "bob:token-bob"});
  auto project = Project::open(dir);

  ExtractOptions ex;
  ex.videos = {fixtures_dir() / "videos/clip_a.mp4", fixtures_dir() / "videos/clip_b.mp4"};
  ex.decoder_path = ffmpeg_path();
  auto extracted = run_extract(*project, ex);
  if (!extracted.errors.empty()) throw std::runtime_error("extract: " + extracted.errors.front());

  fs::copy(fixtures_dir() / "e2e/cache", dir / "cache",
           fs::copy_options::recursive | fs::copy_options::overwrite_existing);

  AnnotateOptions an;
  an.backend = BackendKind::Replay;
  E2EOutput out;
  out.summary = run_annotate(*project, an);

  json fixture = json::parse(read_file(fixtures_dir() / "e2e/human_codes.json"));
  Server server(*project);
  server.start("127.0.0.1", 0);
  auto token = [](const std::string& coder) { return "token-" + coder; };
  for (const auto& d : fixture["decisions"]) {
    auto r = api_post(server.port(), "/api/annotations", token(d["coder"]),
                      {{"unit", d["unit"]}, {"code", d["code"]}, {"value", d["value"]}});
    if (r.status != 201) throw std::runtime_error("coding failed: " + r.body.dump());
  }
  for (const auto& res : fixture["resolutions"]) {
    auto r = api_post(server.port(), "/api/reconciliations", token("alice"), res);
    if (r.status != 201) throw std::runtime_error("reconciliation failed: " + r.body.dump());
  }
  server.stop();

  auto evaluated = run_evaluate(*project, true);
  out.report = evaluated.report;
  out.annotations_view = comparison_view(dir / "annotations.jsonl");
  out.report_csv = read_file(evaluated.csv_path);
  out.n_units = project->manifest().units().size();
  out.n_codes = project->codebook().codes.size();
  return out;
}

}  // namespace fltest
