#include "frameloom/frameloom.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "frameloom/codebook.hpp"
#include "frameloom/error.hpp"
#include "frameloom/log.hpp"
#include "frameloom/project.hpp"
#include "frameloom/promptgen.hpp"
#include "frameloom/server.hpp"

using nlohmann::json;

struct fl_codebook {
  frameloom::Codebook cb;
};

struct fl_project {
  std::unique_ptr<frameloom::Project> p;
};

struct fl_server {
  std::unique_ptr<frameloom::Server> s;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
fl_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return FL_OK;
  } catch (const frameloom::Error& e) {
    g_last_error = e.what();
    return static_cast<fl_status>(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return FL_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FL_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return FL_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw frameloom::Error(frameloom::ErrorCode::InvalidArgument, what);
}

json parse_options(const char* text) {
  if (!text || !*text) return json::object();
  json j = json::parse(text);
  require(j.is_object(), "options must be a JSON object");
  return j;
}

std::vector<std::string> string_list(const json& j, const char* key) {
  std::vector<std::string> out;
  if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
  return out;
}

}  // namespace

extern "C" {

const char* fl_version(void) { return "0.1.0"; }

const char* fl_status_name(fl_status status) {
  if (status == FL_OK) return "Ok";
  return frameloom::error_code_name(static_cast<frameloom::ErrorCode>(status));
}

int fl_status_exit_code(fl_status status) {
  if (status == FL_OK) return 0;
  return frameloom::is_environment_error(static_cast<frameloom::ErrorCode>(status)) ? 2 : 1;
}

const char* fl_last_error(void) { return g_last_error.c_str(); }

void fl_free(char* p) { std::free(p); }

void fl_set_log_level(fl_log_level level) {
  switch (level) {
    case FL_LOG_QUIET: frameloom::set_log_level(frameloom::LogLevel::Quiet); break;
    case FL_LOG_WARN: frameloom::set_log_level(frameloom::LogLevel::Warn); break;
    default: frameloom::set_log_level(frameloom::LogLevel::Info); break;
  }
}

fl_status fl_codebook_load(const char* path, fl_codebook** out) {
  return guarded([&] {
    require(path && out, "path and out are required");
    *out = new fl_codebook{frameloom::load_codebook(path)};
  });
}

fl_status fl_codebook_parse(const char* text, size_t len, fl_codebook** out) {
  return guarded([&] {
    require((text || len == 0) && out, "text and out are required");
    *out = new fl_codebook{frameloom::parse_codebook(std::string_view(text ? text : "", len))};
  });
}

void fl_codebook_free(fl_codebook* cb) { delete cb; }

size_t fl_codebook_size(const fl_codebook* cb) { return cb ? cb->cb.codes.size() : 0; }

fl_status fl_codebook_prompts_json(const fl_codebook* cb, const char* code_id, char** out_json) {
  return guarded([&] {
    require(cb && out_json, "codebook and out are required");
    json arr = json::array();
    for (const auto& c : cb->cb.codes) {
      if (code_id && c.id != code_id) continue;
      auto pair = frameloom::compile_prompt_pair(c);
      arr.push_back({{"code_id", c.id},
                     {"type", frameloom::code_type_name(c.type)},
                     {"name", c.name},
                     {"annotation", pair.annotation_prompt},
                     {"explanation", pair.explanation_prompt}});
    }
    if (code_id && arr.empty()) cb->cb.at(code_id);
    *out_json = dup_string(arr.dump());
  });
}

fl_status fl_project_init(const char* dir, const char* codebook_path, const char* const* coders,
                          size_t n_coders, int* created) {
  return guarded([&] {
    require(dir && codebook_path, "dir and codebook are required");
    std::vector<std::string> list;
    for (size_t i = 0; i < n_coders; ++i) list.emplace_back(coders[i]);
    auto r = frameloom::Project::init(dir, codebook_path, list);
    if (created) *created = r.created ? 1 : 0;
  });
}

fl_status fl_project_open(const char* dir, fl_project** out) {
  return guarded([&] {
    require(dir && out, "dir and out are required");
    *out = new fl_project{frameloom::Project::open(dir)};
  });
}

void fl_project_close(fl_project* project) { delete project; }

fl_status fl_project_extract(fl_project* project, const char* options_json, char** out_json) {
  return guarded([&] {
    require(project && out_json, "project and out are required");
    json o = parse_options(options_json);
    frameloom::ExtractOptions opts;
    for (const auto& v : string_list(o, "videos")) opts.videos.emplace_back(v);
    if (o.contains("mode") || o.contains("interval_seconds") || o.contains("max_frames")) {
      frameloom::ExtractionConfig cfg = project->p->config().extraction;
      if (o.contains("mode")) {
        cfg.mode = frameloom::parse_extraction_mode(o["mode"].get<std::string>());
      }
      cfg.interval_seconds = o.value("interval_seconds", cfg.interval_seconds);
      cfg.max_frames = o.value("max_frames", cfg.max_frames);
      opts.extraction = cfg;
    }
    if (o.contains("decoder")) opts.decoder_path = o["decoder"].get<std::string>();
    opts.jobs = o.value("jobs", opts.jobs);
    opts.force = o.value("force", false);
    *out_json = dup_string(frameloom::run_extract(*project->p, opts).to_json().dump());
  });
}

fl_status fl_project_annotate(fl_project* project, const char* options_json, char** out_json) {
  return guarded([&] {
    require(project && out_json, "project and out are required");
    json o = parse_options(options_json);
    frameloom::AnnotateOptions opts;
    if (o.contains("backend")) {
      opts.backend = frameloom::parse_backend_kind(o["backend"].get<std::string>());
    }
    if (o.contains("max_inflight")) opts.max_inflight = o["max_inflight"].get<int>();
    if (o.contains("timeout_seconds")) opts.timeout_seconds = o["timeout_seconds"].get<double>();
    opts.codes = string_list(o, "codes");
    opts.units = string_list(o, "units");
    opts.videos = string_list(o, "videos");
    if (o.contains("explanations")) opts.explanations = o["explanations"].get<bool>();
    if (o.contains("mock_script")) opts.mock_script = o["mock_script"].get<std::string>();
    *out_json = dup_string(frameloom::run_annotate(*project->p, opts).to_json().dump());
  });
}

fl_status fl_project_evaluate(fl_project* project, int against_ground_truth, char** out_json) {
  return guarded([&] {
    require(project && out_json, "project and out are required");
    auto r = frameloom::run_evaluate(*project->p, against_ground_truth != 0);
    *out_json = dup_string(r.to_json().dump());
  });
}

fl_status fl_project_export_csv(fl_project* project, char** out_csv) {
  return guarded([&] {
    require(project && out_csv, "project and out are required");
    *out_csv = dup_string(frameloom::run_export_csv(*project->p));
  });
}

fl_status fl_server_start(fl_project* project, const char* host, int port, fl_server** out) {
  return guarded([&] {
    require(project && out, "project and out are required");
    auto s = std::make_unique<frameloom::Server>(*project->p);
    s->start(host ? host : "127.0.0.1", port);
    *out = new fl_server{std::move(s)};
  });
}

int fl_server_port(const fl_server* server) { return server ? server->s->port() : 0; }

void fl_server_stop(fl_server* server) {
  if (!server) return;
  server->s->stop();
  delete server;
}

}  // extern "C"
