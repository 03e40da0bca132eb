// frameloom command line. Talks to the library only through frameloom.h.

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "frameloom/frameloom.h"

using nlohmann::json;

namespace {

struct Globals {
  std::string project = ".";
  bool json_out = false;
  bool quiet = false;
  bool verbose = false;
};

// Owns a string handed out by the library.
struct LibString {
  char* p = nullptr;
  ~LibString() { fl_free(p); }
  std::string str() const { return p ? p : ""; }
};

int fail(fl_status st) {
  std::fprintf(stderr, "frameloom: error: %s: %s\n", fl_status_name(st), fl_last_error());
  return fl_status_exit_code(st);
}

struct ProjectHandle {
  fl_project* p = nullptr;
  ~ProjectHandle() { fl_project_close(p); }
};

void print_summary(const json& j, const std::vector<std::string>& keys) {
  for (const auto& k : keys) {
    if (j.contains(k)) std::cout << k << ": " << j[k].dump() << "\n";
  }
}

int cmd_init(const Globals& g, const std::string& codebook, const std::vector<std::string>& coders) {
  std::vector<const char*> argv;
  for (const auto& c : coders) argv.push_back(c.c_str());
  int created = 0;
  fl_status st = fl_project_init(g.project.c_str(), codebook.c_str(), argv.data(), argv.size(),
                                 &created);
  if (st != FL_OK) return fail(st);
  if (g.json_out) {
    std::cout << json{{"project", g.project}, {"created", created != 0}}.dump() << "\n";
  } else if (created) {
    std::cout << "initialized " << g.project << "\n";
  } else {
    std::cout << g.project << " is already a frameloom project\n";
  }
  return 0;
}

int cmd_prompts(const Globals& g, const std::string& codebook, const std::string& code) {
  std::string path = codebook.empty() ? g.project + "/codebook.yaml" : codebook;
  fl_codebook* cb = nullptr;
  fl_status st = fl_codebook_load(path.c_str(), &cb);
  if (st != FL_OK) return fail(st);
  LibString out;
  st = fl_codebook_prompts_json(cb, code.empty() ? nullptr : code.c_str(), &out.p);
  fl_codebook_free(cb);
  if (st != FL_OK) return fail(st);
  json arr = json::parse(out.str());
  if (g.json_out) {
    std::cout << arr.dump(2) << "\n";
    return 0;
  }
  for (const auto& p : arr) {
    std::cout << "[" << p["code_id"].get<std::string>() << "] " << p["name"].get<std::string>()
              << "\n  annotation:  " << p["annotation"].get<std::string>()
              << "\n  explanation: " << p["explanation"].get<std::string>() << "\n";
  }
  return 0;
}

// Runs one project operation that takes JSON options and returns JSON.
template <typename Op>
int run_json_op(const Globals& g, const json& options, Op op, const std::vector<std::string>& keys) {
  ProjectHandle h;
  fl_status st = fl_project_open(g.project.c_str(), &h.p);
  if (st != FL_OK) return fail(st);
  LibString out;
  st = op(h.p, options.dump().c_str(), &out.p);
  if (st != FL_OK) return fail(st);
  json result = json::parse(out.str());
  if (g.json_out) {
    std::cout << result.dump() << "\n";
  } else {
    print_summary(result, keys);
  }
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& against) {
  if (!against.empty() && against != "ground-truth") {
    std::fprintf(stderr, "frameloom: error: --against accepts only 'ground-truth'\n");
    return 1;
  }
  ProjectHandle h;
  fl_status st = fl_project_open(g.project.c_str(), &h.p);
  if (st != FL_OK) return fail(st);
  LibString out;
  st = fl_project_evaluate(h.p, against.empty() ? 0 : 1, &out.p);
  if (st != FL_OK) return fail(st);
  json r = json::parse(out.str());
  if (g.json_out) {
    std::cout << r.dump() << "\n";
    return 0;
  }
  for (const auto& row : r["rows"]) {
    std::cout << row["code_id"].get<std::string>() << "\t" << row["pair"].get<std::string>()
              << "\t" << row["n_agree"] << "/" << row["n_units"] << "\t"
              << row["percent"].get<std::string>() << "%"
              << (row["acceptable"].get<bool>() ? "" : "  below 75.00%") << "\n";
  }
  std::cout << "wrote " << r["csv"].get<std::string>() << " and "
            << r["markdown"].get<std::string>() << "\n";
  return 0;
}

int cmd_export(const Globals& g, const std::string& format, const std::string& output) {
  if (format != "csv") {
    std::fprintf(stderr, "frameloom: error: unsupported export format '%s'\n", format.c_str());
    return 1;
  }
  ProjectHandle h;
  fl_status st = fl_project_open(g.project.c_str(), &h.p);
  if (st != FL_OK) return fail(st);
  LibString out;
  st = fl_project_export_csv(h.p, &out.p);
  if (st != FL_OK) return fail(st);
  if (output.empty() || output == "-") {
    std::cout << out.str();
    return 0;
  }
  std::ofstream f(output, std::ios::binary);
  f << out.str();
  if (!f) {
    std::fprintf(stderr, "frameloom: error: Io: cannot write %s\n", output.c_str());
    return 2;
  }
  return 0;
}

int cmd_serve(const Globals& g, const std::string& host, int port, bool coder_links) {
  ProjectHandle h;
  fl_status st = fl_project_open(g.project.c_str(), &h.p);
  if (st != FL_OK) return fail(st);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  fl_server* server = nullptr;
  st = fl_server_start(h.p, host.c_str(), port, &server);
  if (st != FL_OK) return fail(st);
  std::string base = "http://" + host + ":" + std::to_string(fl_server_port(server));
  if (g.json_out) {
    std::cout << json{{"url", base}}.dump() << std::endl;
  } else {
    std::cout << "listening on " << base << std::endl;
    if (coder_links) {
      std::cout << "Each coder authenticates with the token from frameloom.yaml:\n"
                << "  curl -H 'Authorization: Bearer <token>' " << base << "/api/units\n"
                << "Submit decisions with POST " << base
                << "/api/annotations {\"unit\", \"code\", \"value\"}.\n"
                << "Press Ctrl-C to stop." << std::endl;
    }
  }
  int sig = 0;
  sigwait(&set, &sig);
  fl_server_stop(server);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frameloom: codebook-driven video frame annotation and reliability"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-C,--project", g.project, "Project directory")->capture_default_str();
  app.add_flag("--json", g.json_out, "Machine-readable output on stdout");
  app.add_flag("-q,--quiet", g.quiet, "Only report errors");
  app.add_flag("-v,--verbose", g.verbose, "Progress on stderr");

  auto* init = app.add_subcommand("init", "Create a project");
  std::string init_codebook;
  std::vector<std::string> coders;
  init->add_option("--codebook", init_codebook, "Codebook YAML")->required();
  init->add_option("--coder", coders, "Human coder as id or id:token (repeatable)");

  auto* extract = app.add_subcommand("extract", "Extract keyframes from videos");
  std::vector<std::string> videos;
  std::string mode, decoder;
  double interval = 0;
  int max_frames = 0, jobs = 2;
  bool force = false;
  extract->add_option("videos", videos, "Video files (default: <project>/videos/*)");
  extract->add_option("--mode", mode, "iframes or interval");
  extract->add_option("--interval", interval, "Seconds between frames in interval mode");
  extract->add_option("--max-frames", max_frames, "Frame cap per video");
  extract->add_option("--decoder", decoder, "ffmpeg executable");
  extract->add_option("--jobs", jobs, "Videos decoded in parallel")->capture_default_str();
  extract->add_flag("--force", force, "Re-extract videos already in the manifest");

  auto* prompts = app.add_subcommand("prompts", "Print compiled prompts");
  std::string prompts_codebook, prompts_code;
  prompts->add_option("codebook", prompts_codebook, "Codebook YAML (default: project codebook)");
  prompts->add_option("--code", prompts_code, "Only this code");

  auto* annotate = app.add_subcommand("annotate", "Query the LLM rater");
  std::string backend, mock_script;
  int max_inflight = 0;
  double timeout = 0;
  std::vector<std::string> codes, units, ann_videos;
  bool no_explanations = false;
  annotate->add_option("--backend", backend, "live, replay or mock");
  annotate->add_option("--max-inflight", max_inflight, "Concurrent requests");
  annotate->add_option("--timeout", timeout, "Per-request timeout in seconds");
  annotate->add_option("--code", codes, "Restrict to codes (repeatable)");
  annotate->add_option("--unit", units, "Restrict to units (repeatable)");
  annotate->add_option("--video", ann_videos, "Restrict to videos (repeatable)");
  annotate->add_flag("--no-explanations", no_explanations, "Skip explanation queries");
  annotate->add_option("--mock-script", mock_script, "Response script for the mock backend");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the coding API");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  auto* code = app.add_subcommand("code", "Start a human coding session");
  code->add_option("--host", host)->capture_default_str();
  code->add_option("--port", port)->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Compute percentage agreement");
  std::string against;
  evaluate->add_option("--against", against, "ground-truth");

  auto* exp = app.add_subcommand("export", "Export annotations");
  std::string format = "csv", output;
  exp->add_option("--format", format)->capture_default_str();
  exp->add_option("-o,--output", output, "Output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  fl_set_log_level(g.quiet ? FL_LOG_QUIET : (g.verbose ? FL_LOG_INFO : FL_LOG_WARN));

  if (init->parsed()) return cmd_init(g, init_codebook, coders);
  if (prompts->parsed()) return cmd_prompts(g, prompts_codebook, prompts_code);
  if (extract->parsed()) {
    json o = json::object();
    if (!videos.empty()) o["videos"] = videos;
    if (!mode.empty()) o["mode"] = mode;
    if (interval > 0) o["interval_seconds"] = interval;
    if (max_frames > 0) o["max_frames"] = max_frames;
    if (!decoder.empty()) o["decoder"] = decoder;
    o["jobs"] = jobs;
    o["force"] = force;
    return run_json_op(g, o, fl_project_extract,
                       {"videos", "extracted", "skipped", "units", "errors"});
  }
  if (annotate->parsed()) {
    json o = json::object();
    if (!backend.empty()) o["backend"] = backend;
    if (max_inflight > 0) o["max_inflight"] = max_inflight;
    if (timeout > 0) o["timeout_seconds"] = timeout;
    if (!codes.empty()) o["codes"] = codes;
    if (!units.empty()) o["units"] = units;
    if (!ann_videos.empty()) o["videos"] = ann_videos;
    if (no_explanations) o["explanations"] = false;
    if (!mock_script.empty()) o["mock_script"] = mock_script;
    return run_json_op(g, o, fl_project_annotate,
                       {"rater_id", "requested", "parsed_exact", "parsed_normalized",
                        "unparseable", "conflicts", "failed"});
  }
  if (serve->parsed()) return cmd_serve(g, host, port, false);
  if (code->parsed()) return cmd_serve(g, host, port, true);
  if (evaluate->parsed()) return cmd_evaluate(g, against);
  if (exp->parsed()) return cmd_export(g, format, output);
  return 1;
}
