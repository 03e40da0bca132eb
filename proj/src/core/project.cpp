#include "frameloom/project.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <condition_variable>
#include <future>
#include <random>
#include <set>
#include <thread>

#include "frameloom/error.hpp"
#include "frameloom/log.hpp"
#include "frameloom/promptgen.hpp"
#include "frameloom/subprocess.hpp"
#include "frameloom/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace frameloom {

// ---- config ----------------------------------------------------------------

ProjectConfig ProjectConfig::parse(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw SyntaxError(e.mark.line + 1, e.mark.column + 1, e.msg);
  }
  ProjectConfig cfg;
  if (!root.IsMap()) return cfg;
  try {
    if (auto n = root["codebook"]) cfg.codebook_path = n.as<std::string>();
    if (auto d = root["decoder"]) {
      if (auto n = d["path"]) cfg.decoder_path = n.as<std::string>();
    }
    if (auto e = root["extraction"]) {
      if (auto n = e["mode"]) cfg.extraction.mode = parse_extraction_mode(n.as<std::string>());
      if (auto n = e["interval_seconds"]) cfg.extraction.interval_seconds = n.as<double>();
      if (auto n = e["max_frames"]) cfg.extraction.max_frames = n.as<int>();
    }
    if (auto b = root["backend"]) {
      if (auto n = b["kind"]) cfg.backend = parse_backend_kind(n.as<std::string>());
      if (auto n = b["api_base"]) cfg.gateway.api_base = n.as<std::string>();
      if (auto n = b["model"]) cfg.gateway.model_id = n.as<std::string>();
      if (auto n = b["timeout_seconds"]) {
        cfg.gateway.timeout = std::chrono::milliseconds(
            static_cast<int64_t>(n.as<double>() * 1000.0));
      }
      if (auto n = b["max_inflight"]) cfg.gateway.max_inflight = n.as<int>();
      if (auto n = b["max_attempts"]) cfg.gateway.max_attempts = n.as<int>();
      if (auto n = b["temperature"]) cfg.gateway.temperature = n.as<double>();
      if (auto n = b["max_tokens"]) cfg.gateway.max_tokens = n.as<int>();
      if (auto n = b["explanations"]) cfg.explanations = n.as<bool>();
      if (auto n = b["mock_script"]) cfg.mock_script = n.as<std::string>();
    }
    if (auto cs = root["coders"]) {
      std::set<std::string> seen;
      for (const auto& c : cs) {
        CoderConfig coder{c["id"].as<std::string>(), c["token"].as<std::string>("")};
        if (!seen.insert(coder.id).second) {
          throw Error(ErrorCode::InvalidArgument, "duplicate coder id '" + coder.id + "'");
        }
        cfg.coders.push_back(std::move(coder));
      }
    }
    if (auto s = root["server"]) {
      if (auto n = s["blind_coding"]) cfg.blind_coding = n.as<bool>();
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid project config: ") + e.what());
  }
  validate(cfg.extraction);
  return cfg;
}

std::string ProjectConfig::serialize() const {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << YAML::DoubleQuoted << "1";
  out << YAML::Key << "codebook" << YAML::Value << codebook_path;
  out << YAML::Key << "decoder" << YAML::Value << YAML::BeginMap << YAML::Key << "path"
      << YAML::Value << decoder_path << YAML::EndMap;
  out << YAML::Key << "extraction" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << extraction_mode_name(extraction.mode);
  out << YAML::Key << "interval_seconds" << YAML::Value << extraction.interval_seconds;
  out << YAML::Key << "max_frames" << YAML::Value << extraction.max_frames;
  out << YAML::EndMap;
  out << YAML::Key << "backend" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << backend_kind_name(backend);
  out << YAML::Key << "api_base" << YAML::Value << YAML::DoubleQuoted << gateway.api_base;
  out << YAML::Key << "model" << YAML::Value << gateway.model_id;
  out << YAML::Key << "timeout_seconds" << YAML::Value
      << static_cast<double>(gateway.timeout.count()) / 1000.0;
  out << YAML::Key << "max_inflight" << YAML::Value << gateway.max_inflight;
  out << YAML::Key << "explanations" << YAML::Value << explanations;
  if (!mock_script.empty()) out << YAML::Key << "mock_script" << YAML::Value << mock_script;
  out << YAML::EndMap;
  out << YAML::Key << "coders" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : coders) {
    out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << c.id << YAML::Key << "token"
        << YAML::Value << YAML::DoubleQuoted << c.token << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "server" << YAML::Value << YAML::BeginMap << YAML::Key << "blind_coding"
      << YAML::Value << blind_coding << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// ---- resolutions -----------------------------------------------------------

ResolutionStore::ResolutionStore(fs::path path) : file_(std::move(path)) {
  file_.read_new([this](const json& l, size_t) { apply(l); });
}

void ResolutionStore::apply(const json& line) {
  std::lock_guard lock(mu_);
  auto r = resolution_from_json(line);
  items_[{r.unit_id, r.code_id}] = std::move(r);
}

void ResolutionStore::append(const Resolution& r) {
  Resolution stored = r;
  if (stored.created_at.empty()) stored.created_at = utc_now_iso();
  file_.transact([this](const json& l, size_t) { apply(l); },
                 [&]() -> std::vector<json> {
                   std::lock_guard lock(mu_);
                   if (items_.count({stored.unit_id, stored.code_id})) {
                     throw Error(ErrorCode::NotADisagreement,
                                 "unit '" + stored.unit_id + "', code '" + stored.code_id +
                                     "' is already resolved");
                   }
                   return {to_json(stored)};
                 });
}

std::map<UnitCode, Resolution> ResolutionStore::all() {
  file_.read_new([this](const json& l, size_t) { apply(l); });
  std::lock_guard lock(mu_);
  return items_;
}

// ---- project ---------------------------------------------------------------

namespace {

std::string random_token() {
  std::random_device rd;
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < 32; ++i) out += hex[rd() % 16];
  return out;
}

}  // namespace

std::unique_ptr<Project> Project::open(const fs::path& dir) {
  auto cfg_path = dir / kConfigFile;
  if (!fs::exists(cfg_path)) {
    throw Error(ErrorCode::ProjectNotInitialized,
                "no " + std::string(kConfigFile) + " in " + dir.string() +
                    " (run `frameloom init` first)");
  }
  auto p = std::unique_ptr<Project>(new Project());
  p->dir_ = dir;
  p->config_ = ProjectConfig::parse(read_file(cfg_path));
  p->codebook_ = load_codebook((dir / p->config_.codebook_path).string());
  p->store_ = std::make_unique<AnnotationStore>(dir / "annotations.jsonl", p->codebook_);
  p->resolutions_ = std::make_unique<ResolutionStore>(dir / "resolutions.jsonl");
  p->cache_ = std::make_shared<ReplayCache>(dir / "cache");
  return p;
}

Project::InitResult Project::init(const fs::path& dir, const fs::path& codebook,
                                  const std::vector<std::string>& coders) {
  InitResult result;
  if (fs::exists(dir / kConfigFile)) {
    result.config = ProjectConfig::parse(read_file(dir / kConfigFile));
    return result;
  }
  auto text = read_file(codebook);
  parse_codebook(text);  // reject invalid codebooks before writing anything

  ProjectConfig cfg;
  std::set<std::string> seen;
  for (const auto& entry : coders) {
    auto colon = entry.find(':');
    CoderConfig c{entry.substr(0, colon), colon == std::string::npos ? random_token()
                                                                    : entry.substr(colon + 1)};
    if (c.id.empty() || c.token.empty()) {
      throw Error(ErrorCode::InvalidArgument, "bad coder entry '" + entry + "' (expected id[:token])");
    }
    if (!seen.insert(c.id).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate coder id '" + c.id + "'");
    }
    cfg.coders.push_back(std::move(c));
  }

  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "cache");
  fs::create_directories(dir / "videos");
  fs::create_directories(dir / "logs");
  write_file_atomic(dir / cfg.codebook_path, text);
  write_file_atomic(dir / kConfigFile, cfg.serialize());
  JsonlFile(dir / "annotations.jsonl");
  JsonlFile(dir / "resolutions.jsonl");
  result.created = true;
  result.config = std::move(cfg);
  return result;
}

const CoderConfig* Project::coder_by_token(std::string_view token) const {
  if (token.empty()) return nullptr;
  for (const auto& c : config_.coders) {
    if (c.token == token) return &c;
  }
  return nullptr;
}

const CoderConfig* Project::coder(std::string_view id) const {
  for (const auto& c : config_.coders) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::pair<std::string, std::string> Project::ground_truth_pair() const {
  if (config_.coders.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "ground truth needs two configured coders");
  }
  return {config_.coders[0].id, config_.coders[1].id};
}

RaterSet Project::rater_set(const std::string& rater_id) {
  return rater_set_from_records(rater_id, store_->records());
}

std::vector<RaterSet> Project::rater_sets() {
  auto records = store_->records();
  std::set<std::string> present;
  for (const auto& r : records) present.insert(r.rater_id);
  std::vector<std::string> order;
  for (const auto& c : config_.coders) {
    if (present.erase(c.id)) order.push_back(c.id);
  }
  order.insert(order.end(), present.begin(), present.end());
  std::vector<RaterSet> out;
  for (const auto& id : order) out.push_back(rater_set_from_records(id, records));
  return out;
}

// ---- extract ---------------------------------------------------------------

json ExtractSummary::to_json() const {
  return json{{"videos", videos},
              {"extracted", extracted},
              {"skipped", skipped},
              {"units", units},
              {"errors", errors}};
}

namespace {

bool frames_intact(const fs::path& dir, const std::vector<KeyframeUnit>& units) {
  if (units.empty()) return false;
  for (const auto& u : units) {
    auto p = dir / u.image_path;
    if (!fs::exists(p)) return false;
    if (frame_digest(read_file(p)) != u.digest) return false;
  }
  return true;
}

}  // namespace

ExtractSummary run_extract(Project& project, const ExtractOptions& opts) {
  const auto& cfg = project.config();
  ExtractionConfig extraction = opts.extraction.value_or(cfg.extraction);
  validate(extraction);
  std::string decoder = opts.decoder_path.value_or(cfg.decoder_path);
  if (!find_executable(decoder)) {
    throw Error(ErrorCode::DecoderNotFound, "media decoder '" + decoder + "' not found");
  }

  std::vector<fs::path> videos = opts.videos;
  if (videos.empty() && fs::is_directory(project.dir() / "videos")) {
    for (const auto& e : fs::directory_iterator(project.dir() / "videos")) {
      if (e.is_regular_file()) videos.push_back(e.path());
    }
    std::sort(videos.begin(), videos.end());
  }

  ExtractSummary summary;
  summary.videos = static_cast<int>(videos.size());
  auto manifest = project.manifest();

  struct Job {
    fs::path video;
    std::string video_id;
    std::vector<KeyframeUnit> units;
    std::string error;
  };
  std::vector<Job> jobs;
  std::set<std::string> ids;
  for (const auto& v : videos) {
    auto id = video_id_from_path(v);
    if (!ids.insert(id).second) {
      summary.errors.push_back(v.string() + ": duplicate video id '" + id + "'");
      continue;
    }
    if (!opts.force && frames_intact(project.dir(), manifest.units_for(id))) {
      ++summary.skipped;
      log_info("skipping " + v.string() + " (already extracted)");
      continue;
    }
    jobs.push_back(Job{v, id, {}, {}});
  }

  // Each job writes only under frames/<video_id>, so jobs never contend.
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < jobs.size(); i = next++) {
      auto& job = jobs[i];
      try {
        log_info("extracting " + job.video.string());
        job.units = extract_keyframes(job.video, extraction, decoder, project.dir(), job.video_id);
      } catch (const std::exception& e) {
        job.error = e.what();
      }
    }
  };
  int n_workers = std::clamp(opts.jobs, 1, std::max(1, static_cast<int>(jobs.size())));
  std::vector<std::thread> threads;
  for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  bool changed = false;
  for (auto& job : jobs) {
    if (!job.error.empty()) {
      summary.errors.push_back(job.video.string() + ": " + job.error);
      continue;
    }
    ++summary.extracted;
    manifest.replace_video(job.video_id, std::move(job.units));
    changed = true;
  }
  if (changed) manifest.save(project.dir());
  summary.units = static_cast<int>(manifest.units().size());
  return summary;
}

// ---- annotate --------------------------------------------------------------

json AnnotateSummary::to_json() const {
  return json{{"rater_id", rater_id},
              {"requested", requested},
              {"parsed_exact", parsed_exact},
              {"parsed_normalized", parsed_normalized},
              {"unparseable", unparseable},
              {"conflicts", conflicts},
              {"failed", failed}};
}

namespace {

struct Task {
  const KeyframeUnit* unit;
  const Code* code;
  const PromptPair* prompts;
};

struct TaskResult {
  bool done = false;
  std::optional<AnnotationRecord> record;
  std::string error;
  std::string error_kind;
};

template <typename T>
bool in_filter(const std::vector<T>& filter, const T& v) {
  return filter.empty() || std::find(filter.begin(), filter.end(), v) != filter.end();
}

}  // namespace

AnnotateSummary run_annotate(Project& project, const AnnotateOptions& opts,
                             BackendHandle backend) {
  const auto& cfg = project.config();
  const auto& cb = project.codebook();

  GatewayConfig gw = cfg.gateway;
  gw.apply_environment();
  if (opts.max_inflight) gw.max_inflight = *opts.max_inflight;
  if (opts.timeout_seconds) {
    gw.timeout = std::chrono::milliseconds(static_cast<int64_t>(*opts.timeout_seconds * 1000.0));
  }
  if (opts.initial_backoff) gw.initial_backoff = *opts.initial_backoff;
  if (gw.max_inflight < 1) throw Error(ErrorCode::InvalidArgument, "max_inflight must be >= 1");
  const bool explanations = opts.explanations.value_or(cfg.explanations);

  if (!backend) {
    switch (opts.backend.value_or(cfg.backend)) {
      case BackendKind::Live: backend = make_live_backend(gw, project.cache()); break;
      case BackendKind::Replay: backend = make_replay_backend(project.cache()); break;
      case BackendKind::Mock: {
        std::string script = opts.mock_script.value_or(cfg.mock_script);
        if (script.empty()) {
          throw Error(ErrorCode::InvalidArgument, "mock backend needs a script (--mock-script)");
        }
        fs::path p = script;
        if (p.is_relative() && !fs::exists(p)) p = project.dir() / p;
        json parsed;
        try {
          parsed = json::parse(read_file(p));
        } catch (const json::exception& e) {
          throw Error(ErrorCode::InvalidArgument, "invalid mock script: " + std::string(e.what()));
        }
        backend = make_mock_backend(std::move(parsed));
        break;
      }
    }
  }

  for (const auto& id : opts.codes) cb.at(id);
  auto manifest = project.manifest();
  for (const auto& id : opts.units) {
    if (!manifest.find(id)) throw Error(ErrorCode::NotFound, "unknown unit '" + id + "'");
  }

  AnnotateSummary summary;
  summary.rater_id = llm_rater_id(gw.model_id);
  auto& store = project.store();

  auto prompts = compile_prompts(cb);
  std::vector<Task> tasks;
  for (const auto& unit : manifest.units()) {
    if (!in_filter(opts.units, unit.unit_id) || !in_filter(opts.videos, unit.video_id)) continue;
    for (size_t i = 0; i < cb.codes.size(); ++i) {
      const auto& code = cb.codes[i];
      if (!in_filter(opts.codes, code.id)) continue;
      if (store.find(unit.unit_id, code.id, summary.rater_id)) continue;
      tasks.push_back(Task{&unit, &code, &prompts[i]});
    }
  }
  summary.requested = static_cast<int>(tasks.size());
  if (tasks.empty()) return summary;
  log_info("annotating " + std::to_string(tasks.size()) + " (unit, code) pairs with " +
           backend_kind_name(backend->kind()) + " backend");

  std::vector<TaskResult> results(tasks.size());
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<size_t> next{0};

  auto run_task = [&](const Task& t) -> TaskResult {
    TaskResult r;
    try {
      auto image = read_file(project.dir() / t.unit->image_path);
      auto query = Query::make(gw.model_id, t.prompts->annotation_prompt, std::move(image));
      if (query.image_digest != t.unit->digest) {
        throw Error(ErrorCode::Integrity, "frame " + t.unit->image_path + " does not match manifest digest");
      }
      QueryContext ctx{t.unit->unit_id, t.code->id, PromptKind::Annotation};
      auto answer = backend->query(query, ctx);

      AnnotationRecord rec;
      rec.unit_id = t.unit->unit_id;
      rec.code_id = t.code->id;
      rec.rater_id = summary.rater_id;
      rec.parsed = parse_value(answer.text, t.code->domain);
      if (explanations) {
        query.prompt = t.prompts->explanation_prompt;
        ctx.kind = PromptKind::Explanation;
        auto expl = backend->query(query, ctx);
        rec.explanation = expl.text;
        rec.conflict = detect_conflict(rec.parsed, expl.text, t.code->domain);
      }
      r.record = std::move(rec);
    } catch (const Error& e) {
      r.error = e.what();
      r.error_kind = error_code_name(e.code());
    } catch (const std::exception& e) {
      r.error = e.what();
      r.error_kind = "InternalError";
    }
    return r;
  };

  auto worker = [&] {
    for (size_t i = next++; i < tasks.size(); i = next++) {
      auto r = run_task(tasks[i]);
      {
        std::lock_guard lock(mu);
        results[i] = std::move(r);
        results[i].done = true;
      }
      cv.notify_all();
    }
  };
  int n_workers = std::min<int>(gw.max_inflight, static_cast<int>(tasks.size()));
  std::vector<std::thread> threads;
  for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);

  // Single writer: persist in task order so store contents do not depend on
  // worker scheduling.
  JsonlFile error_log(project.dir() / "logs" / "errors.jsonl");
  std::exception_ptr fatal;
  for (size_t i = 0; i < tasks.size(); ++i) {
    TaskResult r;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return results[i].done; });
      r = std::move(results[i]);
    }
    if (fatal) continue;
    try {
      if (r.record) {
        store.append(*r.record);
        switch (r.record->parsed.status) {
          case ParseStatus::Exact: ++summary.parsed_exact; break;
          case ParseStatus::Normalized: ++summary.parsed_normalized; break;
          case ParseStatus::Unparseable: ++summary.unparseable; break;
        }
        if (r.record->conflict) ++summary.conflicts;
      } else {
        ++summary.failed;
        log_warn(tasks[i].unit->unit_id + "/" + tasks[i].code->id + ": " + r.error);
        json entry{{"unit_id", tasks[i].unit->unit_id}, {"code_id", tasks[i].code->id},
                   {"rater_id", summary.rater_id},      {"error", r.error_kind},
                   {"message", r.error},                {"at", utc_now_iso()}};
        error_log.transact([](const json&, size_t) {}, [&] { return std::vector<json>{entry}; });
      }
    } catch (...) {
      fatal = std::current_exception();
      next = tasks.size();
    }
  }
  for (auto& t : threads) t.join();
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

// ---- evaluate / export -----------------------------------------------------

json EvaluateResult::to_json() const {
  json j = frameloom::to_json(report);
  j["ground_truth"] = ground_truth;
  j["csv"] = csv_path.string();
  j["markdown"] = markdown_path.string();
  return j;
}

GroundTruth project_ground_truth(Project& project) {
  auto [a, b] = project.ground_truth_pair();
  auto records = project.store().records();
  return build_ground_truth(rater_set_from_records(a, records), rater_set_from_records(b, records),
                            project.resolutions().all(), project.codebook());
}

namespace {

void write_if_changed(const fs::path& path, const std::string& content) {
  if (fs::exists(path) && read_file(path) == content) return;
  write_file_atomic(path, content);
}

}  // namespace

EvaluateResult run_evaluate(Project& project, bool against_ground_truth) {
  EvaluateResult result;
  auto raters = project.rater_sets();
  std::optional<GroundTruth> gt;
  if (against_ground_truth) gt = project_ground_truth(project);
  result.report = agreement_report(raters, gt ? &*gt : nullptr, project.codebook());
  result.ground_truth = gt.has_value();
  result.csv_path = project.dir() / "report.csv";
  result.markdown_path = project.dir() / "report.md";
  write_if_changed(result.csv_path, report_csv(result.report, project.codebook()));
  write_if_changed(result.markdown_path, report_markdown(result.report, project.codebook()));
  return result;
}

std::string run_export_csv(Project& project) { return export_csv(project.store().records()); }

}  // namespace frameloom
