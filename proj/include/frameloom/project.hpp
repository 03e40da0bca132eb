#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "frameloom/annotation.hpp"
#include "frameloom/codebook.hpp"
#include "frameloom/evaluation.hpp"
#include "frameloom/gateway.hpp"
#include "frameloom/jsonl.hpp"
#include "frameloom/media.hpp"

namespace frameloom {

struct CoderConfig {
  std::string id;
  std::string token;
};

// frameloom.yaml
struct ProjectConfig {
  std::string codebook_path = "codebook.yaml";  // relative to the project
  std::string decoder_path = "ffmpeg";
  ExtractionConfig extraction;
  BackendKind backend = BackendKind::Replay;
  GatewayConfig gateway;  // api_key only ever comes from the environment
  bool explanations = true;
  std::string mock_script;
  std::vector<CoderConfig> coders;
  bool blind_coding = true;

  static ProjectConfig parse(std::string_view yaml);
  std::string serialize() const;
};

inline constexpr const char* kConfigFile = "frameloom.yaml";

// Resolutions of coder disagreements, keyed by (unit, code).
class ResolutionStore {
 public:
  explicit ResolutionStore(std::filesystem::path path);

  // Throws NotADisagreement when (unit, code) is already resolved.
  void append(const Resolution& r);
  std::map<UnitCode, Resolution> all();

 private:
  void apply(const nlohmann::json& line);

  JsonlFile file_;
  std::mutex mu_;
  std::map<UnitCode, Resolution> items_;
};

class Project {
 public:
  // Throws ProjectNotInitialized when frameloom.yaml is absent.
  static std::unique_ptr<Project> open(const std::filesystem::path& dir);

  struct InitResult {
    bool created = false;
    ProjectConfig config;
  };
  // coders entries are "id" or "id:token". No-op if already initialized.
  static InitResult init(const std::filesystem::path& dir, const std::filesystem::path& codebook,
                         const std::vector<std::string>& coders);

  const std::filesystem::path& dir() const { return dir_; }
  const ProjectConfig& config() const { return config_; }
  const Codebook& codebook() const { return codebook_; }
  AnnotationStore& store() { return *store_; }
  ResolutionStore& resolutions() { return *resolutions_; }
  FrameManifest manifest() const { return FrameManifest::load(dir_); }
  std::shared_ptr<ReplayCache> cache() const { return cache_; }

  const CoderConfig* coder_by_token(std::string_view token) const;
  const CoderConfig* coder(std::string_view id) const;

  // The two coders whose reconciliation yields ground truth.
  std::pair<std::string, std::string> ground_truth_pair() const;

  // Raters with at least one record: configured coders first, in config
  // order, then the rest sorted.
  std::vector<RaterSet> rater_sets();
  RaterSet rater_set(const std::string& rater_id);

 private:
  std::filesystem::path dir_;
  ProjectConfig config_;
  Codebook codebook_;
  std::unique_ptr<AnnotationStore> store_;
  std::unique_ptr<ResolutionStore> resolutions_;
  std::shared_ptr<ReplayCache> cache_;
};

// ---- extract -------------------------------------------------------------

struct ExtractOptions {
  std::vector<std::filesystem::path> videos;  // empty: <project>/videos/*
  std::optional<ExtractionConfig> extraction;
  std::optional<std::string> decoder_path;
  int jobs = 2;
  bool force = false;  // re-extract videos already in the manifest
};

struct ExtractSummary {
  int videos = 0;
  int extracted = 0;
  int skipped = 0;
  int units = 0;
  std::vector<std::string> errors;  // "<video>: <message>"

  nlohmann::json to_json() const;
};

ExtractSummary run_extract(Project& project, const ExtractOptions& opts);

// ---- annotate ------------------------------------------------------------

struct AnnotateOptions {
  std::optional<BackendKind> backend;
  std::optional<int> max_inflight;
  std::optional<double> timeout_seconds;
  std::vector<std::string> codes;   // empty: all
  std::vector<std::string> units;   // empty: all
  std::vector<std::string> videos;  // empty: all
  std::optional<bool> explanations;
  std::optional<std::string> mock_script;
  std::optional<std::chrono::milliseconds> initial_backoff;
};

struct AnnotateSummary {
  int requested = 0;
  int parsed_exact = 0;
  int parsed_normalized = 0;
  int unparseable = 0;
  int conflicts = 0;
  int failed = 0;
  std::string rater_id;

  nlohmann::json to_json() const;
};

// Queries every in-scope (unit, code) without an LLM record. Per-query
// failures go to logs/errors.jsonl and are counted; configuration errors
// throw. `backend` replaces the configured one when given.
AnnotateSummary run_annotate(Project& project, const AnnotateOptions& opts,
                             BackendHandle backend = nullptr);

// ---- evaluate / export ---------------------------------------------------

struct EvaluateResult {
  AgreementReport report;
  bool ground_truth = false;
  std::filesystem::path csv_path;
  std::filesystem::path markdown_path;

  nlohmann::json to_json() const;
};

// Builds the report over every rater (and ground truth when requested) and
// writes report.csv and report.md into the project directory.
EvaluateResult run_evaluate(Project& project, bool against_ground_truth);

// Ground truth from the configured coder pair and stored resolutions.
GroundTruth project_ground_truth(Project& project);

std::string run_export_csv(Project& project);

}  // namespace frameloom
