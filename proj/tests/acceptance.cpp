// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>

#include "corpus.hpp"
#include "frameloom/annotation.hpp"
#include "frameloom/codebook.hpp"
#include "frameloom/evaluation.hpp"
#include "frameloom/log.hpp"
#include "frameloom/promptgen.hpp"
#include "frameloom/util.hpp"
#include "support.hpp"

using namespace frameloom;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* name;
  double limit_seconds;  // 0: no time limit
  std::function<Outcome()> run;
};

// ---- prompts ---------------------------------------------------------------

Outcome golden_prompts() {
  const std::string talking_annotation =
      "Talking behavior refers to the act of verbal communication through spoken language. "
      "Is there talking behavior in the picture? Please only respond 'Yes', 'No', or 'Not "
      "Applicable'.";
  const std::string talking_explanation =
      "Talking behavior refers to the act of verbal communication through spoken language. "
      "Is there talking behavior in the picture? Please answer this question with an "
      "explanation.";
  const std::string valence_command =
      "Please only respond 'Positive', 'Negative', 'Hard to distinguish', or 'Not Applicable'.";
  auto cb = load_codebook(fltest::codebook_path());
  int ok = 0;
  ok += compile_annotation_prompt(cb.at("talking")) == talking_annotation;
  ok += compile_explanation_prompt(cb.at("talking")) == talking_explanation;
  ok += render_value_command(cb.at("valence").domain) == valence_command;
  return {ok == 3, std::to_string(ok) + "/3 strings byte-equal"};
}

// ---- agreement -------------------------------------------------------------

struct Row {
  std::string unit, code;
  std::optional<std::string> value;
};

RaterSet to_set(const std::string& id, const std::vector<Row>& rows) {
  RaterSet s;
  s.rater_id = id;
  for (const auto& r : rows) s.set(r.unit, r.code, r.value);
  return s;
}

std::vector<Row> random_rows(std::mt19937& rng, int n_units, int n_codes, double skip,
                             double unparseable) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Row> rows;
  for (int i = 0; i < n_units; ++i) {
    for (int c = 0; c < n_codes; ++c) {
      if (u(rng) < skip) continue;
      std::optional<std::string> v;
      if (u(rng) >= unparseable) v = "v" + std::to_string(rng() % 3);
      rows.push_back({"u" + std::to_string(i), "c" + std::to_string(c), v});
    }
  }
  return rows;
}

Outcome agreement_oracle() {
  std::mt19937 rng(7);
  int pairs = 0, mismatches = 0, asymmetric = 0, reflexive_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    int n_units = 1 + static_cast<int>(rng() % 200);
    int n_codes = 1 + static_cast<int>(rng() % 8);
    auto ra = random_rows(rng, n_units, n_codes, 0.2, 0.05);
    auto rb = random_rows(rng, n_units, n_codes, 0.2, 0.05);
    auto a = to_set("a", ra), b = to_set("b", rb);
    for (int c = 0; c < n_codes; ++c) {
      std::string code = "c" + std::to_string(c);
      int64_t units = 0, agree = 0;
      for (const auto& x : ra) {
        if (x.code != code) continue;
        for (const auto& y : rb) {
          if (y.code != code || y.unit != x.unit) continue;
          ++units;
          if (x.value && y.value && *x.value == *y.value) ++agree;
        }
      }
      ++pairs;
      if (units == 0) continue;
      auto ab = percentage_agreement(a, b, code);
      auto ba = percentage_agreement(b, a, code);
      int64_t expected = std::llround(10000.0L * agree / units);
      if (ab.n_units != units || ab.n_agree != agree || ab.percent_hundredths != expected) {
        ++mismatches;
      }
      if (!(ab == ba)) ++asymmetric;
    }
    // Reflexivity on a fully parsed set.
    auto full = random_rows(rng, n_units, n_codes, 0.2, 0.0);
    auto f = to_set("f", full);
    for (int c = 0; c < n_codes; ++c) {
      std::string code = "c" + std::to_string(c);
      bool any = false;
      for (const auto& x : full) any |= x.code == code;
      if (any && percentage_agreement(f, f, code).percent_hundredths != 10000) ++reflexive_fail;
    }
  }
  return {pairs >= 1000 && mismatches == 0 && asymmetric == 0 && reflexive_fail == 0,
          std::to_string(pairs) + " code pairs, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(asymmetric) + " asymmetric, " + std::to_string(reflexive_fail) +
              " reflexivity failures"};
}

Outcome skipped_units() {
  RaterSet a, b;
  a.rater_id = "a";
  b.rater_id = "b";
  for (int i = 0; i < 100; ++i) {
    a.set("u" + std::to_string(i), "c", "Yes");
    if (i % 5 != 0) b.set("u" + std::to_string(i), "c", "Yes");
  }
  auto ag = percentage_agreement(a, b, "c");
  RaterSet x, y;
  x.rater_id = "x";
  y.rater_id = "y";
  x.set("u", "c", std::nullopt);
  y.set("u", "c", std::nullopt);
  auto un = percentage_agreement(x, y, "c");
  bool listed = list_disagreements(x, y).size() == 1;
  return {ag.n_units == 80 && ag.n_agree == 80 && un.n_units == 1 && un.n_agree == 0 && listed,
          "n_units=" + std::to_string(ag.n_units) + ", unparseable pair agree=" +
              std::to_string(un.n_agree) + (listed ? ", listed as disagreement" : "")};
}

// ---- parser / conflict -----------------------------------------------------

Outcome parser_corpus() {
  const auto& corpus = fltest::parse_corpus();
  size_t correct = 0, exact = 0, exact_in_normalized = 0;
  for (const auto& c : corpus) {
    auto p = parse_value(c.raw, *c.domain);
    bool value_ok = c.value ? p.value == std::optional<std::string>(c.value) : !p.value;
    correct += p.status == c.status && value_ok && p.raw == c.raw;
    if (p.status == ParseStatus::Exact) {
      ++exact;
      exact_in_normalized += match_normalized(c.raw, *c.domain) == p.value;
    }
  }
  return {corpus.size() >= 60 && correct == corpus.size() && exact == exact_in_normalized,
          std::to_string(correct) + "/" + std::to_string(corpus.size()) + " correct, " +
              std::to_string(exact_in_normalized) + "/" + std::to_string(exact) +
              " exact also normalized"};
}

Outcome conflicts() {
  const auto& yn = fltest::yes_no_domain();
  bool known_case = detect_conflict(
      parse_value("No", yn),
      "Yes, the person in the image is directly talking to the audience. They are looking at the "
      "camera and appear to be speaking, which suggests they are sharing their thoughts or "
      "experiences with the viewers.",
      yn);
  auto cases = fltest::agreeing_explanations(600, 99);
  int fp = 0;
  for (const auto& c : cases) {
    fp += detect_conflict(parse_value(c.annotation, *c.domain), c.explanation, *c.domain);
  }
  return {known_case && fp == 0 && cases.size() >= 500,
          std::string(known_case ? "example detected" : "example missed") + ", " +
              std::to_string(fp) + " false positives over " + std::to_string(cases.size())};
}

// ---- end to end ------------------------------------------------------------

Outcome e2e_replay() {
  // Any network use would reach this stub.
  fltest::StubLlm stub;
  setenv("FRAMELOOM_API_BASE", stub.base_url().c_str(), 1);
  setenv("FRAMELOOM_API_KEY", "sk-acceptance", 1);
  fltest::TempDir d1, d2;
  auto first = fltest::run_e2e(d1.path());
  auto second = fltest::run_e2e(d2.path());
  unsetenv("FRAMELOOM_API_BASE");
  unsetenv("FRAMELOOM_API_KEY");

  size_t acceptable = 0;
  for (const auto& r : first.report.rows) acceptable += r.acceptable;
  bool same = first.annotations_view == second.annotations_view &&
              first.report_csv == second.report_csv && !first.annotations_view.empty();
  bool share = !first.report.rows.empty() && acceptable * 4 >= first.report.rows.size() * 3;
  bool shape = first.n_units == 5 && first.n_codes == 8;
  char pct[32];
  std::snprintf(pct, sizeof pct, "%.1f%%",
                first.report.rows.empty() ? 0.0 : 100.0 * acceptable / first.report.rows.size());
  return {same && share && shape && stub.requests() == 0,
          std::to_string(first.n_units) + " units x " + std::to_string(first.n_codes) +
              " codes, " + (same ? "byte-identical" : "outputs differ") + ", " + pct +
              " rows acceptable, " + std::to_string(stub.requests()) + " network requests"};
}

Outcome percent_162_of_203() {
  RaterSet a, b;
  a.rater_id = "a";
  b.rater_id = "b";
  for (int i = 0; i < 203; ++i) {
    a.set("u" + std::to_string(i), "n_people", "1");
    b.set("u" + std::to_string(i), "n_people", i < 162 ? "1" : "2");
  }
  auto ag = percentage_agreement(a, b, "n_people");
  std::string shown = format_percent(ag.percent_hundredths);
  return {ag.n_agree == 162 && ag.n_units == 203 && shown == "79.80", shown + "%"};
}

Outcome live_then_replay() {
  fltest::StubLlm stub([](const std::string& prompt) {
    return prompt.find("with an explanation") != std::string::npos ? "No, nothing is shown." : "No";
  });
  setenv("FRAMELOOM_API_BASE", stub.base_url().c_str(), 1);
  setenv("FRAMELOOM_API_KEY", "sk-acceptance", 1);
  fltest::TempDir dir;
  Project::init(dir.path(), fltest::codebook_path(), {"alice", "bob"});
  auto project = Project::open(dir.path());
  ExtractOptions ex;
  ex.videos = {fltest::fixtures_dir() / "videos/clip_b.mp4"};
  ex.decoder_path = fltest::ffmpeg_path();
  run_extract(*project, ex);

  AnnotateOptions an;
  an.backend = BackendKind::Live;
  auto live = run_annotate(*project, an);
  int after_live = stub.requests();
  size_t cached = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "cache")) {
    cached += e.is_regular_file() && e.path().extension() == ".json";
  }

  fs::remove(dir / "annotations.jsonl");
  project = Project::open(dir.path());
  an.backend = BackendKind::Replay;
  auto replay = run_annotate(*project, an);
  int replay_requests = stub.requests() - after_live;
  unsetenv("FRAMELOOM_API_BASE");
  unsetenv("FRAMELOOM_API_KEY");

  bool ok = live.failed == 0 && after_live > 0 && cached == static_cast<size_t>(after_live) &&
            replay.failed == 0 && replay.requested == live.requested && replay_requests == 0;
  return {ok, std::to_string(after_live) + " live requests, " + std::to_string(cached) +
                  " cache entries, replay made " + std::to_string(replay_requests) + " requests"};
}

}  // namespace

int main() {
  set_log_level(LogLevel::Quiet);
  const std::vector<Criterion> criteria = {
      {"golden prompts", 1.0, golden_prompts},
      {"agreement oracle", 30.0, agreement_oracle},
      {"skipped units and unparseable pairs", 0, skipped_units},
      {"parser corpus", 0, parser_corpus},
      {"conflict detection", 0, conflicts},
      {"end-to-end replay determinism", 60.0, e2e_replay},
      {"162/203 agreement", 0, percent_162_of_203},
      {"live query fills the replay cache", 0, live_then_replay},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = c.limit_seconds == 0 || secs < c.limit_seconds;
    bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s %zu %s: %s (%.3f s%s)\n", pass ? "PASS" : "FAIL", i + 1, c.name,
                o.detail.c_str(), secs,
                c.limit_seconds > 0 ? (in_time ? ", within limit" : ", over limit") : "");
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures;
}
