#include <doctest.h>

#include <fstream>
#include <thread>

#include "frameloom/annotation.hpp"
#include "frameloom/error.hpp"
#include "frameloom/util.hpp"
#include "support.hpp"

using namespace frameloom;
namespace fs = std::filesystem;

namespace {

Codebook small_codebook() {
  Codebook cb;
  Code talking;
  talking.id = "talking";
  talking.name = "Talking";
  talking.definition = "d";
  talking.question = "q";
  talking.domain = ValueDomain::categorical({"Yes", "No", "Not Applicable"});
  Code people = talking;
  people.id = "n_people";
  people.domain = ValueDomain::count();
  cb.codes = {talking, people};
  return cb;
}

AnnotationRecord human(std::string unit, std::string code, std::string rater, std::string value) {
  AnnotationRecord r;
  r.unit_id = std::move(unit);
  r.code_id = std::move(code);
  r.rater_id = std::move(rater);
  r.parsed = ParsedValue{ParseStatus::Exact, value, value};
  return r;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_SUITE("store") {

TEST_CASE("append then reopen preserves records in order") {
  fltest::TempDir dir;
  auto path = dir / "annotations.jsonl";
  {
    AnnotationStore s(path, small_codebook());
    CHECK(s.append(human("u1", "talking", "alice", "Yes")).line == 1);
    CHECK(s.append(human("u0", "talking", "alice", "No")).line == 2);
    CHECK(s.append(human("u0", "n_people", "alice", "3")).line == 3);
  }
  AnnotationStore s(path, small_codebook());
  auto recs = s.records();
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].unit_id == "u1");
  CHECK(recs[1].unit_id == "u0");
  CHECK(recs[2].parsed.value == "3");
  CHECK_FALSE(recs[0].created_at.empty());
}

TEST_CASE("duplicates are rejected and leave the file unchanged") {
  fltest::TempDir dir;
  AnnotationStore s(dir / "a.jsonl", small_codebook());
  s.append(human("u", "talking", "alice", "Yes"));
  auto before = read_file(dir / "a.jsonl");
  CHECK(code_of([&] { s.append(human("u", "talking", "alice", "No")); }) == ErrorCode::Duplicate);
  CHECK(read_file(dir / "a.jsonl") == before);
  // Other raters may code the same pair.
  s.append(human("u", "talking", "bob", "No"));
  CHECK(s.records().size() == 2);
}

TEST_CASE("overwrite writes a tombstone and the new record") {
  fltest::TempDir dir;
  AnnotationStore s(dir / "a.jsonl", small_codebook());
  s.append(human("u", "talking", "alice", "Yes"));
  s.append(human("v", "talking", "alice", "Yes"));
  auto receipt = s.append(human("u", "talking", "alice", "No"), /*overwrite=*/true);
  CHECK(receipt.line == 4);
  auto recs = s.records();
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].unit_id == "v");
  CHECK(recs[1].parsed.value == "No");
  AnnotationStore reopened(dir / "a.jsonl", small_codebook());
  CHECK(reopened.find("u", "talking", "alice")->parsed.value == "No");
}

TEST_CASE("values outside the domain are rejected") {
  fltest::TempDir dir;
  AnnotationStore s(dir / "a.jsonl", small_codebook());
  CHECK(code_of([&] { s.append(human("u", "talking", "alice", "Maybe")); }) ==
        ErrorCode::DomainViolation);
  CHECK(code_of([&] { s.append(human("u", "talking", "alice", "yes")); }) ==
        ErrorCode::DomainViolation);
  CHECK(code_of([&] { s.append(human("u", "n_people", "alice", "1000")); }) ==
        ErrorCode::DomainViolation);
  CHECK(code_of([&] { s.append(human("u", "nope", "alice", "Yes")); }) == ErrorCode::NotFound);
  AnnotationRecord bad = human("u", "talking", "alice", "Yes");
  bad.parsed.status = ParseStatus::Unparseable;
  CHECK(code_of([&] { s.append(bad); }) == ErrorCode::InvalidArgument);
  bad.parsed.value.reset();
  s.append(bad);
  CHECK(s.records().size() == 1);
}

TEST_CASE("a torn tail is ignored and truncated by the next writer") {
  fltest::TempDir dir;
  auto path = dir / "a.jsonl";
  {
    AnnotationStore s(path, small_codebook());
    s.append(human("u", "talking", "alice", "Yes"));
  }
  {
    std::ofstream f(path, std::ios::app);
    f << R"({"unit_id":"x","code_id":"tal)";
  }
  AnnotationStore s(path, small_codebook());
  CHECK(s.records().size() == 1);
  s.append(human("w", "talking", "alice", "No"));
  auto text = read_file(path);
  CHECK(text.find("\"x\"") == std::string::npos);
  AnnotationStore reopened(path, small_codebook());
  CHECK(reopened.records().size() == 2);
}

TEST_CASE("concurrent writers through two handles never lose or duplicate records") {
  fltest::TempDir dir;
  auto path = dir / "a.jsonl";
  AnnotationStore a(path, small_codebook());
  AnnotationStore b(path, small_codebook());
  std::atomic<int> duplicates{0};
  auto writer = [&](AnnotationStore& s, const std::string& rater) {
    for (int i = 0; i < 40; ++i) {
      try {
        // Both handles race on the shared "u<i>" keys for rater "shared".
        s.append(human("u" + std::to_string(i), "talking", "shared", "Yes"));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Duplicate) ++duplicates;
      }
      s.append(human("u" + std::to_string(i), "talking", rater, "No"));
    }
  };
  std::thread t1(writer, std::ref(a), "r1");
  std::thread t2(writer, std::ref(b), "r2");
  std::thread t3(writer, std::ref(a), "r3");
  t1.join();
  t2.join();
  t3.join();
  AnnotationStore check(path, small_codebook());
  CHECK(check.records().size() == 40 * 4);
  CHECK(duplicates == 80);
  CHECK(a.records().size() == 160);
  CHECK(b.records().size() == 160);
}

TEST_CASE("csv export quotes fields") {
  AnnotationRecord r = human("u", "talking", "llm:m", "No");
  r.parsed.raw = "No, \"really\"";
  r.parsed.status = ParseStatus::Normalized;
  r.explanation = "line1\nline2";
  r.created_at = "t";
  auto csv = export_csv({r});
  CHECK(csv ==
        "unit_id,code_id,rater_id,status,value,raw,explanation,conflict,created_at\n"
        "u,talking,llm:m,normalized,No,\"No, \"\"really\"\"\",\"line1\nline2\",false,t\n");
}

}  // TEST_SUITE
