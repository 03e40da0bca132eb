#include <doctest.h>

#include <httplib.h>

#include "frameloom/error.hpp"
#include "frameloom/server.hpp"
#include "frameloom/util.hpp"
#include "support.hpp"

using namespace frameloom;
using nlohmann::json;
using fltest::api_get;
using fltest::api_post;

namespace {

// Two units from clip_b, three coders, and mock LLM answers for every code.
struct Fixture {
  fltest::TempDir dir;
  std::unique_ptr<Project> project;
  std::unique_ptr<Server> server;
  int port = 0;

  Fixture() {
    Project::init(dir.path(), fltest::codebook_path(), {"alice:ta", "bob:tb", "carol:tc"});
    project = Project::open(dir.path());
    ExtractOptions ex;
    ex.videos = {fltest::fixtures_dir() / "videos/clip_b.mp4"};
    ex.decoder_path = fltest::ffmpeg_path();
    run_extract(*project, ex);
    AnnotateOptions an;
    an.backend = BackendKind::Mock;
    write_file_atomic(dir / "mock.json",
                      R"({"default": {"annotation": "No", "explanation": "No, nothing."}})");
    an.mock_script = (dir / "mock.json").string();
    run_annotate(*project, an);
    server = std::make_unique<Server>(*project);
    server->start("127.0.0.1", 0);
    port = server->port();
  }

  fltest::ApiResponse code(const std::string& token, const std::string& unit,
                           const std::string& code_id, json value, bool overwrite = false) {
    return api_post(port, "/api/annotations", token,
                    {{"unit", unit}, {"code", code_id}, {"value", value}, {"overwrite", overwrite}});
  }
};

const char* kU0 = "clip_b-000000";
const char* kU1 = "clip_b-000001";

}  // namespace

TEST_SUITE("server") {

TEST_CASE("requests without a valid token are refused") {
  Fixture f;
  auto r = api_get(f.port, "/api/codebook", "");
  CHECK(r.status == 401);
  CHECK(r.body["title"] == "Unauthorized");
  CHECK(r.body["status"] == 401);
  CHECK(api_get(f.port, "/api/codebook", "wrong").status == 401);
  CHECK(api_get(f.port, "/api/codebook", "ta").status == 200);
}

TEST_CASE("codebook endpoint serves codes with compiled prompts") {
  Fixture f;
  auto r = api_get(f.port, "/api/codebook", "ta");
  REQUIRE(r.body["codes"].size() == 8);
  const auto& talking = r.body["codes"][2];
  CHECK(talking["id"] == "talking");
  CHECK(talking["domain"]["values"] == json::array({"Yes", "No", "Not Applicable"}));
  CHECK(talking["annotation_prompt"].get<std::string>().starts_with("Talking behavior refers"));
  CHECK(r.body["codes"][0]["domain"]["kind"] == "count");
}

TEST_CASE("units list shrinks as a coder submits decisions") {
  Fixture f;
  auto r = api_get(f.port, "/api/units?code=food", "ta");
  REQUIRE(r.body["units"].size() == 2);
  CHECK(r.body["units"][0]["unit_id"] == kU0);
  CHECK(r.body["units"][0]["image_url"] == "/frames/clip_b/0.png");
  CHECK(f.code("ta", kU0, "food", "No").status == 201);
  r = api_get(f.port, "/api/units?code=food", "ta");
  REQUIRE(r.body["units"].size() == 1);
  CHECK(r.body["units"][0]["unit_id"] == kU1);
  // Another coder still sees both.
  CHECK(api_get(f.port, "/api/units?code=food", "tb").body["units"].size() == 2);
  CHECK(api_get(f.port, "/api/units?code=nope", "ta").status == 404);
}

TEST_CASE("annotation submission validates and stores") {
  Fixture f;
  auto ok = f.code("ta", kU0, "talking", "yes");
  REQUIRE(ok.status == 201);
  CHECK(ok.body["record"]["value"] == "Yes");
  CHECK(ok.body["record"]["rater_id"] == "alice");
  CHECK(f.project->store().find(kU0, "talking", "alice")->parsed.value == "Yes");

  CHECK(f.code("ta", kU0, "talking", "No").status == 409);
  CHECK(f.code("ta", kU0, "talking", "No", true).status == 201);
  CHECK(f.project->store().find(kU0, "talking", "alice")->parsed.value == "No");

  auto bad = f.code("ta", kU0, "food", "Maybe");
  CHECK(bad.status == 422);
  CHECK(bad.body["domain"]["values"] == json::array({"Yes", "No", "Not Applicable"}));
  CHECK(f.code("ta", kU0, "n_people", 3).status == 201);
  CHECK(f.code("ta", kU1, "n_people", "-2").status == 422);
  CHECK(f.code("ta", "clip_z-000000", "food", "No").status == 404);
  CHECK(f.code("ta", kU0, "nope", "No").status == 404);
  auto wrong_coder = api_post(f.port, "/api/annotations", "ta",
                              {{"unit", kU0}, {"code", "crying"}, {"coder", "bob"}, {"value", "No"}});
  CHECK(wrong_coder.status == 403);
  CHECK(api_post(f.port, "/api/annotations", "ta", {{"unit", kU0}}).status == 400);
}

TEST_CASE("frames are served with their digest as ETag") {
  Fixture f;
  httplib::Client c("127.0.0.1", f.port);
  auto r = c.Get("/frames/clip_b/0.png");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->get_header_value("Content-Type") == "image/png");
  auto digest = f.project->manifest().find(kU0)->digest;
  CHECK(r->get_header_value("ETag") == "\"" + digest + "\"");
  CHECK(sha256_hex(r->body) == digest);
  auto cached = c.Get("/frames/clip_b/0.png", {{"If-None-Match", "\"" + digest + "\""}});
  CHECK(cached->status == 304);
  CHECK(c.Get("/frames/clip_b/9.png")->status == 404);
}

TEST_CASE("blind coding hides other answers until the coder has decided") {
  Fixture f;
  f.code("tb", kU0, "food", "Yes");
  auto before = api_get(f.port, "/api/annotations?unit=" + std::string(kU0) + "&code=food", "ta");
  CHECK(before.body["annotations"].empty());
  CHECK(api_get(f.port, "/api/llm/" + std::string(kU0) + "/food", "ta").status == 403);

  f.code("ta", kU0, "food", "No");
  auto after = api_get(f.port, "/api/annotations?unit=" + std::string(kU0) + "&code=food", "ta");
  CHECK(after.body["annotations"].size() == 3);  // llm, bob, alice
  auto llm = api_get(f.port, "/api/llm/" + std::string(kU0) + "/food", "ta");
  REQUIRE(llm.status == 200);
  CHECK(llm.body["annotation"]["value"] == "No");
  CHECK(llm.body["explanation"] == "No, nothing.");
  CHECK(llm.body["conflict"] == false);
}

TEST_CASE("disagreement queue and reconciliation") {
  Fixture f;
  for (const char* u : {kU0, kU1}) {
    f.code("ta", u, "food", "No");
    f.code("tb", u, "food", std::string(u) == kU0 ? "Yes" : "No");
  }
  f.code("ta", kU0, "crying", "No");
  f.code("tb", kU0, "crying", "Not Applicable");

  auto q = api_get(f.port, "/api/disagreements", "tc");
  REQUIRE(q.status == 200);
  CHECK(q.body["a"] == "alice");
  CHECK(q.body["b"] == "bob");
  REQUIRE(q.body["disagreements"].size() == 2);
  // (unit, code) order
  CHECK(q.body["disagreements"][0]["code_id"] == "crying");
  CHECK(q.body["disagreements"][1]["code_id"] == "food");
  CHECK(q.body["disagreements"][1]["value_a"] == "No");
  CHECK(q.body["disagreements"][1]["value_b"] == "Yes");
  CHECK(q.body["count"] == 2);

  CHECK(api_post(f.port, "/api/reconciliations", "tc", {{"unit", kU1}, {"code", "food"}, {"value", "No"}})
            .status == 409);
  CHECK(api_post(f.port, "/api/reconciliations", "tc", {{"unit", kU0}, {"code", "food"}, {"value", "Perhaps"}})
            .status == 422);
  auto ok = api_post(f.port, "/api/reconciliations", "tc", {{"unit", kU0}, {"code", "food"}, {"value", "yes"}});
  REQUIRE(ok.status == 201);
  CHECK(ok.body["resolution"]["value"] == "Yes");
  CHECK(ok.body["resolution"]["resolver_id"] == "carol");
  CHECK(api_post(f.port, "/api/reconciliations", "tc", {{"unit", kU0}, {"code", "food"}, {"value", "No"}})
            .status == 409);

  auto open = api_get(f.port, "/api/disagreements", "tc");
  REQUIRE(open.body["disagreements"].size() == 1);
  CHECK(open.body["disagreements"][0]["code_id"] == "crying");
  auto all = api_get(f.port, "/api/disagreements?all=true", "tc");
  CHECK(all.body["disagreements"].size() == 2);
  // The full list matches the evaluation module.
  auto records = f.project->store().records();
  auto direct = list_disagreements(rater_set_from_records("alice", records),
                                   rater_set_from_records("bob", records));
  CHECK(direct.size() == all.body["disagreements"].size());

  auto report = api_get(f.port, "/api/report", "tc");
  CHECK(report.body["ground_truth"]["available"] == false);
  api_post(f.port, "/api/reconciliations", "tc", {{"unit", kU0}, {"code", "crying"}, {"value", "No"}});
  report = api_get(f.port, "/api/report", "tc");
  CHECK(report.body["ground_truth"]["available"] == true);
}

TEST_CASE("report endpoint matches the evaluation module") {
  Fixture f;
  for (const char* u : {kU0, kU1}) {
    f.code("ta", u, "talking", "No");
    f.code("tb", u, "talking", std::string(u) == kU0 ? "No" : "Yes");
  }
  auto r = api_get(f.port, "/api/report", "ta");
  REQUIRE(r.status == 200);
  auto direct = to_json(agreement_report(f.project->rater_sets(), nullptr, f.project->codebook()));
  CHECK(r.body["rows"] == direct["rows"]);
  CHECK(r.body["pairs"] == direct["pairs"]);
  bool found = false;
  for (const auto& row : r.body["rows"]) {
    if (row["code_id"] == "talking" && row["pair"] == "alice vs bob") {
      CHECK(row["percent"] == "50.00");
      CHECK(row["acceptable"] == false);
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("binding an unusable address fails") {
  Fixture f;
  Server second(*f.project);
  try {
    second.start("203.0.113.7", 8080);
    FAIL("expected Bind");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Bind);
  }
}

}  // TEST_SUITE
