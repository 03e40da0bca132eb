#include "frameloom/server.hpp"

#include <httplib.h>

#include <set>

#include "frameloom/error.hpp"
#include "frameloom/log.hpp"
#include "frameloom/promptgen.hpp"
#include "frameloom/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace frameloom {

namespace {

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Syntax:
      return 400;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Duplicate:
    case ErrorCode::NotADisagreement:
    case ErrorCode::SpuriousResolution:
    case ErrorCode::Unresolved:
      return 409;
    case ErrorCode::DomainViolation: return 422;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_problem(httplib::Response& res, int status, std::string title, std::string detail,
                  json extra = json::object()) {
  json body{{"type", "about:blank"}, {"title", std::move(title)}, {"status", status},
            {"detail", std::move(detail)}};
  body.update(extra);
  res.status = status;
  res.set_content(body.dump(), "application/problem+json");
}

// Raised inside handlers to produce a problem response with extra members.
struct Problem {
  int status;
  std::string title;
  std::string detail;
  json extra = json::object();
};

json domain_json(const ValueDomain& vd) {
  if (vd.is_categorical()) return json{{"kind", "categorical"}, {"values", vd.allowed_values}};
  return json{{"kind", "count"}, {"min", kCountMin}, {"max", kCountMax}};
}

json unit_json(const KeyframeUnit& u) {
  json j = to_json(u);
  j["image_url"] = "/" + u.image_path;
  return j;
}

std::string param(const httplib::Request& req, const char* key, std::string fallback = {}) {
  return req.has_param(key) ? req.get_param_value(key) : fallback;
}

json body_json(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Problem{400, "InvalidArgument", "request body must be a JSON object"};
    return j;
  } catch (const json::exception& e) {
    throw Problem{400, "InvalidArgument", std::string("malformed JSON body: ") + e.what()};
  }
}

std::string required_string(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw Problem{400, "InvalidArgument", std::string("missing string field '") + key + "'"};
  }
  return it->get<std::string>();
}

json value_or_null(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

json disagreement_json(const Disagreement& d) {
  return json{{"unit_id", d.unit_id},
              {"code_id", d.code_id},
              {"value_a", value_or_null(d.value_a)},
              {"value_b", value_or_null(d.value_b)},
              {"status_a", d.value_a ? "parsed" : "unparseable"},
              {"status_b", d.value_b ? "parsed" : "unparseable"}};
}

}  // namespace

Server::Server(Project& project) : project_(project), http_(std::make_unique<httplib::Server>()) {
  routes();
}

Server::~Server() { stop(); }

void Server::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = http_->bind_to_any_port(host);
    if (port_ < 0) port_ = 0;
  } else if (http_->bind_to_port(host, port)) {
    port_ = port;
  } else {
    port_ = 0;
  }
  if (port_ == 0) {
    throw Error(ErrorCode::Bind, "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  log_info("serving " + project_.dir().string() + " on http://" + host + ":" +
           std::to_string(port_));
}

void Server::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

void Server::routes() {
  using Handler = std::function<void(const httplib::Request&, httplib::Response&, const Session&)>;
  auto api = [this](Handler h) {
    return [this, h](const httplib::Request& req, httplib::Response& res) {
      try {
        std::string token;
        auto auth = req.get_header_value("Authorization");
        if (auth.starts_with("Bearer ")) token = std::string(trim(auth.substr(7)));
        if (token.empty()) token = param(req, "token");
        const CoderConfig* coder = project_.coder_by_token(token);
        if (!coder) throw Error(ErrorCode::Unauthorized, "missing or unknown coder token");
        h(req, res, Session{coder->id, token, utc_now_iso()});
      } catch (const Problem& p) {
        send_problem(res, p.status, p.title, p.detail, p.extra);
      } catch (const Error& e) {
        send_problem(res, http_status_for(e.code()), error_code_name(e.code()), e.what());
      } catch (const std::exception& e) {
        send_problem(res, 500, "InternalError", e.what());
      }
    };
  };

  auto& svr = *http_;

  svr.Get("/api/codebook", api([this](const httplib::Request&, httplib::Response& res, const Session&) {
    const auto& cb = project_.codebook();
    json codes = json::array();
    for (const auto& c : cb.codes) {
      codes.push_back({{"id", c.id},
                       {"type", code_type_name(c.type)},
                       {"name", c.name},
                       {"definition", c.definition},
                       {"question", c.question},
                       {"domain", domain_json(c.domain)},
                       {"annotation_prompt", compile_annotation_prompt(c)},
                       {"explanation_prompt", compile_explanation_prompt(c)}});
    }
    send_json(res, 200, {{"version", cb.version}, {"codes", codes}});
  }));

  svr.Get("/api/units", api([this](const httplib::Request& req, httplib::Response& res, const Session& s) {
    std::string coder = param(req, "coder", s.coder_id);
    std::string code = param(req, "code");
    const auto& cb = project_.codebook();
    if (!code.empty()) cb.at(code);
    std::set<std::pair<std::string, std::string>> coded;
    for (const auto& r : project_.store().records()) {
      if (r.rater_id == coder) coded.insert({r.unit_id, r.code_id});
    }
    json items = json::array();
    auto manifest = project_.manifest();
    for (const auto& u : manifest.units()) {
      json pending = json::array();
      for (const auto& c : cb.codes) {
        if (!code.empty() && c.id != code) continue;
        if (!coded.count({u.unit_id, c.id})) pending.push_back(c.id);
      }
      if (pending.empty()) continue;
      json j = unit_json(u);
      j["pending_codes"] = pending;
      items.push_back(std::move(j));
    }
    send_json(res, 200, {{"coder", coder}, {"code", code}, {"units", items}});
  }));

  svr.Get(R"(/frames/([A-Za-z0-9_-]+)/(\d+)\.png)",
          [this](const httplib::Request& req, httplib::Response& res) {
            std::string rel = "frames/" + req.matches[1].str() + "/" + req.matches[2].str() + ".png";
            const KeyframeUnit* unit = nullptr;
            auto manifest = project_.manifest();
            for (const auto& u : manifest.units()) {
              if (u.image_path == rel) unit = &u;
            }
            if (!unit || !fs::exists(project_.dir() / rel)) {
              send_problem(res, 404, "NotFound", "no frame at /" + rel);
              return;
            }
            std::string etag = "\"" + unit->digest + "\"";
            res.set_header("ETag", etag);
            res.set_header("Cache-Control", "no-cache");
            if (req.get_header_value("If-None-Match") == etag) {
              res.status = 304;
              return;
            }
            res.status = 200;
            res.set_content(read_file(project_.dir() / rel), "image/png");
          });

  svr.Get("/api/annotations", api([this](const httplib::Request& req, httplib::Response& res, const Session& s) {
    std::string unit = param(req, "unit");
    std::string code = param(req, "code");
    std::string rater = param(req, "rater");
    auto records = project_.store().records();
    std::set<std::pair<std::string, std::string>> mine;
    for (const auto& r : records) {
      if (r.rater_id == s.coder_id) mine.insert({r.unit_id, r.code_id});
    }
    json items = json::array();
    for (const auto& r : records) {
      if (!unit.empty() && r.unit_id != unit) continue;
      if (!code.empty() && r.code_id != code) continue;
      if (!rater.empty() && r.rater_id != rater) continue;
      // Blind coding: other raters' answers stay hidden until this coder
      // has submitted their own decision for the same (unit, code).
      if (project_.config().blind_coding && r.rater_id != s.coder_id &&
          !mine.count({r.unit_id, r.code_id})) {
        continue;
      }
      items.push_back(to_json(r));
    }
    send_json(res, 200, {{"annotations", items}});
  }));

  svr.Post("/api/annotations", api([this](const httplib::Request& req, httplib::Response& res, const Session& s) {
    auto body = body_json(req);
    std::string unit = required_string(body, "unit");
    std::string code_id = required_string(body, "code");
    std::string coder = body.contains("coder") ? required_string(body, "coder") : s.coder_id;
    if (coder != s.coder_id) {
      throw Problem{403, "Forbidden", "token belongs to coder '" + s.coder_id + "'"};
    }
    if (!body.contains("value") || !(body["value"].is_string() || body["value"].is_number_integer())) {
      throw Problem{400, "InvalidArgument", "missing field 'value'"};
    }
    std::string value = body["value"].is_string() ? body["value"].get<std::string>()
                                                  : std::to_string(body["value"].get<long long>());
    if (!project_.manifest().find(unit)) {
      throw Error(ErrorCode::NotFound, "unknown unit '" + unit + "'");
    }
    const Code& code = project_.codebook().at(code_id);
    auto canonical = code.domain.lookup(value);
    if (!canonical) {
      throw Problem{422, "DomainViolation",
                    "value '" + value + "' is outside the domain of code '" + code.id + "'",
                    {{"domain", domain_json(code.domain)}}};
    }
    AnnotationRecord rec;
    rec.unit_id = unit;
    rec.code_id = code.id;
    rec.rater_id = coder;
    rec.parsed = ParsedValue{ParseStatus::Exact, *canonical, value};
    auto receipt = project_.store().append(rec, body.value("overwrite", false));
    auto stored = project_.store().find(unit, code.id, coder);
    send_json(res, 201, {{"line", receipt.line}, {"record", to_json(*stored)}});
  }));

  svr.Get("/api/disagreements", api([this](const httplib::Request& req, httplib::Response& res, const Session&) {
    auto [gt_a, gt_b] = project_.ground_truth_pair();
    std::string a = param(req, "a", gt_a);
    std::string b = param(req, "b", gt_b);
    bool all = param(req, "all") == "true" || param(req, "all") == "1";
    auto records = project_.store().records();
    auto list = list_disagreements(rater_set_from_records(a, records),
                                   rater_set_from_records(b, records));
    auto resolved = project_.resolutions().all();
    bool gt_pair = (a == gt_a && b == gt_b) || (a == gt_b && b == gt_a);
    json items = json::array();
    for (const auto& d : list) {
      bool is_resolved = gt_pair && resolved.count({d.unit_id, d.code_id});
      if (is_resolved && !all) continue;
      json j = disagreement_json(d);
      j["resolved"] = is_resolved;
      items.push_back(std::move(j));
    }
    send_json(res, 200, {{"a", a}, {"b", b}, {"count", items.size()}, {"disagreements", items}});
  }));

  svr.Post("/api/reconciliations", api([this](const httplib::Request& req, httplib::Response& res, const Session& s) {
    auto body = body_json(req);
    std::string unit = required_string(body, "unit");
    std::string code_id = required_string(body, "code");
    std::string value = required_string(body, "value");
    auto [a, b] = project_.ground_truth_pair();
    const Code& code = project_.codebook().at(code_id);

    auto records = project_.store().records();
    auto list = list_disagreements(rater_set_from_records(a, records),
                                   rater_set_from_records(b, records));
    bool listed = std::any_of(list.begin(), list.end(), [&](const Disagreement& d) {
      return d.unit_id == unit && d.code_id == code_id;
    });
    if (!listed || project_.resolutions().all().count({unit, code_id})) {
      throw Error(ErrorCode::NotADisagreement,
                  "unit '" + unit + "', code '" + code_id + "' is not an open disagreement");
    }
    auto canonical = code.domain.lookup(value);
    if (!canonical) {
      throw Problem{422, "DomainViolation",
                    "value '" + value + "' is outside the domain of code '" + code.id + "'",
                    {{"domain", domain_json(code.domain)}}};
    }
    Resolution r{unit, code_id, *canonical, s.coder_id, utc_now_iso()};
    project_.resolutions().append(r);
    send_json(res, 201, {{"resolution", to_json(r)}});
  }));

  svr.Get("/api/report", api([this](const httplib::Request&, httplib::Response& res, const Session&) {
    auto raters = project_.rater_sets();
    std::optional<GroundTruth> gt;
    json gt_status{{"available", false}};
    try {
      gt = project_ground_truth(project_);
      gt_status = {{"available", true}, {"entries", gt->entries.size()}};
    } catch (const Error& e) {
      gt_status["reason"] = e.what();
    }
    json body = json::object();
    if (raters.size() >= 2 || (gt && !raters.empty())) {
      body = to_json(agreement_report(raters, gt ? &*gt : nullptr, project_.codebook()));
    } else {
      body = {{"pairs", json::array()}, {"rows", json::array()}};
    }
    body["ground_truth"] = gt_status;
    send_json(res, 200, body);
  }));

  svr.Get(R"(/api/llm/([^/]+)/([^/]+))", api([this](const httplib::Request& req, httplib::Response& res, const Session& s) {
    std::string unit = req.matches[1].str();
    std::string code = req.matches[2].str();
    GatewayConfig gw = project_.config().gateway;
    gw.apply_environment();
    std::string rater = llm_rater_id(param(req, "model", gw.model_id));
    if (project_.config().blind_coding && !project_.store().find(unit, code, s.coder_id)) {
      throw Problem{403, "Forbidden", "submit your own decision for this unit and code first"};
    }
    auto rec = project_.store().find(unit, code, rater);
    if (!rec) throw Error(ErrorCode::NotFound, "no " + rater + " annotation for " + unit + "/" + code);
    send_json(res, 200, {{"unit_id", rec->unit_id},
                         {"code_id", rec->code_id},
                         {"rater_id", rec->rater_id},
                         {"annotation", {{"status", parse_status_name(rec->parsed.status)},
                                         {"value", value_or_null(rec->parsed.value)},
                                         {"raw", rec->parsed.raw}}},
                         {"explanation", value_or_null(rec->explanation)},
                         {"conflict", rec->conflict}});
  }));

  auto ui = project_.dir() / "ui";
  if (fs::is_directory(ui)) svr.set_mount_point("/ui", ui.string());

  svr.set_exception_handler([](const auto&, auto& res, std::exception_ptr ep) {
    std::string what = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send_problem(res, 500, "InternalError", what);
  });
}

}  // namespace frameloom
