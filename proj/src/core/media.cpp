#include "frameloom/media.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "frameloom/error.hpp"
#include "frameloom/subprocess.hpp"
#include "frameloom/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace frameloom {

std::string format_timestamp(int64_t ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%03lld", static_cast<long long>(ms / 1000),
                static_cast<long long>(ms % 1000));
  return buf;
}

json to_json(const KeyframeUnit& u) {
  return json{{"unit_id", u.unit_id},         {"video_id", u.video_id},
              {"timestamp", format_timestamp(u.timestamp_ms)},
              {"frame_index", u.frame_index}, {"image_path", u.image_path},
              {"digest", u.digest}};
}

KeyframeUnit keyframe_from_json(const json& j) {
  KeyframeUnit u;
  u.unit_id = j.at("unit_id").get<std::string>();
  u.video_id = j.at("video_id").get<std::string>();
  u.timestamp_ms = std::llround(std::stod(j.at("timestamp").get<std::string>()) * 1000.0);
  u.frame_index = j.at("frame_index").get<int>();
  u.image_path = j.at("image_path").get<std::string>();
  u.digest = j.at("digest").get<std::string>();
  return u;
}

const char* extraction_mode_name(ExtractionConfig::Mode m) {
  return m == ExtractionConfig::Mode::IFrames ? "iframes" : "interval";
}

ExtractionConfig::Mode parse_extraction_mode(std::string_view s) {
  auto v = ascii_lower(trim(s));
  if (v == "iframes" || v == "i-frames" || v == "keyframes") return ExtractionConfig::Mode::IFrames;
  if (v == "interval" || v == "uniform") return ExtractionConfig::Mode::UniformInterval;
  throw Error(ErrorCode::InvalidArgument,
              "unknown extraction mode '" + std::string(s) + "' (expected iframes|interval)");
}

void validate(const ExtractionConfig& cfg) {
  if (cfg.mode == ExtractionConfig::Mode::UniformInterval && !(cfg.interval_seconds > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "interval_seconds must be > 0");
  }
  if (cfg.max_frames < 1) throw Error(ErrorCode::InvalidArgument, "max_frames must be >= 1");
}

std::string frame_digest(std::span<const std::byte> image_bytes) {
  if (image_bytes.empty()) throw Error(ErrorCode::EmptyInput, "cannot digest empty image");
  return sha256_hex(image_bytes);
}

std::string frame_digest(std::string_view image_bytes) {
  return frame_digest(std::as_bytes(std::span(image_bytes.data(), image_bytes.size())));
}

std::string video_id_from_path(const fs::path& video) {
  std::string id = video.stem().string();
  for (auto& c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '-';
    if (!ok) c = '_';
  }
  if (id.empty()) id = "video";
  return id;
}

std::string make_unit_id(std::string_view video_id, int frame_index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", frame_index);
  return std::string(video_id) + "-" + buf;
}

std::vector<std::string> decoder_arguments(const std::string& decoder, const fs::path& video,
                                           const ExtractionConfig& cfg,
                                           const std::string& out_pattern) {
  std::vector<std::string> args{decoder, "-nostdin", "-hide_banner", "-loglevel", "info"};
  std::string filter;
  if (cfg.mode == ExtractionConfig::Mode::IFrames) {
    args.insert(args.end(), {"-skip_frame", "nokey"});
    filter = "showinfo";
  } else {
    // Half a millisecond of slack absorbs rounding in pts_time.
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", cfg.interval_seconds - 0.0005);
    filter = std::string("select='isnan(prev_selected_t)+gte(t-prev_selected_t\\,") + buf +
             ")',showinfo";
  }
  args.insert(args.end(), {"-i", video.string(), "-map", "0:v:0", "-an", "-vf", filter,
                           "-fps_mode", "passthrough", "-frames:v",
                           std::to_string(cfg.max_frames), "-flags", "+bitexact", "-fflags",
                           "+bitexact", "-sws_flags", "bitexact+accurate_rnd+full_chroma_int",
                           "-c:v", "png", "-f", "image2", "-start_number", "0", out_pattern});
  return args;
}

namespace {

std::string tail(const std::string& s, size_t n) {
  return s.size() <= n ? s : s.substr(s.size() - n);
}

// pts_time of each frame reported by the showinfo filter, keyed by n.
std::vector<std::pair<int, double>> parse_showinfo(const std::string& err) {
  static const std::regex line_re(R"(Parsed_showinfo_\d+ @ [^\]]*\] n:\s*(\d+) .*pts_time:\s*(-?[0-9.eE+-]+))");
  std::vector<std::pair<int, double>> out;
  std::istringstream in(err);
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_search(line, m, line_re)) {
      out.emplace_back(std::stoi(m[1].str()), std::stod(m[2].str()));
    }
  }
  return out;
}

std::string random_suffix() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[20];
  std::snprintf(buf, sizeof buf, "%08llx", static_cast<unsigned long long>(rng() & 0xffffffffULL));
  return buf;
}

}  // namespace

std::vector<KeyframeUnit> extract_keyframes(const fs::path& video, const ExtractionConfig& cfg,
                                            const std::string& decoder,
                                            const fs::path& project_dir, std::string video_id) {
  validate(cfg);
  auto decoder_exe = find_executable(decoder);
  if (!decoder_exe) {
    throw Error(ErrorCode::DecoderNotFound, "media decoder '" + decoder + "' not found");
  }
  if (!fs::is_regular_file(video)) {
    throw Error(ErrorCode::NotFound, "video file not found: " + video.string());
  }
  if (video_id.empty()) video_id = video_id_from_path(video);

  const fs::path frames_root = project_dir / "frames";
  fs::create_directories(frames_root);
  const fs::path staging = frames_root / (".staging-" + video_id + "-" + random_suffix());
  fs::create_directories(staging);
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{staging};

  auto result = run_process(
      decoder_arguments(*decoder_exe, video, cfg, (staging / "%06d.png").string()));
  if (result.exit_code != 0) {
    throw Error(ErrorCode::Decode, "decoder failed on " + video.string() + " (exit " +
                                       std::to_string(result.exit_code) +
                                       "): " + tail(result.err, 2000));
  }

  auto info = parse_showinfo(result.err);
  std::vector<KeyframeUnit> units;
  for (const auto& [n, pts_time] : info) {
    if (n < 0 || n >= cfg.max_frames) continue;
    char name[32];
    std::snprintf(name, sizeof name, "%06d.png", n);
    fs::path png = staging / name;
    if (!fs::exists(png)) continue;
    KeyframeUnit u;
    u.video_id = video_id;
    u.frame_index = n;
    u.timestamp_ms = std::max<int64_t>(0, std::llround(pts_time * 1000.0));
    u.digest = frame_digest(read_file(png));
    units.push_back(std::move(u));
  }
  if (units.empty()) {
    throw Error(ErrorCode::EmptyVideo, "no frames extracted from " + video.string());
  }

  std::stable_sort(units.begin(), units.end(), [](const auto& a, const auto& b) {
    return a.timestamp_ms < b.timestamp_ms;
  });
  if (static_cast<int>(units.size()) > cfg.max_frames) units.resize(cfg.max_frames);

  // Renumber densely in timestamp order and move into the frame store.
  const fs::path final_dir = frames_root / video_id;
  const fs::path renamed = staging / "out";
  fs::create_directories(renamed);
  for (size_t i = 0; i < units.size(); ++i) {
    char src[32];
    std::snprintf(src, sizeof src, "%06d.png", units[i].frame_index);
    auto& u = units[i];
    u.frame_index = static_cast<int>(i);
    u.unit_id = make_unit_id(video_id, u.frame_index);
    u.image_path = "frames/" + video_id + "/" + std::to_string(u.frame_index) + ".png";
    fs::rename(staging / src, renamed / (std::to_string(u.frame_index) + ".png"));
  }
  std::error_code ec;
  fs::remove_all(final_dir, ec);
  fs::rename(renamed, final_dir);
  return units;
}

fs::path manifest_path(const fs::path& project_dir) {
  return project_dir / "frames" / "manifest.jsonl";
}

FrameManifest FrameManifest::load(const fs::path& project_dir) {
  FrameManifest m;
  auto path = manifest_path(project_dir);
  if (!fs::exists(path)) return m;
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      m.units_.push_back(keyframe_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

void FrameManifest::save(const fs::path& project_dir) const {
  std::string out;
  for (const auto& u : units_) out += to_json(u).dump() + "\n";
  fs::create_directories(project_dir / "frames");
  write_file_atomic(manifest_path(project_dir), out);
}

void FrameManifest::replace_video(const std::string& video_id, std::vector<KeyframeUnit> units) {
  std::erase_if(units_, [&](const KeyframeUnit& u) { return u.video_id == video_id; });
  for (auto& u : units) units_.push_back(std::move(u));
  std::stable_sort(units_.begin(), units_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.video_id, a.frame_index) < std::tie(b.video_id, b.frame_index);
  });
}

const KeyframeUnit* FrameManifest::find(std::string_view unit_id) const {
  for (const auto& u : units_) {
    if (u.unit_id == unit_id) return &u;
  }
  return nullptr;
}

std::vector<KeyframeUnit> FrameManifest::units_for(std::string_view video_id) const {
  std::vector<KeyframeUnit> out;
  for (const auto& u : units_) {
    if (u.video_id == video_id) out.push_back(u);
  }
  return out;
}

}  // namespace frameloom
