#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace frameloom {

struct KeyframeUnit {
  std::string unit_id;   // <video_id>-<6-digit frame_index>
  std::string video_id;
  int64_t timestamp_ms = 0;
  int frame_index = 0;
  std::string image_path;  // relative to the project directory
  std::string digest;      // sha256 of the PNG bytes

  bool operator==(const KeyframeUnit&) const = default;
};

nlohmann::json to_json(const KeyframeUnit& u);
KeyframeUnit keyframe_from_json(const nlohmann::json& j);

// "12.345"
std::string format_timestamp(int64_t ms);

struct ExtractionConfig {
  enum class Mode { IFrames, UniformInterval };

  Mode mode = Mode::IFrames;
  double interval_seconds = 2.0;
  int max_frames = 500;
};

const char* extraction_mode_name(ExtractionConfig::Mode m);
ExtractionConfig::Mode parse_extraction_mode(std::string_view s);
void validate(const ExtractionConfig& cfg);

// Lowercase hex SHA-256. Throws EmptyInput on empty bytes.
std::string frame_digest(std::span<const std::byte> image_bytes);
std::string frame_digest(std::string_view image_bytes);

// File stem with every character outside [A-Za-z0-9_-] replaced by '_'.
std::string video_id_from_path(const std::filesystem::path& video);

std::string make_unit_id(std::string_view video_id, int frame_index);

// The exact decoder argument list used for extraction into out_pattern.
std::vector<std::string> decoder_arguments(const std::string& decoder,
                                           const std::filesystem::path& video,
                                           const ExtractionConfig& cfg,
                                           const std::string& out_pattern);

// Extracts frames into <project_dir>/frames/<video_id>/<frame_index>.png,
// replacing any previous frames for that video. Units are ordered by
// timestamp and capped at cfg.max_frames.
// Throws DecoderNotFound, DecodeError (with decoder stderr), EmptyVideo.
std::vector<KeyframeUnit> extract_keyframes(const std::filesystem::path& video,
                                            const ExtractionConfig& cfg,
                                            const std::string& decoder,
                                            const std::filesystem::path& project_dir,
                                            std::string video_id = {});

// frames/manifest.jsonl: one KeyframeUnit per line, ordered by
// (video_id, frame_index).
class FrameManifest {
 public:
  static FrameManifest load(const std::filesystem::path& project_dir);
  void save(const std::filesystem::path& project_dir) const;

  // Replaces every unit of the given video.
  void replace_video(const std::string& video_id, std::vector<KeyframeUnit> units);

  const std::vector<KeyframeUnit>& units() const { return units_; }
  const KeyframeUnit* find(std::string_view unit_id) const;
  std::vector<KeyframeUnit> units_for(std::string_view video_id) const;

 private:
  std::vector<KeyframeUnit> units_;
};

std::filesystem::path manifest_path(const std::filesystem::path& project_dir);

}  // namespace frameloom
