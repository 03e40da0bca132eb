#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace frameloom {

// Text helpers. All case folding is ASCII-only.

std::string_view trim(std::string_view s);
std::string ascii_lower(std::string_view s);

// Word characters for whole-word matching are ASCII letters/digits and any
// byte >= 0x80 (so UTF-8 letters never split a word).
bool is_word_byte(unsigned char c);

// Position of the first whole-word occurrence of needle in hay at or after
// start, or npos.
size_t find_whole_word(std::string_view hay, std::string_view needle,
                       bool case_insensitive, size_t start = 0);

std::string csv_escape(std::string_view field);

// Hashing and encoding (OpenSSL-backed).

std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);

// Current UTC time as RFC 3339 with millisecond precision.
std::string utc_now_iso();

// Filesystem.

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

}  // namespace frameloom
