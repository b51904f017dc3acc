#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hvaudit::io {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

// Writes atomically enough for our purposes: truncate + write + close, with
// parent directories created on demand. Throws Error(kIo) on failure.
void write_file(const std::filesystem::path& path, std::string_view contents);

// Calls `fn(line_no, line)` for each non-blank line; line_no is 1-based.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// 64-bit FNV-1a, optionally continuing from a previous state.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset);

std::string hex64(std::uint64_t value);

}  // namespace hvaudit::io
