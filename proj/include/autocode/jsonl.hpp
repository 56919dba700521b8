#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "autocode/core.hpp"

namespace autocode {

// One JSON value per line, UTF-8. Text fields containing newlines are escaped
// by the serializer, so a record never spans lines.
void write_jsonl(std::span<const json> records, const std::filesystem::path& path);
std::vector<json> read_jsonl(const std::filesystem::path& path);

// Parses JSONL already in memory; malformed lines raise ParseError with the
// 1-based line number.
std::vector<json> parse_jsonl(std::string_view text);
std::string dump_jsonl(std::span<const json> records);

// Writes `contents` atomically (temp file + rename).
void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

template <class T>
std::vector<json> to_json_records(std::span<const T> items) {
  std::vector<json> out;
  out.reserve(items.size());
  for (const auto& it : items) out.emplace_back(it);
  return out;
}

template <class T>
std::vector<T> from_json_records(std::span<const json> records) {
  std::vector<T> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.get<T>());
  return out;
}

void write_trajectories(std::span<const Trajectory> ts, const std::filesystem::path& path);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);

}  // namespace autocode
