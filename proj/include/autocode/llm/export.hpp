#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autocode/core.hpp"
#include "autocode/curation.hpp"

namespace autocode::llm {

inline constexpr const char* kExportSchema = "autocode.export";
inline constexpr int kExportVersion = 1;

// One training record for an external trainer. `response_text` is the
// canonical rendering of `response_segments`.
struct ExportRecord {
  std::string query_id;
  std::string prompt;
  std::vector<Segment> response_segments;
  std::string response_text;
  int c = 0;
  double weight = 1.0;
  std::array<double, 2> s_snapshot{0.5, 0.5};
  int reward = 0;
  std::optional<double> gen_logprob;
  std::string guidance;

  bool operator==(const ExportRecord&) const = default;
};

struct ExportFile {
  json header;
  std::vector<ExportRecord> records;
};

// Prompts come from `queries`, matched by id (UnknownQuery if absent).
std::vector<ExportRecord> export_records(const curation::CuratedDataset& d, std::span<const Query> queries);

// Header line {"schema","version","config_hash","seed","iteration","examples"}
// followed by one record per line.
std::string export_text(const curation::CuratedDataset& d, std::span<const Query> queries);
void export_training_data(const curation::CuratedDataset& d, std::span<const Query> queries,
                          const std::filesystem::path& path);

// Structural checks mirroring schemas/export.schema.json; throw ParseError
// with the 1-based line on the first violation.
void validate_export_header(const json& j, std::size_t line = 1);
void validate_export_record(const json& j, std::size_t line);
ExportFile parse_export(std::string_view text);
ExportFile read_export(const std::filesystem::path& path);

void to_json(json& j, const ExportRecord& r);
void from_json(const json& j, ExportRecord& r);

}  // namespace autocode::llm
