#include "autocode/llm/export.hpp"

#include <cmath>
#include <map>
#include <set>

#include "autocode/error.hpp"
#include "autocode/jsonl.hpp"
#include "autocode/llm/segments.hpp"

namespace autocode::llm {

void to_json(json& j, const ExportRecord& r) {
  j = json{{"query_id", r.query_id},
           {"prompt", r.prompt},
           {"response_segments", r.response_segments},
           {"response_text", r.response_text},
           {"c", r.c},
           {"weight", r.weight},
           {"s_snapshot", r.s_snapshot},
           {"reward", r.reward},
           {"guidance", r.guidance}};
  if (r.gen_logprob) j["gen_logprob"] = *r.gen_logprob;
}

void from_json(const json& j, ExportRecord& r) {
  r.query_id = j.at("query_id").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.response_segments = j.at("response_segments").get<std::vector<Segment>>();
  r.response_text = j.at("response_text").get<std::string>();
  r.c = j.at("c").get<int>();
  r.weight = j.at("weight").get<double>();
  r.s_snapshot = j.at("s_snapshot").get<std::array<double, 2>>();
  r.reward = j.at("reward").get<int>();
  r.guidance = j.at("guidance").get<std::string>();
  r.gen_logprob.reset();
  if (auto it = j.find("gen_logprob"); it != j.end() && !it->is_null()) r.gen_logprob = it->get<double>();
}

std::vector<ExportRecord> export_records(const curation::CuratedDataset& d, std::span<const Query> queries) {
  std::map<std::string, const Query*> by_id;
  for (const auto& q : queries) by_id[q.id] = &q;
  std::vector<ExportRecord> out;
  out.reserve(d.examples.size());
  for (const auto& e : d.examples) {
    const auto it = by_id.find(e.query_id);
    if (it == by_id.end()) throw UnknownQuery(e.query_id);
    ExportRecord r;
    r.query_id = e.query_id;
    r.prompt = it->second->prompt;
    r.response_segments = e.trajectory.segments;
    r.response_text = render_segments(e.trajectory.segments);
    r.c = e.decision.c;
    r.weight = e.weight;
    r.s_snapshot = e.s_snapshot;
    r.reward = e.trajectory.reward;
    r.gen_logprob = e.trajectory.gen_logprob;
    r.guidance = e.trajectory.guidance.to_string();
    out.push_back(std::move(r));
  }
  return out;
}

std::string export_text(const curation::CuratedDataset& d, std::span<const Query> queries) {
  const auto records = export_records(d, queries);
  std::vector<json> lines;
  lines.push_back(json{{"schema", kExportSchema},
                       {"version", kExportVersion},
                       {"config_hash", d.provenance.config_hash},
                       {"seed", d.provenance.seed},
                       {"iteration", d.provenance.iteration},
                       {"examples", records.size()}});
  for (const auto& r : records) lines.emplace_back(r);
  return dump_jsonl(lines);
}

void export_training_data(const curation::CuratedDataset& d, std::span<const Query> queries,
                          const std::filesystem::path& path) {
  write_text_file(path, export_text(d, queries));
}

namespace {

[[noreturn]] void fail(const std::string& what, std::size_t line) { throw ParseError("export: " + what, line); }

void require(const json& j, const char* key, json::value_t type, std::size_t line) {
  const auto it = j.find(key);
  if (it == j.end()) fail(std::string("missing field '") + key + "'", line);
  const bool ok = type == json::value_t::number_float ? it->is_number()
                  : type == json::value_t::number_unsigned ? it->is_number_unsigned() ||
                                                                 (it->is_number_integer() && it->get<long long>() >= 0)
                                                           : it->type() == type;
  if (!ok) fail(std::string("field '") + key + "' has the wrong type", line);
}

bool in_unit(const json& v) {
  if (!v.is_number()) return false;
  const double x = v.get<double>();
  return std::isfinite(x) && x >= 0.0 && x <= 1.0;
}

}  // namespace

void validate_export_header(const json& j, std::size_t line) {
  if (!j.is_object()) fail("header is not an object", line);
  require(j, "schema", json::value_t::string, line);
  require(j, "version", json::value_t::number_unsigned, line);
  require(j, "config_hash", json::value_t::string, line);
  require(j, "seed", json::value_t::number_unsigned, line);
  require(j, "iteration", json::value_t::number_unsigned, line);
  require(j, "examples", json::value_t::number_unsigned, line);
  if (j["schema"] != kExportSchema) fail("unknown schema", line);
  if (j["version"] != kExportVersion) fail("unsupported version", line);
}

void validate_export_record(const json& j, std::size_t line) {
  static const std::set<std::string> known{"query_id", "prompt", "response_segments", "response_text", "c",
                                           "weight", "s_snapshot", "reward", "gen_logprob", "guidance"};
  if (!j.is_object()) fail("record is not an object", line);
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) fail("unknown field '" + k + "'", line);
  require(j, "query_id", json::value_t::string, line);
  require(j, "prompt", json::value_t::string, line);
  require(j, "response_segments", json::value_t::array, line);
  require(j, "response_text", json::value_t::string, line);
  require(j, "c", json::value_t::number_unsigned, line);
  require(j, "weight", json::value_t::number_float, line);
  require(j, "s_snapshot", json::value_t::array, line);
  require(j, "reward", json::value_t::number_unsigned, line);
  require(j, "guidance", json::value_t::string, line);
  if (j["c"].get<long long>() > 1) fail("c outside {0,1}", line);
  if (j["reward"].get<long long>() > 1) fail("reward outside {0,1}", line);
  const double w = j["weight"].get<double>();
  if (!std::isfinite(w) || w < 0.0) fail("weight must be finite and non-negative", line);
  const auto& s = j["s_snapshot"];
  if (s.size() != 2 || !in_unit(s[0]) || !in_unit(s[1])) fail("s_snapshot must be two numbers in [0,1]", line);
  if (auto it = j.find("gen_logprob"); it != j.end() && !it->is_number()) fail("gen_logprob must be a number", line);
  std::vector<Segment> segs;
  try {
    segs = j["response_segments"].get<std::vector<Segment>>();
  } catch (const std::exception& e) {
    fail(std::string("bad segment: ") + e.what(), line);
  }
  if (!segments_well_formed(segs)) fail("response segments violate the grammar", line);
}

ExportFile parse_export(std::string_view text) {
  const auto lines = parse_jsonl(text);
  if (lines.empty()) fail("missing header", 1);
  ExportFile f;
  validate_export_header(lines[0], 1);
  f.header = lines[0];
  for (std::size_t i = 1; i < lines.size(); ++i) {
    validate_export_record(lines[i], i + 1);
    f.records.push_back(lines[i].get<ExportRecord>());
  }
  if (f.header["examples"].get<std::size_t>() != f.records.size())
    fail("header announces " + f.header["examples"].dump() + " examples, file has " +
             std::to_string(f.records.size()),
         1);
  return f;
}

ExportFile read_export(const std::filesystem::path& path) { return parse_export(read_text_file(path)); }

}  // namespace autocode::llm
