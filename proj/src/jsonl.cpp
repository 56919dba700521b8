#include "autocode/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "autocode/error.hpp"

namespace autocode {

namespace fs = std::filesystem;

std::string dump_jsonl(std::span<const json> records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump(-1, ' ', false, json::error_handler_t::strict);
    out += '\n';
  }
  return out;
}

std::vector<json> parse_jsonl(std::string_view text) {
  std::vector<json> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSONL record: ") + e.what(), line_no);
    }
  }
  return out;
}

void write_text_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + tmp.string() + "' for writing");
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

std::string read_text_file(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInput("missing input '" + path.string() + "'");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_jsonl(std::span<const json> records, const fs::path& path) {
  write_text_file(path, dump_jsonl(records));
}

std::vector<json> read_jsonl(const fs::path& path) { return parse_jsonl(read_text_file(path)); }

void write_trajectories(std::span<const Trajectory> ts, const fs::path& path) {
  write_jsonl(to_json_records(ts), path);
}

std::vector<Trajectory> read_trajectories(const fs::path& path) {
  auto records = read_jsonl(path);
  std::vector<Trajectory> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(records[i].get<Trajectory>());
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid trajectory record: ") + e.what(), i + 1);
    }
  }
  return out;
}

}  // namespace autocode
