#include "autocode/llm/segments.hpp"

namespace autocode::llm {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_fence(std::string_view line) { return trim(line).starts_with("```"); }

std::string_view fence_tag(std::string_view line) { return trim(trim(line).substr(3)); }

ExecStatus status_from_tag(std::string_view tag) {
  if (tag.find("timeout") != std::string_view::npos) return ExecStatus::timeout;
  if (tag.find("error") != std::string_view::npos) return ExecStatus::error;
  return ExecStatus::ok;
}

// Splits the last \boxed{...} off a reasoning block. Returns false when the
// block has none.
bool split_boxed(std::string_view text, std::string& before, std::string& answer, std::string& after) {
  const auto at = text.rfind("\\boxed{");
  if (at == std::string_view::npos) return false;
  std::size_t i = at + 7;
  int depth = 1;
  for (; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) break;
  }
  if (depth != 0) return false;
  before = std::string(trim(text.substr(0, at)));
  answer = std::string(text.substr(at + 7, i - at - 7));
  after = std::string(trim(text.substr(i + 1)));
  return true;
}

}  // namespace

ParsedResponse parse_segments(std::string_view text) {
  ParsedResponse out;
  auto& segs = out.segments;
  std::string outside;
  auto flush_outside = [&] {
    const auto t = trim(outside);
    if (!t.empty()) segs.push_back(Segment::reasoning(std::string(t)));
    outside.clear();
  };

  bool inside = false;
  std::string tag, body;
  bool body_started = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const bool last = nl == std::string_view::npos;
    const auto line = text.substr(pos, last ? std::string_view::npos : nl - pos);
    pos = last ? text.size() + 1 : nl + 1;

    if (!inside) {
      if (is_fence(line)) {
        flush_outside();
        inside = true;
        tag = std::string(fence_tag(line));
        body.clear();
        body_started = false;
      } else {
        outside += line;
        if (!last) outside += '\n';
      }
      continue;
    }
    if (is_fence(line) && fence_tag(line).empty()) {
      inside = false;
      if (tag.starts_with("output")) {
        if (!segs.empty() && segs.back().kind == SegmentKind::code) {
          segs.push_back(Segment::exec_result(body, status_from_tag(tag)));
        } else {
          out.flags.orphan_output = true;
          segs.push_back(Segment::reasoning(body));
        }
      } else {
        segs.push_back(Segment::code(body));
      }
      continue;
    }
    if (is_fence(line)) out.flags.nested_fence = true;
    if (body_started) body += '\n';
    body += line;
    body_started = true;
  }
  if (inside) {
    out.flags.unterminated_fence = true;
    segs.push_back(Segment::code(body));
  } else {
    flush_outside();
  }

  if (!segs.empty() && segs.back().kind == SegmentKind::reasoning) {
    std::string before, answer, after;
    if (split_boxed(segs.back().text, before, answer, after)) {
      segs.pop_back();
      if (!before.empty()) segs.push_back(Segment::reasoning(before));
      segs.push_back(Segment::final_answer(answer));
      out.flags.trailing_text = !after.empty();
    }
  }
  return out;
}

std::string render_exec_result(std::string_view output, ExecStatus status) {
  std::string tag = "output";
  if (status != ExecStatus::ok) tag += " " + std::string(to_string(status));
  return "```" + tag + "\n" + std::string(output) + "\n```";
}

std::string render_segments(std::span<const Segment> segments) {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) out += '\n';
    const auto& s = segments[i];
    switch (s.kind) {
      case SegmentKind::reasoning: out += s.text; break;
      case SegmentKind::code: out += "```python\n" + s.text + "\n```"; break;
      case SegmentKind::exec_result: out += render_exec_result(s.text, s.status.value_or(ExecStatus::ok)); break;
      case SegmentKind::final_answer: out += "\\boxed{" + s.text + "}"; break;
    }
  }
  return out;
}

}  // namespace autocode::llm
