#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autocode/core.hpp"

namespace autocode::llm {

struct ParseFlags {
  bool unterminated_fence = false;  // remainder was taken as Code
  bool nested_fence = false;        // a tagged fence opened inside a block
  bool orphan_output = false;       // output block not preceded by code, kept as Reasoning
  bool trailing_text = false;       // text after the final boxed answer was dropped

  bool any() const { return unterminated_fence || nested_fence || orphan_output || trailing_text; }
};

struct ParsedResponse {
  std::vector<Segment> segments;
  ParseFlags flags;
};

// Splits model text on ``` fences. Text outside fences becomes Reasoning,
// fenced blocks become Code, and blocks tagged "output" (optionally
// "output error" / "output timeout") directly after code become ExecResult.
// The last \boxed{...} in the final reasoning block becomes the FinalAnswer.
ParsedResponse parse_segments(std::string_view text);

// Canonical rendering; parse_segments(render_segments(s)).segments == s for
// well-formed segment lists.
std::string render_segments(std::span<const Segment> segments);

// The fence that feeds an execution result back to the model.
std::string render_exec_result(std::string_view output, ExecStatus status);

}  // namespace autocode::llm
