#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "slowcast/provider.hpp"

namespace slowcast {

/// A numeric forecast recovered from free-form model output.
struct ParsedAnswer {
    std::vector<double> values;
    std::size_t span_begin = 0;  // character offsets of the matched region
    std::size_t span_end = 0;
    std::vector<std::string> repairs_applied;
};

/// Content of the LAST well-formed open/close pair; models sometimes restate
/// blocks and the final one is authoritative.
std::string extract_answer_block(const std::string& text, const std::string& open_marker,
                                 const std::string& close_marker);

struct BlockMatch {
    std::string content;
    std::size_t begin = 0;  // offset of the opening marker
    std::size_t end = 0;    // offset one past the closing marker
};

/// Returns the last well-formed pair, or throws BlockNotFound /
/// UnbalancedMarkers.
BlockMatch find_last_block(const std::string& text, const std::string& open_marker,
                           const std::string& close_marker);
bool contains_block(const std::string& text, const std::string& open_marker,
                    const std::string& close_marker);

/// Splits on commas and newlines, trims, accepts decimals and scientific
/// notation, strips one pair of enclosing square brackets. Throws
/// NonNumericToken / NonFinite.
std::vector<double> parse_number_list(const std::string& block_text);

/// parse_number_list plus an exact-length check (WrongLength).
std::vector<double> parse_forecast(const std::string& block_text, std::size_t horizon);

/// Re-invokes the provider with the given corrective instruction appended to
/// the prompt and returns the new raw response.
using RepromptFn = std::function<std::string(const std::string& corrective_instruction)>;

/// The corrective sentence sent on a reprompt. found == npos means the
/// previous answer had no parseable forecast at all.
std::string corrective_instruction(std::size_t found, std::size_t expected);

/// Bounded repair pipeline: marker extraction, fallback scan for the last
/// run of >= H/2 comma-separated numbers, truncation of overlength answers,
/// and up to max_retries corrective reprompts. Throws ParseFailure when
/// exhausted.
ParsedAnswer parse_with_repair(const std::string& raw_response, std::size_t horizon,
                               int max_retries, const RepromptFn& reprompt);

long whitespace_token_count(std::string_view text);

/// Completion tokens attributable to the reasoning trace: backend usage
/// minus the answer's whitespace-token count when usage was reported, else
/// the trace's whitespace-token count.
long trace_token_count(const GenerationRecord& record);

}  // namespace slowcast
