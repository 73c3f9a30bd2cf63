#include "slowcast/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "slowcast/errors.hpp"

namespace slowcast {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_token(const std::string& token) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    if (begin != end && *begin == '+') ++begin;
    double v{};
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

/// Matches a decimal or scientific-notation literal starting at pos; returns
/// one past its end, or npos. Rejects matches glued to a word (e.g. "x12").
std::size_t match_number(const std::string& text, std::size_t pos) {
    if (pos > 0) {
        char prev = text[pos - 1];
        if (std::isalnum(static_cast<unsigned char>(prev)) || prev == '.' || prev == '_') {
            return std::string::npos;
        }
    }
    std::size_t i = pos;
    const std::size_t n = text.size();
    if (i < n && (text[i] == '+' || text[i] == '-')) ++i;
    std::size_t digits = 0;
    while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i, ++digits;
    if (i < n && text[i] == '.') {
        ++i;
        while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i, ++digits;
    }
    if (digits == 0) return std::string::npos;
    if (i < n && (text[i] == 'e' || text[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < n && (text[j] == '+' || text[j] == '-')) ++j;
        std::size_t exp_digits = 0;
        while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j, ++exp_digits;
        if (exp_digits > 0) i = j;
    }
    // Glued to a following word: not a standalone number.
    if (i < n && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
        return std::string::npos;
    }
    return i;
}

struct NumericRun {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t count = 0;
};

/// Runs of numbers separated only by commas (with optional whitespace).
std::vector<NumericRun> find_numeric_runs(const std::string& text) {
    std::vector<NumericRun> runs;
    std::size_t pos = 0;
    const std::size_t n = text.size();
    while (pos < n) {
        std::size_t num_end = match_number(text, pos);
        if (num_end == std::string::npos) {
            ++pos;
            continue;
        }
        NumericRun run{pos, num_end, 1};
        std::size_t cursor = num_end;
        while (true) {
            std::size_t p = cursor;
            while (p < n && is_space(text[p])) ++p;
            if (p >= n || text[p] != ',') break;
            ++p;
            while (p < n && is_space(text[p])) ++p;
            std::size_t next_end = match_number(text, p);
            if (next_end == std::string::npos) break;
            cursor = next_end;
            run.end = next_end;
            ++run.count;
        }
        runs.push_back(run);
        pos = run.end;
    }
    return runs;
}

}  // namespace

BlockMatch find_last_block(const std::string& text, const std::string& open_marker,
                           const std::string& close_marker) {
    if (open_marker.empty() || close_marker.empty() || open_marker == close_marker) {
        throw ConfigInvalid("markers", "must be non-empty and distinct");
    }
    std::optional<BlockMatch> last;
    std::size_t pos = 0;
    while (true) {
        std::size_t open_at = text.find(open_marker, pos);
        if (open_at == std::string::npos) break;
        std::size_t close_at = text.find(close_marker, open_at + open_marker.size());
        if (close_at == std::string::npos) break;
        BlockMatch m;
        m.begin = open_at;
        m.end = close_at + close_marker.size();
        m.content = text.substr(open_at + open_marker.size(),
                                close_at - open_at - open_marker.size());
        last = std::move(m);
        pos = close_at + close_marker.size();
    }
    if (last) return *last;
    if (text.find(open_marker) != std::string::npos ||
        text.find(close_marker) != std::string::npos) {
        throw UnbalancedMarkers("markers present but no well-formed " + open_marker + "..." +
                                close_marker + " pair");
    }
    throw BlockNotFound("no " + open_marker + "..." + close_marker + " block");
}

bool contains_block(const std::string& text, const std::string& open_marker,
                    const std::string& close_marker) {
    try {
        find_last_block(text, open_marker, close_marker);
        return true;
    } catch (const Error&) {
        return false;
    }
}

std::string extract_answer_block(const std::string& text, const std::string& open_marker,
                                 const std::string& close_marker) {
    return find_last_block(text, open_marker, close_marker).content;
}

std::vector<double> parse_number_list(const std::string& block_text) {
    std::string body = trim(block_text);
    if (body.size() >= 2 && body.front() == '[' && body.back() == ']') {
        body = trim(body.substr(1, body.size() - 2));
    }
    std::vector<double> values;
    std::size_t position = 0;
    std::size_t start = 0;
    auto take = [&](std::size_t begin, std::size_t end) {
        std::string token = trim(body.substr(begin, end - begin));
        if (token.empty()) return;  // tolerate stray separators
        ++position;
        auto v = parse_token(token);
        if (!v) throw NonNumericToken(token, position);
        if (!std::isfinite(*v)) throw NonFinite("token '" + token + "' is not finite");
        values.push_back(*v);
    };
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] == ',' || body[i] == '\n') {
            take(start, i);
            start = i + 1;
        }
    }
    take(start, body.size());
    return values;
}

std::vector<double> parse_forecast(const std::string& block_text, std::size_t horizon) {
    if (horizon < 1) throw ConfigInvalid("horizon", "must be >= 1");
    std::vector<double> values = parse_number_list(block_text);
    if (values.size() != horizon) throw WrongLength(values.size(), horizon);
    return values;
}

std::string corrective_instruction(std::size_t found, std::size_t expected) {
    std::string what = (found == std::string::npos)
                           ? "contained no parseable forecast"
                           : "had " + std::to_string(found) + " values";
    return "Your previous answer " + what + "; output exactly " + std::to_string(expected) +
           " values inside " + kForecastOpen + "..." + kForecastClose + " and nothing else.";
}

ParsedAnswer parse_with_repair(const std::string& raw_response, std::size_t horizon,
                               int max_retries, const RepromptFn& reprompt) {
    if (horizon < 1) throw ConfigInvalid("horizon", "must be >= 1");
    std::vector<std::string> repairs;
    std::string text = raw_response;

    for (int attempt = 0;; ++attempt) {
        bool have_list = false;
        bool block_missing = false;
        std::string reason;
        std::vector<double> values;
        std::size_t span_b = 0, span_e = 0;
        std::vector<std::string> attempt_labels;

        // Step 1: the marker contract.
        try {
            BlockMatch m = find_last_block(text, kForecastOpen, kForecastClose);
            span_b = m.begin + std::string(kForecastOpen).size();
            span_e = m.end - std::string(kForecastClose).size();
            values = parse_number_list(m.content);
            have_list = true;
        } catch (const BlockNotFound&) {
            block_missing = true;
            reason = "no forecast block found";
        } catch (const UnbalancedMarkers&) {
            block_missing = true;
            reason = "forecast block markers unbalanced";
        } catch (const NonNumericToken& e) {
            reason = e.what();
        } catch (const NonFinite& e) {
            reason = e.what();
        }

        // Step 2: with no block at all, scan for the last comma-separated
        // numeric run of at least H/2 values; shorter runs are likely
        // incidental trace arithmetic.
        if (block_missing) {
            const auto runs = find_numeric_runs(text);
            for (auto it = runs.rbegin(); it != runs.rend(); ++it) {
                if (2 * it->count >= horizon) {
                    try {
                        values = parse_number_list(text.substr(it->begin, it->end - it->begin));
                        have_list = true;
                        span_b = it->begin;
                        span_e = it->end;
                        attempt_labels.push_back("fallback_scan");
                    } catch (const Error&) {
                    }
                    break;
                }
            }
        }

        std::size_t found = std::string::npos;
        if (have_list) {
            found = values.size();
            if (values.size() > horizon) {
                // Extra values are a formatting slip; keep the first H.
                values.resize(horizon);
                attempt_labels.push_back("truncated");
            }
            if (values.size() == horizon) {
                ParsedAnswer answer;
                answer.values = std::move(values);
                answer.span_begin = span_b;
                answer.span_end = span_e;
                answer.repairs_applied = repairs;
                answer.repairs_applied.insert(answer.repairs_applied.end(),
                                              attempt_labels.begin(), attempt_labels.end());
                return answer;
            }
            reason = "expected " + std::to_string(horizon) + " values, found " +
                     std::to_string(values.size());
        }

        if (attempt >= max_retries || !reprompt) {
            throw ParseFailure(reason, text);
        }
        text = reprompt(corrective_instruction(found, horizon));
        repairs.push_back("reprompted:" + std::to_string(attempt + 1));
    }
}

long whitespace_token_count(std::string_view text) {
    long count = 0;
    bool in_token = false;
    for (char c : text) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

long trace_token_count(const GenerationRecord& record) {
    if (record.completion_tokens > 0) {
        const long answer_tokens = whitespace_token_count(record.answer_text);
        return std::max(0L, record.completion_tokens - answer_tokens);
    }
    return whitespace_token_count(record.trace_text);
}

}  // namespace slowcast
