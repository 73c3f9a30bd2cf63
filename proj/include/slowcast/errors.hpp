#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slowcast {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dataset loading and windowing
// ---------------------------------------------------------------------------

class FileUnreadable : public Error {
public:
    using Error::Error;
};

class SchemaMismatch : public Error {
public:
    using Error::Error;
};

class NonMonotoneTimestamps : public Error {
public:
    NonMonotoneTimestamps(std::size_t row, const std::string& detail)
        : Error("non-monotone timestamps at row " + std::to_string(row) + ": " + detail),
          row_(row) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

class UnparseableCell : public Error {
public:
    UnparseableCell(std::size_t row, const std::string& column, const std::string& cell)
        : Error("row " + std::to_string(row) + ", column '" + column +
                "': cannot parse '" + cell + "'"),
          row_(row), column_(column) {}
    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

class IrregularFrequency : public Error {
public:
    using Error::Error;
};

class PartTooShort : public Error {
public:
    using Error::Error;
};

class FrameTooShort : public Error {
public:
    using Error::Error;
};

class MaskOutOfRange : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Prompt construction
// ---------------------------------------------------------------------------

class OffsetNotMultipleOfFrequency : public Error {
public:
    using Error::Error;
};

class DegenerateWindow : public Error {
public:
    using Error::Error;
};

class MissingTrainStats : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Provider gateway
// ---------------------------------------------------------------------------

class AuthMissing : public Error {
public:
    using Error::Error;
};

class TimeoutError : public Error {
public:
    using Error::Error;
};

class RateLimited : public Error {
public:
    using Error::Error;
};

class UpstreamError : public Error {
public:
    UpstreamError(long status, const std::string& body_excerpt)
        : Error("upstream error, status " + std::to_string(status) + ": " + body_excerpt),
          status_(status) {}
    long status() const { return status_; }

private:
    long status_;
};

class FixtureMiss : public Error {
public:
    using Error::Error;
};

class CacheCorrupt : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Answer parsing
// ---------------------------------------------------------------------------

class BlockNotFound : public Error {
public:
    using Error::Error;
};

class UnbalancedMarkers : public Error {
public:
    using Error::Error;
};

class WrongLength : public Error {
public:
    WrongLength(std::size_t found, std::size_t expected)
        : Error("expected " + std::to_string(expected) + " values, found " +
                std::to_string(found)),
          found_(found), expected_(expected) {}
    std::size_t found() const { return found_; }
    std::size_t expected() const { return expected_; }

private:
    std::size_t found_;
    std::size_t expected_;
};

class NonNumericToken : public Error {
public:
    NonNumericToken(const std::string& token, std::size_t position)
        : Error("non-numeric token '" + token + "' at position " + std::to_string(position)),
          token_(token), position_(position) {}
    const std::string& token() const { return token_; }
    std::size_t position() const { return position_; }

private:
    std::string token_;
    std::size_t position_;
};

class NonFinite : public Error {
public:
    using Error::Error;
};

class MissingFinalBlock : public Error {
public:
    using Error::Error;
};

/// Terminal parse failure after the repair policy is exhausted. Carries the
/// raw response text for the run log.
class ParseFailure : public Error {
public:
    ParseFailure(const std::string& reason, std::string raw_text)
        : Error("parse failed: " + reason), raw_text_(std::move(raw_text)) {}
    const std::string& raw_text() const { return raw_text_; }

private:
    std::string raw_text_;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

class LengthMismatch : public Error {
public:
    using Error::Error;
};

class EmptyGroup : public Error {
public:
    using Error::Error;
};

class TooFewSamples : public Error {
public:
    using Error::Error;
};

class TooFewRecords : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

class DegenerateLookback : public Error {
public:
    using Error::Error;
};

class PredTooLong : public Error {
public:
    using Error::Error;
};

class ConstantInput : public Error {
public:
    using Error::Error;
};

class ConstantTruth : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

class ConfigInvalid : public Error {
public:
    ConfigInvalid(const std::string& field, const std::string& reason)
        : Error("config field '" + field + "': " + reason), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class GridTooLarge : public Error {
public:
    using Error::Error;
};

class RunDirMissing : public Error {
public:
    using Error::Error;
};

class MalformedRecord : public Error {
public:
    using Error::Error;
};

}  // namespace slowcast
