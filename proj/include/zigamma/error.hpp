#pragma once

#include <stdexcept>
#include <string>

namespace zigamma {

/// Failure categories. The CLI maps these to exit codes and to the
/// first token of its one-line error report.
enum class ErrorKind {
    Input,        // unreadable file, schema mismatch, precondition on user data
    Degenerate,   // zero-variance covariate, all-zero stream, empty panel
    Numeric,      // non-finite predictor or response
    Instability,  // bootstrap gave up
    Usage,        // bad argument passed by the caller
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace zigamma
