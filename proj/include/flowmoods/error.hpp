#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace flowmoods {

// Machine-readable failure categories. The service maps these onto HTTP
// statuses and echoes error_code_name() in the error body.
enum class ErrorCode {
    io_error,
    parse_error,
    duplicate_id,
    dangling_reference,
    dimension_mismatch,
    not_found,
    invalid_argument,
    version_mismatch,
    corrupt_file,
    single_class,
    ineligible_user,
    session_exhausted,
    empty_pool,
    missing_artifact,
    inconsistent_snapshot,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::size_t line = 0)
        : std::runtime_error(message), code_(code), line_(line) {}

    ErrorCode code() const noexcept { return code_; }
    /// 1-based source line for file diagnostics, 0 when not applicable.
    std::size_t line() const noexcept { return line_; }

private:
    ErrorCode code_;
    std::size_t line_;
};

}  // namespace flowmoods
