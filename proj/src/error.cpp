#include "flowmoods/error.hpp"

namespace flowmoods {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::io_error: return "io_error";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::duplicate_id: return "duplicate_id";
        case ErrorCode::dangling_reference: return "dangling_reference";
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::version_mismatch: return "version_mismatch";
        case ErrorCode::corrupt_file: return "corrupt_file";
        case ErrorCode::single_class: return "single_class";
        case ErrorCode::ineligible_user: return "ineligible_user";
        case ErrorCode::session_exhausted: return "session_exhausted";
        case ErrorCode::empty_pool: return "empty_pool";
        case ErrorCode::missing_artifact: return "missing_artifact";
        case ErrorCode::inconsistent_snapshot: return "inconsistent_snapshot";
    }
    return "unknown";
}

}  // namespace flowmoods
