#pragma once

#include <stdexcept>
#include <string>

namespace bgreplace {

/// Broad failure category. The CLI maps these to process exit codes.
enum class ErrorKind {
    kInvalidArgument,
    kConfig,
    kBackend,
    kIo,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

[[noreturn]] inline void throw_invalid(const std::string& message) {
    throw Error(ErrorKind::kInvalidArgument, message);
}

[[noreturn]] inline void throw_config(const std::string& message) {
    throw Error(ErrorKind::kConfig, message);
}

[[noreturn]] inline void throw_backend(const std::string& message) {
    throw Error(ErrorKind::kBackend, message);
}

[[noreturn]] inline void throw_io(const std::string& message) {
    throw Error(ErrorKind::kIo, message);
}

}  // namespace bgreplace
