#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semfeat {

enum class ErrorKind {
    io,
    schema,
    range,
    format,
    length,
    data,
    lookup,
    index,
    shape,
    domain,
    pairing,
    alignment,
    containment,
    compatibility,
    degenerate,
    usage,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::schema: return "schema";
    case ErrorKind::range: return "range";
    case ErrorKind::format: return "format";
    case ErrorKind::length: return "length";
    case ErrorKind::data: return "data";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::index: return "index";
    case ErrorKind::shape: return "shape";
    case ErrorKind::domain: return "domain";
    case ErrorKind::pairing: return "pairing";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::containment: return "containment";
    case ErrorKind::compatibility: return "compatibility";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

/// All recoverable failures in the library surface as this exception.
/// The kind lets callers (and the CLI exit-code mapping) distinguish
/// bad input from bad usage without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace semfeat
