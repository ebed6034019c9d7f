#pragma once

#include <stdexcept>
#include <string>

namespace msplat {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define MSPLAT_DEFINE_ERROR(Name, tag)                                   \
    class Name : public Error {                                         \
    public:                                                             \
        explicit Name(const std::string& what) : Error(tag, what) {}    \
    }

MSPLAT_DEFINE_ERROR(DegenerateRotationError, "degenerate_rotation");
MSPLAT_DEFINE_ERROR(InvalidScaleError, "invalid_scale");
MSPLAT_DEFINE_ERROR(ConfigError, "config");
MSPLAT_DEFINE_ERROR(RigError, "rig");
MSPLAT_DEFINE_ERROR(DegenerateFaceError, "degenerate_face");
MSPLAT_DEFINE_ERROR(ShapeMismatchError, "shape_mismatch");
MSPLAT_DEFINE_ERROR(NumericError, "numeric");
MSPLAT_DEFINE_ERROR(IoError, "io");
MSPLAT_DEFINE_ERROR(ValidationError, "validation");
MSPLAT_DEFINE_ERROR(FormatError, "format");
MSPLAT_DEFINE_ERROR(VersionError, "version");
MSPLAT_DEFINE_ERROR(ChecksumError, "checksum");
MSPLAT_DEFINE_ERROR(RangeError, "range");

#undef MSPLAT_DEFINE_ERROR

/// Re-throws `e` as the same concrete error type with `context` prefixed
/// to the message (e.g. a file name and frame index).
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context);

}  // namespace msplat
