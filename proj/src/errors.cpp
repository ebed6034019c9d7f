#include "msplat/errors.hpp"

namespace msplat {

void rethrow_with_context(const Error& e, const std::string& context) {
    const std::string msg = context + ": " + e.what();
    const std::string& k = e.kind();
    if (k == "degenerate_rotation") throw DegenerateRotationError(msg);
    if (k == "invalid_scale") throw InvalidScaleError(msg);
    if (k == "config") throw ConfigError(msg);
    if (k == "rig") throw RigError(msg);
    if (k == "degenerate_face") throw DegenerateFaceError(msg);
    if (k == "shape_mismatch") throw ShapeMismatchError(msg);
    if (k == "numeric") throw NumericError(msg);
    if (k == "io") throw IoError(msg);
    if (k == "validation") throw ValidationError(msg);
    if (k == "format") throw FormatError(msg);
    if (k == "version") throw VersionError(msg);
    if (k == "checksum") throw ChecksumError(msg);
    if (k == "range") throw RangeError(msg);
    throw Error(k, msg);
}

}  // namespace msplat
