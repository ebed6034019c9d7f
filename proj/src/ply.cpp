#include "msplat/ply.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "msplat/errors.hpp"

namespace msplat {

namespace {

std::vector<std::string> property_names(int sh_degree) {
    std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    const std::size_t rest = 3 * (sh_basis_count(sh_degree) - 1);
    for (std::size_t i = 0; i < rest; ++i) {
        names.push_back("f_rest_" + std::to_string(i));
    }
    for (const char* n : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        names.emplace_back(n);
    }
    return names;
}

std::vector<double> flatten(const PlySplat& s, int sh_degree) {
    const std::size_t k = sh_basis_count(sh_degree);
    std::vector<double> v = {s.position.x(), s.position.y(), s.position.z(),
                             s.normal.x(),   s.normal.y(),   s.normal.z(),
                             s.sh[0],        s.sh[1],        s.sh[2]};
    // f_rest is channel-major: all channel-0 coefficients first.
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t b = 1; b < k; ++b) {
            v.push_back(s.sh[b * 3 + c]);
        }
    }
    v.push_back(s.opacity_logit);
    for (int i = 0; i < 3; ++i) {
        v.push_back(s.log_scale[i]);
    }
    for (const double q : {s.rotation.w, s.rotation.x, s.rotation.y, s.rotation.z}) {
        v.push_back(q);
    }
    return v;
}

PlySplat unflatten(const std::vector<double>& v, int sh_degree) {
    const std::size_t k = sh_basis_count(sh_degree);
    PlySplat s;
    s.position = {v[0], v[1], v[2]};
    s.normal = {v[3], v[4], v[5]};
    s.sh.assign(3 * k, 0.0);
    s.sh[0] = v[6];
    s.sh[1] = v[7];
    s.sh[2] = v[8];
    std::size_t i = 9;
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t b = 1; b < k; ++b) {
            s.sh[b * 3 + c] = v[i++];
        }
    }
    s.opacity_logit = v[i++];
    for (int a = 0; a < 3; ++a) {
        s.log_scale[a] = v[i++];
    }
    s.rotation = {v[i], v[i + 1], v[i + 2], v[i + 3]};
    return s;
}

}  // namespace

void write_ply(const PlyCloud& cloud, const std::filesystem::path& path, PlyFormat format) {
    const auto names = property_names(cloud.sh_degree);
    for (const PlySplat& s : cloud.splats) {
        if (s.sh.size() != 3 * sh_basis_count(cloud.sh_degree)) {
            throw ShapeMismatchError("PLY splat SH size does not match the cloud degree");
        }
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "ply\n"
        << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
        << "element vertex " << cloud.splats.size() << "\n";
    for (const auto& n : names) {
        out << "property float " << n << "\n";
    }
    out << "end_header\n";
    out << std::setprecision(9);  // enough digits to round-trip a float
    for (const PlySplat& s : cloud.splats) {
        const auto values = flatten(s, cloud.sh_degree);
        if (format == PlyFormat::Ascii) {
            for (std::size_t i = 0; i < values.size(); ++i) {
                out << (i ? " " : "") << static_cast<float>(values[i]);
            }
            out << "\n";
        } else {
            for (const double d : values) {
                const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(d));
                const char b[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8),
                                   static_cast<char>(bits >> 16), static_cast<char>(bits >> 24)};
                out.write(b, 4);
            }
        }
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

PlyCloud read_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    std::getline(in, line);
    if (line != "ply") {
        throw FormatError(path.string() + ": missing 'ply' magic");
    }
    bool ascii = false;
    std::size_t count = 0;
    std::vector<std::string> names;
    while (std::getline(in, line) && line != "end_header") {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") {
                ascii = true;
            } else if (fmt != "binary_little_endian") {
                throw FormatError(path.string() + ": unsupported PLY format " + fmt);
            }
        } else if (word == "element") {
            std::string el;
            ls >> el >> count;
            if (el != "vertex") {
                throw FormatError(path.string() + ": unexpected element " + el);
            }
        } else if (word == "property") {
            std::string type, name;
            ls >> type >> name;
            if (type != "float") {
                throw FormatError(path.string() + ": property " + name + " is not float");
            }
            names.push_back(name);
        } else if (word != "comment") {
            throw FormatError(path.string() + ": unexpected header line '" + line + "'");
        }
    }
    PlyCloud cloud;
    for (int d = 0; d <= kMaxShDegree; ++d) {
        if (property_names(d) == names) {
            cloud.sh_degree = d;
            break;
        }
        if (d == kMaxShDegree) {
            throw FormatError(path.string() + ": property list is not a splat layout");
        }
    }
    std::vector<double> values(names.size());
    for (std::size_t i = 0; i < count; ++i) {
        for (double& v : values) {
            if (ascii) {
                float f = 0.0F;
                in >> f;
                v = f;
            } else {
                unsigned char b[4];
                in.read(reinterpret_cast<char*>(b), 4);
                const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
                v = std::bit_cast<float>(bits);
            }
        }
        if (!in) {
            throw FormatError(path.string() + ": file ends before vertex " + std::to_string(i));
        }
        cloud.splats.push_back(unflatten(values, cloud.sh_degree));
    }
    return cloud;
}

PlyCloud make_ply_cloud(const FrameState& state, const SplatSet& splats) {
    const auto world = world_splats(state);
    PlyCloud cloud;
    cloud.sh_degree = splats.sh_degree;
    for (std::size_t i = 0; i < world.size(); ++i) {
        PlySplat s;
        s.position = world[i].mu;
        s.sh.assign(splats.sh_of(i).begin(), splats.sh_of(i).end());
        s.opacity_logit = splats.opacity_logit[i];
        s.log_scale = world[i].scale.array().log();
        s.rotation = world[i].rot;
        cloud.splats.push_back(std::move(s));
    }
    return cloud;
}

}  // namespace msplat
