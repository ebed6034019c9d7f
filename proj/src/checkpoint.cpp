#include "msplat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "msplat/errors.hpp"
#include "msplat/serialization.hpp"

namespace msplat {

namespace {

constexpr char kMagic[4] = {'R', 'M', 'A', 'V'};

class Writer {
public:
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    void f64s(const std::vector<double>& v) {
        u64(v.size());
        for (const double d : v) {
            f64(d);
        }
    }

    std::vector<std::uint8_t> out;

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> data, std::string section) : data_(data), section_(std::move(section)) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
    double f64() { return std::bit_cast<double>(le(8)); }
    std::string str() {
        const std::uint64_t n = u64();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::vector<double> f64s() {
        const std::uint64_t n = u64();
        need(n * 8);
        std::vector<double> v(n);
        for (auto& d : v) {
            d = f64();
        }
        return v;
    }
    void expect_end() const {
        if (pos_ != data_.size()) {
            throw FormatError("checkpoint section " + section_ + " has trailing bytes");
        }
    }

private:
    void need(std::uint64_t n) const {
        if (n > data_.size() - pos_) {
            throw FormatError("checkpoint section " + section_ + " ends early");
        }
    }
    std::uint64_t le(int n) {
        need(static_cast<std::uint64_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::string section_;
    std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> data) {
    return static_cast<std::uint32_t>(
        ::crc32(::crc32(0L, Z_NULL, 0), data.data(), static_cast<uInt>(data.size())));
}

std::vector<std::uint8_t> encode_splats(const SplatSet& s) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(s.sh_degree));
    w.f64s(s.mu_local);
    w.f64s(s.rot_local);
    w.f64s(s.log_scale);
    w.f64s(s.opacity_logit);
    w.f64s(s.sh);
    w.u64(s.parent_face.size());
    for (const std::uint32_t f : s.parent_face) {
        w.u32(f);
    }
    return std::move(w.out);
}

SplatSet decode_splats(std::span<const std::uint8_t> data) {
    Reader r(data, "SPLT");
    SplatSet s;
    s.sh_degree = static_cast<int>(r.u32());
    s.mu_local = r.f64s();
    s.rot_local = r.f64s();
    s.log_scale = r.f64s();
    s.opacity_logit = r.f64s();
    s.sh = r.f64s();
    s.parent_face.resize(r.u64());
    for (auto& f : s.parent_face) {
        f = r.u32();
    }
    r.expect_end();
    const std::size_t n = s.parent_face.size();
    if (s.mu_local.size() != 3 * n || s.rot_local.size() != 4 * n || s.log_scale.size() != 3 * n ||
        s.opacity_logit.size() != n || s.sh.size() != s.sh_stride() * n) {
        throw FormatError("checkpoint splat arrays are inconsistent");
    }
    return s;
}

std::vector<std::uint8_t> encode_optim(const std::vector<AdamGroup>& groups) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(groups.size()));
    for (const AdamGroup& g : groups) {
        w.str(g.name);
        w.f64(g.beta1);
        w.f64(g.beta2);
        w.f64(g.eps);
        w.i64(g.step);
        w.f64s(g.m);
        w.f64s(g.v);
    }
    return std::move(w.out);
}

std::vector<AdamGroup> decode_optim(std::span<const std::uint8_t> data) {
    Reader r(data, "OPTM");
    std::vector<AdamGroup> groups(r.u32());
    for (AdamGroup& g : groups) {
        g.name = r.str();
        g.beta1 = r.f64();
        g.beta2 = r.f64();
        g.eps = r.f64();
        g.step = r.i64();
        g.m = r.f64s();
        g.v = r.f64s();
    }
    r.expect_end();
    return groups;
}

std::vector<std::uint8_t> encode_density(const DensityStats& d) {
    Writer w;
    w.f64s(d.grad_sum);
    w.u64(d.visible_count.size());
    for (const std::uint32_t c : d.visible_count) {
        w.u32(c);
    }
    return std::move(w.out);
}

DensityStats decode_density(std::span<const std::uint8_t> data) {
    Reader r(data, "DENS");
    DensityStats d;
    d.grad_sum = r.f64s();
    d.visible_count.resize(r.u64());
    for (auto& c : d.visible_count) {
        c = r.u32();
    }
    r.expect_end();
    return d;
}

std::vector<std::uint8_t> encode_rectifier(const std::optional<RectifierParams>& p) {
    Writer w;
    w.u32(p ? 1u : 0u);
    if (p) {
        w.f64s(p->data);
    }
    return std::move(w.out);
}

std::vector<std::uint8_t> text_bytes(const std::string& s) { return {s.begin(), s.end()}; }

struct Section {
    char tag[4];
    std::vector<std::uint8_t> payload;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
    const Json meta = {{"iteration", c.iteration}, {"config", Json::parse(config_to_json(c.config))}};
    std::vector<Section> sections;
    sections.push_back({{'M', 'E', 'T', 'A'}, text_bytes(meta.dump())});
    sections.push_back({{'R', 'I', 'G', '_'}, text_bytes(rig_to_json(c.mesh).dump())});
    sections.push_back({{'S', 'P', 'L', 'T'}, encode_splats(c.splats)});
    sections.push_back({{'R', 'E', 'C', 'T'}, encode_rectifier(c.rectifier)});
    sections.push_back({{'O', 'P', 'T', 'M'}, encode_optim(c.optimizer)});
    sections.push_back({{'D', 'E', 'N', 'S'}, encode_density(c.density)});
    sections.push_back({{'R', 'N', 'G', '_'}, text_bytes(c.rng_state)});

    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(sections.size()));
    std::uint64_t offset = 12 + sections.size() * (4 + 8 + 8 + 4);
    for (const Section& s : sections) {
        w.bytes(s.tag, 4);
        w.u64(offset);
        w.u64(s.payload.size());
        w.u32(crc(s.payload));
        offset += s.payload.size();
    }
    for (const Section& s : sections) {
        w.bytes(s.payload.data(), s.payload.size());
    }
    return std::move(w.out);
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes, std::uint32_t expected_version) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("not a checkpoint (bad magic)");
    }
    Reader header(bytes.subspan(4, 8), "header");
    const std::uint32_t version = header.u32();
    if (version != expected_version) {
        throw VersionError("checkpoint format version " + std::to_string(version) + ", reader expects " +
                           std::to_string(expected_version));
    }
    const std::uint32_t count = header.u32();
    const std::size_t table_end = 12 + static_cast<std::size_t>(count) * 24;
    if (bytes.size() < table_end) {
        throw ChecksumError("checkpoint truncated inside the section table");
    }
    std::vector<std::pair<std::string, std::span<const std::uint8_t>>> found;
    for (std::uint32_t i = 0; i < count; ++i) {
        char tag[5] = {};
        std::memcpy(tag, bytes.data() + 12 + static_cast<std::size_t>(i) * 24, 4);
        Reader entry(bytes.subspan(12 + static_cast<std::size_t>(i) * 24 + 4, 20), "table");
        const std::uint64_t offset = entry.u64();
        const std::uint64_t size = entry.u64();
        const std::uint32_t expected_crc = entry.u32();
        if (offset > bytes.size() || size > bytes.size() - offset) {
            throw ChecksumError(std::string("checkpoint truncated: section ") + tag + " extends past end of file");
        }
        const auto payload = bytes.subspan(offset, size);
        if (crc(payload) != expected_crc) {
            throw ChecksumError(std::string("checkpoint section ") + tag + " fails its CRC32 check");
        }
        found.emplace_back(tag, payload);
    }
    auto section = [&](const char* tag) {
        for (const auto& [name, data] : found) {
            if (name == tag) {
                return data;
            }
        }
        throw FormatError(std::string("checkpoint is missing section ") + tag);
    };

    Checkpoint c;
    const auto meta_bytes = section("META");
    Json meta;
    try {
        meta = Json::parse(meta_bytes.begin(), meta_bytes.end());
        c.iteration = meta.at("iteration").get<std::int64_t>();
    } catch (const Json::exception& e) {
        throw FormatError(std::string("checkpoint META: ") + e.what());
    }
    c.config = config_from_json(meta.at("config").dump());
    const auto rig_bytes = section("RIG_");
    try {
        c.mesh = rig_from_json(Json::parse(rig_bytes.begin(), rig_bytes.end()));
    } catch (const Json::exception& e) {
        throw FormatError(std::string("checkpoint RIG_: ") + e.what());
    }
    c.splats = decode_splats(section("SPLT"));
    {
        Reader r(section("RECT"), "RECT");
        if (r.u32() != 0) {
            RectifierParams p;
            p.config = c.config.rectifier;
            p.data = r.f64s();
            if (p.data.size() != p.config.param_count()) {
                throw FormatError("checkpoint rectifier size does not match its configuration");
            }
            c.rectifier = std::move(p);
        }
        r.expect_end();
    }
    c.optimizer = decode_optim(section("OPTM"));
    c.density = decode_density(section("DENS"));
    const auto rng = section("RNG_");
    c.rng_state.assign(rng.begin(), rng.end());
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(ckpt);
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

}  // namespace msplat
