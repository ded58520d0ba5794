#include "tml/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace tml {

namespace {

constexpr char kMagic[4] = {'T', 'M', 'L', 'C'};

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}
void put_f32s(std::string& out, const std::vector<float>& v) {
    static_assert(sizeof(float) == 4);
    // Little-endian hosts only; asserted at build configuration time.
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * 4);
}

struct Reader {
    const std::string& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) {
        if (pos + n > bytes.size()) throw TruncationError("checkpoint ends early");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    std::string str() {
        std::uint32_t n = u32();
        need(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
    void f32s(std::vector<float>& v) {
        need(v.size() * 4);
        std::memcpy(v.data(), bytes.data() + pos, v.size() * 4);
        pos += v.size() * 4;
    }
};

void encode_config(std::string& out, Role role, const UGDCConfig& c) {
    out.push_back(static_cast<char>(role));
    put_u64(out, static_cast<std::uint64_t>(c.depth));
    put_u64(out, static_cast<std::uint64_t>(c.base_channels));
    put_u64(out, static_cast<std::uint64_t>(c.in_channels));
    put_u64(out, static_cast<std::uint64_t>(c.out_channels));
    put_u64(out, static_cast<std::uint64_t>(c.gdc.grid_h));
    put_u64(out, static_cast<std::uint64_t>(c.gdc.grid_w));
    put_u64(out, static_cast<std::uint64_t>(c.gdc.embed));
    put_u64(out, static_cast<std::uint64_t>(c.gdc.k_kernel));
    put_u64(out, static_cast<std::uint64_t>(c.gdc.q_kernel));
    put_u64(out, static_cast<std::uint64_t>(c.gdc.out_kernel));
    put_u32(out, static_cast<std::uint32_t>(c.gdc_stages.size()));
    for (const auto& s : c.gdc_stages) put_str(out, s);
}

UGDCConfig decode_config(Reader& r, Role* role_out) {
    r.need(1);
    Role role = static_cast<Role>(r.bytes[r.pos]);
    r.pos += 1;
    if (role_out) *role_out = role;
    UGDCConfig c;
    c.depth = static_cast<std::int64_t>(r.u64());
    c.base_channels = static_cast<std::int64_t>(r.u64());
    c.in_channels = static_cast<std::int64_t>(r.u64());
    c.out_channels = static_cast<std::int64_t>(r.u64());
    c.gdc.grid_h = static_cast<std::int64_t>(r.u64());
    c.gdc.grid_w = static_cast<std::int64_t>(r.u64());
    c.gdc.embed = static_cast<std::int64_t>(r.u64());
    c.gdc.k_kernel = static_cast<std::int64_t>(r.u64());
    c.gdc.q_kernel = static_cast<std::int64_t>(r.u64());
    c.gdc.out_kernel = static_cast<std::int64_t>(r.u64());
    std::uint32_t n = r.u32();
    c.gdc_stages.clear();
    for (std::uint32_t i = 0; i < n; ++i) c.gdc_stages.insert(r.str());
    return c;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

std::string checked_body(const std::string& path) {
    std::string bytes = read_file(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw CheckpointError(path + ": bad magic");
    if (bytes.size() < 16) throw TruncationError(path + ": shorter than a valid header");
    Reader head{bytes, 4};
    std::uint32_t version = head.u32();
    if (version != kCheckpointVersion)
        throw VersionError(path + ": version " + std::to_string(version));
    std::string body = bytes.substr(0, bytes.size() - 8);
    Reader tail{bytes, bytes.size() - 8};
    if (tail.u64() != fnv1a64(body)) throw ChecksumError(path + ": payload corrupted");
    return body;
}

}  // namespace

void checkpoint_save(const std::string& path, Model& model, const AdamW* optimizer) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kCheckpointVersion);
    encode_config(out, model.role, model.config);
    auto params = model.named_params();
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (auto& [name, t] : params) {
        put_str(out, name);
        put_u32(out, static_cast<std::uint32_t>(t->shape().size()));
        for (std::int64_t e : t->shape()) put_u64(out, static_cast<std::uint64_t>(e));
        put_f32s(out, t->data());
    }
    if (optimizer) {
        out.push_back(1);
        put_u64(out, const_cast<AdamW*>(optimizer)->step_counter());
        for (auto& slot : const_cast<AdamW*>(optimizer)->slots()) {
            put_f32s(out, slot.m);
            put_f32s(out, slot.v);
        }
    } else {
        out.push_back(0);
    }
    put_u64(out, fnv1a64(out));
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);
}

void checkpoint_load(const std::string& path, Model& model, AdamW* optimizer) {
    std::string body = checked_body(path);
    Reader r{body, 8};
    UGDCConfig cfg = decode_config(r, nullptr);
    if (!(cfg == model.config))
        throw ConfigError(path + ": checkpoint config does not match the model");
    auto params = model.named_params();
    std::uint32_t count = r.u32();
    if (count != params.size()) throw ConfigError(path + ": parameter count mismatch");
    for (auto& [name, t] : params) {
        std::string pname = r.str();
        if (pname != name)
            throw ConfigError(path + ": parameter '" + pname + "' where '" + name +
                              "' expected");
        std::uint32_t ndim = r.u32();
        Shape shape(ndim);
        for (auto& e : shape) e = static_cast<std::int64_t>(r.u64());
        if (shape != t->shape()) throw ConfigError(path + ": shape mismatch for " + name);
        r.f32s(t->data());
    }
    r.need(1);
    bool has_opt = body[r.pos] != 0;
    r.pos += 1;
    if (optimizer) {
        optimizer->attach(model.named_params());
        if (has_opt) {
            optimizer->step_counter() = r.u64();
            for (auto& slot : optimizer->slots()) {
                r.f32s(slot.m);
                r.f32s(slot.v);
            }
        }
    }
}

UGDCConfig checkpoint_peek_config(const std::string& path, Role* role) {
    std::string body = checked_body(path);
    Reader r{body, 8};
    return decode_config(r, role);
}

std::string parameter_bytes(Model& model) {
    std::string out;
    for (auto& [name, t] : model.named_params()) {
        put_str(out, name);
        put_f32s(out, t->data());
    }
    return out;
}

}  // namespace tml
