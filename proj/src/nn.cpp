#include "mixgen/nn.hpp"

#include <cstring>
#include <fstream>

namespace mixgen {

void Checkpoint::set(const std::string& name, std::vector<float> data) {
    for (auto& [n, d] : arrays) {
        if (n == name) {
            d = std::move(data);
            return;
        }
    }
    arrays.emplace_back(name, std::move(data));
}

const std::vector<float>* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, d] : arrays)
        if (n == name) return &d;
    return nullptr;
}

const std::vector<float>& Checkpoint::get(const std::string& name) const {
    const auto* p = find(name);
    require(p != nullptr, "checkpoint: missing array " + name);
    return *p;
}

namespace {

void put_u16(std::ofstream& f, uint16_t v) {
    uint8_t b[2] = {uint8_t(v), uint8_t(v >> 8)};
    f.write(reinterpret_cast<char*>(b), 2);
}
void put_u32(std::ofstream& f, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
}
void put_u64(std::ofstream& f, uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = uint8_t(v >> (8 * i));
    f.write(reinterpret_cast<char*>(b), 8);
}

struct Reader {
    const std::vector<uint8_t>& raw;
    size_t pos = 0;
    explicit Reader(const std::vector<uint8_t>& r) : raw(r) {}
    void need(size_t n, const char* what) {
        require(pos + n <= raw.size(),
                format_str("checkpoint: truncated file (while reading %s)", what));
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = uint16_t(raw[pos] | raw[pos + 1] << 8);
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = uint32_t(raw[pos]) | uint32_t(raw[pos + 1]) << 8 |
                     uint32_t(raw[pos + 2]) << 16 | uint32_t(raw[pos + 3]) << 24;
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(raw[pos + size_t(i)]) << (8 * i);
        pos += 8;
        return v;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "save_checkpoint: cannot open " + path);
    f.write("MGCK", 4);
    put_u16(f, ckpt.version);
    f.write(reinterpret_cast<const char*>(ckpt.config_hash.data()), 32);
    put_u32(f, uint32_t(ckpt.arrays.size()));
    for (const auto& [name, data] : ckpt.arrays) {
        require(name.size() < 65536, "save_checkpoint: name too long");
        put_u16(f, uint16_t(name.size()));
        f.write(name.data(), std::streamsize(name.size()));
        put_u64(f, uint64_t(data.size()));
        f.write(reinterpret_cast<const char*>(data.data()),
                std::streamsize(data.size() * 4));
    }
    require(f.good(), "save_checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "load_checkpoint: cannot open " + path);
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
    Reader r(raw);
    r.need(4, "magic");
    require(std::memcmp(raw.data(), "MGCK", 4) == 0, "load_checkpoint: bad magic");
    r.pos = 4;
    Checkpoint ckpt;
    ckpt.version = r.u16("version");
    require(ckpt.version == 1, "load_checkpoint: unsupported version");
    r.need(32, "config hash");
    std::memcpy(ckpt.config_hash.data(), raw.data() + r.pos, 32);
    r.pos += 32;
    uint32_t count = r.u32("array count");
    for (uint32_t a = 0; a < count; ++a) {
        uint16_t name_len = r.u16("array name length");
        r.need(name_len, "array name");
        std::string name(reinterpret_cast<const char*>(raw.data() + r.pos), name_len);
        r.pos += name_len;
        uint64_t n = r.u64("array length");
        r.need(size_t(n) * 4, name.c_str());
        std::vector<float> data(static_cast<size_t>(n));
        std::memcpy(data.data(), raw.data() + r.pos, size_t(n) * 4);
        r.pos += size_t(n) * 4;
        ckpt.arrays.emplace_back(std::move(name), std::move(data));
    }
    require(r.pos == raw.size(), "load_checkpoint: trailing bytes");
    return ckpt;
}

Checkpoint load_checkpoint(const std::string& path, const Sha256Digest& expected_hash) {
    Checkpoint ckpt = load_checkpoint(path);
    require(ckpt.config_hash == expected_hash,
            "load_checkpoint: config-hash mismatch for " + path);
    return ckpt;
}

}  // namespace mixgen
