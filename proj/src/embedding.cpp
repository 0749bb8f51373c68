#include "mixgen/embedding.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace mixgen {

void EmbeddingSet::validate() const {
    for (const auto& r : rows) {
        require(r.size() == rows[0].size(), "EmbeddingSet: ragged rows");
        for (float v : r) require(std::isfinite(v), "EmbeddingSet: non-finite value");
    }
}

void save_embeddings(const std::string& path, const EmbeddingSet& set) {
    set.validate();
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "save_embeddings: cannot open " + path);
    f.write("MGEB", 4);
    uint32_t count = uint32_t(set.rows.size());
    uint32_t dim = uint32_t(set.dim());
    uint8_t hdr[8] = {uint8_t(count), uint8_t(count >> 8), uint8_t(count >> 16),
                      uint8_t(count >> 24), uint8_t(dim), uint8_t(dim >> 8),
                      uint8_t(dim >> 16), uint8_t(dim >> 24)};
    f.write(reinterpret_cast<char*>(hdr), 8);
    for (const auto& r : set.rows)
        f.write(reinterpret_cast<const char*>(r.data()), std::streamsize(r.size() * 4));
    require(f.good(), "save_embeddings: short write to " + path);
}

EmbeddingSet load_embeddings(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "load_embeddings: cannot open " + path);
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
    require(raw.size() >= 12, "load_embeddings: truncated header");
    require(std::memcmp(raw.data(), "MGEB", 4) == 0, "load_embeddings: bad magic");
    uint32_t count = uint32_t(raw[4]) | uint32_t(raw[5]) << 8 | uint32_t(raw[6]) << 16 |
                     uint32_t(raw[7]) << 24;
    uint32_t dim = uint32_t(raw[8]) | uint32_t(raw[9]) << 8 | uint32_t(raw[10]) << 16 |
                   uint32_t(raw[11]) << 24;
    require(raw.size() == 12 + size_t(count) * size_t(dim) * 4,
            "load_embeddings: size mismatch");
    EmbeddingSet set;
    set.source_tag = path;
    set.rows.assign(count, std::vector<float>(dim));
    size_t pos = 12;
    for (auto& r : set.rows) {
        std::memcpy(r.data(), raw.data() + pos, size_t(dim) * 4);
        pos += size_t(dim) * 4;
    }
    set.validate();
    return set;
}

}  // namespace mixgen
